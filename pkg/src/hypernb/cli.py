"""Command-line harness: generation, spectra, detection, BP, sweeps and
kernel learning, with seeded reproducibility, CSV/JSON output, and figures
rendered next to the delimited files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import bp as bpmod
from . import core, genmodel, kernel_learn, plotting, spectral


@dataclass(frozen=True)
class SweepSpec:
    model: str                  # "hsbm" | "two_in_four"
    fixed: dict                 # fixed model parameters
    param: str                  # swept parameter name ("eps_tilde" or "c")
    grid: tuple
    n: int
    samples: int
    methods: tuple
    seed: int
    bp_max_iter: int = 1000
    bp_tol: float = 1e-8

    @staticmethod
    def from_json(path: str) -> "SweepSpec":
        with open(path, "r", encoding="utf-8") as f:
            d = json.load(f)
        spec = SweepSpec(
            model=d["model"], fixed=d.get("fixed", {}), param=d["param"],
            grid=tuple(d["grid"]), n=int(d["n"]), samples=int(d.get("samples", 1)),
            methods=tuple(d.get("methods", ["nbo"])), seed=int(d.get("seed", 0)),
            bp_max_iter=int(d.get("bp_max_iter", 1000)),
            bp_tol=float(d.get("bp_tol", 1e-8)),
        )
        if not spec.grid or spec.samples < 1:
            raise ValueError("sweep grid must be non-empty and samples >= 1")
        bad = set(spec.methods) - {"nbo", "bp", "adjacency"}
        if bad:
            raise ValueError(f"unknown sweep methods: {sorted(bad)}")
        return spec


def _model_setup(spec: SweepSpec, value: float):
    """Kernel, prior, q and fast-field parameters at one grid value."""
    params = dict(spec.fixed)
    params[spec.param] = value
    if spec.model == "hsbm":
        k, q, c = int(params["k"]), int(params["q"]), float(params["c"])
        kernel = genmodel.hsbm_kernel(k, q, c, float(params["eps_tilde"]))
        fast = {"kernel": kernel, "k": k, "c": c, "eps_tilde": float(params["eps_tilde"])}
        return kernel, genmodel.GroupPrior.uniform(q), q, "hsbm", fast
    if spec.model == "two_in_four":
        c = float(params["c"])
        kernel = genmodel.two_in_four_kernel(c)
        fast = {"kernel": kernel, "c": c}
        return kernel, genmodel.GroupPrior.uniform(2), 2, "two_in_four", fast
    raise ValueError(f"unknown model {spec.model!r}")


def _sweep_sample(spec: SweepSpec, gi: int, si: int) -> dict:
    """One generated instance scored by every requested method."""
    value = spec.grid[gi]
    kernel, prior, q, kind, fast = _model_setup(spec, value)
    seed = int(np.random.SeedSequence([spec.seed, gi, si]).generate_state(1)[0])
    h, planted = genmodel.sample(kernel, prior, spec.n, seed)
    out = {}
    for method in spec.methods:
        try:
            if method == "nbo":
                det = spectral.detect(h, q=q, seed=seed)
                out[method] = spectral.overlap(det.labels, planted, prior)
            elif method == "adjacency":
                labels = spectral.adjacency_detect(h, q, seed=seed)
                out[method] = spectral.overlap(labels, planted, prior)
            elif method == "bp":
                config = bpmod.BPConfig(seed=seed, max_iter=spec.bp_max_iter,
                                        tol=spec.bp_tol)
                res = bpmod.bp_run(h, kernel, prior, config, planted=planted,
                                   model_kind=kind, params=fast)
                out[method] = res.overlap
        except Exception as exc:  # per-sample failures recorded, sweep continues
            out[method] = ("error", f"{type(exc).__name__}: {exc}")
    return out


def predicted_threshold(spec: SweepSpec) -> float | None:
    """Critical value of the swept parameter from the model predictions."""
    def make(x):
        return _model_setup(spec, x)[0]

    prior = _model_setup(spec, spec.grid[0])[1]
    lo, hi = min(spec.grid), max(spec.grid)
    try:
        return genmodel.critical_parameter(make, prior, lo, hi)
    except ValueError:
        return None


def run_sweep(spec: SweepSpec, threads: int = 1):
    """Aggregate overlap rows per (grid value, method), ordered by grid index.

    Returns (rows, threshold, errors); each row has param, method,
    mean_overlap, stderr, samples.
    """
    tasks = [(gi, si) for gi in range(len(spec.grid)) for si in range(spec.samples)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_sample, [spec] * len(tasks),
                                    [t[0] for t in tasks], [t[1] for t in tasks]))
    else:
        results = [_sweep_sample(spec, gi, si) for gi, si in tasks]
    by_task = dict(zip(tasks, results))
    rows, errors = [], []
    for gi, value in enumerate(spec.grid):
        for method in spec.methods:
            scores = []
            for si in range(spec.samples):
                r = by_task[(gi, si)][method]
                if isinstance(r, tuple):
                    errors.append({"param": value, "method": method,
                                   "sample": si, "error": r[1]})
                else:
                    scores.append(r)
            if scores:
                mean = float(np.mean(scores))
                stderr = float(np.std(scores, ddof=1) / math.sqrt(len(scores))) \
                    if len(scores) > 1 else 0.0
            else:
                mean, stderr = float("nan"), float("nan")
            rows.append({"param": value, "method": method, "mean_overlap": mean,
                         "stderr": stderr, "samples": len(scores)})
    return rows, predicted_threshold(spec), errors


def _write_sweep_csv(rows, threshold, errors, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        thr = "nan" if threshold is None else f"{threshold:.10g}"
        f.write(f"# predicted_threshold={thr}\n")
        f.write("param,method,mean_overlap,stderr,samples\n")
        for r in rows:
            f.write(f"{r['param']:.10g},{r['method']},{r['mean_overlap']:.10g},"
                    f"{r['stderr']:.10g},{r['samples']}\n")
        for e in errors:
            f.write(f"# error param={e['param']} method={e['method']} "
                    f"sample={e['sample']}: {e['error']}\n")


def _figure_path(out: str) -> str:
    base, _ = os.path.splitext(out)
    return base + ".png"


# ---------------------------------------------------------------- subcommands

def cmd_generate(args) -> int:
    if args.kernel:
        kernel = genmodel.load_kernel(args.kernel)
        prior = genmodel.GroupPrior.uniform(kernel.q)
    elif args.model == "hsbm":
        kernel = genmodel.hsbm_kernel(args.k, args.q, args.c, args.eps_tilde)
        prior = genmodel.GroupPrior.uniform(args.q)
    elif args.model == "two-in-four":
        kernel = genmodel.two_in_four_kernel(args.c)
        prior = genmodel.GroupPrior.uniform(2)
    else:
        print("generate: need --kernel FILE or --model", file=sys.stderr)
        return 2
    h, labels = genmodel.sample(kernel, prior, args.n, args.seed)
    core.save_hypergraph(h, args.out + ".hg")
    core.save_labels(labels, args.out + ".labels")
    print(f"wrote {args.out}.hg ({h.num_edges} edges) and {args.out}.labels")
    return 0


def cmd_spectrum(args) -> int:
    h = core.load_hypergraph(args.graph)
    if args.operator == "reduced":
        op = spectral.build_nb_reduced(h)
    elif args.operator == "full":
        op = spectral.build_nb(h)
    else:
        A = core.adjacency(h).astype(float)
        op = A
    if args.mode == "dense":
        vals = spectral.dense_spectrum(op)
        res = np.full(len(vals), np.nan)
    else:
        result = spectral.leading_spectrum(op if not isinstance(op, np.ndarray) else op,
                                           max_pairs=args.pairs)
        vals, res = result.eigenvalues, result.residuals
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("re,im,residual\n")
        for lam, r in zip(vals, res):
            f.write(f"{lam.real:.12g},{lam.imag:.12g},{r:.6g}\n")
    if not args.no_plot:
        radius = None
        if args.mode == "dense" and args.operator in ("reduced", "full"):
            radius = math.sqrt(float(np.max(np.abs(vals))))
        plotting.plot_spectrum(vals, radius, _figure_path(args.out),
                               title=f"{args.operator} spectrum")
    print(f"wrote {args.out} ({len(vals)} eigenvalues)")
    return 0


def cmd_detect(args) -> int:
    h = core.load_hypergraph(args.graph)
    det = spectral.detect(h, q=args.q, seed=args.seed)
    core.save_labels(det.labels, args.out)
    diag = {
        "q": det.q,
        "undetectable": det.undetectable,
        "bulk_radius_estimate": det.bulk_radius_estimate,
        "outliers": [float(x) for x in det.outliers],
        "eigenvalues": [[float(v.real), float(v.imag)] for v in det.eigenvalues],
    }
    if args.planted:
        planted = core.load_labels(args.planted, num_groups=det.q)
        diag["overlap"] = spectral.overlap(det.labels, planted)
    with open(args.out + ".json", "w", encoding="utf-8") as f:
        json.dump(diag, f, indent=2)
    print(json.dumps({k: diag[k] for k in diag if k != "eigenvalues"}, indent=2))
    return 0


def cmd_bp(args) -> int:
    h = core.load_hypergraph(args.graph)
    kernel = genmodel.load_kernel(args.kernel)
    prior = genmodel.GroupPrior.uniform(kernel.q)
    planted = core.load_labels(args.planted, kernel.q) if args.planted else None
    config = bpmod.BPConfig(seed=args.seed, max_iter=args.max_iter,
                            damping=args.damping)
    res = bpmod.bp_run(h, kernel, prior, config, planted=planted)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        writer = csv.writer(f)
        writer.writerow(["vertex"] + [f"p{a}" for a in range(kernel.q)])
        for i, row in enumerate(res.marginals):
            writer.writerow([i] + [f"{p:.8g}" for p in row])
    log = {"iterations": res.iterations, "converged": res.converged,
           "overlap": res.overlap, "max_change": res.history}
    with open(args.out + ".json", "w", encoding="utf-8") as f:
        json.dump(log, f, indent=2)
    print(f"BP: {res.iterations} iterations, converged={res.converged}, "
          f"overlap={res.overlap}")
    return 0


def cmd_sweep(args) -> int:
    spec = SweepSpec.from_json(args.spec)
    rows, threshold, errors = run_sweep(spec, threads=args.threads)
    if args.format == "json":
        payload = {"predicted_threshold": threshold, "rows": rows, "errors": errors}
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
    else:
        _write_sweep_csv(rows, threshold, errors, args.out)
    if not args.no_plot:
        plotting.plot_sweep(rows, threshold, _figure_path(args.out),
                            param_name=spec.param)
    print(f"wrote {args.out} ({len(rows)} rows, {len(errors)} sample errors)")
    return 0


def cmd_learn_kernel(args) -> int:
    h = core.load_hypergraph(args.graph)
    labels = core.load_labels(args.labels)
    est = kernel_learn.estimate_kernel(h, labels)
    genmodel.save_kernel(est.to_kernel(), args.out)
    print(kernel_learn.format_frequency_table(est))
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hypernb",
                                description="Planted-label detection in sparse hypergraphs")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a planted instance")
    g.add_argument("--kernel", help="kernel file (overrides --model)")
    g.add_argument("--model", choices=["hsbm", "two-in-four"])
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--q", type=int, default=3)
    g.add_argument("--c", type=float, default=4.0)
    g.add_argument("--eps-tilde", type=float, default=0.14)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output prefix")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("spectrum", help="dump operator spectrum as CSV (+figure)")
    s.add_argument("--graph", required=True)
    s.add_argument("--operator", choices=["reduced", "full", "adjacency"],
                   default="reduced")
    s.add_argument("--mode", choices=["dense", "leading"], default="leading")
    s.add_argument("--pairs", type=int, default=8)
    s.add_argument("--out", required=True)
    s.add_argument("--no-plot", action="store_true")
    s.set_defaults(func=cmd_spectrum)

    d = sub.add_parser("detect", help="nonparametric spectral detection")
    d.add_argument("--graph", required=True)
    d.add_argument("--q", type=int, default=None)
    d.add_argument("--planted", help="planted label file, for overlap scoring")
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out", required=True, help="inferred label file")
    d.set_defaults(func=cmd_detect)

    b = sub.add_parser("bp", help="belief propagation on an instance")
    b.add_argument("--graph", required=True)
    b.add_argument("--kernel", required=True)
    b.add_argument("--planted")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--damping", type=float, default=0.2)
    b.add_argument("--max-iter", type=int, default=1000)
    b.add_argument("--out", required=True, help="marginals CSV")
    b.set_defaults(func=cmd_bp)

    w = sub.add_parser("sweep", help="phase-transition sweep from a JSON spec")
    w.add_argument("--spec", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--format", choices=["csv", "json"], default="csv")
    w.add_argument("--threads", type=int, default=1)
    w.add_argument("--no-plot", action="store_true")
    w.set_defaults(func=cmd_sweep)

    l = sub.add_parser("learn-kernel", help="estimate the kernel from labels")
    l.add_argument("--graph", required=True)
    l.add_argument("--labels", required=True)
    l.add_argument("--out", required=True, help="kernel file")
    l.set_defaults(func=cmd_learn_kernel)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
