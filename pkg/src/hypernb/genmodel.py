"""Kernel-tensor generative model for planted sparse hypergraphs.

A kernel assigns a rescaled rate c_m >= 0 to every sorted label multiset m
of length k; an edge on vertices with planted labels forming multiset m is
present independently with probability c_m / N^(k-1).  This module holds the
built-in kernels (hypergraph SBM, planted 2-in-4-sat), the sampler, and the
closed-form model predictions: per-group degrees, the pairwise degree matrix,
the group-space transition matrix and the detectability threshold.
"""

from __future__ import annotations

import itertools
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .core import Hypergraph, LabelAssignment


def substream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Deterministic named RNG substream derived from one master seed."""
    return np.random.default_rng([seed & 0xFFFFFFFF, zlib.crc32(name.encode()), *extra])


@dataclass(frozen=True)
class KernelTensor:
    """Symmetric rate tensor: sorted label multiset (length k) -> c_m >= 0.

    Keys are sorted tuples, so permutation symmetry is structural.  Missing
    keys mean rate zero.
    """

    k: int
    q: int
    rates: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.k < 2 or self.q < 2:
            raise ValueError("need k >= 2 and q >= 2")
        for key, r in self.rates.items():
            if len(key) != self.k or tuple(sorted(key)) != tuple(key):
                raise ValueError(f"kernel key {key} is not a sorted length-{self.k} tuple")
            if any(a < 0 or a >= self.q for a in key):
                raise ValueError(f"kernel key {key} has a label outside [0, {self.q})")
            if r < 0:
                raise ValueError(f"negative rate for {key}")

    def rate(self, labels) -> float:
        return self.rates.get(tuple(sorted(labels)), 0.0)

    def support(self):
        return [(key, r) for key, r in sorted(self.rates.items()) if r > 0]


@dataclass(frozen=True)
class GroupPrior:
    """Group membership probabilities n_a, summing to one."""

    n: np.ndarray

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float)
        object.__setattr__(self, "n", n)
        if np.any(n < 0) or abs(n.sum() - 1.0) > 1e-12:
            raise ValueError("prior must be non-negative and sum to 1")

    @staticmethod
    def uniform(q: int) -> "GroupPrior":
        return GroupPrior(np.full(q, 1.0 / q))

    @property
    def q(self) -> int:
        return len(self.n)


@dataclass(frozen=True)
class ModelPredictions:
    c_a: np.ndarray          # per-group expected degree
    c: float                 # scalar expected degree
    c_ab: np.ndarray         # pairwise degree matrix, q x q
    T: np.ndarray            # group-space transition matrix
    lambdas: np.ndarray      # eigenvalues of T, sorted by decreasing magnitude
    bulk_radius: float       # sqrt(c (k-1))
    mu1: float               # c (k-1)
    mu2: np.ndarray          # c (k-1) * lambda for the q-1 leading lambdas
    detectable: bool         # c (k-1) lambda^2 > 1


def group_degree(kernel: KernelTensor, prior: GroupPrior):
    """Expected degree per group and its prior average.

    Returns (c_a, c, uniform) where ``uniform`` flags whether the expected
    degree is independent of the group label.
    """
    k, q = kernel.k, prior.q
    c_a = np.zeros(q)
    for a in range(q):
        total = 0.0
        for b in itertools.product(range(q), repeat=k - 1):
            r = kernel.rate((a,) + b)
            if r:
                total += r * math.prod(prior.n[l] for l in b)
        c_a[a] = total / math.factorial(k - 1)
    c = float(prior.n @ c_a)
    uniform = bool(np.allclose(c_a, c, rtol=1e-10, atol=1e-12))
    return c_a, c, uniform


def pair_degree(kernel: KernelTensor, prior: GroupPrior) -> np.ndarray:
    """Two-vertex average degree matrix c_ab (symmetric, q x q)."""
    k, q = kernel.k, prior.q
    if k < 2:
        raise ValueError("pair_degree requires k >= 2")
    c_ab = np.zeros((q, q))
    for a in range(q):
        for b in range(a, q):
            total = 0.0
            for s in itertools.product(range(q), repeat=k - 2):
                r = kernel.rate((a, b) + s)
                if r:
                    total += r * math.prod(prior.n[l] for l in s)
            c_ab[a, b] = c_ab[b, a] = total / math.factorial(k - 2)
    return c_ab


def transition_matrix(kernel: KernelTensor, prior: GroupPrior):
    """Group-space matrix T_ab = n_a [c_ab / (c (k-1)) - 1] and its spectrum.

    Eigenvalues are returned sorted by decreasing magnitude (complex dtype;
    real for the symmetric kernels used here).
    """
    _, c, _ = group_degree(kernel, prior)
    if c <= 0:
        raise ValueError("transition matrix undefined at zero expected degree")
    c_ab = pair_degree(kernel, prior)
    T = prior.n[:, None] * (c_ab / (c * (kernel.k - 1)) - 1.0)
    lams = np.linalg.eigvals(T)
    lams = lams[np.argsort(-np.abs(lams), kind="stable")]
    return T, lams


def detectability(kernel: KernelTensor, prior: GroupPrior) -> ModelPredictions:
    """All closed-form predictions, including the detectability flag."""
    c_a, c, _ = group_degree(kernel, prior)
    c_ab = pair_degree(kernel, prior)
    k, q = kernel.k, prior.q
    if c > 0:
        T, lams = transition_matrix(kernel, prior)
    else:
        T = np.zeros((q, q))
        lams = np.zeros(q, dtype=complex)
    mu1 = c * (k - 1)
    mu2 = mu1 * lams[: q - 1]
    lead = float(np.abs(lams[0])) if len(lams) else 0.0
    return ModelPredictions(
        c_a=c_a,
        c=c,
        c_ab=c_ab,
        T=T,
        lambdas=lams,
        bulk_radius=math.sqrt(mu1),
        mu1=mu1,
        mu2=mu2,
        detectable=bool(mu1 * lead**2 > 1.0),
    )


def hsbm_kernel(k: int, q: int, c: float, eps_tilde: float) -> KernelTensor:
    """Hypergraph SBM kernel: one rate on monochromatic multisets, another
    (eps_tilde times smaller) on all the rest; the monochromatic rate is set
    so that the expected degree is exactly c for every group under the
    uniform prior.
    """
    if k < 2 or q < 2 or c <= 0 or not (0.0 <= eps_tilde <= 1.0):
        raise ValueError("hsbm_kernel parameters out of range")
    # c = [c_in~ + (q^(k-1) - 1) c_out~] / ((k-1)! q^(k-1)) with c_out~ = eps_tilde c_in~
    c_in = c * math.factorial(k - 1) * q ** (k - 1) / (1.0 + (q ** (k - 1) - 1) * eps_tilde)
    c_out = eps_tilde * c_in
    rates = {}
    for m in itertools.combinations_with_replacement(range(q), k):
        r = c_in if len(set(m)) == 1 else c_out
        if r > 0:
            rates[m] = r
    return KernelTensor(k, q, rates)


def hsbm_rates(k: int, q: int, c: float, eps_tilde: float):
    """The (c_in~, c_out~) pair used by the linear-time BP field."""
    kern = hsbm_kernel(k, q, c, eps_tilde)
    c_in = kern.rate((0,) * k)
    c_out = eps_tilde * c_in
    return c_in, c_out


def two_in_four_kernel(c: float) -> KernelTensor:
    """Planted 2-in-4-sat kernel: k=4, q=2, only the balanced multiset allowed."""
    if c <= 0:
        raise ValueError("c must be positive")
    return KernelTensor(4, 2, {(0, 0, 1, 1): 16.0 * c})


def critical_parameter(make_kernel, prior: GroupPrior, lo: float, hi: float,
                       tol: float = 1e-9) -> float:
    """Bisect the detectability condition c(k-1) lambda^2 = 1 on a parameter.

    ``make_kernel`` maps the swept parameter to a KernelTensor; the condition
    must change sign between lo and hi.
    """
    def gap(x):
        pred = detectability(make_kernel(x), prior)
        return pred.mu1 * np.abs(pred.lambdas[0]) ** 2 - 1.0

    glo, ghi = gap(lo), gap(hi)
    if glo * ghi > 0:
        raise ValueError("detectability condition does not change sign on [lo, hi]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) * glo > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _draw_distinct(rng: np.random.Generator, pool: np.ndarray, m: int) -> np.ndarray:
    """m distinct uniform picks from pool; rejection is cheap for m <= k."""
    while True:
        idx = rng.integers(0, len(pool), size=m)
        if len(set(idx.tolist())) == m:
            return pool[idx]


def sample(kernel: KernelTensor, prior: GroupPrior, N: int, seed: int):
    """Draw (Hypergraph, LabelAssignment) from the planted model.

    Labels are i.i.d. from the prior; for each label multiset the edge count
    is Poisson with the model mean, then that many distinct vertex sets with
    the right composition are placed uniformly (duplicates resampled).
    """
    k, q = kernel.k, prior.q
    if N < k:
        raise ValueError("need N >= k")
    labels = substream(seed, "labels").choice(q, size=N, p=prior.n)
    groups = [np.flatnonzero(labels == a) for a in range(q)]
    sizes = np.array([len(g) for g in groups])

    edge_set = set()
    edges = []
    for m, rate in kernel.support():
        if rate / N ** (k - 1) > 1.0:
            raise ValueError(f"rate {rate} for {m} implies edge probability > 1 at N={N}")
        counts = np.bincount(m, minlength=q)
        n_sets = math.prod(math.comb(int(sizes[a]), int(counts[a])) for a in range(q))
        mean = n_sets * rate / N ** (k - 1)
        rng = substream(seed, "edges", *m)
        n_edges = rng.poisson(mean)
        for _ in range(n_edges):
            while True:
                picks = []
                for a in range(q):
                    if counts[a]:
                        picks.extend(_draw_distinct(rng, groups[a], int(counts[a])).tolist())
                edge = tuple(sorted(picks))
                if edge not in edge_set:
                    edge_set.add(edge)
                    edges.append(edge)
                    break
    edges.sort()
    h = Hypergraph(N, tuple(edges), uniform_k=k)
    return h, LabelAssignment(labels, q)


def save_kernel(kernel: KernelTensor, path: str) -> None:
    """Kernel file: line 1 ``k q``; then ``a1 ... ak rate`` per supported multiset."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"{kernel.k} {kernel.q}\n")
        for m, r in kernel.support():
            f.write(" ".join(str(a) for a in m) + f" {r!r}\n")


def load_kernel(path: str) -> KernelTensor:
    with open(path, "r", encoding="utf-8") as f:
        k, q = (int(t) for t in f.readline().split())
        rates = {}
        for line in f:
            parts = line.split()
            if not parts:
                continue
            key = tuple(sorted(int(t) for t in parts[:-1]))
            rates[key] = float(parts[-1])
    return KernelTensor(k, q, rates)
