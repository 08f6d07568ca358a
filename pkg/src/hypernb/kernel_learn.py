"""Nonparametric kernel estimation from a hypergraph and a label assignment.

Counting the label composition of every hyperedge under inferred (or
planted) labels recovers the generative rule: raw frequencies describe the
observed mix, and calibrating by the number of candidate vertex sets per
composition gives unbiased estimates of the kernel rates themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Hypergraph, LabelAssignment
from .genmodel import KernelTensor


@dataclass(frozen=True)
class KernelEstimate:
    k: int
    q: int
    counts: dict            # sorted label multiset -> edge count
    frequencies: dict       # sorted label multiset -> count / M
    calibrated: dict        # sorted label multiset -> estimated rate c_m

    def to_kernel(self) -> KernelTensor:
        return KernelTensor(self.k, self.q, dict(self.calibrated))


def estimate_kernel(h: Hypergraph, labels: LabelAssignment) -> KernelEstimate:
    """Composition counts, frequencies, and calibrated rate estimates.

    The calibrated rate for multiset m is count * N^(k-1) divided by the
    number of vertex sets with that composition, with group sizes taken from
    the supplied labels.
    """
    if h.uniform_k is None:
        raise ValueError("kernel estimation requires a k-uniform hypergraph")
    if len(labels) != h.num_vertices:
        raise ValueError("labels must cover all vertices")
    k, q = h.uniform_k, labels.num_groups
    lab = labels.labels
    counts: dict = {}
    for e in h.edges:
        key = tuple(sorted(lab[i] for i in e))
        counts[key] = counts.get(key, 0) + 1
    M = max(h.num_edges, 1)
    sizes = labels.group_sizes()
    frequencies = {m: c / M for m, c in counts.items()}
    calibrated = {}
    for m, c in counts.items():
        comp = np.bincount(np.array(m), minlength=q)
        n_sets = math.prod(math.comb(int(sizes[a]), int(comp[a])) for a in range(q))
        calibrated[m] = c * h.num_vertices ** (k - 1) / n_sets if n_sets else float("inf")
    return KernelEstimate(k, q, counts, frequencies, calibrated)


def format_frequency_table(est: KernelEstimate) -> str:
    """Human-readable composition table (one multiset per line)."""
    M = sum(est.counts.values())
    lines = [f"{'composition':<16}{'count':>10}{'frequency':>12}{'rate':>14}"]
    for m in sorted(est.counts):
        name = "".join(str(a) for a in m)
        lines.append(f"{name:<16}{est.counts[m]:>10}{est.frequencies[m]:>12.5f}"
                     f"{est.calibrated[m]:>14.4f}")
    lines.append(f"total edges: {M}")
    return "\n".join(lines)
