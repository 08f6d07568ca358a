"""Spectral detection of planted labels in sparse hypergraphs."""

from .core import (
    DirectedEdgeIndex,
    Hypergraph,
    LabelAssignment,
    adjacency,
    degrees,
    incidence,
    validate,
)
from .genmodel import (
    GroupPrior,
    KernelTensor,
    ModelPredictions,
    critical_parameter,
    detectability,
    group_degree,
    hsbm_kernel,
    pair_degree,
    sample,
    transition_matrix,
    two_in_four_kernel,
)
from .spectral import (
    Embedding,
    NbOperator,
    ReducedNbOperator,
    SpectralResult,
    build_nb,
    build_nb_reduced,
    cluster,
    dense_spectrum,
    detect,
    embed,
    leading_spectrum,
    overlap,
)
from .bp import BPConfig, BPState, bp_run, factorized_stability
from .kernel_learn import KernelEstimate, estimate_kernel

__all__ = [
    "DirectedEdgeIndex", "Hypergraph", "LabelAssignment", "adjacency",
    "degrees", "incidence", "validate",
    "GroupPrior", "KernelTensor", "ModelPredictions", "critical_parameter",
    "detectability", "group_degree", "hsbm_kernel", "pair_degree", "sample",
    "transition_matrix", "two_in_four_kernel",
    "Embedding", "NbOperator", "ReducedNbOperator", "SpectralResult",
    "build_nb", "build_nb_reduced", "cluster", "dense_spectrum", "detect",
    "embed", "leading_spectrum", "overlap",
    "BPConfig", "BPState", "bp_run", "factorized_stability",
    "KernelEstimate", "estimate_kernel",
]

__version__ = "0.1.0"
