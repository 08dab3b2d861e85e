"""gaplab: a numerical laboratory for GAP (Scrooge) measures.

Exact samplers for the Gaussian, adjusted-Gaussian, and projected measures
with a prescribed density matrix, the matching uniform-sphere, delta-mixture,
and von Mises-Fisher reference measures, closed-form concentration bounds in
log space, and reproducible Monte Carlo experiments that compare empirical
tails against the bounds.
"""

__version__ = "0.1.0"

from .bounds import BOUND_TAGS, BoundSpec, BoundValue, CrossoverResult, bound_value, crossover_solve
from .linalg import (
    DensityMatrix,
    HilbertDim,
    Observable,
    PureState,
    evolve,
    gue_hamiltonian,
    haar_unitary,
    hs_norm,
    operator_norm,
    partial_trace_b,
    purity,
    trace_norm,
    von_neumann_entropy,
)
from .measures import (
    ConditionalSample,
    MeasureSpec,
    conditional_wavefunction,
    gap_density,
    gap_log_density,
    sample_delta_mixture,
    sample_ga,
    sample_gap,
    sample_gaussian,
    sample_uniform_sphere,
    sample_vmf,
    truncate_density,
)
from .moments import KmlKernel, gap_fourth_moment, kml, variance_bound

__all__ = [
    "__version__",
    "BOUND_TAGS",
    "BoundSpec",
    "BoundValue",
    "ConditionalSample",
    "CrossoverResult",
    "DensityMatrix",
    "HilbertDim",
    "KmlKernel",
    "MeasureSpec",
    "Observable",
    "PureState",
    "bound_value",
    "conditional_wavefunction",
    "crossover_solve",
    "evolve",
    "gap_density",
    "gap_fourth_moment",
    "gap_log_density",
    "gue_hamiltonian",
    "haar_unitary",
    "hs_norm",
    "kml",
    "operator_norm",
    "partial_trace_b",
    "purity",
    "sample_delta_mixture",
    "sample_ga",
    "sample_gap",
    "sample_gaussian",
    "sample_uniform_sphere",
    "sample_vmf",
    "trace_norm",
    "truncate_density",
    "variance_bound",
    "von_neumann_entropy",
]
