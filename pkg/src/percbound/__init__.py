"""Certified lower bounds for critical points of oriented percolation.

The percolation cluster of the origin is dominated by a multitype
branching process over window-occupancy states; whenever the spectral
radius of that process's mean matrix stays below one, the percolation
process is subcritical.  The largest parameter value passing the
certified radius test is a rigorous lower bound for the critical point.
"""

from .errors import (
    BudgetError,
    InternalInvariantError,
    MemoryBudgetError,
    NonConvergenceError,
    PercBoundError,
    UsageError,
)
from .models import (
    MODELS,
    Inhomogeneity,
    Lattice,
    ModelSpec,
    Percolation,
    VariantTag,
    WindowGeometry,
    child_tag,
    classify,
    get_model,
    initial_tag,
    param_index,
    tag_from_letter,
    tag_letter,
    window_geometry,
)
from .poly import PolyPool, TransitionPoly
from .spaces import SpaceSpec, StateSpace, enumerate_space, truncated_cardinality
from .transition import ChildLaw, MeanMatrix, build_matrix, child_law
from .spectral import (
    SpectralReport,
    evaluate,
    is_subcritical,
    spectral_radius,
)
from .search import BoundResult, grid_scan, lower_bound, reproduce_tables
from .oracle import (
    MCResult,
    brute_force_children,
    exact_reach_probability,
    expected_alive,
    mc_survival,
)
from .cache import dump_text, read_cache, write_cache

__version__ = "0.1.0"

__all__ = [
    "BoundResult",
    "BudgetError",
    "ChildLaw",
    "Inhomogeneity",
    "InternalInvariantError",
    "Lattice",
    "MCResult",
    "MODELS",
    "MeanMatrix",
    "MemoryBudgetError",
    "ModelSpec",
    "NonConvergenceError",
    "Percolation",
    "PercBoundError",
    "PolyPool",
    "SpaceSpec",
    "SpectralReport",
    "StateSpace",
    "TransitionPoly",
    "UsageError",
    "VariantTag",
    "WindowGeometry",
    "brute_force_children",
    "build_matrix",
    "child_law",
    "child_tag",
    "classify",
    "dump_text",
    "enumerate_space",
    "evaluate",
    "exact_reach_probability",
    "expected_alive",
    "get_model",
    "grid_scan",
    "initial_tag",
    "is_subcritical",
    "lower_bound",
    "mc_survival",
    "param_index",
    "read_cache",
    "reproduce_tables",
    "spectral_radius",
    "tag_from_letter",
    "tag_letter",
    "truncated_cardinality",
    "window_geometry",
    "write_cache",
]
