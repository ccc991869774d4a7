"""Resource-coverage holes from persistent homology of travel-time filtrations."""

__version__ = "0.1.0"

from .analysis import box_summary, compare_regions, death_stats, select_holes
from .distance_model import (
    DistanceModel,
    boundary_extend,
    build_distance_model,
    expected_round_trip,
    symmetrize,
    waiting_time,
    walk_time,
)
from .errors import (
    BudgetExceededError,
    ConfigurationError,
    CoverageError,
    FiltrationError,
    FiltrationTooLargeError,
    ProviderError,
    ValidationError,
)
from .filtration import WeightedFiltration, build_filtration, edge_value, rips_filtration
from .persistence import PersistenceDiagram, connected_components_0d, merge_diagrams, reduce

__all__ = [
    "BudgetExceededError",
    "ConfigurationError",
    "CoverageError",
    "DistanceModel",
    "FiltrationError",
    "FiltrationTooLargeError",
    "PersistenceDiagram",
    "ProviderError",
    "ValidationError",
    "WeightedFiltration",
    "box_summary",
    "boundary_extend",
    "build_distance_model",
    "build_filtration",
    "compare_regions",
    "connected_components_0d",
    "death_stats",
    "edge_value",
    "expected_round_trip",
    "merge_diagrams",
    "reduce",
    "rips_filtration",
    "select_holes",
    "symmetrize",
    "waiting_time",
    "walk_time",
]
