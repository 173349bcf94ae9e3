"""Leader selection for linear multi-agent systems with noisy links."""

from .errors import InfeasibleError, LeaderSelectError, ValidationError
from .graph import (
    LeaderSet,
    NoisyGraph,
    build_graph,
    ground,
    laplacian,
    parse_graph,
    read_graph,
    write_graph,
)
from .greedy import SelectionResult, greedy_select
from .metric import ErrorReport, error_value, marginal_gain, system_error
from .static import select_static_alpha, select_static_k

__version__ = "0.1.0"

__all__ = [
    "ErrorReport",
    "InfeasibleError",
    "LeaderSelectError",
    "LeaderSet",
    "NoisyGraph",
    "SelectionResult",
    "ValidationError",
    "build_graph",
    "error_value",
    "greedy_select",
    "ground",
    "laplacian",
    "marginal_gain",
    "parse_graph",
    "read_graph",
    "select_static_alpha",
    "select_static_k",
    "system_error",
    "write_graph",
    "__version__",
]
