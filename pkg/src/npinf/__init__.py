"""Non-progressive influence: continuous and discrete-time simulation,
parameter learning from action logs, and seed selection for total active time."""

__version__ = "0.1.0"

from .graph import CnpGraph, DnpGraph, cnp_to_dnp, dnp_to_cnp, load_cnp_graph, load_dnp_graph  # noqa: E402
from .sampler import DynamicCategorical  # noqa: E402
from .cnp import PossibleWorld, Trace, sample_world, simulate_event_driven, simulate_possible_world, spread  # noqa: E402
from .dnp import StepTrace, simulate_dnp  # noqa: E402
from .inflmax import SeedSelection, SpreadEstimate, brute_force_opt, estimate_spread, greedy_celf  # noqa: E402

__all__ = [
    "CnpGraph", "DnpGraph", "cnp_to_dnp", "dnp_to_cnp", "load_cnp_graph", "load_dnp_graph",
    "DynamicCategorical",
    "PossibleWorld", "Trace", "sample_world", "simulate_event_driven", "simulate_possible_world", "spread",
    "StepTrace", "simulate_dnp",
    "SeedSelection", "SpreadEstimate", "brute_force_opt", "estimate_spread", "greedy_celf",
]
