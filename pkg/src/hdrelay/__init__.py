"""Half-duplex relay channels: information measures, capacity bounds,
their numerical optimization, Monte Carlo coding simulation, Gaussian
closed forms and full-duplex comparisons."""

from .bounds import (
    OBJECTIVES,
    BoundResult,
    ScheduleParams,
    achievable_decode_forward,
    compare_schedules,
    deterministic_schedule_rate,
    evaluate,
    optimize_bound,
    outer_bound_degraded,
    outer_bound_general,
)
from .channel_core import (
    BroadcastComponent,
    ChannelError,
    ConditionalPmf,
    HalfDuplexRelayChannel,
    InputDistribution,
    MultipleAccessComponent,
    check_physically_degraded,
    compose_half_duplex,
    load_channel,
    make_channel,
    validate_input_distribution,
)
from .info_metrics import conditional_mi, entropy, mutual_information, rate_breakdown
from .optim import OptimizerOptions

__version__ = "0.1.0"

__all__ = [
    "OBJECTIVES", "BoundResult", "ScheduleParams", "achievable_decode_forward", "compare_schedules",
    "deterministic_schedule_rate", "evaluate", "optimize_bound", "outer_bound_degraded",
    "outer_bound_general", "BroadcastComponent", "ChannelError", "ConditionalPmf",
    "HalfDuplexRelayChannel", "InputDistribution", "MultipleAccessComponent",
    "check_physically_degraded", "compose_half_duplex", "load_channel", "make_channel",
    "validate_input_distribution", "conditional_mi", "entropy", "mutual_information",
    "rate_breakdown", "OptimizerOptions",
]
