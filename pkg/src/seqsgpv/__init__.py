"""Sequential monitoring with the second generation p-value."""

__version__ = "0.1.0"

from .designs import Alert, Conclusion, NullBoundROE, Prism, RopeOnly  # noqa: E402
from .engine import MonitoringPlan, OutcomeModel, TrialResult, run_trial  # noqa: E402
from .regions import Interval, Region, normalize, overlap_length, sgpv  # noqa: E402

__all__ = [
    "Alert", "Conclusion", "Interval", "MonitoringPlan", "NullBoundROE", "OutcomeModel",
    "Prism", "Region", "RopeOnly", "TrialResult", "normalize", "overlap_length", "run_trial",
    "sgpv",
]
