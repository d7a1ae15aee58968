"""Noisy iterated prisoner's dilemma: strategies, tournaments, and audits."""

from ipdlab.engine import (
    Action,
    JointState,
    MatchResult,
    PayoffParams,
    RoundRecord,
    apply_noise,
    payoff,
    run_match,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "JointState",
    "MatchResult",
    "PayoffParams",
    "RoundRecord",
    "apply_noise",
    "payoff",
    "run_match",
    "__version__",
]
