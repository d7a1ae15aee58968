"""Core game mechanics: actions, payoffs, noise, and match execution.

Both players observe both *actual* (post-noise) actions every round;
intended actions stay private to each player. Matches are deterministic
given the strategy configuration, length, noise level, payoffs, and seed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Optional

import numpy as np

if TYPE_CHECKING:
    from ipdlab.base import Strategy


class Action(Enum):
    COOPERATE = "C"
    DEFECT = "D"

    def flipped(self) -> "Action":
        return Action.DEFECT if self is Action.COOPERATE else Action.COOPERATE

    @property
    def is_coop(self) -> bool:
        return self is Action.COOPERATE

    def __str__(self) -> str:
        return self.value


C = Action.COOPERATE
D = Action.DEFECT


@dataclass(frozen=True)
class PayoffParams:
    """Symmetric one-shot payoffs (temptation, reward, punishment, sucker)."""

    t: float = 5.0
    r: float = 3.0
    p: float = 1.0
    s: float = 0.0

    def __post_init__(self) -> None:
        if not (self.t > self.r > self.p > self.s):
            raise ValueError(
                f"payoffs must satisfy t > r > p > s, got "
                f"t={self.t}, r={self.r}, p={self.p}, s={self.s}"
            )

    def state_payoffs(self) -> np.ndarray:
        """Own payoff per joint state in (CC, CD, DC, DD) order."""
        return np.array([self.r, self.s, self.t, self.p], dtype=np.float64)


CONVENTIONAL = PayoffParams(5.0, 3.0, 1.0, 0.0)

# Joint states in canonical order, from the deciding player's perspective.
STATE_CC, STATE_CD, STATE_DC, STATE_DD = 0, 1, 2, 3
STATE_NAMES = ("CC", "CD", "DC", "DD")


def state_index(my_last: Action, opp_last: Action) -> int:
    """Map (own last actual, opponent last actual) to index 0..3."""
    return (0 if my_last.is_coop else 2) + (0 if opp_last.is_coop else 1)


@dataclass(frozen=True)
class JointState:
    my_last: Action
    opp_last: Action

    @property
    def index(self) -> int:
        return state_index(self.my_last, self.opp_last)

    @classmethod
    def from_index(cls, idx: int) -> "JointState":
        if not 0 <= idx <= 3:
            raise ValueError(f"state index must be 0..3, got {idx}")
        return cls(C if idx < 2 else D, C if idx % 2 == 0 else D)

    def __str__(self) -> str:
        return STATE_NAMES[self.index]


def payoff(actual_a: Action, actual_b: Action, params: PayoffParams) -> tuple[float, float]:
    """Per-round payoffs for the realized action pair."""
    if actual_a.is_coop:
        return (params.r, params.r) if actual_b.is_coop else (params.s, params.t)
    return (params.t, params.s) if actual_b.is_coop else (params.p, params.p)


def apply_noise(intended: Action, p_noise: float, rng: np.random.Generator) -> Action:
    """Flip the intended action with probability ``p_noise``."""
    check_noise(p_noise)
    if p_noise > 0.0 and rng.random() < p_noise:
        return intended.flipped()
    return intended


def check_noise(p_noise: float) -> None:
    if not 0.0 <= p_noise <= 0.5:
        raise ValueError(f"p_noise must lie in [0, 0.5], got {p_noise}")


@dataclass(frozen=True)
class RoundRecord:
    intended_a: Action
    intended_b: Action
    actual_a: Action
    actual_b: Action
    payoff_a: float
    payoff_b: float


@dataclass(frozen=True)
class MatchResult:
    rounds: tuple[RoundRecord, ...]
    avg_payoff_a: float
    avg_payoff_b: float
    seed: int
    payoffs_a: np.ndarray = field(repr=False, compare=False, default=None)
    payoffs_b: np.ndarray = field(repr=False, compare=False, default=None)

    def to_json_dict(self) -> dict:
        out = {
            "seed": self.seed,
            "avg_payoff_a": self.avg_payoff_a,
            "avg_payoff_b": self.avg_payoff_b,
            "rounds": [
                {
                    "intended_a": r.intended_a.value,
                    "intended_b": r.intended_b.value,
                    "actual_a": r.actual_a.value,
                    "actual_b": r.actual_b.value,
                    "payoff_a": r.payoff_a,
                    "payoff_b": r.payoff_b,
                }
                for r in self.rounds
            ],
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    def rounds_to_csv(self) -> str:
        """Round log with one row per round."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["round", "intended_a", "intended_b", "actual_a", "actual_b", "payoff_a", "payoff_b"]
        )
        for i, r in enumerate(self.rounds, start=1):
            writer.writerow(
                [i, r.intended_a.value, r.intended_b.value, r.actual_a.value,
                 r.actual_b.value, repr(r.payoff_a), repr(r.payoff_b)]
            )
        return buf.getvalue()


def derive_seed(master_seed: int, *key: int) -> int:
    """Stable 63-bit seed for one match within a larger experiment.

    Distinct key tuples give statistically independent streams.
    """
    ss = np.random.SeedSequence([int(master_seed), *[int(k) for k in key]])
    return int(ss.generate_state(1, np.uint64)[0] >> 1)


def match_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def run_match(
    strategy_a: "Strategy",
    strategy_b: "Strategy",
    length: int,
    p_noise: float,
    params: PayoffParams,
    seed: int,
    record_rounds: bool = True,
) -> MatchResult:
    """Play one match between two freshly constructed strategy instances.

    Each round both strategies pick intended actions from the visible
    history of actual actions, noise flips each intention independently,
    and both observe the realized pair. All randomness (noise and any
    strategy sampling) comes from a single per-match stream in a fixed
    draw order: noise A, noise B, strategy A, strategy B.
    """
    if length < 1:
        raise ValueError(f"match length must be >= 1, got {length}")
    check_noise(p_noise)
    for strat in (strategy_a, strategy_b):
        if strat.p_noise != p_noise or strat.params != params:
            raise ValueError(
                f"strategy {strat!r} was built for p_noise={strat.p_noise}, "
                f"params={strat.params}; match uses p_noise={p_noise}, params={params}"
            )

    rng = match_rng(seed)
    records: list[RoundRecord] = []
    pays_a = np.empty(length, dtype=np.float64)
    pays_b = np.empty(length, dtype=np.float64)

    for i in range(length):
        u_a = rng.random()
        u_b = rng.random()
        intended_a = strategy_a.decide(rng)
        intended_b = strategy_b.decide(rng)
        actual_a = intended_a.flipped() if u_a < p_noise else intended_a
        actual_b = intended_b.flipped() if u_b < p_noise else intended_b
        pay_a, pay_b = payoff(actual_a, actual_b, params)
        pays_a[i] = pay_a
        pays_b[i] = pay_b
        strategy_a.observe(actual_a, actual_b)
        strategy_b.observe(actual_b, actual_a)
        if record_rounds:
            records.append(
                RoundRecord(intended_a, intended_b, actual_a, actual_b, pay_a, pay_b)
            )

    return MatchResult(
        rounds=tuple(records),
        avg_payoff_a=float(pays_a.mean()),
        avg_payoff_b=float(pays_b.mean()),
        seed=int(seed),
        payoffs_a=pays_a,
        payoffs_b=pays_b,
    )
