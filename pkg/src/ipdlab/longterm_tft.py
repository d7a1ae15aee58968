"""A maximally forgiving TFT variant.

Plays plain TFT, but cooperates unconditionally while the opponent's rate
of defecting right after this player's cooperations is statistically
consistent with pure noise. The test statistic compares the observed count
of such defections against its expectation under a noise-only null, scaled
by the binomial standard deviation (floored at 1 so small samples cannot
inflate confidence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ipdlab.base import Strategy
from ipdlab.engine import Action, C, D, PayoffParams

#: cooperate unconditionally only once this many own cooperations were seen
MIN_COOPERATIONS = 5
#: and while the statistic stays below this threshold
Z_THRESHOLD = 2.0


@dataclass
class ForgivenessCounters:
    """Counts of own actual cooperations and of opponent defections that
    immediately followed one of them.

    The most recent own action is never counted: the opponent has not yet
    had a chance to react to it. Both counters are monotone.
    """

    n_c: int = 0
    n_cd: int = 0

    def update(self, own_actual_prev: Action, opp_actual_now: Action) -> None:
        """Record one completed pairing of the opponent's action at round t
        with this player's action at round t-1."""
        if own_actual_prev is C:
            self.n_c += 1
            if opp_actual_now is D:
                self.n_cd += 1


def z_statistic(counters: ForgivenessCounters, p_noise: float) -> float:
    """Standardized excess of opponent defections after own cooperations.

    Near zero when defections occur at the noise rate; grows past 2 when
    the opponent demonstrably does not always reward cooperation.
    """
    expected = p_noise * counters.n_c
    spread = math.sqrt(p_noise * (1.0 - p_noise) * counters.n_c)
    return (counters.n_cd - expected) / max(1.0, spread)


def forgiving_decision(
    counters: ForgivenessCounters, opp_last: Optional[Action], p_noise: float
) -> Action:
    """Cooperate unconditionally while the history is compatible with a
    fully reciprocating opponent, otherwise fall back to TFT.

    The condition is re-evaluated every round, so retaliation resumes if
    the statistic later drifts past the threshold.
    """
    if counters.n_c >= MIN_COOPERATIONS and z_statistic(counters, p_noise) < Z_THRESHOLD:
        return C
    if opp_last is None:
        return C
    return opp_last


class LongtermTft(Strategy):
    name = "longterm-tft"

    def __init__(self, p_noise: float, params: PayoffParams):
        super().__init__(p_noise, params)
        self.counters = ForgivenessCounters()
        self._own_prev: Optional[Action] = None
        self._opp_last: Optional[Action] = None

    def decide(self, rng: np.random.Generator) -> Action:
        return forgiving_decision(self.counters, self._opp_last, self.p_noise)

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        if self._own_prev is not None:
            self.counters.update(self._own_prev, opp_actual)
        self._own_prev = own_actual
        self._opp_last = opp_actual
