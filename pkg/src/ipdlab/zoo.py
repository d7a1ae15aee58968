"""Baseline strategies: classics, a parametric memory-1 player, and
zero-determinant extortion vectors.

All of these act on actual (post-noise) actions only and are pure
functions of the visible history plus their own random draws.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ipdlab.base import Strategy
from ipdlab.engine import Action, C, D, PayoffParams, state_index


@dataclass(frozen=True)
class MemOneVector:
    """Cooperation probabilities per joint state (CC, CD, DC, DD) plus a
    first-round cooperation probability."""

    p: tuple[float, float, float, float]
    first_move_coop: float = 1.0

    def __post_init__(self) -> None:
        for label, value in zip(("CC", "CD", "DC", "DD"), self.p):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"p[{label}] = {value} outside [0, 1]")
        if not 0.0 <= self.first_move_coop <= 1.0:
            raise ValueError(f"first_move_coop = {self.first_move_coop} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array(self.p, dtype=np.float64)


def memone_step(
    v: MemOneVector, state: Optional[int], rng: np.random.Generator
) -> Action:
    """One memory-1 decision. ``state`` is the previous round's joint state
    index from this player's own perspective, or None on the first round.

    Always consumes exactly one uniform draw, so deterministic vectors do
    not perturb the match stream differently from stochastic ones.
    """
    prob = v.first_move_coop if state is None else v.p[state]
    return C if rng.random() < prob else D


def zd_max_phi(chi: float, params: PayoffParams) -> float:
    """Largest normalization keeping the extortion vector inside [0, 1]."""
    t, r, p, s = params.t, params.r, params.p, params.s
    bounds = []
    if chi > 1.0:
        bounds.append(1.0 / ((chi - 1.0) * (r - p)))  # p_CC >= 0
    bounds.append(1.0 / (chi * (t - p) - (s - p)))  # p_CD >= 0
    bounds.append(1.0 / ((t - p) - chi * (s - p)))  # p_DC <= 1
    return min(bounds)


def zd_extortion(chi: float, phi: float, params: PayoffParams) -> MemOneVector:
    """Extortionate zero-determinant vector enforcing, in long-run averages,
    (own payoff - P) = chi * (opponent payoff - P).

    The free probability after mutual defection is pinned to 0 and the
    first move to defect, the canonical extortionate choice.
    """
    if chi < 1.0:
        raise ValueError(f"extortion factor chi must be >= 1, got {chi}")
    if phi <= 0.0:
        raise ValueError(f"normalization phi must be > 0, got {phi}")
    t, r, p, s = params.t, params.r, params.p, params.s
    entries = {
        "p_CC": 1.0 - phi * (chi - 1.0) * (r - p),
        "p_CD": 1.0 + phi * ((s - p) - chi * (t - p)),
        "p_DC": phi * ((t - p) - chi * (s - p)),
        "p_DD": 0.0,
    }
    violations = [
        f"{label} = {value}" for label, value in entries.items() if not 0.0 <= value <= 1.0
    ]
    if violations:
        raise ValueError(
            f"infeasible (chi={chi}, phi={phi}): {', '.join(violations)} "
            f"outside the [0, 1] probability bound (max feasible phi is "
            f"{zd_max_phi(chi, params)})"
        )
    return MemOneVector(
        (entries["p_CC"], entries["p_CD"], entries["p_DC"], entries["p_DD"]),
        first_move_coop=0.0,
    )


class MemOne(Strategy):
    """Plays a fixed memory-1 vector."""

    name = "memone"

    def __init__(self, p_noise: float, params: PayoffParams, vector: MemOneVector):
        super().__init__(p_noise, params)
        self.vector = vector
        self._state: Optional[int] = None

    def decide(self, rng: np.random.Generator) -> Action:
        return memone_step(self.vector, self._state, rng)

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        self._state = state_index(own_actual, opp_actual)


class Cooperator(Strategy):
    name = "cooperator"

    def decide(self, rng: np.random.Generator) -> Action:
        return C

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        pass


class Defector(Strategy):
    name = "defector"

    def decide(self, rng: np.random.Generator) -> Action:
        return D

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        pass


class RandomCoop(Strategy):
    """Cooperates with fixed intended probability q each round."""

    name = "random"

    def __init__(self, p_noise: float, params: PayoffParams, q: float = 0.5):
        super().__init__(p_noise, params)
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"cooperation probability q must lie in [0, 1], got {q}")
        self.q = q

    def decide(self, rng: np.random.Generator) -> Action:
        return C if rng.random() < self.q else D

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        pass


class TitForTat(Strategy):
    name = "tft"

    def __init__(self, p_noise: float, params: PayoffParams):
        super().__init__(p_noise, params)
        self._opp_last: Optional[Action] = None

    def decide(self, rng: np.random.Generator) -> Action:
        return self._opp_last if self._opp_last is not None else C

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        self._opp_last = opp_actual


class TitForTwoTats(Strategy):
    """Retaliates only after two consecutive opponent defections."""

    name = "tit-for-two-tats"

    def __init__(self, p_noise: float, params: PayoffParams):
        super().__init__(p_noise, params)
        self._opp_last: Optional[Action] = None
        self._opp_prev: Optional[Action] = None

    def decide(self, rng: np.random.Generator) -> Action:
        if self._opp_last is D and self._opp_prev is D:
            return D
        return C

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        self._opp_prev = self._opp_last
        self._opp_last = opp_actual


#: fraction of the indifference-level generosity actually granted
GENEROSITY_MARGIN = 0.6


class GenerousTitForTat(MemOne):
    """TFT that forgives a defection with probability g.

    The classic prescription min(1 - (T-R)/(R-S), (R-P)/(T-P)) (1/3 for
    conventional payoffs) is the exact indifference point: an opponent that
    alternates defection and cooperation then earns (T + gR + (1-g)S)/2 =
    R per round, no worse than cooperating, and under noise strictly
    better. We grant three fifths of that level (1/5 conventionally) so
    deliberate alternation stays clearly unprofitable at every noise level
    while isolated noise defections are still usually forgiven.
    """

    name = "generous-tft"

    def __init__(self, p_noise: float, params: PayoffParams):
        g = GENEROSITY_MARGIN * min(
            1.0 - (params.t - params.r) / (params.r - params.s),
            (params.r - params.p) / (params.t - params.p),
        )
        super().__init__(p_noise, params, MemOneVector((1.0, g, 1.0, g), 1.0))
        self.generosity = g


class ContriteTitForTat(Strategy):
    """Standing-based contrite TFT.

    A player falls into bad standing by defecting while the opponent is in
    good standing, and is restored by cooperating once. Defections against
    a bad-standing opponent are justified and leave standing unchanged.
    Play: atone (cooperate) when own standing is bad, retaliate only
    against a bad-standing opponent, otherwise cooperate. Because standing
    is computed from actual actions, an own noise-caused defection makes
    this player contrite for one round.
    """

    name = "contrite-tft"

    def __init__(self, p_noise: float, params: PayoffParams):
        super().__init__(p_noise, params)
        self._own_good = True
        self._opp_good = True

    def decide(self, rng: np.random.Generator) -> Action:
        if not self._own_good:
            return C
        if not self._opp_good:
            return D
        return C

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        own_good_before = self._own_good
        opp_good_before = self._opp_good
        if own_actual is C:
            self._own_good = True
        elif opp_good_before:
            self._own_good = False
        if opp_actual is C:
            self._opp_good = True
        elif own_good_before:
            self._opp_good = False


class Pavlov(MemOne):
    """Win-stay lose-shift: cooperate when last round's actions matched."""

    name = "pavlov"

    def __init__(self, p_noise: float, params: PayoffParams):
        super().__init__(p_noise, params, MemOneVector((1.0, 0.0, 0.0, 1.0), 1.0))


class GrimTrigger(Strategy):
    name = "grim-trigger"

    def __init__(self, p_noise: float, params: PayoffParams):
        super().__init__(p_noise, params)
        self._triggered = False

    def decide(self, rng: np.random.Generator) -> Action:
        return D if self._triggered else C

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        if opp_actual is D:
            self._triggered = True


class ZdExtortion(MemOne):
    """Fixed extortionate zero-determinant player."""

    name = "zd"

    def __init__(
        self,
        p_noise: float,
        params: PayoffParams,
        chi: float = 3.0,
        phi: Optional[float] = None,
    ):
        if phi is None:
            phi = zd_max_phi(chi, params) / 2.0
        super().__init__(p_noise, params, zd_extortion(chi, phi, params))
        self.chi = chi
        self.phi = phi
