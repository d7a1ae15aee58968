"""Two-mode strategies: cooperate first, adapt when it pays, optionally
revert.

The machine starts in the forgiving-TFT mode while fitting the opponent
model, switches to the adaptive optimizer once adaptation promises a
significant payoff gain over what the forgiving mode has actually earned,
and (depending on configuration) returns to the forgiving mode when the
optimizer underperforms or when the opponent is extracting more than the
mutual-cooperation payoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ipdlab import _kernels
from ipdlab._kernels import ADAM_LR, ADAM_STEPS
from ipdlab.base import Strategy
from ipdlab.engine import Action, C, PayoffParams, payoff, state_index
from ipdlab.longterm_tft import ForgivenessCounters, forgiving_decision
from ipdlab.markov_opt import GAMMA_FUTURE, OpponentModel

PHASE_FORGIVING = "longterm-tft"
PHASE_ADAPTIVE = "iso"

#: rounds of evidence required before switching or reverting
MIN_PHASE_SAMPLES = 10
#: significance threshold shared by the switch and underperformance tests
SIGNIFICANCE = 2.0
#: minimum fraction of the cooperate/punish payoff spread worth adapting for
MIN_GAIN_FRACTION = 0.05


def switch_dwell(stats_discount: Optional[float]) -> int:
    """Rounds to stay in the forgiving mode after a revert before the switch
    rule may fire again: half the effective memory of the discounted phase
    statistics, so the comparison the switch relies on has substantially
    refreshed. Falls back to the minimum-data constant without discounting."""
    if stats_discount is None:
        return MIN_PHASE_SAMPLES
    return max(MIN_PHASE_SAMPLES, round(0.5 / (1.0 - stats_discount)))


@dataclass
class RunningStats:
    """One-pass mean and variance accumulator (population standard
    deviation, which is what the phase comparisons use)."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def push(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    @property
    def std(self) -> float:
        if self.n < 1:
            return 0.0
        return math.sqrt(max(self.m2, 0.0) / self.n)

    def reset(self) -> None:
        self.n = 0
        self.mean = 0.0
        self.m2 = 0.0


@dataclass
class DiscountedStats:
    """Exponentially discounted mean and variance with the same interface
    as RunningStats; ``n`` is the discounted observation mass (capped at
    1/(1-discount), 100 for the default 0.99).

    Used for the phase payoff statistics so that the comparison between the
    two modes tracks *current* performance: a plain lifetime average never
    recovers from an early bad stretch, which permanently distorts both the
    switch and revert tests.
    """

    discount: float = 0.99
    weight: float = 0.0
    mean: float = 0.0
    var: float = 0.0

    def push(self, x: float) -> None:
        self.weight = self.discount * self.weight + 1.0
        alpha = 1.0 / self.weight
        delta = x - self.mean
        self.mean += alpha * delta
        self.var = (1.0 - alpha) * (self.var + alpha * delta * delta)

    @property
    def n(self) -> float:
        return self.weight

    @property
    def std(self) -> float:
        return math.sqrt(max(self.var, 0.0))

    def reset(self) -> None:
        self.weight = 0.0
        self.mean = 0.0
        self.var = 0.0


def switch_condition(stats_c: RunningStats, u_a: float, params: PayoffParams) -> bool:
    """Leave the forgiving mode when the optimizer's expected payoff beats
    the realized forgiving-mode average both significantly and by a
    non-negligible margin."""
    if stats_c.n < MIN_PHASE_SAMPLES:
        return False
    gain = u_a - stats_c.mean
    if gain <= SIGNIFICANCE * stats_c.std / math.sqrt(stats_c.n):
        return False
    return gain > MIN_GAIN_FRACTION * (params.r - params.p)


def revert_on_loss_condition(stats_c: RunningStats, stats_a: RunningStats) -> bool:
    """Return to the forgiving mode when its realized average payoff exceeds
    the adaptive mode's by more than two standard errors (two-sample test).
    A zero denominator counts as significant only for a positive gap."""
    if stats_a.n < MIN_PHASE_SAMPLES:
        return False
    numerator = stats_c.mean - stats_a.mean
    denom = math.sqrt(
        stats_c.std**2 / max(stats_c.n, 1) + stats_a.std**2 / stats_a.n
    )
    if denom == 0.0:
        return numerator > 0.0
    return numerator / denom > SIGNIFICANCE


def revert_on_extortion_condition(stats_o: RunningStats, params: PayoffParams) -> bool:
    """Return to the forgiving mode when the opponent is reliably earning
    more than the mutual-cooperation payoff against the adaptive mode."""
    if stats_o.n < MIN_PHASE_SAMPLES:
        return False
    return stats_o.mean - SIGNIFICANCE * stats_o.std / math.sqrt(stats_o.n) > params.r


class CompositeStrategy(Strategy):
    """Forgiving-TFT / optimizer state machine.

    ``revert_on_loss`` arms the underperformance revert rule and
    ``revert_on_extortion`` the opponent-payoff revert rule. After an
    extortion-triggered revert the switch rule is disarmed for the rest of
    the match (``extortion_lockout``): an extortionate opponent makes
    compliance genuinely the higher-payoff option, so without the lockout
    the machine would oscillate straight back into being extorted. A revert
    triggered by the loss rule leaves the switch armed; what the model
    learned during the failed adaptive phase is what prevents an immediate
    re-switch there.

    Forgiveness counters are frozen during own adaptive-phase rounds by
    default (``freeze_counters_during_adapt``): while this player is itself
    defecting, the opponent's retaliation says nothing about whether it
    rewards cooperation, and counting it would permanently disable
    forgiveness after a single adaptive episode (the counters never
    decay). The opponent model is updated every round regardless of phase.

    Phase payoff statistics are exponentially discounted by default
    (``stats_discount``, same 0.99 as the opponent model) and accumulate
    across episodes rather than resetting per entry; the underperformance
    test additionally consults plain lifetime copies and fires when either
    accounting shows a significant shortfall. The two views have
    complementary blind spots. A lifetime average of the forgiving mode
    gets dragged down for good by stretches where this player was itself
    the betrayal victim, after which a low-grade exploitation dance in the
    adaptive mode no longer looks significantly worse and runs for hundreds
    of rounds. A discounted average recovers from that poisoning, but in a
    mutual defect-lock it forgets that cooperation ever earned more, so
    nothing ever reverts. Firing on either view keeps failed adaptive
    episodes to tens of rounds in both regimes, which is what the revert
    rules are for. The switch also stays quiet for half the statistics'
    memory after each forgiving-phase entry (``switch_dwell``), so
    consecutive adaptation probes cannot outpace the slowly replenishing
    forgiveness budget of an opponent that, like this strategy itself,
    pardons only a bounded number of unprovoked defections per stretch of
    cooperation. ``stats_discount=None`` plus
    ``reset_phase_stats_on_entry`` restore plain per-episode accounting for
    comparison.
    """

    name = "cooperate-iso"

    def __init__(
        self,
        p_noise: float,
        params: PayoffParams,
        revert_on_loss: bool = False,
        revert_on_extortion: bool = False,
        gamma: float = GAMMA_FUTURE,
        extortion_lockout: bool = True,
        freeze_counters_during_adapt: bool = True,
        stats_discount: Optional[float] = 0.99,
        reset_phase_stats_on_entry: bool = False,
        trace_sink: Optional[Callable[[dict], None]] = None,
    ):
        super().__init__(p_noise, params)
        self.revert_on_loss = revert_on_loss
        self.revert_on_extortion = revert_on_extortion
        self.gamma = gamma
        self.extortion_lockout = extortion_lockout
        self.freeze_counters_during_adapt = freeze_counters_during_adapt
        self.reset_phase_stats_on_entry = reset_phase_stats_on_entry
        self.trace_sink = trace_sink

        def new_stats():
            if stats_discount is None:
                return RunningStats()
            return DiscountedStats(discount=stats_discount)

        self.phase = PHASE_FORGIVING
        self.stats_c = new_stats()
        self.stats_a = new_stats()
        self.stats_o = new_stats()
        # lifetime copies back the underperformance test where discounting
        # has already forgotten the cooperative era
        self.stats_c_lifetime = RunningStats()
        self.stats_a_lifetime = RunningStats()
        self._dwell = switch_dwell(stats_discount)
        self._phase_entry_round = 0
        self.model = OpponentModel.fresh(p_noise)
        self.counters = ForgivenessCounters()
        self.switch_locked = False
        self.transitions: list[dict] = []

        self._own_last: Optional[Action] = None
        self._opp_last: Optional[Action] = None
        self._round = 0
        self._phase_this_round = PHASE_FORGIVING
        self._u = params.state_payoffs()

    # -- phase machinery ---------------------------------------------------

    def _transition(self, to_phase: str, rule: str, u_a: Optional[float] = None) -> None:
        event = {"round": self._round, "from": self.phase, "to": to_phase, "rule": rule}
        if u_a is not None:
            event["expected_value"] = u_a
        self.phase = to_phase
        self._phase_entry_round = self._round
        if to_phase == PHASE_ADAPTIVE and self.reset_phase_stats_on_entry:
            self.stats_a.reset()
            self.stats_o.reset()
        self.transitions.append(event)
        if self.trace_sink is not None:
            self.trace_sink(event)

    def _optimize(self, s0: int) -> tuple[np.ndarray, float]:
        return _kernels.adam_kernel(
            self.model.coop_rate, s0, self.gamma, self._u, self.p_noise, ADAM_STEPS, ADAM_LR
        )

    # -- strategy interface ------------------------------------------------

    def decide(self, rng: np.random.Generator) -> Action:
        self._round += 1
        if self._own_last is None:
            self._phase_this_round = self.phase
            return C

        s0 = state_index(self._own_last, self._opp_last)
        cached_policy: Optional[np.ndarray] = None

        if self.phase == PHASE_FORGIVING:
            if (
                not self.switch_locked
                and self.stats_c.n >= MIN_PHASE_SAMPLES
                and self._round - self._phase_entry_round >= self._dwell
            ):
                policy, u_a = self._optimize(s0)
                if switch_condition(self.stats_c, u_a, self.params):
                    self._transition(PHASE_ADAPTIVE, "switch", u_a)
                    cached_policy = policy
        else:
            if self.revert_on_loss and (
                revert_on_loss_condition(self.stats_c, self.stats_a)
                or revert_on_loss_condition(self.stats_c_lifetime, self.stats_a_lifetime)
            ):
                self._transition(PHASE_FORGIVING, "loss")
            elif self.revert_on_extortion and revert_on_extortion_condition(
                self.stats_o, self.params
            ):
                self._transition(PHASE_FORGIVING, "extortion")
                if self.extortion_lockout:
                    self.switch_locked = True

        self._phase_this_round = self.phase
        if self.phase == PHASE_FORGIVING:
            return forgiving_decision(self.counters, self._opp_last, self.p_noise)
        if cached_policy is None:
            cached_policy, _ = self._optimize(s0)
        return C if rng.random() < cached_policy[s0] else Action.DEFECT

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        own_pay, opp_pay = payoff(own_actual, opp_actual, self.params)
        if self._phase_this_round == PHASE_FORGIVING:
            self.stats_c.push(own_pay)
            self.stats_c_lifetime.push(own_pay)
        else:
            self.stats_a.push(own_pay)
            self.stats_a_lifetime.push(own_pay)
            self.stats_o.push(opp_pay)

        if self._own_last is not None:
            self.model.update(
                state_index(self._own_last, self._opp_last), opp_actual, self.p_noise
            )
            if not (
                self.freeze_counters_during_adapt
                and self._phase_this_round == PHASE_ADAPTIVE
            ):
                self.counters.update(self._own_last, opp_actual)
        self._own_last = own_actual
        self._opp_last = opp_actual


class CooperateIso(CompositeStrategy):
    """Forgive first, switch to the optimizer when adapting promises more."""

    name = "cooperate-iso"

    def __init__(self, p_noise: float, params: PayoffParams, **kwargs):
        super().__init__(
            p_noise, params, revert_on_loss=False, revert_on_extortion=False, **kwargs
        )


class CooperateIsoRevert1(CompositeStrategy):
    """CooperateIso plus the underperformance revert rule."""

    name = "cooperate-iso-revert1"

    def __init__(self, p_noise: float, params: PayoffParams, **kwargs):
        super().__init__(
            p_noise, params, revert_on_loss=True, revert_on_extortion=False, **kwargs
        )


class CooperateIsoRevert2(CompositeStrategy):
    """CooperateIso plus both revert rules (underperformance and extortion)."""

    name = "cooperate-iso-revert2"

    def __init__(self, p_noise: float, params: PayoffParams, **kwargs):
        super().__init__(
            p_noise, params, revert_on_loss=True, revert_on_extortion=True, **kwargs
        )
