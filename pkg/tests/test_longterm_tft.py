import numpy as np
import pytest

from ipdlab.engine import C, D, PayoffParams, derive_seed, match_rng, run_match
from ipdlab.longterm_tft import (
    ForgivenessCounters,
    LongtermTft,
    forgiving_decision,
    z_statistic,
)
from ipdlab import registry

PARAMS = PayoffParams()


class TestZStatistic:
    def test_zero_counts(self):
        assert z_statistic(ForgivenessCounters(0, 0), 0.1) == 0.0

    def test_observed_equals_expectation(self):
        assert z_statistic(ForgivenessCounters(100, 5), 0.05) == 0.0

    def test_small_sample_floors_denominator(self):
        # variance 0.9 < 1, so the denominator is 1 and z = 3 - 1
        assert z_statistic(ForgivenessCounters(10, 3), 0.1) == pytest.approx(2.0)

    def test_null_calibration(self):
        # opponent defects i.i.d. at exactly the noise rate after cooperations
        rng = np.random.default_rng(7)
        p = 0.05
        n_c = 500
        zs = []
        for _ in range(1000):
            n_cd = rng.binomial(n_c, p)
            zs.append(z_statistic(ForgivenessCounters(n_c, n_cd), p))
        zs = np.asarray(zs)
        assert abs(zs.mean()) < 0.1
        assert abs(zs.std() - 1.0) < 0.15


class TestCounters:
    def test_cooperation_then_defection(self):
        c = ForgivenessCounters()
        c.update(C, D)
        assert (c.n_c, c.n_cd) == (1, 1)

    def test_own_defection_ignored(self):
        c = ForgivenessCounters()
        c.update(D, D)
        assert (c.n_c, c.n_cd) == (0, 0)

    def test_rewarded_cooperation(self):
        c = ForgivenessCounters()
        c.update(C, C)
        assert (c.n_c, c.n_cd) == (1, 0)

    def test_most_recent_own_action_not_counted(self):
        strat = LongtermTft(0.0, PARAMS)
        strat.observe(C, C)
        # only one completed pairing exists after two rounds
        strat.observe(C, C)
        assert strat.counters.n_c == 1


class TestDecision:
    def test_first_round_cooperates(self):
        strat = LongtermTft(0.05, PARAMS)
        assert strat.decide(match_rng(0)) is C

    def test_forgives_when_consistent_with_noise(self):
        counters = ForgivenessCounters(n_c=20, n_cd=1)
        assert z_statistic(counters, 0.05) < 2
        assert forgiving_decision(counters, opp_last=D, p_noise=0.05) is C

    def test_retaliates_below_minimum_cooperations(self):
        counters = ForgivenessCounters(n_c=4, n_cd=0)
        assert forgiving_decision(counters, opp_last=D, p_noise=0.05) is D

    def test_retaliates_once_statistic_crosses(self):
        counters = ForgivenessCounters(n_c=20, n_cd=6)
        assert z_statistic(counters, 0.0) >= 2
        assert forgiving_decision(counters, opp_last=D, p_noise=0.0) is D


class ScriptedOpponent:
    """Cooperates except on scripted round numbers."""

    def __init__(self, p_noise, params, defect_rounds):
        self.p_noise = p_noise
        self.params = params
        self.defect_rounds = set(defect_rounds)
        self.round = 0

    def decide(self, rng):
        self.round += 1
        return D if self.round in self.defect_rounds else C

    def observe(self, own, opp):
        pass


class TestBehaviour:
    def test_never_defects_against_reciprocator_without_noise(self):
        result = run_match(
            registry.make("longterm-tft", 0.0, PARAMS),
            registry.make("tft", 0.0, PARAMS),
            500, 0.0, PARAMS, seed=1,
        )
        assert result.avg_payoff_a == 3.0

    def test_forgives_at_most_two_unprovoked_defections(self):
        # with p_noise * n_c < 1 the denominator floors at 1, so the budget
        # is at most 2; here every opponent defection is unprovoked
        strat = LongtermTft(0.0, PARAMS)
        opp = ScriptedOpponent(0.0, PARAMS, defect_rounds=[10, 14, 18, 22, 26])
        result = run_match(strat, opp, 30, 0.0, PARAMS, seed=0)
        forgiven = sum(
            1
            for i, r in enumerate(result.rounds[:-1])
            if r.actual_b is D and result.rounds[i + 1].actual_a is C
        )
        assert forgiven <= 2
        # retaliation happened at some point after the budget ran out
        assert any(r.actual_a is D for r in result.rounds)

    def test_selfplay_steady_state_near_noisy_cooperation(self):
        # closed form: (1-p)^2 R + p(1-p)(T+S) + p^2 P = 2.9475 at p = 0.05
        last_half = []
        for s in range(10):
            result = run_match(
                registry.make("longterm-tft", 0.05, PARAMS),
                registry.make("longterm-tft", 0.05, PARAMS),
                2000, 0.05, PARAMS, seed=derive_seed(5, s), record_rounds=False,
            )
            last_half.append(
                (result.payoffs_a[1000:].mean() + result.payoffs_b[1000:].mean()) / 2
            )
        assert abs(np.mean(last_half) - 2.9475) < 0.05
