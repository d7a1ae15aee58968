from fractions import Fraction

import numpy as np
import pytest

from ipdlab.engine import C, D, PayoffParams, match_rng, run_match, state_index
from ipdlab.zoo import (
    ContriteTitForTat,
    GenerousTitForTat,
    GrimTrigger,
    MemOne,
    MemOneVector,
    TitForTwoTats,
    memone_step,
    zd_extortion,
    zd_max_phi,
)
from ipdlab import registry

PARAMS = PayoffParams()


class TestMemOneStep:
    def test_tft_encoding(self):
        v = MemOneVector((1, 0, 1, 0))
        rng = match_rng(0)
        assert memone_step(v, state_index(C, D), rng) is D
        assert memone_step(v, state_index(D, C), rng) is C

    def test_pavlov_encoding(self):
        v = MemOneVector((1, 0, 0, 1))
        rng = match_rng(0)
        assert memone_step(v, state_index(D, D), rng) is C
        assert memone_step(v, state_index(C, D), rng) is D

    def test_defector_encoding(self):
        v = MemOneVector((0, 0, 0, 0), first_move_coop=0)
        rng = match_rng(0)
        for state in [None, 0, 1, 2, 3]:
            assert memone_step(v, state, rng) is D

    def test_first_move_uses_first_probability(self):
        rng = match_rng(0)
        assert memone_step(MemOneVector((0, 0, 0, 0), first_move_coop=1.0), None, rng) is C

    def test_consumes_exactly_one_draw(self):
        # a deterministic vector must not perturb the stream differently
        v = MemOneVector((1, 0, 1, 0))
        rng_a = match_rng(42)
        memone_step(v, 0, rng_a)
        rng_b = match_rng(42)
        rng_b.random()
        assert rng_a.random() == rng_b.random()

    def test_probability_bounds_validated(self):
        with pytest.raises(ValueError):
            MemOneVector((1.2, 0, 0, 0))
        with pytest.raises(ValueError):
            MemOneVector((1, 0, 0, 0), first_move_coop=-0.1)


class TestZdExtortion:
    def test_reference_vector(self):
        v = zd_extortion(3.0, 1 / 26, PARAMS)
        expected = (Fraction(11, 13), Fraction(1, 2), Fraction(7, 26), Fraction(0))
        for got, want in zip(v.p, expected):
            assert got == pytest.approx(float(want), abs=1e-12)
        assert v.first_move_coop == 0.0

    def test_fair_limit_no_extortion_at_cc(self):
        v = zd_extortion(1.0, 1 / 26, PARAMS)
        assert v.p[0] == pytest.approx(1.0)

    def test_infeasible_phi_names_bound(self):
        with pytest.raises(ValueError, match="p_CD"):
            zd_extortion(3.0, 1.0, PARAMS)

    def test_max_phi_feasible(self):
        for chi in (1.5, 2.0, 3.0):
            zd_extortion(chi, zd_max_phi(chi, PARAMS), PARAMS)
            with pytest.raises(ValueError):
                zd_extortion(chi, zd_max_phi(chi, PARAMS) * 1.01, PARAMS)

    def test_default_phi_matches_reference(self):
        # half the feasible maximum reproduces the 1/26 normalization for chi=3
        strat = registry.make("zd:chi=3", 0.0, PARAMS)
        assert strat.phi == pytest.approx(1 / 26)

    @pytest.mark.parametrize("opp_seed", [0, 1])
    def test_enforced_payoff_relation(self, opp_seed):
        # the construction pins (own - P) = chi (opp - P) in long-run averages
        rng = np.random.default_rng(opp_seed)
        chi = 3.0
        opp_vec = MemOneVector(tuple(rng.uniform(0.1, 0.9, size=4)), 0.5)
        zd = registry.make("zd:chi=3", 0.0, PARAMS)
        opp = MemOne(0.0, PARAMS, opp_vec)
        result = run_match(zd, opp, 100_000, 0.0, PARAMS, seed=opp_seed, record_rounds=False)
        lhs = result.avg_payoff_a - PARAMS.p
        rhs = chi * (result.avg_payoff_b - PARAMS.p)
        assert abs(lhs - rhs) <= 0.05


class TestClassics:
    def test_tft_first_move(self):
        strat = registry.make("tft", 0.0, PARAMS)
        assert strat.decide(match_rng(0)) is C

    def test_grim_trigger_permanent(self):
        strat = GrimTrigger(0.0, PARAMS)
        rng = match_rng(0)
        strat.observe(C, D)
        for _ in range(5):
            assert strat.decide(rng) is D
            strat.observe(D, C)

    def test_random_rate(self):
        # binomial: std of the rate is 0.005 at n=1e4, so 0.02 is 4 sigma
        strat = registry.make("random:0.5", 0.0, PARAMS)
        rng = match_rng(7)
        n = 10_000
        coops = sum(strat.decide(rng) is C for _ in range(n))
        assert abs(coops / n - 0.5) < 0.02

    def test_tit_for_two_tats(self):
        strat = TitForTwoTats(0.0, PARAMS)
        rng = match_rng(0)
        strat.observe(C, D)
        assert strat.decide(rng) is C  # one defection forgiven
        strat.observe(C, D)
        assert strat.decide(rng) is D  # two in a row retaliated
        strat.observe(D, C)
        assert strat.decide(rng) is C

    def test_generous_tft_level(self):
        # 3/5 of the indifference level 1/3: alternating defection against
        # this must be strictly worse than cooperating
        strat = GenerousTitForTat(0.0, PARAMS)
        assert strat.generosity == pytest.approx(0.2)
        assert strat.vector.p == (1.0, 0.2, 1.0, 0.2)
        alternation = (PARAMS.t + strat.generosity * PARAMS.r
                       + (1 - strat.generosity) * PARAMS.s) / 2
        assert alternation < PARAMS.r - 0.05

    def test_contrite_atones_after_own_noise_defection(self):
        strat = ContriteTitForTat(0.0, PARAMS)
        rng = match_rng(0)
        # own action came out D against a good-standing opponent
        strat.observe(D, C)
        assert not strat._own_good
        assert strat.decide(rng) is C  # contrite
        strat.observe(C, D)  # opponent retaliates; justified, keeps their standing
        assert strat._own_good
        assert strat._opp_good
        assert strat.decide(rng) is C

    def test_contrite_retaliates_unprovoked_defection(self):
        strat = ContriteTitForTat(0.0, PARAMS)
        rng = match_rng(0)
        strat.observe(C, D)  # opponent defected while we were in good standing
        assert not strat._opp_good
        assert strat.decide(rng) is D

    def test_contrite_self_play_recovers_in_one_round(self):
        a = ContriteTitForTat(0.0, PARAMS)
        b = ContriteTitForTat(0.0, PARAMS)
        rng = match_rng(0)
        # noise flips a's first action; afterwards play is noise-free
        a.observe(D, C)
        b.observe(C, D)
        actions = []
        for _ in range(3):
            ia, ib = a.decide(rng), b.decide(rng)
            actions.append((ia, ib))
            a.observe(ia, ib)
            b.observe(ib, ia)
        assert actions[0] == (C, D)  # atonement meets justified retaliation
        assert actions[1] == (C, C)
        assert actions[2] == (C, C)


class TestRegistry:
    def test_memone_spec_parsing(self):
        strat = registry.make("memone:1,0,1,0;first=1", 0.0, PARAMS)
        assert strat.vector.p == (1.0, 0.0, 1.0, 0.0)
        assert strat.vector.first_move_coop == 1.0

    def test_unknown_strategy(self):
        with pytest.raises(registry.UnknownStrategyError):
            registry.make("omega-tft", 0.0, PARAMS)

    def test_validate_lists_bad_names(self):
        assert registry.validate(["tft", "nope", "zd:chi=3"]) == ["nope"]

    def test_all_defaults_resolvable(self):
        assert registry.validate(registry.DEFAULT_POOL) == []

    def test_spec_name_attached(self):
        strat = registry.make("zd:chi=2,phi=0.01", 0.0, PARAMS)
        assert strat.spec_name == "zd:chi=2,phi=0.01"

    def test_listing_mentions_parametric_forms(self):
        listing = registry.list_strategies()
        assert "zd" in listing and "chi" in listing["zd"]
        assert "longterm-tft" in listing
