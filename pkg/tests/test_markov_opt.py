import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipdlab.engine import C, D, PayoffParams, derive_seed, match_rng, run_match, state_index
from ipdlab.markov_opt import (
    GAMMA_FUTURE,
    Iso,
    OpponentModel,
    ValueQuery,
    corner_oracle,
    discounted_value,
    iso_decide,
    model_init,
    model_update,
    noise_transform,
    optimize_policy,
    transition_matrix,
    value_gradient,
)
from ipdlab.zoo import MemOne, MemOneVector
from ipdlab import registry

PARAMS = PayoffParams()
U = PARAMS.state_payoffs()

probs4 = st.tuples(*[st.floats(0.05, 0.95) for _ in range(4)])


def random_query(rng, p_noise=0.0, interior=True):
    lo, hi = (0.05, 0.95) if interior else (0.0, 1.0)
    return ValueQuery(
        p_self=tuple(rng.uniform(lo, hi, 4)),
        p_opp_n=tuple(rng.uniform(lo, hi, 4)),
        s0=int(rng.integers(0, 4)),
        gamma_future=GAMMA_FUTURE,
        params=PARAMS,
        p_noise=p_noise,
    )


class TestNoiseTransform:
    def test_examples(self):
        assert noise_transform(1.0, 0.05) == pytest.approx(0.95)
        assert noise_transform(0.5, 0.3) == pytest.approx(0.5)
        assert noise_transform(0.0, 0.1) == pytest.approx(0.1)


class TestOpponentModel:
    def test_init_tft_prior(self):
        assert model_init(0.0).coop_rate.tolist() == [1.0, 1.0, 0.0, 0.0]

    def test_init_clamped(self):
        assert model_init(0.05).coop_rate.tolist() == [0.95, 0.95, 0.05, 0.05]

    def test_init_degenerate_noise(self):
        assert model_init(0.5).coop_rate.tolist() == [0.5, 0.5, 0.5, 0.5]

    def test_init_unit_weights(self):
        assert model_init(0.1).weight.tolist() == [1.0, 1.0, 1.0, 1.0]

    def test_update_confirming_observation(self):
        m = model_init(0.0)
        model_update(m, 0, C, 0.0)
        assert m.coop_rate[0] == pytest.approx(1.0)
        assert m.weight[0] == pytest.approx(1.99)

    def test_update_contradicting_observation(self):
        m = model_init(0.0)
        model_update(m, 0, D, 0.0)
        assert m.coop_rate[0] == pytest.approx(0.99 / 1.99)

    def test_update_only_touches_observed_state(self):
        m = model_init(0.0)
        model_update(m, 0, D, 0.0)
        assert m.coop_rate[1:].tolist() == [1.0, 0.0, 0.0]
        assert m.weight[1:].tolist() == [1.0, 1.0, 1.0]

    def test_long_run_clamped_at_noise(self):
        m = model_init(0.05)
        for _ in range(500):
            model_update(m, 3, D, 0.05)
        assert m.coop_rate[3] == pytest.approx(0.05)

    def test_weight_floor(self):
        m = model_init(0.0)
        for _ in range(1000):
            model_update(m, 2, C, 0.0)
        assert np.all(m.weight >= 1.0)


class TestTransitionMatrix:
    def test_mutual_cooperation_absorbing(self):
        T = transition_matrix((1, 1, 1, 1), (1, 1, 1, 1))
        assert np.allclose(T, np.tile([1, 0, 0, 0], (4, 1)))

    def test_tft_alternation_rows(self):
        T = transition_matrix((1, 0, 1, 0), (1, 1, 0, 0))
        assert T[1].tolist() == [0, 0, 1, 0]  # CD -> DC
        assert T[2].tolist() == [0, 1, 0, 0]  # DC -> CD

    @given(p_self=probs4, p_opp=probs4)
    @settings(max_examples=50, deadline=None)
    def test_rows_stochastic(self, p_self, p_opp):
        T = transition_matrix(p_self, p_opp)
        assert np.all(T >= 0)
        assert np.max(np.abs(T.sum(axis=1) - 1.0)) < 1e-12


class TestDiscountedValue:
    def test_dd_absorbing(self):
        q = ValueQuery((0, 0, 0, 0), (0, 0, 0, 0), 3, 0.99, PARAMS, 0.0)
        assert discounted_value(q) == pytest.approx(1.0)

    def test_cc_absorbing(self):
        q = ValueQuery((1, 1, 1, 1), (1, 1, 1, 1), 0, 0.99, PARAMS, 0.0)
        assert discounted_value(q) == pytest.approx(3.0)

    def test_sucker_lock(self):
        q = ValueQuery((1, 1, 1, 1), (0, 0, 0, 0), 0, 0.99, PARAMS, 0.0)
        assert discounted_value(q) == pytest.approx(0.0)

    def test_gamma_strictly_below_one(self):
        with pytest.raises(ValueError):
            ValueQuery((1, 1, 1, 1), (1, 1, 1, 1), 0, 1.0, PARAMS, 0.0)

    def test_matches_series_summation(self):
        # independent oracle: sum gamma^k s0' T^k u directly, k <= 3000
        rng = np.random.default_rng(0)
        for _ in range(100):
            q = random_query(rng, p_noise=float(rng.choice([0.0, 0.05])), interior=False)
            closed = discounted_value(q)
            p_self_n = np.array([noise_transform(p, q.p_noise) for p in q.p_self])
            T = transition_matrix(p_self_n, q.p_opp_n)
            gamma = q.gamma_future
            v = np.zeros(4)
            v[q.s0] = 1.0
            acc = 0.0
            g = 1.0
            for _ in range(3000):
                v = v @ T
                g *= gamma
                acc += g * float(v @ U)
            series = acc * (1.0 - gamma) / gamma
            assert abs(closed - series) < 1e-6

    def test_matches_monte_carlo_rollouts(self):
        # sample the same chain and compare within 3 standard errors
        rng = np.random.default_rng(1)
        q = random_query(rng, p_noise=0.05)
        closed = discounted_value(q)
        p_self_n = np.array([noise_transform(p, q.p_noise) for p in q.p_self])
        T = transition_matrix(p_self_n, q.p_opp_n)
        cum = np.cumsum(T, axis=1)
        n, k_max, gamma = 10_000, 1500, q.gamma_future
        states = np.full(n, q.s0)
        totals = np.zeros(n)
        g = 1.0
        for _ in range(k_max):
            draws = rng.random(n)
            states = (draws[:, None] > cum[states]).sum(axis=1)
            g *= gamma
            totals += g * U[states]
        values = totals * (1.0 - gamma) / gamma
        stderr = values.std(ddof=1) / np.sqrt(n)
        assert abs(values.mean() - closed) < 3 * stderr

    def test_matches_engine_simulation(self):
        # two memory-1 players run through the real engine, noise-free so the
        # first realized state is exactly the intended one
        rng = np.random.default_rng(2)
        v_self = MemOneVector(tuple(rng.uniform(0.2, 0.8, 4)))
        v_opp = MemOneVector(tuple(rng.uniform(0.2, 0.8, 4)))
        s0 = 2  # my D, their C
        mirrored = (v_opp.p[0], v_opp.p[2], v_opp.p[1], v_opp.p[3])
        q = ValueQuery(v_self.p, mirrored, s0, 0.99, PARAMS, 0.0)
        closed = discounted_value(q)
        gamma = 0.99
        weights = gamma ** np.arange(1, 1500)
        samples = []
        for seed in range(800):
            a = MemOne(0.0, PARAMS, MemOneVector(v_self.p, first_move_coop=0.0))
            b = MemOne(0.0, PARAMS, MemOneVector(v_opp.p, first_move_coop=1.0))
            r = run_match(a, b, 1500, 0.0, PARAMS, derive_seed(3, seed), record_rounds=False)
            samples.append(float(weights @ r.payoffs_a[1:]) * (1 - gamma) / gamma)
        stderr = np.std(samples, ddof=1) / np.sqrt(len(samples))
        assert abs(np.mean(samples) - closed) < 3 * stderr


class TestGradient:
    def test_analytic_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            q = random_query(rng, p_noise=float(rng.choice([0.0, 0.05])))
            analytic = value_gradient(q, "analytic")
            fd = value_gradient(q, "fd")
            rel = np.linalg.norm(analytic - fd) / max(np.linalg.norm(fd), 1e-12)
            assert rel <= 1e-4

    def test_cooperation_gradient_nonpositive_against_unresponsive(self):
        # against a fixed-rate opponent, cooperating more only loses payoff
        for c in np.linspace(0.1, 0.9, 9):
            q = ValueQuery((0.5, 0.5, 0.5, 0.5), (c, c, c, c), 0, 0.99, PARAMS, 0.0)
            assert np.all(value_gradient(q, "analytic") <= 1e-9)

    def test_small_gamma_matches_one_step_payoff_gradient(self):
        rng = np.random.default_rng(4)
        p_self = tuple(rng.uniform(0.2, 0.8, 4))
        p_opp = tuple(rng.uniform(0.2, 0.8, 4))
        s0 = 0
        q = ValueQuery(p_self, p_opp, s0, 0.01, PARAMS, 0.0)
        grad = value_gradient(q, "analytic")
        # one-step expectation from s0 depends only on that row
        b = p_opp[s0]
        one_step = b * U[0] + (1 - b) * U[1] - b * U[2] - (1 - b) * U[3]
        assert grad[s0] == pytest.approx(one_step, rel=0.05)
        assert np.all(np.abs(np.delete(grad, s0)) < 0.05 * abs(one_step))

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            value_gradient(random_query(np.random.default_rng(0)), "magic")


class TestOptimizer:
    def test_beats_unresponsive_opponent_like_defection(self):
        for c in (0.2, 0.5, 0.8):
            opp = (c, c, c, c)
            _, val = optimize_policy(opp, 0, 0.99, PARAMS, 0.0)
            q = ValueQuery((0, 0, 0, 0), opp, 0, 0.99, PARAMS, 0.0)
            assert val >= discounted_value(q) - 0.05

    def test_cooperates_with_tft_model(self):
        opp = tuple(noise_transform(p, 0.01) for p in (1, 1, 0, 0))
        policy, val = optimize_policy(opp, 0, 0.99, PARAMS, 0.01)
        coop_value = discounted_value(ValueQuery((1, 1, 1, 1), opp, 0, 0.99, PARAMS, 0.01))
        assert val >= coop_value - 0.05
        assert policy.p[0] > 0.9

    def test_returned_value_at_least_start(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            opp = tuple(rng.uniform(0, 1, 4))
            _, val = optimize_policy(opp, 0, 0.99, PARAMS, 0.0)
            start = discounted_value(ValueQuery((0.5,) * 4, opp, 0, 0.99, PARAMS, 0.0))
            assert val >= start - 1e-6

    def test_probabilities_stay_in_unit_cube(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            opp = tuple(rng.uniform(0, 1, 4))
            policy, _ = optimize_policy(opp, int(rng.integers(4)), 0.99, PARAMS, 0.05)
            assert all(0.0 <= p <= 1.0 for p in policy.p)

    def test_never_below_corner_oracle(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            opp = tuple(rng.uniform(0, 1, 4))
            s0 = int(rng.integers(4))
            noise = float(rng.choice([0.0, 0.05]))
            _, val = optimize_policy(opp, s0, 0.99, PARAMS, noise)
            _, corner = corner_oracle(opp, s0, 0.99, PARAMS, noise)
            assert val >= corner - 0.05


class TestCornerOracle:
    def test_only_punishment_available(self):
        policy, val = corner_oracle((0, 0, 0, 0), 3, 0.99, PARAMS, 0.0)
        assert val == pytest.approx(1.0)
        assert policy.p[3] == 0.0

    def test_exploits_unconditional_cooperator(self):
        _, val = corner_oracle((1, 1, 1, 1), 0, 0.99, PARAMS, 0.0)
        assert val == pytest.approx(5.0)


class TestIsoDecide:
    def sample_rate(self, model, state, p_noise, draws=200):
        rng = match_rng(11)
        coops = sum(
            iso_decide(model, state, 0.99, PARAMS, p_noise, rng) is C for _ in range(draws)
        )
        return coops / draws

    def test_defects_against_cooperator_model(self):
        m = OpponentModel(coop_rate=np.array([0.95, 0.95, 0.95, 0.95]), weight=np.ones(4) * 50)
        assert self.sample_rate(m, 0, 0.0) <= 0.05

    def test_defects_against_defector_model(self):
        m = OpponentModel(coop_rate=np.array([0.05, 0.05, 0.05, 0.05]), weight=np.ones(4) * 50)
        assert self.sample_rate(m, 3, 0.0) <= 0.05

    def test_cooperates_with_tft_prior(self):
        m = model_init(0.01)
        assert self.sample_rate(m, 0, 0.01) >= 0.9


class TestIsoStrategy:
    def test_first_round_cooperates(self):
        strat = Iso(0.05, PARAMS)
        assert strat.decide(match_rng(0)) is C

    def test_model_update_uses_preceding_state(self):
        strat = Iso(0.0, PARAMS)
        strat.observe(C, D)  # round 1: no preceding state, model untouched
        assert strat.model.coop_rate.tolist() == [1.0, 1.0, 0.0, 0.0]
        strat.observe(C, D)  # round 2 reaction attributed to state CD
        assert strat.model.coop_rate[state_index(C, D)] == pytest.approx(0.99 / 1.99)

    def test_debug_sink_receives_decisions(self):
        events = []
        strat = Iso(0.0, PARAMS, debug_sink=events.append)
        rng = match_rng(0)
        strat.decide(rng)
        strat.observe(C, C)
        strat.decide(rng)
        assert len(events) == 1
        assert set(events[0]) == {"round", "model", "policy", "value"}

    def test_exploits_cooperator_under_noise(self):
        result = run_match(
            registry.make("iso", 0.05, PARAMS),
            registry.make("cooperator", 0.05, PARAMS),
            2000, 0.05, PARAMS, seed=derive_seed(8, 0), record_rounds=False,
        )
        assert result.payoffs_a[1000:].mean() >= 4.5

    def test_locks_onto_defector(self):
        result = run_match(
            registry.make("iso", 0.0, PARAMS),
            registry.make("defector", 0.0, PARAMS),
            2000, 0.0, PARAMS, seed=derive_seed(8, 1), record_rounds=False,
        )
        assert result.payoffs_a[1000:].mean() == pytest.approx(1.0)
