"""Adaptive play against memory-1 opponents.

Maintains a discounted estimate of the opponent's cooperation rate in each
joint state, evaluates the exact discounted payoff of any own memory-1
policy against that estimate by solving a 4x4 linear system, and climbs it
with Adam. The `iso` strategy replays this optimization every round and
samples its move from the resulting policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from ipdlab import _kernels
from ipdlab._kernels import ADAM_LR, ADAM_STEPS
from ipdlab.base import Strategy
from ipdlab.engine import Action, C, D, JointState, PayoffParams, state_index
from ipdlab.zoo import MemOneVector

GAMMA_FUTURE = 0.99
GAMMA_PAST = 0.99


def noise_transform(p: float, p_noise: float) -> float:
    """Probability that an action intended with cooperation probability p
    comes out as cooperation after the noise flip."""
    return (1.0 - p_noise) * p + p_noise * (1.0 - p)


@dataclass
class OpponentModel:
    """Discounted per-state cooperation-rate estimate of the opponent.

    Rates are kept inside [p_noise, 1 - p_noise]: nothing outside that
    interval is observable under the noise model. The initial state is a
    single pseudo-observation of a TFT opponent in each state, which keeps
    every estimate well-defined from round one.
    """

    coop_rate: np.ndarray
    weight: np.ndarray
    gamma_past: float = GAMMA_PAST

    @classmethod
    def fresh(cls, p_noise: float, gamma_past: float = GAMMA_PAST) -> "OpponentModel":
        base = np.array([1.0, 1.0, 0.0, 0.0])  # TFT echoes our own last action
        rate = np.clip(base, p_noise, 1.0 - p_noise)
        return cls(coop_rate=rate, weight=np.ones(4), gamma_past=gamma_past)

    def update(self, state: int, opp_actual: Action, p_noise: float) -> None:
        """Fold in one observed reaction: the opponent played ``opp_actual``
        out of joint state ``state``."""
        w_old = self.weight[state]
        w_new = self.gamma_past * w_old + 1.0
        observed = 1.0 if opp_actual is C else 0.0
        rate = (self.gamma_past * w_old * self.coop_rate[state] + observed) / w_new
        self.weight[state] = w_new
        self.coop_rate[state] = min(max(rate, p_noise), 1.0 - p_noise)


def model_init(p_noise: float) -> OpponentModel:
    return OpponentModel.fresh(p_noise)


def model_update(
    m: OpponentModel, state: Union[int, JointState], opp_actual: Action, p_noise: float
) -> OpponentModel:
    m.update(state.index if isinstance(state, JointState) else int(state), opp_actual, p_noise)
    return m


def _as_probs(p: Union[MemOneVector, Sequence[float], np.ndarray]) -> np.ndarray:
    if isinstance(p, MemOneVector):
        arr = p.as_array()
    else:
        arr = np.asarray(p, dtype=np.float64)
    if arr.shape != (4,):
        raise ValueError(f"expected 4 probabilities, got shape {arr.shape}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError(f"probabilities outside [0, 1]: {arr}")
    return arr


def _as_state(s0: Union[int, JointState]) -> int:
    idx = s0.index if isinstance(s0, JointState) else int(s0)
    if not 0 <= idx <= 3:
        raise ValueError(f"state index must be 0..3, got {idx}")
    return idx


def transition_matrix(
    p_self_n: Union[Sequence[float], np.ndarray], p_opp_n: Union[Sequence[float], np.ndarray]
) -> np.ndarray:
    """Row-stochastic joint-state transition matrix for two noise-inclusive
    memory-1 vectors, both expressed from the self player's perspective."""
    return _kernels.build_transition(_as_probs(p_self_n), _as_probs(p_opp_n))


@dataclass(frozen=True)
class ValueQuery:
    """One evaluation of an intended own policy against an opponent vector
    that already includes noise, starting from joint state ``s0``."""

    p_self: Union[MemOneVector, tuple[float, float, float, float]]
    p_opp_n: tuple[float, float, float, float]
    s0: Union[int, JointState]
    gamma_future: float = GAMMA_FUTURE
    params: PayoffParams = PayoffParams()
    p_noise: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma_future < 1.0:
            raise ValueError(f"gamma_future must lie strictly in (0, 1), got {self.gamma_future}")
        _as_probs(self.p_self)
        _as_probs(self.p_opp_n)
        _as_state(self.s0)


def discounted_value(q: ValueQuery) -> float:
    """Average expected discounted payoff per round, via the closed form
    (1-g) s0' T (I - g T)^{-1} u rather than summing the series."""
    return float(
        _kernels.value_kernel(
            _as_probs(q.p_self),
            _as_probs(q.p_opp_n),
            _as_state(q.s0),
            q.gamma_future,
            q.params.state_payoffs(),
            q.p_noise,
        )
    )


FD_STEP = 1e-5


def value_gradient(q: ValueQuery, method: str = "analytic") -> np.ndarray:
    """Gradient of the discounted value with respect to the four intended
    own cooperation probabilities.

    ``analytic`` differentiates the matrix inverse directly and is the
    production path; ``fd`` uses central finite differences and exists as
    an independent cross-check.
    """
    p_self = _as_probs(q.p_self)
    p_opp = _as_probs(q.p_opp_n)
    s0 = _as_state(q.s0)
    u = q.params.state_payoffs()
    if method == "analytic":
        _, grad = _kernels.value_grad_kernel(p_self, p_opp, s0, q.gamma_future, u, q.p_noise)
        return grad
    if method == "fd":
        grad = np.empty(4)
        for i in range(4):
            hi = p_self.copy()
            lo = p_self.copy()
            hi[i] += FD_STEP
            lo[i] -= FD_STEP
            f_hi = _kernels.value_kernel(hi, p_opp, s0, q.gamma_future, u, q.p_noise)
            f_lo = _kernels.value_kernel(lo, p_opp, s0, q.gamma_future, u, q.p_noise)
            grad[i] = (f_hi - f_lo) / (2.0 * FD_STEP)
        return grad
    raise ValueError(f"unknown gradient method {method!r}")


def optimize_policy(
    p_opp_n: Union[Sequence[float], np.ndarray],
    s0: Union[int, JointState],
    gamma: float = GAMMA_FUTURE,
    params: PayoffParams = PayoffParams(),
    p_noise: float = 0.0,
) -> tuple[MemOneVector, float]:
    """Best memory-1 response to an opponent vector, by Adam ascent
    (50 steps, learning rate 0.1, started from the cube centre, projected
    onto [0, 1] after each step). Returns the best iterate and its value."""
    p_opp = _as_probs(p_opp_n)
    s0_idx = _as_state(s0)
    best_p, best_val = _kernels.adam_kernel(
        p_opp, s0_idx, gamma, params.state_payoffs(), p_noise, ADAM_STEPS, ADAM_LR
    )
    vec = MemOneVector(tuple(float(x) for x in best_p), first_move_coop=float(best_p[s0_idx]))
    return vec, float(best_val)


def corner_oracle(
    p_opp_n: Union[Sequence[float], np.ndarray],
    s0: Union[int, JointState],
    gamma: float = GAMMA_FUTURE,
    params: PayoffParams = PayoffParams(),
    p_noise: float = 0.0,
) -> tuple[MemOneVector, float]:
    """Exhaustive optimum over the 16 deterministic memory-1 policies.

    Valid as an oracle bound: against a fixed memory-1 opponent the self
    player faces a 4-state 2-action Markov decision problem, whose optimum
    is attained by a deterministic stationary policy.
    """
    p_opp = _as_probs(p_opp_n)
    s0_idx = _as_state(s0)
    best_p, best_val = _kernels.corner_kernel(
        p_opp, s0_idx, gamma, params.state_payoffs(), p_noise
    )
    vec = MemOneVector(tuple(float(x) for x in best_p), first_move_coop=float(best_p[s0_idx]))
    return vec, float(best_val)


def iso_decide(
    model: OpponentModel,
    current_state: Union[int, JointState],
    gamma: float,
    params: PayoffParams,
    p_noise: float,
    rng: np.random.Generator,
) -> Action:
    """Optimize against the current model from the current state and sample
    the optimized cooperation probability for that state."""
    s0 = _as_state(current_state)
    policy, _ = optimize_policy(model.coop_rate, s0, gamma, params, p_noise)
    return C if rng.random() < policy.p[s0] else D


class Iso(Strategy):
    """Fits the opponent model online and best-responds to it every round.

    The first round has no joint state; the strategy assumes mutual
    cooperation and intends to cooperate. ``debug_sink``, when set, receives
    one dict per decision with the model, optimized policy, and value.
    """

    name = "iso"

    def __init__(
        self,
        p_noise: float,
        params: PayoffParams,
        gamma: float = GAMMA_FUTURE,
        debug_sink: Optional[Callable[[dict], None]] = None,
    ):
        super().__init__(p_noise, params)
        self.gamma = gamma
        self.model = OpponentModel.fresh(p_noise)
        self.debug_sink = debug_sink
        self._own_last: Optional[Action] = None
        self._opp_last: Optional[Action] = None
        self._round = 0
        self._u = params.state_payoffs()

    def decide(self, rng: np.random.Generator) -> Action:
        self._round += 1
        if self._own_last is None:
            return C
        s0 = state_index(self._own_last, self._opp_last)
        best_p, best_val = _kernels.adam_kernel(
            self.model.coop_rate, s0, self.gamma, self._u, self.p_noise, ADAM_STEPS, ADAM_LR
        )
        if self.debug_sink is not None:
            self.debug_sink(
                {
                    "round": self._round,
                    "model": [float(x) for x in self.model.coop_rate],
                    "policy": [float(x) for x in best_p],
                    "value": float(best_val),
                }
            )
        return C if rng.random() < best_p[s0] else D

    def observe(self, own_actual: Action, opp_actual: Action) -> None:
        if self._own_last is not None:
            prev_state = state_index(self._own_last, self._opp_last)
            self.model.update(prev_state, opp_actual, self.p_noise)
        self._own_last = own_actual
        self._opp_last = opp_actual
