"""Tournaments, self-play suites, and desiderata audits.

Every run is deterministic given its master seed: match seeds are derived
from (master seed, stream tag, indices) and aggregation order is fixed.
"Steady state" throughout means the final half of a long match, averaged
over many seeded repetitions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ipdlab import registry
from ipdlab.engine import PayoffParams, derive_seed, run_match
from ipdlab.markov_opt import GAMMA_FUTURE, corner_oracle, noise_transform
from ipdlab.zoo import Cooperator, Defector, MemOne, MemOneVector, RandomCoop, TitForTat

# stream tags keeping seed derivations of different experiment kinds apart
_STREAM_TOURNAMENT = 1
_STREAM_SELFPLAY = 2
_STREAM_AUDIT_SELF = 3
_STREAM_AUDIT_INDUCING = 4
_STREAM_AUDIT_ADAPTIVE = 5

DEFAULT_NOISE_LEVELS = (0.0, 0.01, 0.05, 0.10)
STEADY_GAMES = 20
STEADY_LENGTH = 2000


def _check_config(pool: Sequence[str]) -> None:
    bad = registry.validate(list(pool))
    if bad:
        raise registry.UnknownStrategyError(f"unknown strategies in pool: {bad}")


def _map_tasks(tasks: list, fn: Callable, threads: int) -> list:
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


def last_half_mean(series: np.ndarray) -> float:
    return float(series[len(series) // 2 :].mean())


def selfplay_benchmark(q_intended: float, p_noise: float, params: PayoffParams) -> float:
    """Exact per-round self-play payoff when both sides intend to cooperate
    with probability q each round, including noise."""
    a = noise_transform(q_intended, p_noise)
    return (
        a * a * params.r
        + a * (1.0 - a) * (params.s + params.t)
        + (1.0 - a) * (1.0 - a) * params.p
    )


# --------------------------------------------------------------------------
# tournaments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TournamentConfig:
    pool: tuple[str, ...]
    length: int = 400
    repetitions: int = 5
    noise_levels: tuple[float, ...] = DEFAULT_NOISE_LEVELS
    payoffs: PayoffParams = PayoffParams()
    master_seed: int = 0
    threads: int = 1

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError(f"length must be >= 1, got {self.length}")
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        for level in self.noise_levels:
            if not 0.0 <= level <= 0.5:
                raise ValueError(f"noise level {level} outside [0, 0.5]")


@dataclass(frozen=True)
class TournamentRow:
    strategy: str
    noise: float
    mean: float
    stderr: float
    rank: int


@dataclass
class TournamentReport:
    config: TournamentConfig
    rows: list[TournamentRow]
    breakdown: dict[tuple[str, float, str], float] = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["strategy", "noise", "mean", "stderr", "rank"])
        for row in self.rows:
            writer.writerow([row.strategy, repr(row.noise), repr(row.mean),
                             repr(row.stderr), row.rank])
        return buf.getvalue()

    def to_json_dict(self) -> dict:
        return {
            "config": {
                "pool": list(self.config.pool),
                "length": self.config.length,
                "repetitions": self.config.repetitions,
                "noise_levels": list(self.config.noise_levels),
                "master_seed": self.config.master_seed,
            },
            "results": [
                {
                    "strategy": r.strategy,
                    "noise": r.noise,
                    "mean": r.mean,
                    "stderr": r.stderr,
                    "rank": r.rank,
                }
                for r in self.rows
            ],
            "per_opponent": [
                {"strategy": s, "noise": noise, "opponent": o, "mean": m}
                for (s, noise, o), m in sorted(self.breakdown.items())
            ],
        }

    def mean_of(self, strategy: str, noise: float) -> float:
        for row in self.rows:
            if row.strategy == strategy and row.noise == noise:
                return row.mean
        raise KeyError((strategy, noise))


def run_tournament(config: TournamentConfig) -> TournamentReport:
    """Round robin: every pool entry plays ``repetitions`` matches in the
    first seat against every pool entry (itself included) at every noise
    level. Per (strategy, noise) the report gives the mean per-step payoff
    and the standard error sigma / sqrt(repetitions * length), where sigma
    is the per-step payoff sample standard deviation pooled across that
    strategy's matches."""
    _check_config(config.pool)
    pool = list(config.pool)

    def play(task: tuple[int, int, int]) -> tuple[tuple[int, int, int], np.ndarray, np.ndarray]:
        noise_i, i, j = task
        noise = config.noise_levels[noise_i]
        series = []
        for rep in range(config.repetitions):
            seed = derive_seed(config.master_seed, _STREAM_TOURNAMENT, noise_i, i, j, rep)
            a = registry.make(pool[i], noise, config.payoffs)
            b = registry.make(pool[j], noise, config.payoffs)
            result = run_match(a, b, config.length, noise, config.payoffs, seed,
                               record_rounds=False)
            series.append(result.payoffs_a)
        return task, np.concatenate(series), np.empty(0)

    tasks = [
        (noise_i, i, j)
        for noise_i in range(len(config.noise_levels))
        for i in range(len(pool))
        for j in range(len(pool))
    ]
    outputs = _map_tasks(tasks, play, config.threads)
    by_task = {task: series for task, series, _ in outputs}

    rows: list[TournamentRow] = []
    breakdown: dict[tuple[str, float, str], float] = {}
    for noise_i, noise in enumerate(config.noise_levels):
        stats = []
        for i, name in enumerate(pool):
            all_payoffs = np.concatenate(
                [by_task[(noise_i, i, j)] for j in range(len(pool))]
            )
            mean = float(all_payoffs.mean())
            sigma = float(all_payoffs.std(ddof=1))
            stderr = sigma / math.sqrt(config.repetitions * config.length)
            stats.append((name, mean, stderr))
            for j, opp in enumerate(pool):
                breakdown[(name, noise, opp)] = float(by_task[(noise_i, i, j)].mean())
        order = sorted(stats, key=lambda t: (-t[1], t[0]))
        ranks = {name: k + 1 for k, (name, _, _) in enumerate(order)}
        for name, mean, stderr in stats:
            rows.append(TournamentRow(name, noise, mean, stderr, ranks[name]))
    return TournamentReport(config=config, rows=rows, breakdown=breakdown)


# --------------------------------------------------------------------------
# self play
# --------------------------------------------------------------------------


@dataclass
class SelfPlayResult:
    strategy: str
    p_noise: float
    games: int
    length: int
    per_round_mean: np.ndarray
    overall_mean: float
    benchmarks: dict[str, float]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", "mean_payoff"])
        for i, value in enumerate(self.per_round_mean, start=1):
            writer.writerow([i, repr(float(value))])
        return buf.getvalue()

    def to_json_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "p_noise": self.p_noise,
            "games": self.games,
            "length": self.length,
            "overall_mean": self.overall_mean,
            "benchmarks": self.benchmarks,
            "per_round_mean": [float(x) for x in self.per_round_mean],
        }


def self_play_suite(
    strategy: str,
    p_noise: float,
    games: int = 100,
    length: int = 1000,
    params: PayoffParams = PayoffParams(),
    master_seed: int = 0,
    threads: int = 1,
) -> SelfPlayResult:
    """Average payoff per round of a strategy against its own clone, with
    closed-form always-cooperate / 50-50 random / always-defect benchmarks
    under the same noise."""
    if games < 1:
        raise ValueError(f"games must be >= 1, got {games}")
    _check_config([strategy])

    def play(game: int) -> np.ndarray:
        seed = derive_seed(master_seed, _STREAM_SELFPLAY, game)
        a = registry.make(strategy, p_noise, params)
        b = registry.make(strategy, p_noise, params)
        result = run_match(a, b, length, p_noise, params, seed, record_rounds=False)
        return (result.payoffs_a + result.payoffs_b) / 2.0

    curves = _map_tasks(list(range(games)), play, threads)
    per_round = np.mean(np.stack(curves), axis=0)
    return SelfPlayResult(
        strategy=strategy,
        p_noise=p_noise,
        games=games,
        length=length,
        per_round_mean=per_round,
        overall_mean=float(per_round.mean()),
        benchmarks={
            "always_cooperate": selfplay_benchmark(1.0, p_noise, params),
            "random": selfplay_benchmark(0.5, p_noise, params),
            "always_defect": selfplay_benchmark(0.0, p_noise, params),
        },
    )


# --------------------------------------------------------------------------
# desiderata audits
# --------------------------------------------------------------------------


@dataclass
class SelfCooperatingAudit:
    strategy: str
    p_noise: float
    tolerance: float
    measured: float
    benchmark: float
    passed: bool

    def to_json_dict(self) -> dict:
        return self.__dict__.copy()


def audit_self_cooperating(
    strategy: str,
    p_noise: float,
    tolerance: float = 0.1,
    games: int = STEADY_GAMES,
    length: int = STEADY_LENGTH,
    params: PayoffParams = PayoffParams(),
    master_seed: int = 0,
    threads: int = 1,
) -> SelfCooperatingAudit:
    """Steady-state self-play payoff versus the noisy mutual-cooperation
    benchmark: passes when the last-half average is within ``tolerance`` of
    full intended cooperation under the same noise."""
    _check_config([strategy])

    def play(game: int) -> float:
        seed = derive_seed(master_seed, _STREAM_AUDIT_SELF, game)
        a = registry.make(strategy, p_noise, params)
        b = registry.make(strategy, p_noise, params)
        result = run_match(a, b, length, p_noise, params, seed, record_rounds=False)
        return (last_half_mean(result.payoffs_a) + last_half_mean(result.payoffs_b)) / 2.0

    values = _map_tasks(list(range(games)), play, threads)
    measured = float(np.mean(values))
    benchmark = selfplay_benchmark(1.0, p_noise, params)
    return SelfCooperatingAudit(
        strategy=strategy,
        p_noise=p_noise,
        tolerance=tolerance,
        measured=measured,
        benchmark=benchmark,
        passed=measured >= benchmark - tolerance,
    )


def deterministic_memone_probes() -> list[str]:
    """All 32 deterministic memory-1 strategies (16 response rules times two
    first moves) as registry specs."""
    probes = []
    for mask in range(16):
        bits = [(mask >> s) & 1 for s in range(4)]
        vec = ",".join(str(b) for b in bits)
        for first in (1, 0):
            probes.append(f"memone:{vec};first={first}")
    return probes


def default_probe_set() -> list[str]:
    return deterministic_memone_probes() + ["zd:chi=1.5", "zd:chi=2", "zd:chi=3"]


@dataclass
class ProbeOutcome:
    probe: str
    probe_payoff: float
    probe_payoff_max: float
    strategy_payoff: float


@dataclass
class CooperationInducingAudit:
    strategy: str
    p_noise: float
    tolerance: float
    probes: list[ProbeOutcome]
    best_probe: str
    best_probe_payoff: float
    strategy_payoff_vs_best: float
    probe_bound: float
    strategy_floor: float
    passed: bool

    def to_json_dict(self) -> dict:
        out = self.__dict__.copy()
        out["probes"] = [p.__dict__.copy() for p in self.probes]
        return out


def audit_cooperation_inducing(
    strategy: str,
    p_noise: float,
    probe_set: Optional[Sequence[str]] = None,
    tolerance: float = 0.1,
    seeds: int = 6,
    length: int = STEADY_LENGTH,
    tie_epsilon: float = 0.05,
    params: PayoffParams = PayoffParams(),
    master_seed: int = 0,
    threads: int = 1,
) -> CooperationInducingAudit:
    """Probe-based check that payoff-maximizing play against the strategy
    still leaves the strategy near the mutual-cooperation payoff.

    Each probe plays long matches against the strategy; the probes whose
    own steady-state payoff is within ``tie_epsilon`` of the best are all
    treated as candidate optimal play. Passing requires (a) that even the
    least favourable of those near-optimal probes leaves the strategy at
    least R - 2(3R-2S-T) p_noise - tolerance, and (b) that no probe earns
    more than R + (S+2T-3R) p_noise + tolerance in expectation, nor two
    tolerances above that bound in any single long run. The per-run cap
    matters because adaptation against an extortionate opponent can be
    bistable (comply in some runs, lock into mutual defection in others): a
    probe that extracts well above R in a minority of runs already defeats
    the guarantee even when its across-run mean stays low. The noise
    coefficients come from the same leading-order expansion of TFT-style
    best-response play under noise, seen from the two seats (the strategy
    side carries a factor-2 allowance for higher-order terms); at zero
    noise the conditions coincide at R +/- tolerance.

    This is a finite-probe approximation of the definition, not a proof of
    best response.
    """
    _check_config([strategy])
    probes = list(probe_set) if probe_set is not None else default_probe_set()
    _check_config(probes)

    def play(task: tuple[int, int]) -> tuple[float, float]:
        probe_i, seed_i = task
        seed = derive_seed(master_seed, _STREAM_AUDIT_INDUCING, probe_i, seed_i)
        subject = registry.make(strategy, p_noise, params)
        probe = registry.make(probes[probe_i], p_noise, params)
        result = run_match(subject, probe, length, p_noise, params, seed,
                           record_rounds=False)
        return last_half_mean(result.payoffs_a), last_half_mean(result.payoffs_b)

    tasks = [(probe_i, seed_i) for probe_i in range(len(probes)) for seed_i in range(seeds)]
    outputs = _map_tasks(tasks, play, threads)

    outcomes: list[ProbeOutcome] = []
    for probe_i, probe in enumerate(probes):
        chunk = outputs[probe_i * seeds : (probe_i + 1) * seeds]
        outcomes.append(
            ProbeOutcome(
                probe=probe,
                probe_payoff=float(np.mean([c[1] for c in chunk])),
                probe_payoff_max=float(np.max([c[1] for c in chunk])),
                strategy_payoff=float(np.mean([c[0] for c in chunk])),
            )
        )

    best = max(outcomes, key=lambda o: o.probe_payoff)
    near_optimal = [o for o in outcomes if o.probe_payoff >= best.probe_payoff - tie_epsilon]
    worst_for_strategy = min(near_optimal, key=lambda o: o.strategy_payoff)

    r, t, s = params.r, params.t, params.s
    c_probe = s + 2 * t - 3 * r
    c_strategy = 2 * (3 * r - 2 * s - t)
    probe_bound = r + c_probe * p_noise + tolerance
    strategy_floor = r - c_strategy * p_noise - tolerance
    worst_single_run = max(o.probe_payoff_max for o in outcomes)
    passed = (
        best.probe_payoff <= probe_bound
        and worst_single_run <= probe_bound + 2 * tolerance
        and worst_for_strategy.strategy_payoff >= strategy_floor
    )
    return CooperationInducingAudit(
        strategy=strategy,
        p_noise=p_noise,
        tolerance=tolerance,
        probes=outcomes,
        best_probe=best.probe,
        best_probe_payoff=best.probe_payoff,
        strategy_payoff_vs_best=worst_for_strategy.strategy_payoff,
        probe_bound=probe_bound,
        strategy_floor=strategy_floor,
        passed=passed,
    )


DEFAULT_ADAPTIVE_OPPONENTS = (
    "cooperator",
    "defector",
    "random:0.5",
    "tft",
    "pavlov",
    "generous-tft",
    "memone:0.8,0.4,0.6,0.2;first=1",
)


def memone_vector_of(spec: str, params: PayoffParams) -> MemOneVector:
    """True memory-1 vector of an opponent spec, for oracle computations."""
    instance = registry.make(spec, 0.0, params)
    if isinstance(instance, MemOne):
        return instance.vector
    if isinstance(instance, Cooperator):
        return MemOneVector((1.0, 1.0, 1.0, 1.0), 1.0)
    if isinstance(instance, Defector):
        return MemOneVector((0.0, 0.0, 0.0, 0.0), 0.0)
    if isinstance(instance, RandomCoop):
        q = instance.q
        return MemOneVector((q, q, q, q), q)
    if isinstance(instance, TitForTat):
        return MemOneVector((1.0, 0.0, 1.0, 0.0), 1.0)
    raise ValueError(f"{spec!r} is not a memory-1 strategy")


def opponent_view_vector(v: MemOneVector, p_noise: float) -> np.ndarray:
    """Opponent's actual-cooperation probabilities indexed by the *self*
    player's joint state: the CD and DC entries swap (each side indexes
    states by its own action first) and noise is applied."""
    mirrored = (v.p[0], v.p[2], v.p[1], v.p[3])
    return np.array([noise_transform(p, p_noise) for p in mirrored])


@dataclass
class OpponentGap:
    opponent: str
    oracle_value: float
    achieved: float
    gap: float


@dataclass
class AdaptiveAudit:
    strategy: str
    p_noise: float
    tolerance: float
    gaps: list[OpponentGap]
    passed: bool

    def to_json_dict(self) -> dict:
        out = self.__dict__.copy()
        out["gaps"] = [g.__dict__.copy() for g in self.gaps]
        return out


def audit_adaptive(
    strategy: str,
    opponent_set: Optional[Sequence[str]] = None,
    p_noise: float = 0.05,
    tolerance: float = 0.2,
    seeds: int = STEADY_GAMES,
    length: int = STEADY_LENGTH,
    params: PayoffParams = PayoffParams(),
    master_seed: int = 0,
    threads: int = 1,
) -> AdaptiveAudit:
    """Per-opponent gap between the strategy's steady-state payoff and the
    deterministic-policy optimum computed from the opponent's true vector
    (noise applied, discount 0.99, started from mutual cooperation)."""
    _check_config([strategy])
    opponents = list(opponent_set) if opponent_set is not None else list(
        DEFAULT_ADAPTIVE_OPPONENTS
    )
    _check_config(opponents)

    def play(task: tuple[int, int]) -> float:
        opp_i, seed_i = task
        seed = derive_seed(master_seed, _STREAM_AUDIT_ADAPTIVE, opp_i, seed_i)
        subject = registry.make(strategy, p_noise, params)
        opp = registry.make(opponents[opp_i], p_noise, params)
        result = run_match(subject, opp, length, p_noise, params, seed, record_rounds=False)
        return last_half_mean(result.payoffs_a)

    tasks = [(opp_i, seed_i) for opp_i in range(len(opponents)) for seed_i in range(seeds)]
    outputs = _map_tasks(tasks, play, threads)

    gaps: list[OpponentGap] = []
    for opp_i, opp in enumerate(opponents):
        achieved = float(np.mean(outputs[opp_i * seeds : (opp_i + 1) * seeds]))
        view = opponent_view_vector(memone_vector_of(opp, params), p_noise)
        _, oracle_value = corner_oracle(view, 0, GAMMA_FUTURE, params, p_noise)
        gaps.append(
            OpponentGap(
                opponent=opp,
                oracle_value=oracle_value,
                achieved=achieved,
                gap=oracle_value - achieved,
            )
        )
    return AdaptiveAudit(
        strategy=strategy,
        p_noise=p_noise,
        tolerance=tolerance,
        gaps=gaps,
        passed=all(g.gap <= tolerance for g in gaps),
    )


# --------------------------------------------------------------------------
# combined desiderata table
# --------------------------------------------------------------------------

TABLE_STRATEGIES = (
    "tft",
    "generous-tft",
    "contrite-tft",
    "pavlov",
    "longterm-tft",
    "iso",
    "cooperate-iso",
    "cooperate-iso-revert1",
    "cooperate-iso-revert2",
)

#: self-play noise costs differ by healing pattern; a strategy that recovers
#: from a noise event within O(1) rounds stays within ~6 p_noise of the
#: benchmark, while broken strategies (retaliation loops, defect locks) fall
#: far below. 0.3 at 5% noise separates the two groups.
TABLE_SELF_TOLERANCE = 0.3
TABLE_INDUCING_NOISES = (0.0, 0.05)
TABLE_ADAPTIVE_NOISE = 0.05


@dataclass
class DesiderataRow:
    strategy: str
    self_cooperating: bool
    cooperation_inducing: bool
    cooperation_inducing_by_noise: dict[float, bool]
    adaptive: bool
    adaptive_scope: str
    details: dict

    def to_json_dict(self) -> dict:
        out = {
            "strategy": self.strategy,
            "self_cooperating": self.self_cooperating,
            "cooperation_inducing": self.cooperation_inducing,
            "cooperation_inducing_by_noise": {
                repr(k): v for k, v in self.cooperation_inducing_by_noise.items()
            },
            "adaptive": self.adaptive,
            "adaptive_scope": self.adaptive_scope,
        }
        return out


def audit_strategy_desiderata(
    strategy: str,
    params: PayoffParams = PayoffParams(),
    master_seed: int = 0,
    self_noise: float = 0.05,
    self_tolerance: float = TABLE_SELF_TOLERANCE,
    inducing_noises: Sequence[float] = TABLE_INDUCING_NOISES,
    inducing_seeds: int = 6,
    adaptive_noise: float = TABLE_ADAPTIVE_NOISE,
    games: int = STEADY_GAMES,
    length: int = STEADY_LENGTH,
    threads: int = 1,
) -> DesiderataRow:
    """All three desiderata for one strategy.

    Extortionate probes are excluded from the adaptiveness opponent set for
    the extortion-reverting machine: by design it walks away from
    extortioners instead of maximizing against them, so its adaptiveness
    claim is scoped to non-extortionate memory-1 opponents. The default
    opponent set contains no extortionate entries, so the scope label is
    informational.
    """
    self_audit = audit_self_cooperating(
        strategy, self_noise, self_tolerance, games, length, params, master_seed, threads
    )
    inducing: dict[float, CooperationInducingAudit] = {}
    for noise in inducing_noises:
        inducing[noise] = audit_cooperation_inducing(
            strategy,
            noise,
            seeds=inducing_seeds,
            length=length,
            params=params,
            master_seed=master_seed,
            threads=threads,
        )
    adaptive_scope = (
        "non-extortionate memory-1"
        if strategy == "cooperate-iso-revert2"
        else "memory-1"
    )
    adaptive = audit_adaptive(
        strategy,
        p_noise=adaptive_noise,
        seeds=games,
        length=length,
        params=params,
        master_seed=master_seed,
        threads=threads,
    )
    return DesiderataRow(
        strategy=strategy,
        self_cooperating=self_audit.passed,
        cooperation_inducing=all(a.passed for a in inducing.values()),
        cooperation_inducing_by_noise={n: a.passed for n, a in inducing.items()},
        adaptive=adaptive.passed,
        adaptive_scope=adaptive_scope,
        details={
            "self": self_audit,
            "inducing": inducing,
            "adaptive": adaptive,
        },
    )
