"""Service operations as plain request-model to response-model functions.

The FastAPI routes and the CLI both call these, so local CLI runs and HTTP
requests produce identical results.
"""

from __future__ import annotations

from ipdlab import registry
from ipdlab.composite import CompositeStrategy
from ipdlab.engine import PayoffParams, run_match
from ipdlab.harness import (
    TABLE_INDUCING_NOISES,
    TABLE_SELF_TOLERANCE,
    TournamentConfig,
    audit_adaptive,
    audit_cooperation_inducing,
    audit_self_cooperating,
    run_tournament,
    self_play_suite,
)
from ipdlab.markov_opt import Iso
from ipdlab.service import schemas


def _params(model: schemas.PayoffModel) -> PayoffParams:
    return PayoffParams(model.t, model.r, model.p, model.s)


def handle_match(req: schemas.MatchRequest) -> schemas.MatchResponse:
    params = _params(req.payoffs)
    trace: list[dict] = []

    def build(spec: str, side: str):
        strat = registry.make(spec, req.noise, params)
        if req.trace:
            if isinstance(strat, CompositeStrategy):
                strat.trace_sink = lambda event, side=side: trace.append(
                    {"player": side, **event}
                )
            elif isinstance(strat, Iso):
                strat.debug_sink = lambda event, side=side: trace.append(
                    {"player": side, **event}
                )
        return strat

    result = run_match(
        build(req.a, "a"),
        build(req.b, "b"),
        req.length,
        req.noise,
        params,
        req.seed,
        record_rounds=req.record_rounds,
    )
    rounds = None
    if req.record_rounds:
        rounds = [
            schemas.RoundModel(
                intended_a=r.intended_a.value,
                intended_b=r.intended_b.value,
                actual_a=r.actual_a.value,
                actual_b=r.actual_b.value,
                payoff_a=r.payoff_a,
                payoff_b=r.payoff_b,
            )
            for r in result.rounds
        ]
    return schemas.MatchResponse(
        a=req.a,
        b=req.b,
        seed=result.seed,
        avg_payoff_a=result.avg_payoff_a,
        avg_payoff_b=result.avg_payoff_b,
        rounds=rounds,
        trace=trace if req.trace else None,
    )


def handle_tournament(req: schemas.TournamentRequest) -> schemas.TournamentResponse:
    pool = tuple(req.pool) if req.pool else tuple(registry.DEFAULT_POOL)
    config = TournamentConfig(
        pool=pool,
        length=req.length,
        repetitions=req.repetitions,
        noise_levels=tuple(req.noise_levels),
        payoffs=_params(req.payoffs),
        master_seed=req.master_seed,
        threads=req.threads,
    )
    report = run_tournament(config)
    payload = report.to_json_dict()
    return schemas.TournamentResponse(
        pool=list(pool),
        length=req.length,
        repetitions=req.repetitions,
        noise_levels=list(req.noise_levels),
        master_seed=req.master_seed,
        results=[schemas.TournamentRowModel(**row) for row in payload["results"]],
        per_opponent=[schemas.PerOpponentModel(**row) for row in payload["per_opponent"]],
    )


def handle_selfplay(req: schemas.SelfPlayRequest) -> schemas.SelfPlayResponse:
    result = self_play_suite(
        req.strategy,
        req.noise,
        games=req.games,
        length=req.length,
        params=_params(req.payoffs),
        master_seed=req.master_seed,
        threads=req.threads,
    )
    return schemas.SelfPlayResponse(
        strategy=req.strategy,
        noise=req.noise,
        games=req.games,
        length=req.length,
        overall_mean=result.overall_mean,
        benchmarks=result.benchmarks,
        per_round_mean=[float(x) for x in result.per_round_mean],
    )


def handle_audit(req: schemas.AuditRequest) -> schemas.AuditResponse:
    params = _params(req.payoffs)
    results: dict = {}
    passed = True
    common = dict(params=params, master_seed=req.master_seed, threads=req.threads)
    if req.which in ("self", "all"):
        audit = audit_self_cooperating(
            req.strategy,
            req.noise,
            tolerance=TABLE_SELF_TOLERANCE,
            games=req.games,
            length=req.length,
            **common,
        )
        results["self"] = audit.to_json_dict()
        passed = passed and audit.passed
    if req.which in ("inducing", "all"):
        noises = TABLE_INDUCING_NOISES if req.which == "all" else (req.noise,)
        inducing = {}
        for noise in noises:
            audit = audit_cooperation_inducing(
                req.strategy, noise, length=req.length, **common
            )
            inducing[repr(noise)] = audit.to_json_dict()
            passed = passed and audit.passed
        results["inducing"] = inducing
    if req.which in ("adaptive", "all"):
        audit = audit_adaptive(
            req.strategy, p_noise=req.noise, seeds=req.games, length=req.length, **common
        )
        results["adaptive"] = audit.to_json_dict()
        passed = passed and audit.passed
    return schemas.AuditResponse(
        strategy=req.strategy, which=req.which, passed=passed, results=results
    )


def handle_strategies() -> schemas.StrategyListResponse:
    return schemas.StrategyListResponse(
        strategies=registry.list_strategies(),
        default_pool=list(registry.DEFAULT_POOL),
    )
