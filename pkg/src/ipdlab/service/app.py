"""HTTP wiring around the handler functions."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from ipdlab import __version__
from ipdlab.registry import UnknownStrategyError
from ipdlab.service import handlers, schemas


def create_app() -> FastAPI:
    app = FastAPI(
        title="ipdlab",
        version=__version__,
        description="Noisy iterated prisoner's dilemma matches, tournaments, and audits",
    )

    @app.exception_handler(UnknownStrategyError)
    async def unknown_strategy(request, exc: UnknownStrategyError):
        raise HTTPException(status_code=422, detail=str(exc))

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.get("/strategies", response_model=schemas.StrategyListResponse)
    def strategies() -> schemas.StrategyListResponse:
        return handlers.handle_strategies()

    @app.post("/match", response_model=schemas.MatchResponse)
    def match(req: schemas.MatchRequest) -> schemas.MatchResponse:
        try:
            return handlers.handle_match(req)
        except (UnknownStrategyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/tournament", response_model=schemas.TournamentResponse)
    def tournament(req: schemas.TournamentRequest) -> schemas.TournamentResponse:
        try:
            return handlers.handle_tournament(req)
        except (UnknownStrategyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/selfplay", response_model=schemas.SelfPlayResponse)
    def selfplay(req: schemas.SelfPlayRequest) -> schemas.SelfPlayResponse:
        try:
            return handlers.handle_selfplay(req)
        except (UnknownStrategyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    @app.post("/audit", response_model=schemas.AuditResponse)
    def audit(req: schemas.AuditRequest) -> schemas.AuditResponse:
        try:
            return handlers.handle_audit(req)
        except (UnknownStrategyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))

    return app


app = create_app()
