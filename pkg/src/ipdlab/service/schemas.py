"""Request and response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ipdlab.harness import DEFAULT_NOISE_LEVELS


class PayoffModel(BaseModel):
    t: float = 5.0
    r: float = 3.0
    p: float = 1.0
    s: float = 0.0


class MatchRequest(BaseModel):
    a: str
    b: str
    length: int = Field(default=400, ge=1)
    noise: float = Field(default=0.0, ge=0.0, le=0.5)
    seed: int = 0
    payoffs: PayoffModel = PayoffModel()
    record_rounds: bool = False
    trace: bool = False


class RoundModel(BaseModel):
    intended_a: str
    intended_b: str
    actual_a: str
    actual_b: str
    payoff_a: float
    payoff_b: float


class MatchResponse(BaseModel):
    a: str
    b: str
    seed: int
    avg_payoff_a: float
    avg_payoff_b: float
    rounds: Optional[list[RoundModel]] = None
    trace: Optional[list[dict]] = None


class TournamentRequest(BaseModel):
    pool: Optional[list[str]] = None
    length: int = Field(default=400, ge=1)
    repetitions: int = Field(default=5, ge=1)
    noise_levels: list[float] = list(DEFAULT_NOISE_LEVELS)
    payoffs: PayoffModel = PayoffModel()
    master_seed: int = 0
    threads: int = Field(default=1, ge=1)


class TournamentRowModel(BaseModel):
    strategy: str
    noise: float
    mean: float
    stderr: float
    rank: int


class PerOpponentModel(BaseModel):
    strategy: str
    noise: float
    opponent: str
    mean: float


class TournamentResponse(BaseModel):
    pool: list[str]
    length: int
    repetitions: int
    noise_levels: list[float]
    master_seed: int
    results: list[TournamentRowModel]
    per_opponent: list[PerOpponentModel]


class SelfPlayRequest(BaseModel):
    strategy: str
    noise: float = Field(default=0.05, ge=0.0, le=0.5)
    games: int = Field(default=100, ge=1)
    length: int = Field(default=1000, ge=1)
    payoffs: PayoffModel = PayoffModel()
    master_seed: int = 0
    threads: int = Field(default=1, ge=1)


class SelfPlayResponse(BaseModel):
    strategy: str
    noise: float
    games: int
    length: int
    overall_mean: float
    benchmarks: dict[str, float]
    per_round_mean: list[float]


AuditKind = Literal["self", "inducing", "adaptive", "all"]


class AuditRequest(BaseModel):
    strategy: str
    which: AuditKind = "all"
    noise: float = Field(default=0.05, ge=0.0, le=0.5)
    payoffs: PayoffModel = PayoffModel()
    master_seed: int = 0
    games: int = Field(default=20, ge=1)
    length: int = Field(default=2000, ge=2)
    threads: int = Field(default=1, ge=1)


class AuditResponse(BaseModel):
    strategy: str
    which: AuditKind
    passed: bool
    results: dict


class StrategyListResponse(BaseModel):
    strategies: dict[str, str]
    default_pool: list[str]
