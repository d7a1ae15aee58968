"""String-keyed strategy registry used by the harness, service, and CLI.

A spec is a bare name (``"tft"``) or a name with arguments after a colon:
``"random:0.5"``, ``"zd:chi=3,phi=0.0385"``, ``"memone:1,0,1,0;first=1"``.
"""

from __future__ import annotations

from typing import Callable, Optional

from ipdlab.base import Strategy
from ipdlab.composite import CooperateIso, CooperateIsoRevert1, CooperateIsoRevert2
from ipdlab.engine import PayoffParams
from ipdlab.longterm_tft import LongtermTft
from ipdlab.markov_opt import Iso
from ipdlab.zoo import (
    Cooperator,
    ContriteTitForTat,
    Defector,
    GenerousTitForTat,
    GrimTrigger,
    MemOne,
    MemOneVector,
    Pavlov,
    RandomCoop,
    TitForTat,
    TitForTwoTats,
    ZdExtortion,
)


class UnknownStrategyError(ValueError):
    """Raised when a spec string does not resolve to a registered strategy."""


_SIMPLE = {
    cls.name: cls
    for cls in (
        Cooperator,
        Defector,
        TitForTat,
        TitForTwoTats,
        GenerousTitForTat,
        ContriteTitForTat,
        Pavlov,
        GrimTrigger,
        LongtermTft,
        Iso,
        CooperateIso,
        CooperateIsoRevert1,
        CooperateIsoRevert2,
    )
}


def _parse_kwargs(arg: str) -> dict[str, float]:
    out: dict[str, float] = {}
    for part in arg.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise UnknownStrategyError(f"expected key=value, got {part!r}")
        key, value = part.split("=", 1)
        out[key.strip()] = float(value)
    return out


def _parse_memone(arg: str) -> MemOneVector:
    probs_part, _, first_part = arg.partition(";")
    probs = tuple(float(x) for x in probs_part.split(","))
    if len(probs) != 4:
        raise UnknownStrategyError(f"memone needs 4 probabilities, got {probs_part!r}")
    first = 1.0
    if first_part:
        key, _, value = first_part.partition("=")
        if key.strip() != "first":
            raise UnknownStrategyError(f"unknown memone option {first_part!r}")
        first = float(value)
    return MemOneVector(probs, first)


def make(spec: str, p_noise: float, params: PayoffParams, **extra) -> Strategy:
    """Build a fresh strategy instance for one match."""
    spec = spec.strip()
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    try:
        if name in _SIMPLE:
            if arg:
                raise UnknownStrategyError(f"{name!r} takes no arguments, got {arg!r}")
            strat = _SIMPLE[name](p_noise, params, **extra)
        elif name == "random":
            strat = RandomCoop(p_noise, params, q=float(arg) if arg else 0.5, **extra)
        elif name == "zd":
            kwargs = _parse_kwargs(arg) if arg else {}
            strat = ZdExtortion(
                p_noise, params, chi=kwargs.pop("chi", 3.0), phi=kwargs.pop("phi", None), **extra
            )
            if kwargs:
                raise UnknownStrategyError(f"unknown zd options {sorted(kwargs)}")
        elif name == "memone":
            if not arg:
                raise UnknownStrategyError("memone requires probabilities, e.g. memone:1,0,1,0")
            strat = MemOne(p_noise, params, _parse_memone(arg), **extra)
        else:
            raise UnknownStrategyError(f"unknown strategy {spec!r}")
    except UnknownStrategyError:
        raise
    except (TypeError, ValueError) as exc:
        raise UnknownStrategyError(f"bad arguments in {spec!r}: {exc}") from exc
    strat.spec_name = spec
    return strat


def validate(specs: list[str]) -> list[str]:
    """Return the unknown specs in a pool (empty when all resolve)."""
    bad = []
    for spec in specs:
        try:
            make(spec, 0.0, PayoffParams())
        except UnknownStrategyError:
            bad.append(spec)
    return bad


def list_strategies() -> dict[str, str]:
    """Registered names with a usage hint for parametric entries."""
    out = {name: name for name in sorted(_SIMPLE)}
    out["random"] = "random:<coop probability>"
    out["zd"] = "zd:chi=<factor>,phi=<normalization; defaults to half the feasible max>"
    out["memone"] = "memone:<pCC>,<pCD>,<pDC>,<pDD>[;first=<prob>]"
    return out


#: round-robin pool used when a tournament does not specify one
DEFAULT_POOL = [
    "cooperator",
    "defector",
    "random:0.5",
    "tft",
    "tit-for-two-tats",
    "generous-tft",
    "contrite-tft",
    "pavlov",
    "grim-trigger",
    # two extortion levels: walking away from extortion is a headline
    # behaviour here, and the milder extortioner is the harder case
    "zd:chi=2",
    "zd:chi=3",
    # lenient memory-1: pardons most defections, so it separates strategies
    # that notice and exploit leniency from those that merely reciprocate
    "memone:1,0.7,1,0.7;first=1",
    "longterm-tft",
    "iso",
    "cooperate-iso",
    "cooperate-iso-revert1",
    "cooperate-iso-revert2",
]
