"""Command-line front end.

A thin client over the service layer: every subcommand builds the same
request models the HTTP API accepts and either calls the handlers
in-process (default) or posts them to a running server (``--server``).
Outputs are byte-identical either way given the same seeds.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ipdlab import __version__, registry
from ipdlab.registry import UnknownStrategyError
from ipdlab.service import handlers, schemas

OUTPUT_DIR_ENV = "IPDLAB_OUTPUT_DIR"
EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_AUDIT_FAILED = 2


class ConfigError(ValueError):
    pass


class Client:
    """Dispatches requests either in-process or to a remote server."""

    def __init__(self, server: Optional[str] = None):
        self.server = server.rstrip("/") if server else None

    def _post(self, path: str, payload: dict, response_model):
        import httpx

        resp = httpx.post(f"{self.server}{path}", json=payload, timeout=3600.0)
        if resp.status_code != 200:
            raise ConfigError(f"server returned {resp.status_code}: {resp.text}")
        return response_model.model_validate(resp.json())

    def match(self, req: schemas.MatchRequest) -> schemas.MatchResponse:
        if self.server:
            return self._post("/match", req.model_dump(), schemas.MatchResponse)
        return handlers.handle_match(req)

    def tournament(self, req: schemas.TournamentRequest) -> schemas.TournamentResponse:
        if self.server:
            return self._post("/tournament", req.model_dump(), schemas.TournamentResponse)
        return handlers.handle_tournament(req)

    def selfplay(self, req: schemas.SelfPlayRequest) -> schemas.SelfPlayResponse:
        if self.server:
            return self._post("/selfplay", req.model_dump(), schemas.SelfPlayResponse)
        return handlers.handle_selfplay(req)

    def audit(self, req: schemas.AuditRequest) -> schemas.AuditResponse:
        if self.server:
            return self._post("/audit", req.model_dump(), schemas.AuditResponse)
        return handlers.handle_audit(req)


def _output_dir(args: argparse.Namespace) -> Path:
    path = Path(args.output_dir or os.environ.get(OUTPUT_DIR_ENV, "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")


def _json_text(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def tournament_rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["strategy", "noise", "mean", "stderr", "rank"])
    for row in rows:
        writer.writerow(
            [row["strategy"], repr(row["noise"]), repr(row["mean"]),
             repr(row["stderr"]), row["rank"]]
        )
    return buf.getvalue()


def selfplay_curve_to_csv(per_round: list[float]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "mean_payoff"])
    for i, value in enumerate(per_round, start=1):
        writer.writerow([i, repr(float(value))])
    return buf.getvalue()


def _cmd_match(args: argparse.Namespace, client: Client) -> int:
    req = schemas.MatchRequest(
        a=args.a,
        b=args.b,
        length=args.length,
        noise=args.noise,
        seed=args.seed,
        record_rounds=args.rounds_csv or args.format == "json",
        trace=args.trace,
    )
    resp = client.match(req)
    print(f"{args.a} vs {args.b}: avg payoffs "
          f"{round(resp.avg_payoff_a, 6)!r} / {round(resp.avg_payoff_b, 6)!r} "
          f"(seed {resp.seed})")
    out = _output_dir(args)
    if args.format == "json":
        _write(out / "match.json", _json_text(resp.model_dump()))
    if args.rounds_csv and resp.rounds:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["round", "intended_a", "intended_b", "actual_a", "actual_b",
                         "payoff_a", "payoff_b"])
        for i, r in enumerate(resp.rounds, start=1):
            writer.writerow([i, r.intended_a, r.intended_b, r.actual_a, r.actual_b,
                             repr(r.payoff_a), repr(r.payoff_b)])
        _write(out / "match_rounds.csv", buf.getvalue())
    if args.trace:
        lines = "".join(json.dumps(ev, sort_keys=True) + "\n" for ev in (resp.trace or []))
        _write(out / "match_trace.jsonl", lines)
    return EXIT_OK


def _load_tournament_config(path: str) -> dict:
    file_path = Path(path)
    if not file_path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(file_path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"bad config file {path}: {exc}") from exc


def _cmd_tournament(args: argparse.Namespace, client: Client) -> int:
    data: dict = {}
    if args.config:
        data = _load_tournament_config(args.config)
    known = {"pool", "length", "repetitions", "noise_levels", "master_seed",
             "threads", "payoffs"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    # flag overrides win over file values
    if args.length is not None:
        data["length"] = args.length
    if args.repetitions is not None:
        data["repetitions"] = args.repetitions
    if args.noise is not None:
        data["noise_levels"] = args.noise
    if args.master_seed is not None:
        data["master_seed"] = args.master_seed
    if args.threads is not None:
        data["threads"] = args.threads
    if args.pool is not None:
        data["pool"] = args.pool
    payoffs = schemas.PayoffModel(**data.pop("payoffs", {}))
    req = schemas.TournamentRequest(payoffs=payoffs, **data)
    resp = client.tournament(req)
    out = _output_dir(args)
    payload = resp.model_dump()
    if args.format == "csv":
        _write(out / "tournament.csv", tournament_rows_to_csv(payload["results"]))
    _write(out / "tournament.json", _json_text(payload))
    for row in resp.results:
        print(f"noise={row.noise:<5} #{row.rank:>2} {row.strategy:<34} "
              f"mean={row.mean:.4f} stderr={row.stderr:.4f}")
    return EXIT_OK


def _cmd_selfplay(args: argparse.Namespace, client: Client) -> int:
    req = schemas.SelfPlayRequest(
        strategy=args.strategy,
        noise=args.noise,
        games=args.games,
        length=args.length,
        master_seed=args.master_seed,
        threads=args.threads,
    )
    resp = client.selfplay(req)
    out = _output_dir(args)
    if args.format == "csv":
        _write(out / "selfplay.csv", selfplay_curve_to_csv(resp.per_round_mean))
    _write(out / "selfplay.json", _json_text(resp.model_dump()))
    print(f"{args.strategy} self-play at noise {args.noise}: "
          f"overall mean {resp.overall_mean:.4f} "
          f"(always-cooperate benchmark {resp.benchmarks['always_cooperate']:.4f})")
    return EXIT_OK


def _cmd_audit(args: argparse.Namespace, client: Client) -> int:
    req = schemas.AuditRequest(
        strategy=args.strategy,
        which=args.which,
        noise=args.noise,
        master_seed=args.master_seed,
        games=args.games,
        length=args.length,
        threads=args.threads,
    )
    resp = client.audit(req)
    out = _output_dir(args)
    _write(out / "audit.json", _json_text(resp.model_dump()))
    print(f"audit {args.which} for {args.strategy}: "
          f"{'PASS' if resp.passed else 'FAIL'}")
    return EXIT_OK if resp.passed else EXIT_AUDIT_FAILED


def _cmd_strategies(args: argparse.Namespace, client: Client) -> int:
    resp = handlers.handle_strategies()
    for name, hint in resp.strategies.items():
        print(f"{name:<18} {hint if hint != name else ''}".rstrip())
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace, client: Client) -> int:
    import uvicorn

    from ipdlab.service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipdlab",
        description="Noisy iterated prisoner's dilemma: matches, tournaments, "
                    "self-play, and desiderata audits.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--server", default=None,
                        help="base URL of a running ipdlab server; default runs in-process")
    parser.add_argument("--output-dir", default=None,
                        help=f"where to write result files (or ${OUTPUT_DIR_ENV}; default .)")
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="play one match between two strategies")
    m.add_argument("--a", required=True)
    m.add_argument("--b", required=True)
    m.add_argument("--length", type=int, default=400)
    m.add_argument("--noise", type=float, default=0.0)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--trace", action="store_true",
                   help="write phase transitions / optimizer decisions to match_trace.jsonl")
    m.add_argument("--rounds-csv", action="store_true",
                   help="write the full round log to match_rounds.csv")
    m.add_argument("--format", choices=("csv", "json"), default="csv")
    m.set_defaults(fn=_cmd_match)

    t = sub.add_parser("tournament", help="round-robin tournament over a pool")
    t.add_argument("--config", default=None, help="TOML config file")
    t.add_argument("--pool", nargs="+", default=None)
    t.add_argument("--length", type=int, default=None)
    t.add_argument("--repetitions", type=int, default=None)
    t.add_argument("--noise", type=float, nargs="+", default=None,
                   help="noise levels (overrides config noise_levels)")
    t.add_argument("--master-seed", type=int, default=None)
    t.add_argument("--threads", type=int, default=None)
    t.add_argument("--format", choices=("csv", "json"), default="csv")
    t.set_defaults(fn=_cmd_tournament)

    s = sub.add_parser("selfplay", help="strategy against its own clone")
    s.add_argument("--strategy", required=True)
    s.add_argument("--noise", type=float, default=0.05)
    s.add_argument("--games", type=int, default=100)
    s.add_argument("--length", type=int, default=1000)
    s.add_argument("--master-seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(fn=_cmd_selfplay)

    a = sub.add_parser("audit", help="desiderata audits (exit code 2 on failure)")
    a.add_argument("--strategy", required=True)
    a.add_argument("--which", choices=("self", "inducing", "adaptive", "all"),
                   default="all")
    a.add_argument("--noise", type=float, default=0.05)
    a.add_argument("--master-seed", type=int, default=0)
    a.add_argument("--games", type=int, default=20)
    a.add_argument("--length", type=int, default=2000)
    a.add_argument("--threads", type=int, default=1)
    a.set_defaults(fn=_cmd_audit)

    ls = sub.add_parser("strategies", help="list registered strategies")
    ls.set_defaults(fn=_cmd_strategies)

    srv = sub.add_parser("serve", help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.set_defaults(fn=_cmd_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; keep 1 for config problems
        return EXIT_CONFIG_ERROR if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args, Client(args.server))
    except (ConfigError, UnknownStrategyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
