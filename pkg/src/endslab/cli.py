"""Command-line front end: ``endslab run | list | report``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import load_config, parse_config, shipped_configs
from .errors import ConfigError
from .runner import execute, render_markdown, write_outputs
from .solitons import SOLITONS

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _jobs(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("ENDSLAB_JOBS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError(f"ENDSLAB_JOBS={env!r} is not an integer") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="endslab", description="Ends of manifolds with a Schrödinger operator: build, solve, check.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="execute a configuration")
    run.add_argument("config_ref", nargs="?", help="config path or shipped example name")
    run.add_argument("--config", dest="config_flag", metavar="PATH")
    run.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, metavar="N", help="seed for random trial functions")
    run.add_argument("--jobs", type=int, metavar="N", help="worker threads (default: ENDSLAB_JOBS or 1)")

    sub.add_parser("list", help="list shipped examples")

    rep = sub.add_parser("report", help="re-render report.md from a report.json")
    rep.add_argument("path", nargs="?", help="report.json or the directory holding it")
    rep.add_argument("--out", metavar="DIR")
    return p


def list_examples() -> str:
    lines = ["shipped configs:"]
    for name, text in shipped_configs().items():
        cfg = parse_config(text, f"{name}.json", name)
        kind = "soliton" if cfg.soliton is not None else f"model, {len(cfg.model.ends)} ends"
        lines.append(f"  {name:<16} {kind:<18} {cfg.description}")
    lines.append("solitons: " + ", ".join(sorted(SOLITONS)))
    return "\n".join(lines)


def _cmd_run(args) -> int:
    ref = args.config_flag or args.config_ref
    if not ref:
        raise ConfigError("run needs a config path or shipped example name")
    cfg = load_config(ref)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        cfg = cfg.__class__(**{**cfg.__dict__, "seed": args.seed})
    jobs = _jobs(args.jobs)
    res = execute(cfg, jobs)
    out = Path(args.out or cfg.output_dir)
    write_outputs(res, out)
    failed = [k for k, v in res.report["checks"].items() if not v]
    status = "PASS" if res.passed else "FAIL"
    print(f"{cfg.name}: {status} ({len(res.report['checks']) - len(failed)}/{len(res.report['checks'])} checks) -> {out}")
    if "ends" in res.report:
        print(f"  ends={res.report['ends']['k']} rank={res.report['ends']['rank']}")
    for k in failed:
        print(f"  failed: {k}")
    for a in res.report.get("advisories", []):
        print(f"  advisory: {a}", file=sys.stderr)
    return EXIT_OK if res.passed else EXIT_CHECK


def _cmd_report(args) -> int:
    path = Path(args.path or args.out or ".")
    if path.is_dir():
        path = path / "report.json"
    if not path.is_file():
        raise ConfigError(f"{path}: no such report")
    try:
        report = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}:{err.lineno}:{err.colno}: {err.msg}") from None
    md = render_markdown(report)
    target = path.parent / "report.md"
    target.write_text(md)
    print(md)
    return EXIT_OK if report.get("pass") else EXIT_CHECK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "list":
            print(list_examples())
            return EXIT_OK
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_report(args)
    except ConfigError as err:
        print(f"endslab: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
