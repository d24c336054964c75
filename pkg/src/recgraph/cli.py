"""Command-line experiment runner.

Verbs: converge, fixpoint, contract, treelike, bounds.  Configs are TOML
or JSON files; every run needs an explicit seed (in the config or via
--seed) and writes a CSV table plus summary.json under --out.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib

from .experiments import COMMANDS, ConfigError, RUNNERS, resolve_config, write_report
from .models import ModelConfigError


def _load_raw_config(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path!r} does not exist")
    if p.suffix.lower() == ".toml":
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    return json.loads(p.read_text())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="recgraph",
        description="seeded experiments on recursions over directed random graphs")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, help=RUNNERS[cmd].__doc__.splitlines()[0])
        sp.add_argument("--config", required=True, help="TOML or JSON experiment config")
        sp.add_argument("--out", default=None, help="output directory (default from config)")
        sp.add_argument("--seed", type=int, default=None, help="override run.seed")
        sp.add_argument("--workers", type=int, default=1, help="process pool size")
        sp.add_argument("--dry-run", action="store_true",
                        help="print the resolved plan without sampling")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        raw = _load_raw_config(args.config)
        cfg = resolve_config(raw, seed_override=args.seed, out_override=args.out)
    except (ConfigError, ModelConfigError, json.JSONDecodeError,
            tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.dry_run:
        plan = {"command": args.command, "resolved_config": cfg.to_json()}
        print(json.dumps(plan, sort_keys=True, indent=2))
        return 0
    try:
        report = RUNNERS[args.command](cfg, workers=max(1, args.workers))
    except (ConfigError, ModelConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    paths = write_report(report, cfg.outputs["dir"])
    verdict = "PASS" if report.passed else "FAIL"
    print(f"{args.command}: {verdict} ({paths['csv']})")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
