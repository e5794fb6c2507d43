"""Command line entry point: ``qme run`` and ``qme preset``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .core import PhysicsError
from .experiments import PRESETS
from .runner import run_named_preset, run_scenario

EXIT_OK, EXIT_SCHEMA, EXIT_PHYSICS = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qme", description="Master equations for systems driven by entangled qubit baths.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario described by a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--out", type=Path, default=Path("."))
    run.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    pre = sub.add_parser("preset", help="run a named experiment")
    pre.add_argument("name", choices=sorted(PRESETS))
    pre.add_argument("--out", type=Path, default=Path("."))
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.jobs < 1:
                raise ConfigError("--jobs must be at least 1")
            try:
                text = args.config.read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
            cfg = load_config(text)
            paths = run_scenario(cfg, args.out, jobs=args.jobs, stem=args.config.stem)
        else:
            paths = run_named_preset(args.name, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except PhysicsError as exc:
        print(f"physics violation: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
