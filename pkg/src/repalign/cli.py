"""Command-line entry point.

``repalign run --config cfg.json [--workers N] [--out DIR]`` executes the
configured pipeline; ``repalign validate --config cfg.json`` dry-runs the
config checks. The ``REPALIGN_SEED`` environment variable overrides the
config seed. Exit codes: 0 success, 2 config error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, DataError, ManifestError
from .pipeline import load_config, run_pipeline, validate_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repalign",
        description="Representational alignment pipeline (encoding scores, CKA, GW)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute the configured pipeline")
    run.add_argument("--config", required=True, help="path to the JSON run config")
    run.add_argument("--workers", type=int, default=1, help="parallel cell workers")
    run.add_argument("--out", default=None, help="override the config output directory")

    val = sub.add_parser("validate", help="dry-run config validation")
    val.add_argument("--config", required=True, help="path to the JSON run config")
    return parser


def _emit_error(kind: str, message: str, out_dir: str | None) -> None:
    payload = {"error": {"type": kind, "message": message}}
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir:
        try:
            path = Path(out_dir)
            path.mkdir(parents=True, exist_ok=True)
            (path / "error.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _emit_error("config", str(exc), getattr(args, "out", None))
        return EXIT_CONFIG

    env_seed = os.environ.get("REPALIGN_SEED")
    if env_seed is not None:
        try:
            cfg["seed"] = int(env_seed)
        except ValueError:
            _emit_error("config", f"REPALIGN_SEED must be an integer, got {env_seed!r}", None)
            return EXIT_CONFIG

    if args.command == "validate":
        issues = validate_config(cfg)
        if issues:
            _emit_error("config", "; ".join(issues), None)
            return EXIT_CONFIG
        print(json.dumps({"ok": True, "pipeline": cfg["pipeline"]}, sort_keys=True))
        return EXIT_OK

    out_dir = args.out or cfg.get("output_dir")
    try:
        report = run_pipeline(cfg, workers=args.workers, output_dir=args.out)
    except ConfigError as exc:
        _emit_error("config", str(exc), out_dir)
        return EXIT_CONFIG
    except (DataError, ManifestError) as exc:
        _emit_error("data", str(exc), out_dir)
        return EXIT_DATA
    print(json.dumps({"ok": True, "report": report["report_path"]}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
