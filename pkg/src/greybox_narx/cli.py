"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path

from .errors import ConfigError, DataError, IdentificationError, NumericalError
from .pipeline import PipelineConfig, cmd_coverage, cmd_generate_data, cmd_identify, cmd_select, cmd_validate

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("greybox_narx")


def _rankings(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"rankings must be comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline configuration")
    common.add_argument("--out", help="output directory (default runs/<timestamp>-<hash>)")
    common.add_argument("--seed", type=int, help="master seed for the evolutionary search")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="greybox-narx",
                                     description="Grey-box NARX structure selection")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("generate-data", parents=[common], help="write synthetic u/y and static-curve CSVs")

    p = sub.add_parser("identify", parents=[common], help="run the evolutionary search")
    p.add_argument("--runs", type=int)
    p.add_argument("--budget", type=int, help="function evaluations per run")
    p.add_argument("--algorithm", choices=["nsga2", "spea2"])
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p = sub.add_parser("select", parents=[common], help="pick models from an archive")
    p.add_argument("--archive", required=True)
    p.add_argument("--rankings", type=_rankings, help="objective rankings, e.g. 3,1,2")
    p.add_argument("--intensity", type=float, help="preference intensity in [1, 9]")
    p.add_argument("--no-mmd", action="store_true")

    p = sub.add_parser("validate", parents=[common], help="free-run, static and correlation checks")
    p.add_argument("--model", required=True, help="model or selection JSON")

    p = sub.add_parser("coverage", parents=[common], help="set coverage between two archives")
    p.add_argument("archive_a")
    p.add_argument("archive_b")
    return parser


def _overrides(args) -> dict:
    o: dict = {}
    if args.seed is not None:
        o["seed"] = args.seed
    moea = {}
    for key in ("runs", "budget", "algorithm"):
        val = getattr(args, key, None)
        if val is not None:
            moea[key] = val
    if moea:
        o["moea"] = moea
    if getattr(args, "rankings", None) is not None or getattr(args, "intensity", None) is not None:
        pref = {"rankings": args.rankings or [1, 2, 3]}
        if args.intensity is not None:
            pref["intensity"] = args.intensity
        o["decision"] = {"mtd": [pref]}
    if getattr(args, "no_mmd", False):
        o.setdefault("decision", {})["mmd"] = False
    return o


def _run_dir(args, cfg: PipelineConfig) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        out = Path("runs") / f"{stamp}-{cfg.hash}"
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dispatch(args) -> dict:
    cfg = PipelineConfig.load(args.config, _overrides(args))
    if args.command == "coverage":
        out = _run_dir(args, cfg) if args.out else None
        return cmd_coverage(args.archive_a, args.archive_b, out, cfg.meta)
    out = _run_dir(args, cfg)
    log.info("writing to %s (config %s)", out, cfg.hash)
    if args.command == "generate-data":
        result = cmd_generate_data(cfg, out)
    elif args.command == "identify":
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        result = cmd_identify(cfg, out, jobs=args.jobs)
    elif args.command == "select":
        result = cmd_select(cfg, args.archive, out)
    else:
        result = cmd_validate(cfg, args.model, out)
    return {"out": str(out), **result}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        result = _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except IdentificationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
