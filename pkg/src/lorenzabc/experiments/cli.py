"""``lorenzabc`` command-line interface."""
from __future__ import annotations

import argparse
import sys

from ..errors import (ConfigError, DataError, InitializationError, LorenzABCError, StallError)
from . import commands
from .config import available_presets, resolve

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_STALL, EXIT_PARTIAL = 0, 2, 3, 4, 5


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="lorenzabc",
        description="Bayesian estimation of income inequality from grouped data.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")
    helps = {
        "simulate": "simulate grouped data from a GB-family model",
        "fit": "fit a model by ABC, Dirichlet MH or order-statistics MH",
        "evidence": "rank models by ABC evidence at a shared tolerance",
        "bounds": "Gastwirth bounds, optionally with posterior mass inside",
        "replicate": "rerun a simulation-study table",
        "report": "print a text summary of report files",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", metavar="PATH", help="YAML run configuration")
        p.add_argument("--preset", metavar="NAME",
                       help=f"built-in configuration ({', '.join(available_presets())})")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", metavar="DIR", help="override the output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads; changes speed only, never results")
    return ap


def _print_result(command: str, res) -> int:
    if command == "simulate":
        print(f"wrote {res.data_path} (true G = {res.gini:.6f}) and {res.truth_path}")
    elif command == "fit":
        print(commands.format_fit_report(res.report), end="")
        print(f"wrote {res.report_path}")
    elif command == "evidence":
        for r in res:
            flag = "  (no acceptances)" if r.flagged else ""
            print(f"{r.rank}. {r.model:<4} log evidence {r.estimate.log_evidence:.4f} "
                  f"({r.estimate.acceptances}/{r.estimate.trials}){flag}")
    elif command == "bounds":
        print(commands.format_bounds(res))
    elif command == "replicate":
        print(commands.format_study(res.result), end="")
        print(f"wrote {res.result_path} and {res.table_path}")
        if res.partial:
            print(f"{len(res.result.failures)} replicate fit(s) failed", file=sys.stderr)
            return EXIT_PARTIAL
    elif command == "report":
        print(res, end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = resolve(args.config, args.preset, args.seed, args.out)
        res = commands.COMMANDS[args.command](cfg, threads=args.threads)
        return _print_result(args.command, res)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StallError as exc:
        where = f" at step {exc.step} (eps={exc.epsilon})" if exc.step is not None else ""
        print(f"stalled{where}: {exc}", file=sys.stderr)
        return EXIT_STALL
    except (DataError, InitializationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        name = f" {exc.filename}" if exc.filename else ""
        print(f"I/O error{name}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_DATA
    except LorenzABCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
