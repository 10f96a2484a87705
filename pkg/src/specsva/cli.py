"""Command line entry point.

Exit codes: 0 success, 1 usage or config error, 2 stage failure,
3 LLM backend failure (including replay misses).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, PipelineConfig
from .extraction import EmptyDocument
from .gateway import GatewayError, open_gateway
from .responses import MalformedResponse
from .rtl import RtlError

log = logging.getLogger("specsva")

EXIT_OK, EXIT_USAGE, EXIT_STAGE, EXIT_BACKEND = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", type=Path, help="TOML key/value config file")
    g.add_argument("--out", type=Path, default=Path("out"), help="artifact directory (default: out)")
    g.add_argument("--m", type=int, help="sentences per segment")
    g.add_argument("--k", type=int, help="history items per prompt")
    g.add_argument("--temperature", type=float)
    g.add_argument("--clock")
    g.add_argument("--reset")
    g.add_argument("--reset-active-low", dest="reset_active_low", action="store_true", default=None)
    g.add_argument("--reset-active-high", dest="reset_active_low", action="store_false")
    g.add_argument("--mode", dest="llm_mode", choices=["live", "record", "replay"])
    g.add_argument("--transcript", help="JSON Lines transcript for record/replay")
    g.add_argument("--mapping", help="use this mapping table JSON instead of asking the LLM")
    g.add_argument("--workers", type=int)
    g.add_argument("--no-regularization", dest="semantic_regularization", action="store_false", default=None)
    g.add_argument("--no-formalization", dest="formalization", action="store_false", default=None)
    g.add_argument("--no-decomposition", dest="decomposition", action="store_false", default=None)
    g.add_argument("--unroll-margin", dest="unroll_depth_margin", type=int)
    g.add_argument("--unroll-depth", type=int)
    g.add_argument("--exclude-conditions", dest="include_conditions", action="store_false", default=None)
    g.add_argument("--top-n", type=int)
    g.add_argument("--syntax-checker", help="external command run as '<cmd> <file.sv>' per assertion")
    g.add_argument("-v", "--verbose", action="count", default=0)


_CONFIG_KEYS = [
    "m", "k", "temperature", "clock", "reset", "reset_active_low", "llm_mode", "transcript", "mapping",
    "workers", "semantic_regularization", "formalization", "decomposition", "unroll_depth_margin",
    "unroll_depth", "include_conditions", "top_n", "syntax_checker",
]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="specsva", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"specsva {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, helptext in [
        ("extract", "phase 1: extract function descriptions"),
        ("regularize", "phase 2: mapping table and semantic regularization"),
        ("run-all", "all generation phases, plus scoring when --rtl is given"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--spec", type=Path, required=True, help="specification (text or Markdown)")
        if name == "run-all":
            p.add_argument("--rtl", type=Path, help="golden RTL for scoring")
        _common(p)
    for name, helptext in [
        ("formalize", "phase 3: formal statements"),
        ("assemble", "phase 4: decompose and assemble SVAs"),
    ]:
        _common(sub.add_parser(name, help=helptext))

    p = sub.add_parser("score", help="importance report for an .sv file against a golden RTL")
    p.add_argument("--sv", type=Path, help="assertion file (default: <out>/assertions.sv)")
    p.add_argument("--rtl", type=Path, required=True)
    _common(p)

    p = sub.add_parser("check", help="syntax-check an .sv file with the built-in SVA parser")
    p.add_argument("sv", type=Path)

    p = sub.add_parser("sdg", help="export the unrolled signal dependency graph as DOT")
    p.add_argument("rtl", type=Path)
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--exclude-conditions", dest="include_conditions", action="store_false")

    p = sub.add_parser("verify-fixtures", help="regenerate bundled fixtures and diff against golden files")
    p.add_argument("--case", action="append", help="limit to these fixture cases")
    return parser


def load_config(args) -> PipelineConfig:
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) is not None}
    if args.config is not None:
        if not args.config.exists():
            raise ConfigError(f"config file {args.config} not found")
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig.from_mapping(overrides)


def _error(stage: str, exc: BaseException, code: int) -> int:
    report = {"stage": stage, "error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(report), file=sys.stderr)
    return code


def _run(args) -> int:
    from . import pipeline

    if args.command == "check":
        from .sva import SvaSyntaxError, parse_file

        bad = 0
        for line, _, result in parse_file(args.sv.read_text()):
            if isinstance(result, SvaSyntaxError):
                bad += 1
                print(f"{args.sv}:{line}: {result}")
            else:
                print(f"{args.sv}:{line}: ok {result.name}")
        return EXIT_STAGE if bad else EXIT_OK
    if args.command == "sdg":
        from .rtl import build_sdg

        sys.stdout.write(build_sdg(args.rtl.read_text(), args.depth, args.include_conditions).to_dot())
        return EXIT_OK
    if args.command == "verify-fixtures":
        from .fixtures import all_cases, verify_fixture

        failed = 0
        for case in all_cases():
            if args.case and case.name not in args.case:
                continue
            result = verify_fixture(case)
            print(result.summary())
            failed += not result.passed
        return EXIT_STAGE if failed else EXIT_OK

    config = load_config(args)
    out = args.out
    if args.command == "score":
        pipeline.run_score(config, args.sv or out / pipeline.ASSERTIONS, args.rtl, out)
        return EXIT_OK
    gateway = open_gateway(config.llm_mode, config.transcript)
    if args.command == "extract":
        pipeline.run_extract(config, args.spec, out, gateway)
    elif args.command == "regularize":
        pipeline.run_regularize(config, args.spec, out, gateway)
    elif args.command == "formalize":
        pipeline.run_formalize(config, out, gateway)
    elif args.command == "assemble":
        pipeline.run_assemble(config, out, gateway)
    elif args.command == "run-all":
        pipeline.run_all(config, args.spec, out, args.rtl, gateway)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _error("usage", exc, EXIT_USAGE)
    level = logging.WARNING - 10 * getattr(args, "verbose", 0)
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")
    stage = args.command
    try:
        return _run(args)
    except ConfigError as exc:
        return _error(stage, exc, EXIT_USAGE)
    except GatewayError as exc:
        return _error(getattr(exc, "stage", stage), exc, EXIT_BACKEND)
    except (MalformedResponse, EmptyDocument, RtlError, ValueError, OSError) as exc:
        return _error(getattr(exc, "stage", stage), exc, EXIT_STAGE)
    except RuntimeError as exc:  # StageError and friends
        return _error(getattr(exc, "stage", stage), exc, EXIT_STAGE)


if __name__ == "__main__":
    sys.exit(main())
