"""Command line entry points.

    iscore validate <file>                     diagnostics; exit 0 iff no errors
    iscore compile  <file> [--json] [-o OUT]   date sets, nominals, warnings
    iscore run      <file> [--script S] [--max-ticks N] [--seed S] [--policy P]
    iscore encode   <qscore.json> [-o OUT]     lower a qualitative score
    iscore serve    <file> [--port P] [--tick-ms M] [--seed S] ...

Exit codes: 0 success, 1 validation errors, 2 unreadable or unparsable
input, 3 edition or engine failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import dsl, encode as encode_mod, engine
from .edition import (
    EditionResult, InfeasibleError, UncompiledScoreError, ValidationFailed,
    compile_score,
)
from .engine import ChoicePolicy, InputEvent, ZeroDelayCycleError
from .model import Score, has_errors, validate_score

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_RUNTIME = 3


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def load_score(path: str) -> Score:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}")
    try:
        if p.name.endswith(".json"):
            return dsl.loads(text)
        return dsl.parse_text(text, filename=path)
    except (dsl.ScoreSyntaxError, dsl.SchemaError, json.JSONDecodeError) as exc:
        raise CliError(EXIT_IO, f"cannot parse {path}: {exc}")


def load_script(path: str | None) -> list:
    if not path:
        return []
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return [InputEvent.from_json(entry["tick"], entry["event"]) for entry in doc]
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}")
    except (ValueError, KeyError, TypeError) as exc:
        raise CliError(EXIT_IO, f"bad script {path}: {exc}")


def edition_to_json(result: EditionResult) -> dict:
    return {
        "dates": {pid: dsl._dateset_to_json(ds)
                  for pid, ds in sorted(result.dates.items())},
        "nominal_durations": result.nominal_durations,
        "warnings": [{"to": w.to, "reason": w.reason, "witness": w.witness}
                     for w in result.warnings],
    }


def edition_table(result: EditionResult) -> str:
    lines = ["point                dates"]
    for pid in sorted(result.dates):
        lines.append(f"{pid:<20} {result.dates[pid]!r}")
    lines.append("")
    lines.append("duration             nominal")
    for key, val in result.nominal_durations.items():
        lines.append(f"{key:<20} {val}")
    if result.warnings:
        lines.append("")
        lines.append("rigidity warnings")
        for w in result.warnings:
            lines.append(f"  {w}")
    return "\n".join(lines)


def cmd_validate(args) -> int:
    score = load_score(args.file)
    diags = validate_score(score)
    for d in diags:
        print(d)
    if has_errors(diags):
        return EXIT_VALIDATION
    print(f"ok: {len(diags)} warning(s)" if diags else "ok")
    return EXIT_OK


def _compile(args):
    score = load_score(args.file)
    try:
        return compile_score(score)
    except ValidationFailed as exc:
        for d in exc.diagnostics:
            print(d, file=sys.stderr)
        raise CliError(EXIT_VALIDATION, "validation failed")
    except InfeasibleError as exc:
        raise CliError(EXIT_RUNTIME, f"infeasible: {exc}")


def cmd_compile(args) -> int:
    compiled, result, diags = _compile(args)
    for d in diags:
        print(d, file=sys.stderr)
    if args.json:
        print(json.dumps(edition_to_json(result), indent=2))
    else:
        print(edition_table(result))
    if args.out:
        Path(args.out).write_text(dsl.dumps(compiled) + "\n")
        print(f"compiled score written to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_run(args) -> int:
    compiled, _, _ = _compile(args)
    script = load_script(args.script)
    policy = (ChoicePolicy.AUTO_SEEDED if args.policy == "auto"
              else ChoicePolicy.INTERACTIVE)
    try:
        trace = engine.run(compiled, script, max_ticks=args.max_ticks,
                           seed=args.seed, policy=policy)
    except (ZeroDelayCycleError, UncompiledScoreError) as exc:
        raise CliError(EXIT_RUNTIME, str(exc))
    sys.stdout.write(trace.to_jsonl())
    print(f"# {trace.reason} at tick {trace.final_tick}", file=sys.stderr)
    return EXIT_OK


def cmd_encode(args) -> int:
    try:
        doc = json.loads(Path(args.file).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read {args.file}: {exc}")
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_IO, f"bad JSON in {args.file}: {exc}")
    try:
        q = encode_mod.q_from_json(doc)
        score = encode_mod.encode_score(q)
    except (dsl.SchemaError, encode_mod.QScoreError) as exc:
        raise CliError(EXIT_IO, f"bad qualitative score: {exc}")
    text = dsl.dumps(score) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"encoded score written to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_serve(args) -> int:
    import asyncio

    from .server import SessionConfig, configure_logging, serve_session

    configure_logging()
    compiled, _, _ = _compile(args)
    policy = (ChoicePolicy.AUTO_SEEDED if args.policy == "auto"
              else ChoicePolicy.INTERACTIVE)
    cfg = SessionConfig(score_path=args.file, tick_ms=args.tick_ms,
                        seed=args.seed, choice_policy=policy, port=args.port)
    static = Path(args.static) if args.static else None
    try:
        asyncio.run(serve_session(compiled, cfg, static_dir=static,
                                  dump_script_path=args.dump_script))
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iscore", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="structural diagnostics")
    p.add_argument("file")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("compile", help="nominal durations and date sets")
    p.add_argument("file")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("-o", "--out", help="write the compiled score as .isc.json")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("run", help="execute a score; JSONL trace on stdout")
    p.add_argument("file")
    p.add_argument("--script", help="JSON array of {tick, event} inputs")
    p.add_argument("--max-ticks", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", choices=["auto", "interactive"], default="auto")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("encode", help="lower a qualitative interval score")
    p.add_argument("file")
    p.add_argument("-o", "--out", help="output .isc.json path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("serve", help="live session over WebSocket")
    p.add_argument("file")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--tick-ms", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", choices=["auto", "interactive"], default="interactive")
    p.add_argument("--static", help="directory with the web client bundle")
    p.add_argument("--dump-script", help="write input batches as a run script on exit")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
