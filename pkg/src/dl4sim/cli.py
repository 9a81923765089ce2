"""Command-line entry point.

Subcommands: render, check, analyze, serve, steps validate.  check and
analyze print machine-readable JSON on standard output.  Exit codes are
disjoint by failure class:

    0  success / comparison passed
    1  comparison or estimation failure
    2  usage error (argparse)
    3  I/O or parse error
"""

from __future__ import annotations

import argparse
import json
import sys

from .analysis import (
    estimate_comb_resonance,
    estimate_delay_ms,
    estimate_feedback_gain,
    measure_snr,
)
from .audiofile import FORMATS, read_wav, write_wav
from .engine import DEFAULT_BLOCK_SIZE
from .errors import (
    AnalysisError,
    CheckSpecError,
    DomainError,
    ProcessingError,
    ScriptError,
    StepFileError,
    WavError,
)
from .harness import CheckSpec, RenderConfig, render, run_check
from .mapping import MappingMode
from .sequencer import parse_step_list, parse_timed_script

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2
EXIT_INPUT = 3

_INPUT_ERRORS = (
    WavError,
    StepFileError,
    ScriptError,
    CheckSpecError,
    DomainError,
    ProcessingError,
    OSError,
)


def _read_text(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _mono(path: str):
    buffer = read_wav(path)
    if buffer.channels != 1:
        raise DomainError(f"{path}: expected mono, got {buffer.channels} channels")
    return buffer


def cmd_render(args) -> int:
    input_buffer = _mono(args.input)
    steps = parse_step_list(_read_text(args.steps))
    script = parse_timed_script(_read_text(args.script)) if args.script else None
    config = RenderConfig(block_size=args.block, mapping=MappingMode(args.mapping))
    output = render(input_buffer, steps, script=script, config=config)
    write_wav(args.output, output, fmt=args.format)
    return EXIT_OK


def cmd_check(args) -> int:
    spec = CheckSpec.load(args.spec)
    report = run_check(spec)
    json.dump(report.to_dict(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_analyze(args) -> int:
    buffer = _mono(args.file)
    signal = buffer.mono
    rate = buffer.sample_rate
    result: dict = {"mode": args.mode, "file": args.file}
    try:
        if args.mode == "delay":
            estimate = estimate_delay_ms(signal, rate)
            if estimate is None:
                result["echo"] = False
            else:
                result["echo"] = True
                result["delay_ms"] = estimate.delay_ms
                result["confidence"] = estimate.confidence
        elif args.mode == "comb":
            result["fundamental_hz"] = estimate_comb_resonance(signal, rate)
        elif args.mode == "feedback":
            if args.delay_ms is None:
                raise _Usage("--mode feedback requires --delay-ms")
            result["gain"] = estimate_feedback_gain(signal, rate, args.delay_ms)
        else:  # snr
            if args.reference is None:
                raise _Usage("--mode snr requires --reference")
            reference = _mono(args.reference)
            if reference.sample_rate != rate:
                raise DomainError("test and reference sample rates differ")
            result["snr_db"] = measure_snr(signal, reference.mono)
    except AnalysisError as exc:
        result["error"] = str(exc)
        json.dump(result, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_FAIL
    json.dump(result, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import DeviceSource, FileLoopSource, ServerConfig, serve

    steps = parse_step_list(_read_text(args.steps))
    if args.input:
        source = FileLoopSource(args.input)
    else:
        source = DeviceSource(args.device)
    config = ServerConfig(
        steps=steps,
        source=source,
        block_size=args.block,
        mapping=MappingMode(args.mapping),
    )
    serve(args.port, config, static_dir=args.static, host=args.host)
    return EXIT_OK


def cmd_steps_validate(args) -> int:
    steps = parse_step_list(_read_text(args.file))
    policies = []
    if steps.discard_lfo:
        policies.append("discard_lfo")
    if steps.comb_df_override:
        policies.append("comb_df_override")
    tail = f" (policies: {', '.join(policies)})" if policies else ""
    print(f"{args.file}: {len(steps.steps)} steps{tail}")
    return EXIT_OK


class _Usage(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dl4sim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_render = sub.add_parser("render", help="render a WAV through a step file")
    p_render.add_argument("--input", required=True, help="mono input WAV")
    p_render.add_argument("--steps", required=True, help="step file")
    p_render.add_argument("--script", help="timed automation script")
    p_render.add_argument("--output", required=True, help="output WAV path")
    p_render.add_argument("--mapping", choices=[m.value for m in MappingMode], default="russek")
    p_render.add_argument("--block", type=int, default=DEFAULT_BLOCK_SIZE)
    p_render.add_argument("--format", choices=FORMATS, default="float32")
    p_render.set_defaults(func=cmd_render)

    p_check = sub.add_parser("check", help="run a golden-file regression check")
    p_check.add_argument("--spec", required=True, help="check-spec JSON")
    p_check.set_defaults(func=cmd_check)

    p_analyze = sub.add_parser("analyze", help="measure a rendered file")
    p_analyze.add_argument("file", help="mono WAV to analyze")
    p_analyze.add_argument(
        "--mode", choices=("delay", "comb", "feedback", "snr"), required=True
    )
    p_analyze.add_argument("--reference", help="reference WAV (snr mode)")
    p_analyze.add_argument("--delay-ms", type=float, help="known delay (feedback mode)")
    p_analyze.set_defaults(func=cmd_analyze)

    p_serve = sub.add_parser("serve", help="run the live control server")
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.add_argument("--steps", required=True, help="step file")
    group = p_serve.add_mutually_exclusive_group(required=True)
    group.add_argument("--input", help="WAV file looped as the input source")
    group.add_argument("--device", help="capture device name (needs sounddevice)")
    p_serve.add_argument("--mapping", choices=[m.value for m in MappingMode], default="russek")
    p_serve.add_argument("--block", type=int, default=DEFAULT_BLOCK_SIZE)
    p_serve.add_argument("--static", help="directory of faceplate assets to serve at /")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.set_defaults(func=cmd_serve)

    p_steps = sub.add_parser("steps", help="step-file utilities")
    steps_sub = p_steps.add_subparsers(dest="steps_command", required=True)
    p_validate = steps_sub.add_parser("validate", help="parse and report a step file")
    p_validate.add_argument("file")
    p_validate.set_defaults(func=cmd_steps_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _Usage as exc:
        parser.error(str(exc))  # exits 2
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except json.JSONDecodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
