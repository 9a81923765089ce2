"""Offline rendering and golden-file comparison.

A check is: render a known input through a step list (plus an optional
timed automation script) and diff the result against a golden take.
Renders are deterministic, so the default expectation is sample
equality against a golden produced by the same code; the tolerant mode
exists for cross-machine drift hunting.

Script events land at the start of the block their timestamp falls in;
between event points the engine runs in single uninterrupted spans,
which renders identically and much faster than block-by-block calls.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audiofile import AudioBuffer, quantize_to_format, read_wav
from .engine import DEFAULT_BLOCK_SIZE, Dl4Engine
from .errors import CheckSpecError, DomainError
from .mapping import MappingMode
from .sequencer import Sequencer, StepList, TimedScript, parse_step_list, parse_timed_script

log = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-4
COMPARE_MODES = ("exact", "tolerant")


@dataclass
class RenderConfig:
    sample_rate: int | None = None  # None: take the input file's rate
    block_size: int = DEFAULT_BLOCK_SIZE
    mapping: MappingMode = MappingMode.RUSSEK

    def validate(self) -> "RenderConfig":
        if self.block_size < 1 or self.block_size != int(self.block_size):
            raise DomainError(f"block_size must be a positive int, got {self.block_size!r}")
        if self.sample_rate is not None and self.sample_rate <= 0:
            raise DomainError(f"sample_rate must be positive, got {self.sample_rate!r}")
        if not isinstance(self.mapping, MappingMode):
            raise DomainError(f"mapping must be a MappingMode, got {self.mapping!r}")
        return self


def render(
    input_buffer: AudioBuffer,
    steps: StepList,
    script: TimedScript | None = None,
    config: RenderConfig | None = None,
) -> AudioBuffer:
    """Render a mono buffer through the engine under step/script control."""
    config = (config or RenderConfig()).validate()
    x = np.ascontiguousarray(input_buffer.mono)
    sr = input_buffer.sample_rate
    if config.sample_rate is not None and config.sample_rate != sr:
        raise DomainError(
            f"configured rate {config.sample_rate} does not match input rate {sr};"
            " resampling is out of scope"
        )
    n = len(x)
    block = config.block_size
    sequencer = Sequencer(steps, mapping=config.mapping)
    engine = Dl4Engine(sr, params=sequencer.params)
    out = np.empty_like(x)

    # Group events by the block start they apply at; later events are
    # outside the render and only warned about.
    applications: dict[int, list] = {}
    if script is not None:
        for ev in script.events:
            position = ev.time_ms * sr / 1000.0
            if position >= n:
                log.warning("script event at %.3f ms is beyond the input; ignored", ev.time_ms)
                continue
            block_start = int(position // block) * block
            applications.setdefault(block_start, []).append(ev)

    cursor = 0
    for block_start in sorted(applications):
        if block_start > cursor:
            engine.process_into(x, out, cursor, block_start)
            cursor = block_start
        for ev in applications[block_start]:
            if ev.kind == "step":
                if not sequencer.advance():
                    log.warning("script advances past the final step; staying put")
            else:
                sequencer.set_direct(ev.key, ev.value)
        engine.set_params(sequencer.params)
    if cursor < n:
        engine.process_into(x, out, cursor, n)
    return AudioBuffer.from_mono(out, sr)


@dataclass
class DiffReport:
    passed: bool
    max_abs_diff: float
    rms_diff: float
    first_divergence: int | None
    length_mismatch: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "max_abs_diff": self.max_abs_diff,
            "rms_diff": self.rms_diff,
            "first_divergence": self.first_divergence,
            "length_mismatch": self.length_mismatch,
        }


def compare(
    a: AudioBuffer,
    b: AudioBuffer,
    tolerance: float = DEFAULT_TOLERANCE,
    mode: str = "tolerant",
) -> DiffReport:
    """Diff two buffers.  Exact mode demands sample equality; tolerant
    mode allows absolute differences up to ``tolerance``.

    A length mismatch always fails; diff statistics then cover the
    common prefix so the report stays useful.
    """
    if mode not in COMPARE_MODES:
        raise DomainError(f"mode must be one of {COMPARE_MODES}, got {mode!r}")
    if tolerance < 0:
        raise DomainError(f"tolerance must be non-negative, got {tolerance!r}")
    if a.channels != b.channels:
        raise DomainError(f"channel count mismatch: {a.channels} vs {b.channels}")
    if a.sample_rate != b.sample_rate:
        raise DomainError(f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")

    length_mismatch = a.frames != b.frames
    prefix = min(a.frames, b.frames)
    diff = np.abs(a.data[:, :prefix] - b.data[:, :prefix])
    frame_diff = diff.max(axis=0) if prefix else np.zeros(0)
    max_abs = float(frame_diff.max()) if prefix else 0.0
    rms = float(math.sqrt(np.mean(np.square(diff)))) if prefix else 0.0

    threshold = 0.0 if mode == "exact" else tolerance
    over = np.flatnonzero(frame_diff > threshold)
    first_divergence = int(over[0]) if len(over) else None
    passed = first_divergence is None and not length_mismatch
    return DiffReport(passed, max_abs, rms, first_divergence, length_mismatch)


@dataclass
class CheckSpec:
    """One regression check, loadable from JSON.

    Paths are resolved relative to the spec file's directory.  JSON
    shape:

        {"input": "in.wav", "steps": "part.steps", "golden": "ref.wav",
         "script": "moves.script", "tolerance": 1e-4, "mode": "exact",
         "engine": {"sample_rate": null, "block_size": 64, "mapping": "russek"}}
    """

    input: Path
    steps: Path
    golden: Path
    script: Path | None = None
    tolerance: float = DEFAULT_TOLERANCE
    mode: str = "tolerant"
    config: RenderConfig = field(default_factory=RenderConfig)

    _KEYS = {"input", "steps", "golden", "script", "tolerance", "mode", "engine"}
    _ENGINE_KEYS = {"sample_rate", "block_size", "mapping"}

    @classmethod
    def load(cls, path) -> "CheckSpec":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise CheckSpecError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise CheckSpecError(f"{path}: top level must be an object")
        unknown = set(doc) - cls._KEYS
        if unknown:
            raise CheckSpecError(f"{path}: unknown keys {sorted(unknown)}")
        for key in ("input", "steps", "golden"):
            if key not in doc:
                raise CheckSpecError(f"{path}: missing required key {key!r}")
        base = path.parent
        engine_doc = doc.get("engine", {})
        if not isinstance(engine_doc, dict):
            raise CheckSpecError(f"{path}: 'engine' must be an object")
        unknown = set(engine_doc) - cls._ENGINE_KEYS
        if unknown:
            raise CheckSpecError(f"{path}: unknown engine keys {sorted(unknown)}")
        try:
            mapping = MappingMode(engine_doc.get("mapping", "russek"))
        except ValueError:
            raise CheckSpecError(
                f"{path}: mapping must be 'russek' or 'raw', got {engine_doc.get('mapping')!r}"
            ) from None
        mode = doc.get("mode", "tolerant")
        if mode not in COMPARE_MODES:
            raise CheckSpecError(f"{path}: mode must be one of {COMPARE_MODES}, got {mode!r}")
        tolerance = doc.get("tolerance", DEFAULT_TOLERANCE)
        if not isinstance(tolerance, (int, float)) or tolerance < 0:
            raise CheckSpecError(f"{path}: tolerance must be a non-negative number")
        config = RenderConfig(
            sample_rate=engine_doc.get("sample_rate"),
            block_size=engine_doc.get("block_size", DEFAULT_BLOCK_SIZE),
            mapping=mapping,
        )
        return cls(
            input=base / doc["input"],
            steps=base / doc["steps"],
            golden=base / doc["golden"],
            script=base / doc["script"] if "script" in doc and doc["script"] else None,
            tolerance=float(tolerance),
            mode=mode,
            config=config,
        )


def run_check(spec: CheckSpec) -> DiffReport:
    """Render per the spec and diff against its golden file.

    The fresh render passes through the golden's storage precision
    before the diff; without that, a float64 render could never match
    its own float32 golden sample for sample.
    """
    input_buffer = read_wav(spec.input)
    steps = parse_step_list(Path(spec.steps).read_text())
    script = parse_timed_script(Path(spec.script).read_text()) if spec.script else None
    golden = read_wav(spec.golden)
    rendered = render(input_buffer, steps, script, spec.config)
    if golden.storage is not None:
        rendered = quantize_to_format(rendered, golden.storage)
    return compare(rendered, golden, spec.tolerance, spec.mode)
