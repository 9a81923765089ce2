"""Score-driven stepping of the front panel.

Step files hold the settings cue list an operator walks through during
a piece; timed scripts automate the same moves against a clock for
offline regression renders.  The vocabulary uses the score symbols
verbatim (DS, DF, RG, MX, SP, WD, SHAPE, HP, LP, FBPHASE, OUTPHASE) so
a file reads like the written part.

Step file grammar, line oriented, ``#`` starts a comment:

    policy discard_lfo
    step intro: DS=256 DF=0.6 RG=0.4 MX=0.5
    step comb,comb: DS=32 DF=1.0 RG=1.0 MX=1.0

Unassigned keys carry over from the previous step.  The first step must
pin DS, DF, RG, and MX.  ``policy discard_lfo`` forces WD and SP to
zero at every step regardless of what the file says; ``policy
comb_df_override`` rewrites DF=1.0 to 0.75 on steps tagged ``comb``
(a written 1.0 that was measured as 0.75 on the reference unit).

Timed scripts are ``<ms> step`` or ``<ms> set KEY VALUE`` lines with
non-decreasing times.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .engine import Dl4Params, HpSwitch, LpSwitch
from .errors import DomainError, ScriptError, StepFileError
from .mapping import MappingMode, base_delay_selector

SCORE_KEYS = ("DS", "DF", "RG", "MX", "SP", "WD", "SHAPE", "HP", "LP", "FBPHASE", "OUTPHASE")
REQUIRED_FIRST_STEP = ("DS", "DF", "RG", "MX")

COMB_DF_WRITTEN = 1.0
COMB_DF_MEASURED = 0.75

_UNIT_KEYS = ("RG", "MX", "SP", "WD", "SHAPE")


def _check_score_value(key: str, value: float) -> float:
    if key == "DS":
        base_delay_selector(value)  # power of two in 1..512
    elif key == "DF":
        if not 0.25 <= value <= 1.0:
            raise DomainError(f"DF must be in [0.25, 1.0], got {value!r}")
    elif key in _UNIT_KEYS:
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{key} must be in [0, 1], got {value!r}")
    elif key == "HP":
        if value not in (16.0, 150.0):
            raise DomainError(f"HP must be 16 or 150, got {value!r}")
    elif key == "LP":
        if value not in (15000.0, 3300.0):
            raise DomainError(f"LP must be 15000 or 3300, got {value!r}")
    elif key in ("FBPHASE", "OUTPHASE"):
        if value not in (0.0, 1.0):
            raise DomainError(f"{key} must be 0 or 1, got {value!r}")
    else:
        raise DomainError(f"unknown parameter {key!r}")
    return float(value)


def apply_assignment(params: Dl4Params, key: str, value: float) -> Dl4Params:
    """Return params with one score symbol applied."""
    value = _check_score_value(key, value)
    if key == "DS":
        return dataclasses.replace(params, base=base_delay_selector(value))
    if key == "DF":
        return dataclasses.replace(params, df=value)
    if key == "RG":
        return dataclasses.replace(params, feedback=value)
    if key == "MX":
        return dataclasses.replace(params, mix=value)
    if key == "SP":
        return dataclasses.replace(params, lfo_speed=value)
    if key == "WD":
        return dataclasses.replace(params, lfo_width=value)
    if key == "SHAPE":
        return dataclasses.replace(params, lfo_shape=value)
    if key == "HP":
        return dataclasses.replace(params, hp_switch=HpSwitch(int(value)))
    if key == "LP":
        return dataclasses.replace(params, lp_switch=LpSwitch(int(value)))
    if key == "FBPHASE":
        return dataclasses.replace(params, feedback_phase_invert=bool(value))
    return dataclasses.replace(params, output_phase_invert=bool(value))


def params_to_score(params: Dl4Params) -> dict:
    """Express params in the score vocabulary (what snapshots carry)."""
    return {
        "DS": 2**params.base,
        "DF": params.df,
        "RG": params.feedback,
        "MX": params.mix,
        "SP": params.lfo_speed,
        "WD": params.lfo_width,
        "SHAPE": params.lfo_shape,
        "HP": int(params.hp_switch),
        "LP": int(params.lp_switch),
        "FBPHASE": int(params.feedback_phase_invert),
        "OUTPHASE": int(params.output_phase_invert),
    }


@dataclass
class Step:
    label: str
    assignments: dict = field(default_factory=dict)
    comb: bool = False


@dataclass
class StepList:
    steps: list = field(default_factory=list)
    discard_lfo: bool = False
    comb_df_override: bool = False


_POLICIES = ("discard_lfo", "comb_df_override")


def parse_step_list(text: str) -> StepList:
    """Parse step-file text; errors carry the offending line number."""
    result = StepList()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("policy"):
            name = line[len("policy") :].strip()
            if name not in _POLICIES:
                raise StepFileError(f"unknown policy {name!r}", lineno)
            setattr(result, name, True)
            continue
        if not line.startswith("step"):
            raise StepFileError(f"expected 'policy' or 'step', got {line!r}", lineno)
        head, sep, body = line.partition(":")
        if not sep:
            raise StepFileError("step line is missing ':'", lineno)
        name_part = head[len("step") :].strip()
        pieces = [p.strip() for p in name_part.split(",")]
        label = pieces[0]
        if not label:
            raise StepFileError("step label is empty", lineno)
        comb = False
        for tag in pieces[1:]:
            if tag != "comb":
                raise StepFileError(f"unknown step tag {tag!r}", lineno)
            comb = True
        assignments = {}
        for token in body.split():
            key, sep, value_text = token.partition("=")
            if not sep:
                raise StepFileError(f"expected KEY=VALUE, got {token!r}", lineno)
            if key not in SCORE_KEYS:
                raise StepFileError(f"unknown parameter {key!r}", lineno)
            if key in assignments:
                raise StepFileError(f"duplicate parameter {key!r}", lineno)
            try:
                value = float(value_text)
            except ValueError:
                raise StepFileError(f"bad number {value_text!r} for {key}", lineno) from None
            try:
                assignments[key] = _check_score_value(key, value)
            except DomainError as exc:
                raise StepFileError(str(exc), lineno) from None
        result.steps.append(Step(label, assignments, comb))

    if not result.steps:
        raise StepFileError("file defines no steps")
    missing = [k for k in REQUIRED_FIRST_STEP if k not in result.steps[0].assignments]
    if missing:
        raise StepFileError(f"first step must set {', '.join(missing)}")
    return result


def _format_value(key: str, value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def serialize_step_list(step_list: StepList) -> str:
    """Canonical text form; parse(serialize(parse(x))) == parse(x)."""
    lines = []
    for name in _POLICIES:
        if getattr(step_list, name):
            lines.append(f"policy {name}")
    for step in step_list.steps:
        tag = ",comb" if step.comb else ""
        body = " ".join(
            f"{k}={_format_value(k, step.assignments[k])}"
            for k in SCORE_KEYS
            if k in step.assignments
        )
        lines.append(f"step {step.label}{tag}: {body}".rstrip())
    return "\n".join(lines) + "\n"


class Sequencer:
    """Walks a StepList, holding the current effective front-panel state.

    Advancing merges the next step's assignments over the current
    params (unassigned keys carry), then applies the list's policies.
    Advancing past the final step is a no-op that returns False.
    """

    def __init__(self, step_list: StepList, mapping: MappingMode = MappingMode.RUSSEK):
        if not step_list.steps:
            raise DomainError("step list is empty")
        self._list = step_list
        self._params = Dl4Params(mapping=mapping)
        self.index = 0
        self._params = self._merge(self._list.steps[0])

    @property
    def params(self) -> Dl4Params:
        return self._params

    @property
    def label(self) -> str:
        return self._list.steps[self.index].label

    @property
    def step_count(self) -> int:
        return len(self._list.steps)

    @property
    def at_end(self) -> bool:
        return self.index >= len(self._list.steps) - 1

    def _merge(self, step: Step) -> Dl4Params:
        params = self._params
        for key, value in step.assignments.items():
            if (
                key == "DF"
                and step.comb
                and self._list.comb_df_override
                and value == COMB_DF_WRITTEN
            ):
                value = COMB_DF_MEASURED
            params = apply_assignment(params, key, value)
        if self._list.discard_lfo:
            params = dataclasses.replace(params, lfo_width=0.0, lfo_speed=0.0)
        return params.validate()

    def advance(self) -> bool:
        """Move to the next step; False (and no change) when already at the end."""
        if self.at_end:
            return False
        self.index += 1
        self._params = self._merge(self._list.steps[self.index])
        return True

    def set_direct(self, key: str, value: float) -> None:
        """Apply one assignment outside the step flow (live moves,
        script automation).  Policies do not filter these: a manual
        move is deliberate, unlike a score marking."""
        self._params = apply_assignment(self._params, key, value).validate()


@dataclass
class ScriptEvent:
    time_ms: float
    kind: str  # "step" or "set"
    key: str | None = None
    value: float | None = None


@dataclass
class TimedScript:
    events: list = field(default_factory=list)


def parse_timed_script(text: str) -> TimedScript:
    """Parse ``<ms> step`` / ``<ms> set KEY VALUE`` lines."""
    script = TimedScript()
    last_time = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        try:
            time_ms = float(tokens[0])
        except ValueError:
            raise ScriptError(f"bad timestamp {tokens[0]!r}", lineno) from None
        if time_ms < 0:
            raise ScriptError(f"negative timestamp {time_ms!r}", lineno)
        if last_time is not None and time_ms < last_time:
            raise ScriptError(
                f"timestamp {time_ms} decreases (previous {last_time})", lineno
            )
        last_time = time_ms
        if len(tokens) == 2 and tokens[1] == "step":
            script.events.append(ScriptEvent(time_ms, "step"))
            continue
        if len(tokens) == 4 and tokens[1] == "set":
            key = tokens[2]
            if key not in SCORE_KEYS:
                raise ScriptError(f"unknown parameter {key!r}", lineno)
            try:
                value = float(tokens[3])
            except ValueError:
                raise ScriptError(f"bad number {tokens[3]!r} for {key}", lineno) from None
            try:
                value = _check_score_value(key, value)
            except DomainError as exc:
                raise ScriptError(str(exc), lineno) from None
            script.events.append(ScriptEvent(time_ms, "set", key, value))
            continue
        raise ScriptError(f"expected '<ms> step' or '<ms> set KEY VALUE', got {line!r}", lineno)
    return script


def serialize_timed_script(script: TimedScript) -> str:
    lines = []
    for ev in script.events:
        stamp = _format_value("", ev.time_ms)
        if ev.kind == "step":
            lines.append(f"{stamp} step")
        else:
            lines.append(f"{stamp} set {ev.key} {_format_value(ev.key, ev.value)}")
    return "\n".join(lines) + "\n" if lines else ""


def events_between(script: TimedScript, t0_samples: float, t1_samples: float,
                   sample_rate: int) -> list:
    """Events whose sample position lands in the half-open [t0, t1)."""
    scale = sample_rate / 1000.0
    return [ev for ev in script.events if t0_samples <= ev.time_ms * scale < t1_samples]
