"""Control-surface calibration for the DL-4 emulation.

Knob positions are normalized scores in [0, 1] (the delay-feel knob DF
lives in [0.25, 1.0], matching how it is written in scores).  Two
mapping modes exist: ``raw`` passes scores through with only the
hardware feedback ceiling applied, ``russek`` applies the calibration
measured from the reference unit, so a score plays at the loudness and
delay feel of that specific box.
"""

from __future__ import annotations

import enum

from .errors import DomainError

# Measured calibration of the reference unit: feedback is linear with a
# 75% ceiling, DF is affine with a compressed image [0.26758, 0.89333].
RUSSEK_FEEDBACK_SLOPE = 0.75
RUSSEK_DF_INTERCEPT = 0.05899
RUSSEK_DF_SLOPE = 0.83434

# Raw mode still caps feedback below unity so the loop cannot sustain
# forever; 0.95 leaves usable headroom while staying clearly stable.
RAW_FEEDBACK_CEILING = 0.95

# Curvature constant for the pseudo-log taper on the LFO pots.
TAPER_CURVE = 100.0

BASE_DELAY_STEPS = 10  # selector positions, 2**0 .. 2**9 milliseconds


class MappingMode(enum.Enum):
    """How knob scores translate to engine values."""

    RAW = "raw"
    RUSSEK = "russek"  # calibration of the measured reference unit


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must be in [0, 1], got {value!r}")


def map_feedback_score(score: float, mode: MappingMode) -> float:
    """Translate a feedback score (RG) into the loop gain."""
    _check_unit("feedback score", score)
    if mode is MappingMode.RUSSEK:
        return RUSSEK_FEEDBACK_SLOPE * score
    return RAW_FEEDBACK_CEILING * score


def map_df_score(score: float, mode: MappingMode) -> float:
    """Translate a delay-feel score (DF) into the true delay fraction."""
    if not 0.25 <= score <= 1.0:
        raise DomainError(f"DF score must be in [0.25, 1.0], got {score!r}")
    if mode is MappingMode.RUSSEK:
        return RUSSEK_DF_INTERCEPT + RUSSEK_DF_SLOPE * score
    return score  # raw mode is the identity, bit-exact


def base_delay_ms(selector: int) -> float:
    """Base delay for a selector position: powers of two, 1..512 ms."""
    if not isinstance(selector, int) or isinstance(selector, bool):
        raise DomainError(f"base delay selector must be an int, got {selector!r}")
    if not 0 <= selector < BASE_DELAY_STEPS:
        raise DomainError(
            f"base delay selector must be in 0..{BASE_DELAY_STEPS - 1}, got {selector}"
        )
    return float(2**selector)


def base_delay_selector(ms: float) -> int:
    """Inverse of base_delay_ms, for scores that write DS in milliseconds."""
    for sel in range(BASE_DELAY_STEPS):
        if ms == 2**sel:
            return sel
    raise DomainError(f"DS must be a power of two in 1..512 ms, got {ms!r}")


def _taper(position: float) -> float:
    # Pseudo-log pot law: 0 -> 0, 1 -> 1, strongly compressed low end.
    return (TAPER_CURVE**position - 1.0) / (TAPER_CURVE - 1.0)


def lfo_speed_hz(position: float) -> float:
    """LFO rate for the SP knob, tapered over 0..10 Hz."""
    _check_unit("LFO speed position", position)
    return 10.0 * _taper(position)


def lfo_width(position: float) -> float:
    """Modulation width for the WD knob, tapered over 0..1."""
    _check_unit("LFO width position", position)
    return _taper(position)
