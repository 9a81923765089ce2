"""Deterministic DL-4 delay emulation with calibrated control mapping,
score sequencing, offline regression rendering, and a live control server."""

from .analysis import (
    EchoEstimate,
    LinearFit,
    estimate_comb_resonance,
    estimate_delay_ms,
    estimate_feedback_gain,
    fit_linear,
    measure_snr,
)
from .audiofile import AudioBuffer, extract_channel, read_wav, write_wav
from .engine import (
    DEFAULT_BLOCK_SIZE,
    DEFAULT_SAMPLE_RATE,
    DelayLine,
    Dl4Engine,
    Dl4Params,
    HpSwitch,
    LpSwitch,
    OnePoleFilter,
    delay_multiplier,
    lfo_raw,
    one_pole_coefficient,
    quantize15,
    warmup,
)
from .errors import (
    AnalysisError,
    CheckSpecError,
    Dl4Error,
    DomainError,
    MalformedWavError,
    ProcessingError,
    ScriptError,
    StepFileError,
    TruncatedWavError,
    UnsupportedWavError,
    WavError,
)
from .harness import CheckSpec, DiffReport, compare, render, run_check
from .mapping import (
    MappingMode,
    base_delay_ms,
    base_delay_selector,
    lfo_speed_hz,
    lfo_width,
    map_df_score,
    map_feedback_score,
)
from .sequencer import (
    Sequencer,
    StepList,
    TimedScript,
    events_between,
    parse_step_list,
    parse_timed_script,
    serialize_step_list,
    serialize_timed_script,
)

__version__ = "0.1.0"
