"""Measurement oracles: delay time, comb resonance, loop gain, SNR, and
line fitting.

These are the tools the regression story leans on: they answer "does
this render still behave like the unit" in physical units instead of
raw sample diffs.  Every estimator is deterministic; none of them share
code with the engine paths they check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AnalysisError, DomainError

# Echo search window: nothing musical lives below 1 ms, and 600 ms
# comfortably covers the longest base delay.
MIN_ECHO_MS = 1.0
MAX_ECHO_MS = 600.0
CONFIDENCE_FLOOR = 0.1

MIN_FFT_SIZE = 65536

# A feedback comb at this unit's gain ceiling (0.75 loop gain) puts its
# peaks 12-14 dB over the spectral median; 8 dB keeps real peaks while
# rejecting the inter-peak plateau, which rides at the median itself.
COMB_FLOOR_MARGIN_DB = 8.0


@dataclass(frozen=True)
class EchoEstimate:
    delay_ms: float
    confidence: float


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    outliers: tuple


def _as_signal(signal) -> np.ndarray:
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise DomainError(f"signal must be 1-D, got shape {x.shape}")
    return x


def _parabolic_offset(left: float, center: float, right: float) -> float:
    denom = left - 2.0 * center + right
    if denom == 0.0:
        return 0.0
    offset = 0.5 * (left - right) / denom
    # A vertex outside the bin pair means the quadratic model is junk.
    return min(0.5, max(-0.5, offset))


def estimate_delay_ms(signal, sample_rate: int) -> EchoEstimate | None:
    """Dominant repeat time from the normalized autocorrelation.

    Returns None when nothing repeats above the confidence floor
    (confidence is the normalized autocorrelation peak, 0..1).  The
    peak position is refined with a parabola, so fractional-sample
    delays come back to well under 0.1 ms.
    """
    x = _as_signal(signal)
    max_lag = int(round(MAX_ECHO_MS * sample_rate / 1000.0))
    min_lag = max(1, int(round(MIN_ECHO_MS * sample_rate / 1000.0)))
    if len(x) < 2 * max_lag:
        raise DomainError(
            f"need at least {2 * max_lag} samples to search {MAX_ECHO_MS} ms, got {len(x)}"
        )
    nfft = 1 << int(math.ceil(math.log2(2 * len(x))))
    spectrum = np.fft.rfft(x, nfft)
    autocorr = np.fft.irfft(spectrum * np.conj(spectrum))
    r0 = autocorr[0]
    if r0 <= 0.0:
        return None
    window = autocorr[min_lag : max_lag + 1] / r0
    k_rel = int(np.argmax(window))
    confidence = float(window[k_rel])
    if confidence < CONFIDENCE_FLOOR:
        return None
    k = min_lag + k_rel
    offset = _parabolic_offset(autocorr[k - 1], autocorr[k], autocorr[k + 1])
    delay_ms = (k + offset) * 1000.0 / sample_rate
    return EchoEstimate(delay_ms, min(1.0, confidence))


def estimate_comb_resonance(
    signal, sample_rate: int, floor_margin_db: float = COMB_FLOOR_MARGIN_DB
) -> float:
    """Comb fundamental in Hz: the median spacing of spectral peaks.

    Peaks are local maxima at least ``floor_margin_db`` above the
    median spectral magnitude, refined by quadratic interpolation in
    dB.  The median spacing shrugs off a missing or spurious peak.
    Fewer than 3 peaks is an estimation failure.
    """
    x = _as_signal(signal)
    if not len(x):
        raise DomainError("signal is empty")
    nfft = MIN_FFT_SIZE
    while nfft < len(x):
        nfft *= 2
    magnitude = np.abs(np.fft.rfft(x, nfft))
    floor = float(np.median(magnitude))
    if floor <= 0.0:
        raise AnalysisError("spectrum has no noise floor to measure against")
    threshold = floor * 10.0 ** (floor_margin_db / 20.0)

    inner = magnitude[1:-1]
    is_peak = (inner > magnitude[:-2]) & (inner >= magnitude[2:]) & (inner > threshold)
    indices = np.flatnonzero(is_peak) + 1
    if len(indices) < 3:
        raise AnalysisError(
            f"found {len(indices)} spectral peaks above the floor, need at least 3"
        )
    with np.errstate(divide="ignore"):
        db = 20.0 * np.log10(magnitude)
    refined = np.empty(len(indices))
    for out_i, i in enumerate(indices):
        refined[out_i] = i + _parabolic_offset(db[i - 1], db[i], db[i + 1])
    frequencies = refined * sample_rate / nfft
    return float(np.median(np.diff(frequencies)))


def estimate_feedback_gain(signal, sample_rate: int, delay_ms: float) -> float:
    """Loop gain from the decay of echo peaks spaced ``delay_ms`` apart.

    Walks windows centered on successive echo positions starting at the
    strongest peak and returns the median ratio of consecutive peak
    magnitudes.  Needs at least two echoes above the noise floor.
    """
    x = np.abs(_as_signal(signal))
    delay_samples = delay_ms * sample_rate / 1000.0
    if delay_samples < 8.0:
        raise DomainError(f"delay of {delay_ms} ms is too short to separate echoes")
    if not len(x):
        raise DomainError("signal is empty")
    strongest = float(np.max(x))
    if strongest <= 0.0:
        raise AnalysisError("signal is silent")
    noise_floor = max(1e-4, 1e-3 * strongest)
    half_window = max(2, int(delay_samples / 4.0))

    start = int(np.argmax(x))
    peaks = []
    k = 0
    while True:
        center = start + int(round(k * delay_samples))
        lo = center - half_window
        hi = center + half_window + 1
        if lo >= len(x):
            break
        peak = float(np.max(x[max(0, lo) : min(len(x), hi)]))
        if peak < noise_floor:
            break
        peaks.append(peak)
        k += 1
    if len(peaks) < 2:
        raise AnalysisError(
            f"found {len(peaks)} echoes above the noise floor, need at least 2"
        )
    ratios = np.array(peaks[1:]) / np.array(peaks[:-1])
    return float(np.median(ratios))


SNR_CAP_DB = 200.0


def measure_snr(test, reference) -> float:
    """Energy SNR of test against reference, capped at 200 dB.

    Identical signals report the cap; a silent reference is an error
    because the ratio means nothing.
    """
    t = _as_signal(test)
    r = _as_signal(reference)
    if len(t) != len(r):
        raise DomainError(f"length mismatch: {len(t)} vs {len(r)}")
    ref_energy = float(np.dot(r, r))
    if ref_energy <= 0.0:
        raise DomainError("reference signal has no energy")
    noise_energy = float(np.dot(t - r, t - r))
    if noise_energy == 0.0:
        return SNR_CAP_DB
    return min(10.0 * math.log10(ref_energy / noise_energy), SNR_CAP_DB)


def fit_linear(x, y, exclude_outliers: bool = False) -> LinearFit:
    """Least-squares line through (x, y) points.

    With ``exclude_outliers`` the fit runs once, drops points whose
    absolute residual exceeds 3x the median absolute residual (plus a
    tiny epsilon so exact fits do not flag their own rounding dust),
    and refits once on the rest.
    """
    xs = _as_signal(x)
    ys = _as_signal(y)
    if len(xs) != len(ys):
        raise DomainError(f"length mismatch: {len(xs)} vs {len(ys)}")
    minimum = 3 if exclude_outliers else 2
    if len(xs) < minimum:
        raise DomainError(f"need at least {minimum} points, got {len(xs)}")

    def ols(px, py):
        dx = px - px.mean()
        denom = float(np.dot(dx, dx))
        if denom == 0.0:
            raise DomainError("x values are degenerate (no spread)")
        slope = float(np.dot(dx, py - py.mean())) / denom
        return slope, float(py.mean() - slope * px.mean())

    slope, intercept = ols(xs, ys)
    outliers: tuple = ()
    if exclude_outliers:
        residuals = np.abs(ys - (slope * xs + intercept))
        threshold = 3.0 * float(np.median(residuals)) + 1e-12 * (1.0 + float(np.max(np.abs(ys))))
        flagged = residuals > threshold
        if flagged.any():
            if len(xs) - int(flagged.sum()) < 2:
                raise AnalysisError("outlier exclusion left fewer than 2 points")
            slope, intercept = ols(xs[~flagged], ys[~flagged])
            outliers = tuple(int(i) for i in np.flatnonzero(flagged))
    return LinearFit(slope, intercept, outliers)
