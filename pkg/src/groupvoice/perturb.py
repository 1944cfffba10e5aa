"""Cycle-level jitter and shimmer.

Cycles are anchored on the F0 contour: inside each voiced run, successive
positive-going zero crossings about one local period apart delimit glottal
cycles. Crossing positions are refined to sub-sample accuracy with a cubic
through the four surrounding samples, and each cycle's peak amplitude with a
three-point sinusoidal fit, so a perfectly periodic input gives features of
zero rather than sampling-grid noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateSignalError, InsufficientCyclesError, UnvoicedSignalError
from .pitch import PitchContour
from .signal import MonoSignal

MIN_RUN_CYCLES = 3


@dataclass(frozen=True)
class CycleSequence:
    """Per-cycle periods (s) and peak amplitudes.

    ``runs`` labels each cycle with the voiced segment it came from;
    differences are never formed across a change of label.
    """

    periods: np.ndarray
    amplitudes: np.ndarray
    runs: np.ndarray
    starts: np.ndarray  # cycle start, seconds

    def __post_init__(self):
        n = len(self.periods)
        if len(self.amplitudes) != n or len(self.runs) != n:
            raise ValueError("periods, amplitudes and runs must have equal length")
        if np.any(self.periods <= 0) or np.any(self.amplitudes < 0):
            raise ValueError("periods must be positive and amplitudes non-negative")

    def __len__(self):
        return len(self.periods)

    @classmethod
    def from_values(cls, periods, amplitudes=None, runs=None) -> "CycleSequence":
        periods = np.asarray(periods, dtype=float)
        amplitudes = np.ones_like(periods) if amplitudes is None else np.asarray(amplitudes, dtype=float)
        runs = np.zeros(len(periods), dtype=np.int64) if runs is None else np.asarray(runs, dtype=np.int64)
        starts = np.concatenate([[0.0], np.cumsum(periods)[:-1]]) if len(periods) else np.zeros(0)
        return cls(periods, amplitudes, runs, starts)


# ---------------------------------------------------------------- cycle extraction

def _cubic_root(y, i):
    """Root in [i-1, i] of the cubic through samples i-2..i+1 (Newton from linear guess)."""
    n = len(y)
    y0, y1 = y[i - 1], y[i]
    t = y0 / (y0 - y1)  # linear estimate, 0..1 from i-1
    if i < 2 or i + 1 >= n:
        return i - 1 + t
    ym, y2 = y[i - 2], y[i + 1]
    # Lagrange cubic in local coordinate u (u=0 at i-1, u=1 at i)
    a = (-ym + 3 * y0 - 3 * y1 + y2) / 6
    b = (ym - 2 * y0 + y1) / 2
    c = (-2 * ym - 3 * y0 + 6 * y1 - y2) / 6
    d = y0
    u = t
    for _ in range(8):
        f = ((a * u + b) * u + c) * u + d
        df = (3 * a * u + 2 * b) * u + c
        if df == 0:
            break
        step = f / df
        u -= step
        if abs(step) < 1e-15:
            break
    if not 0.0 <= u <= 1.0:
        u = t
    return i - 1 + u


def positive_crossings(x, lo: int = 1, hi: int | None = None) -> np.ndarray:
    """Fractional positions of upward zero crossings (x[i-1] < 0 <= x[i])."""
    x = np.asarray(x, dtype=float)
    hi = len(x) if hi is None else min(hi, len(x))
    lo = max(lo, 1)
    seg = slice(lo, hi)
    idx = np.nonzero((x[lo - 1:hi - 1] < 0) & (x[seg] >= 0))[0] + lo
    return np.array([_cubic_root(x, int(i)) for i in idx])


def peak_amplitude(x, lo: int, hi: int) -> float:
    """Peak |x| on [lo, hi), refined by a sinusoidal fit through the top 3 samples."""
    seg = np.abs(x[lo:hi])
    if len(seg) == 0:
        return 0.0
    k = int(np.argmax(seg)) + lo
    y0 = abs(x[k])
    if k < 1 or k + 1 >= len(x) or y0 == 0:
        return float(y0)
    s = np.sign(x[k])
    ym, yp = s * x[k - 1], s * x[k + 1]
    if ym > y0 or yp > y0:
        return float(y0)
    cosd = (ym + yp) / (2 * y0)
    if 0.0 < cosd < 1.0:
        sind = np.sqrt(1 - cosd * cosd)
        b = (yp - ym) / (2 * sind)
        return float(np.sqrt(y0 * y0 + b * b))
    # flat or non-sinusoidal top: parabolic vertex
    den = ym - 2 * y0 + yp
    if den >= 0:
        return float(y0)
    return float(y0 - (yp - ym) ** 2 / (8 * den))


def extract_cycles(signal: MonoSignal, contour: PitchContour) -> CycleSequence:
    """Glottal cycles inside every voiced run of ``contour``.

    Raises
    ------
    UnvoicedSignalError
        When the contour has no voiced frame or no run yields enough cycles.
    """
    runs = contour.voiced_runs()
    if not runs:
        raise UnvoicedSignalError("signal has no voiced frames")
    x = signal.samples
    rate = signal.sample_rate
    hop = contour.hop_ms * rate / 1000
    centers = contour.times * rate
    periods, amps, labels, starts = [], [], [], []
    label = 0
    for first, last in runs:
        lo = int(np.floor(centers[first] - hop / 2))
        hi = int(np.ceil(centers[last] + hop / 2))
        lo, hi = max(lo, 1), min(hi, len(x))
        zc = positive_crossings(x, lo, hi)
        if len(zc) < MIN_RUN_CYCLES + 1:
            continue
        t_run = centers[first:last + 1]
        f_run = contour.f0[first:last + 1]
        local_period = rate / np.interp(zc, t_run, f_run)
        bounds, chain = kernels.track_cycle_boundaries(np.ascontiguousarray(zc), local_period)
        # split into chains, each chain is its own run
        for c in np.unique(chain):
            b = bounds[chain == c]
            if len(b) < MIN_RUN_CYCLES + 1:
                continue
            for s0, s1 in zip(b[:-1], b[1:]):
                periods.append((s1 - s0) / rate)
                amps.append(peak_amplitude(x, int(np.floor(s0)), int(np.ceil(s1)) + 1))
                labels.append(label)
                starts.append(s0 / rate)
            label += 1
    if not periods:
        raise UnvoicedSignalError("no voiced run contains enough cycles")
    return CycleSequence(np.asarray(periods), np.asarray(amps), np.asarray(labels, dtype=np.int64),
                         np.asarray(starts))


# ---------------------------------------------------------------- features

def _prep(values, runs):
    v = np.ascontiguousarray(values, dtype=float)
    r = np.zeros(len(v), dtype=np.int64) if runs is None else np.ascontiguousarray(runs, dtype=np.int64)
    if len(r) != len(v):
        raise ValueError("runs must match values in length")
    return v, r


def mad_successive(values, runs=None) -> float:
    """Mean absolute difference of successive values (within runs)."""
    v, r = _prep(values, runs)
    if len(v) < 2:
        raise InsufficientCyclesError("need at least two values")
    total, count = kernels.successive_abs_diff(v, r)
    if count == 0:
        raise InsufficientCyclesError("no two successive values share a run")
    return total / count


def mad_successive_percent(values, runs=None) -> float:
    v, r = _prep(values, runs)
    m = mad_successive(v, r)
    mean = v.mean()
    if mean == 0:
        raise DegenerateSignalError("zero mean")
    return m / mean * 100


def pq_schoentgen(values, order: int = 5, runs=None) -> float:
    """Perturbation quotient in percent.

    Mean absolute deviation of each window centre from its ``order``-point
    mean, over all windows inside one run, divided by the overall mean.
    """
    if order < 3 or order % 2 == 0:
        raise ValueError("order must be odd and >= 3")
    v, r = _prep(values, runs)
    if len(v) < order:
        raise InsufficientCyclesError(f"need at least {order} values")
    mean = v.mean()
    if mean == 0:
        raise DegenerateSignalError("zero mean")
    total, count = kernels.pq_deviation(v, r, order)
    if count == 0:
        raise InsufficientCyclesError(f"no run holds {order} consecutive values")
    return total / count / mean * 100


def shimmer_db(amplitudes, runs=None) -> float:
    a, r = _prep(amplitudes, runs)
    if np.any(a <= 0):
        raise DegenerateSignalError("zero-amplitude cycle")
    return mad_successive(20 * np.log10(a), r)


def feature_units(k: int = 5) -> dict:
    """Units of the :func:`classical_set` keys for PQ order ``k``."""
    return {
        "jitter.local_pct": "%",
        "jitter.rap_pct": "%",
        f"jitter.ppq{k}_pct": "%",
        "jitter.mad_s": "s",
        "shimmer.local_pct": "%",
        "shimmer.apq3_pct": "%",
        f"shimmer.apq{k}_pct": "%",
        "shimmer.mad": "1",
        "shimmer.local_db": "dB",
    }


FEATURE_UNITS = feature_units()


def classical_set(cycles: CycleSequence, k: int = 5) -> dict:
    """The nine canonical jitter/shimmer features as ``{"jitter.*"|"shimmer.*": value}``.

    ``k`` is the order of the long perturbation quotients (PPQ/APQ, 5 by
    default); the short ones always use 3.
    """
    if len(cycles) < max(5, k):
        raise InsufficientCyclesError(f"need at least {max(5, k)} cycles")
    t, a, r = cycles.periods, cycles.amplitudes, cycles.runs
    return {
        "jitter.local_pct": mad_successive_percent(t, r),
        "jitter.rap_pct": pq_schoentgen(t, 3, r),
        f"jitter.ppq{k}_pct": pq_schoentgen(t, k, r),
        "jitter.mad_s": mad_successive(t, r),
        "shimmer.local_pct": mad_successive_percent(a, r),
        "shimmer.apq3_pct": pq_schoentgen(a, 3, r),
        f"shimmer.apq{k}_pct": pq_schoentgen(a, k, r),
        "shimmer.mad": mad_successive(a, r),
        "shimmer.local_db": shimmer_db(a, r),
    }
