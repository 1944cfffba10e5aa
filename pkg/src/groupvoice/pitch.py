"""Frame-wise F0 estimation by window-normalised autocorrelation.

Each frame is mean-removed and Hann-windowed; its autocorrelation is divided
by the autocorrelation of the window itself, which undoes the taper's decay
with lag. The highest peak inside the lag range of ``[fmin, fmax]`` gives the
period, refined by parabolic interpolation; a small per-octave cost on
long lags breaks the near-ties between multiples of the period.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import UnvoicedSignalError
from .signal import MonoSignal, frame_signal, hann_window

MIN_WINDOW_CORRELATION = 0.1
OCTAVE_COST = 0.01  # per octave of lag, as in Praat


@dataclass(frozen=True)
class PitchContour:
    times: np.ndarray
    f0: np.ndarray  # Hz, NaN where unvoiced
    voiced: np.ndarray
    peak_r: np.ndarray
    fmin: float
    fmax: float
    frame_ms: float
    hop_ms: float
    sample_rate: int

    def __len__(self):
        return len(self.times)

    @property
    def voiced_f0(self) -> np.ndarray:
        return self.f0[self.voiced]

    @property
    def voiced_fraction(self) -> float:
        return float(self.voiced.mean()) if len(self) else 0.0

    def voiced_runs(self) -> list[tuple[int, int]]:
        """``(first, last)`` frame indices of each maximal voiced run."""
        runs = []
        start = None
        for i, v in enumerate(self.voiced):
            if v and start is None:
                start = i
            elif not v and start is not None:
                runs.append((start, i - 1))
                start = None
        if start is not None:
            runs.append((start, len(self.voiced) - 1))
        return runs

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_s", "f0_hz", "voiced", "peak_r"])
        for t, f, v, r in zip(self.times, self.f0, self.voiced, self.peak_r):
            w.writerow([repr(float(t)), repr(float(f)) if v else "", int(v), repr(float(r))])
        return buf.getvalue()

    @classmethod
    def from_f0(cls, f0, hop_ms: float = 10.0, fmin: float = 60.0, fmax: float = 400.0,
                sample_rate: int = 44100) -> "PitchContour":
        """Build a contour from raw values (NaN or <= 0 marks unvoiced)."""
        f0 = np.asarray(f0, dtype=float)
        voiced = np.isfinite(f0) & (f0 > 0)
        times = (np.arange(len(f0)) + 0.5) * hop_ms / 1000
        return cls(times, np.where(voiced, f0, np.nan), voiced, voiced.astype(float),
                   fmin, fmax, 40.0, hop_ms, sample_rate)


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def normalized_autocorrelation(frames, window) -> np.ndarray:
    """Window-compensated normalised autocorrelation of each row of ``frames``.

    Returns an array of the same shape; lags where the window's own
    normalised autocorrelation is below ``MIN_WINDOW_CORRELATION`` are NaN.
    Rows with no energy are all NaN.
    """
    frames = np.atleast_2d(frames)
    n = frames.shape[1]
    nfft = _next_pow2(2 * n)
    x = (frames - frames.mean(axis=1, keepdims=True)) * window
    rx = np.fft.irfft(np.abs(np.fft.rfft(x, nfft, axis=1)) ** 2, nfft, axis=1)[:, :n]
    rw = np.fft.irfft(np.abs(np.fft.rfft(window, nfft)) ** 2, nfft)[:n]
    rw = rw / rw[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (rx / rx[:, :1]) / rw[None, :]
    r[:, rw < MIN_WINDOW_CORRELATION] = np.nan
    r[rx[:, 0] <= 0] = np.nan
    return r


def _pick_peaks(r, lag_lo: int, lag_hi: int, interpolate: bool, octave_cost: float, fmin: float):
    """Best lag per row within ``[lag_lo, lag_hi]``.

    Candidates are the local maxima of ``r``; the winner maximises
    ``r - octave_cost * log2(fmin * lag)``. For a strictly periodic frame all
    multiples of the period reach r ~ 1, and the small cost per octave of lag
    makes the shortest one win. Returns ``(lag, peak value, valid)``.
    """
    rows = np.arange(len(r))
    lo = max(lag_lo, 1)
    hi = min(lag_hi, r.shape[1] - 2)
    seg = r[:, lo:hi + 1]
    filled = np.where(np.isfinite(seg), seg, -np.inf)
    left_n = np.where(np.isfinite(r[:, lo - 1:hi]), r[:, lo - 1:hi], -np.inf)
    right_n = np.where(np.isfinite(r[:, lo + 1:hi + 2]), r[:, lo + 1:hi + 2], -np.inf)
    local = np.isfinite(filled) & (filled >= left_n) & (filled > right_n)
    valid = np.isfinite(filled).any(axis=1)
    lags = np.arange(lo, hi + 1, dtype=float)
    penalty = octave_cost * np.log2(fmin * lags / 1.0)
    cand = np.where(local, filled, -np.inf)
    none = ~local.any(axis=1)
    cand[none] = filled[none]
    best = np.argmax(cand - penalty[None, :], axis=1)
    peak = filled[rows, best]
    i = best + lo
    lag = i.astype(float)
    if interpolate:
        left = r[rows, i - 1]
        right = r[rows, i + 1]
        denom = left - 2 * peak + right
        ok = valid & np.isfinite(left) & np.isfinite(right) & (denom < 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            delta = np.where(ok, 0.5 * (left - right) / denom, 0.0)
        delta = np.clip(delta, -0.5, 0.5)
        peak = np.where(ok, peak - 0.25 * (left - right) * delta, peak)
        lag = np.clip(lag + delta, lag_lo, lag_hi)
    peak = np.where(valid, peak, 0.0)
    return lag, peak, valid


def estimate_f0_contour(signal: MonoSignal, fmin: float = 60.0, fmax: float = 400.0,
                        frame_ms: float = 40.0, hop_ms: float = 10.0,
                        voicing_threshold: float = 0.45, interpolate: bool = True,
                        octave_cost: float = OCTAVE_COST) -> PitchContour:
    """Per-frame F0 with voicing decisions.

    ``interpolate=False`` keeps the integer lag of the autocorrelation peak.
    """
    if len(signal) == 0:
        raise ValueError("cannot estimate pitch of an empty signal")
    if not 40.0 <= frame_ms <= 80.0:
        raise ValueError("frame_ms must lie in [40, 80]")
    if not 0 < fmin < fmax < signal.sample_rate / 2:
        raise ValueError("need 0 < fmin < fmax < sample_rate / 2")
    if frame_ms / 1000 < 2.0 / fmin:
        raise ValueError(f"a {frame_ms} ms frame cannot hold two periods of {fmin} Hz")
    fr = frame_signal(signal, frame_ms, hop_ms)
    rate = signal.sample_rate
    lag_lo = max(1, int(np.ceil(rate / fmax)))
    lag_hi = min(fr.frame_length - 2, int(np.floor(rate / fmin)))
    r = normalized_autocorrelation(fr.frames, hann_window(fr.frame_length))
    lag, peak, valid = _pick_peaks(r, lag_lo, lag_hi, interpolate, octave_cost, fmin)
    peak = np.clip(peak, 0.0, 1.0)
    voiced = valid & (peak >= voicing_threshold)
    f0 = np.where(voiced, rate / lag, np.nan)
    f0 = np.where(voiced, np.clip(f0, fmin, fmax), np.nan)
    return PitchContour(fr.centers, f0, voiced, peak, float(fmin), float(fmax),
                        float(frame_ms), float(hop_ms), rate)


def require_voiced(contour: PitchContour) -> None:
    if not contour.voiced.any():
        raise UnvoicedSignalError("no voiced frames")
