"""Semitone pitch scale, Zwicker loudness and sharpness.

Loudness follows the stationary Zwicker procedure on third-octave band
levels (the ISO 532-1 band tables): low bands are merged into the first
three critical bands, levels are corrected for ear transmission, converted
to core specific loudness, and spread along the critical-band-rate axis with
level-dependent upper slopes. Time-varying signals are handled block by
block and the loudness contour is averaged.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DegenerateSignalError, SilentSignalError
from .pitch import PitchContour
from .signal import MonoSignal, frame_samples, hann_window

# ---------------------------------------------------------------- semitones


def semitone(f0):
    """``69 + 12 log2(f0 / 440)``; works elementwise on arrays."""
    f = np.asarray(f0, dtype=float)
    if np.any(~(f > 0)):
        raise ValueError("f0 must be positive")
    p = 69.0 + 12.0 * np.log2(f / 440.0)
    return float(p) if p.ndim == 0 else p


def semitone_sd(contour) -> float:
    """Population standard deviation of the semitone contour over voiced frames.

    ``contour`` is a :class:`PitchContour` or an array of F0 values in Hz
    where NaN (or a non-positive value) marks an unvoiced frame.
    """
    if isinstance(contour, PitchContour):
        f0 = contour.voiced_f0
    else:
        f0 = np.asarray(contour, dtype=float)
        f0 = f0[np.isfinite(f0) & (f0 > 0)]
    if len(f0) < 2:
        raise DegenerateSignalError("need at least two voiced frames")
    return float(np.std(semitone(f0)))


# ---------------------------------------------------------------- band tables

THIRD_OCTAVE_CENTERS = 1000.0 * 2.0 ** ((np.arange(28) - 16) / 3)  # 25 Hz .. 12.5 kHz

# level ranges and low-frequency corrections for the 11 bands up to 250 Hz
_RAP = np.array([45, 55, 65, 71, 80, 90, 100, 120], dtype=float)
_DLL = np.array([
    [-32, -24, -16, -10, -5, 0, -7, -3, 0, -2, 0],
    [-29, -22, -15, -10, -4, 0, -7, -2, 0, -2, 0],
    [-27, -19, -14, -9, -4, 0, -6, -2, 0, -2, 0],
    [-25, -17, -12, -9, -3, 0, -5, -2, 0, -2, 0],
    [-23, -16, -11, -7, -3, 0, -4, -1, 0, -1, 0],
    [-20, -14, -10, -6, -3, 0, -4, -1, 0, -1, 0],
    [-18, -12, -9, -6, -2, 0, -3, -1, 0, -1, 0],
    [-15, -10, -8, -4, -2, 0, -3, -1, 0, -1, 0],
], dtype=float)
# threshold in quiet per approximated critical band (dB)
LTQ = np.array([30, 18, 12, 8, 7, 6, 5, 4, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3, 3], dtype=float)
# free-field ear transmission
_A0 = np.array([0, 0, 0, 0, 0, 0, 0, 0, 0, 0, -0.5, -1.6, -3.2, -5.4, -5.6, -4.0,
                -1.5, 2.0, 5.0, 12.0])
# third-octave to critical-band level adaptation
_DCB = np.array([-0.25, -0.6, -0.8, -0.8, -0.5, 0, 0.5, 1.1, 1.5, 1.7, 1.8, 1.8, 1.7,
                 1.6, 1.4, 1.2, 0.8, 0.5, 0, -0.5])
# upper band edges in Bark
_ZUP = np.array([0.9, 1.8, 2.8, 3.5, 4.4, 5.4, 6.6, 7.9, 9.2, 10.6, 12.3, 13.8, 15.2,
                 16.7, 18.1, 19.3, 20.6, 21.8, 22.7, 23.6, 24.0])
# specific-loudness ranges and the matching upper-slope steepness per band group
_RNS = np.array([21.5, 18.0, 15.1, 11.5, 9.0, 6.1, 4.4, 3.1, 2.13, 1.36, 0.82, 0.42,
                 0.30, 0.22, 0.15, 0.10, 0.035, 0.0])
_USL = np.array([
    [13.00, 8.20, 6.30, 5.50, 5.50, 5.50, 5.50, 5.50],
    [9.00, 7.50, 6.00, 5.10, 4.50, 4.50, 4.50, 4.50],
    [7.80, 6.70, 5.60, 4.90, 4.40, 3.90, 3.90, 3.90],
    [6.20, 5.40, 4.60, 4.00, 3.50, 3.20, 3.20, 3.20],
    [4.50, 3.80, 3.60, 3.20, 2.90, 2.70, 2.70, 2.70],
    [3.70, 3.00, 2.80, 2.35, 2.20, 2.20, 2.20, 2.20],
    [2.90, 2.30, 2.10, 1.90, 1.80, 1.70, 1.70, 1.70],
    [2.40, 1.70, 1.50, 1.35, 1.30, 1.30, 1.30, 1.30],
    [1.95, 1.45, 1.30, 1.15, 1.10, 1.10, 1.10, 1.10],
    [1.50, 1.20, 0.94, 0.86, 0.82, 0.82, 0.82, 0.82],
    [0.72, 0.67, 0.64, 0.63, 0.62, 0.62, 0.62, 0.62],
    [0.59, 0.53, 0.51, 0.50, 0.42, 0.42, 0.42, 0.42],
    [0.40, 0.33, 0.26, 0.24, 0.22, 0.22, 0.22, 0.22],
    [0.27, 0.21, 0.20, 0.18, 0.17, 0.17, 0.17, 0.17],
    [0.16, 0.15, 0.14, 0.12, 0.11, 0.11, 0.11, 0.11],
    [0.12, 0.11, 0.10, 0.08, 0.08, 0.08, 0.08, 0.08],
    [0.09, 0.08, 0.07, 0.06, 0.06, 0.06, 0.06, 0.05],
    [0.06, 0.05, 0.03, 0.02, 0.02, 0.02, 0.02, 0.02],
])

BARK = np.round(np.arange(241) * 0.1, 10)
SILENCE_DB = -200.0

# Sharpness scale: 0.11 nominal, rescaled so that the reference sound (60 dB
# band of noise centred on 1 kHz, one critical band wide) measures exactly
# 1 acum with this loudness model.
SHARPNESS_K = 0.10337993882459824


@dataclass(frozen=True)
class CalibrationSpec:
    """dB SPL assigned to a full-scale sine."""

    dbfs_to_spl: float = 94.0

    def __post_init__(self):
        if not np.isfinite(self.dbfs_to_spl) or self.dbfs_to_spl <= 0:
            raise ValueError("calibration must be a positive finite dB SPL value")

    def level_db(self, mean_square):
        """SPL of a signal with the given mean-square amplitude."""
        ms = np.asarray(mean_square, dtype=float)
        with np.errstate(divide="ignore"):
            lv = self.dbfs_to_spl + 10 * np.log10(ms / 0.5)
        return np.maximum(lv, SILENCE_DB)

    def amplitude_for(self, spl_db: float) -> float:
        """Sine amplitude that measures ``spl_db``."""
        return float(10 ** ((spl_db - self.dbfs_to_spl) / 20))


@dataclass(frozen=True)
class SpecificLoudness:
    """N'(z) in sone/Bark on ``BARK`` (0..24 in 0.1 steps)."""

    values: np.ndarray
    total_sone: float
    phon: float

    @property
    def z(self) -> np.ndarray:
        return BARK

    @classmethod
    def from_values(cls, values) -> "SpecificLoudness":
        v = np.maximum(np.asarray(values, dtype=float), 0.0)
        n = float(np.trapezoid(v, BARK))
        return cls(v, n, sone_to_phon(n))


def sone_to_phon(n: float) -> float:
    if n >= 1.0:
        return float(40.0 + 10.0 * np.log2(n))
    return float(40.0 * (max(n, 0.0) + 0.0005) ** 0.35)


# ---------------------------------------------------------------- band levels

def band_edges(centers=THIRD_OCTAVE_CENTERS):
    return centers * 2 ** (-1 / 6), centers * 2 ** (1 / 6)


def third_octave_levels(blocks, sample_rate: int, calib: CalibrationSpec) -> np.ndarray:
    """Third-octave band SPLs (blocks x 28) from Hann-windowed power spectra.

    The one-sided periodogram is scaled so that its bins sum to the block's
    mean-square amplitude.
    """
    blocks = np.atleast_2d(blocks)
    n = blocks.shape[1]
    w = hann_window(n)
    spec = np.abs(np.fft.rfft(blocks * w, axis=1)) ** 2 / (n * np.sum(w * w))
    spec[:, 1:(n + 1) // 2] *= 2
    freqs = np.fft.rfftfreq(n, 1 / sample_rate)
    lo, hi = band_edges()
    powers = np.zeros((blocks.shape[0], len(lo)))
    for b, (fl, fh) in enumerate(zip(lo, hi)):
        sel = (freqs >= fl) & (freqs < fh)
        if sel.any():
            powers[:, b] = spec[:, sel].sum(axis=1)
    return calib.level_db(powers)


# ---------------------------------------------------------------- Zwicker model

def core_loudness(levels, formula: str = "iso") -> np.ndarray:
    """Core specific loudness of the 20 approximated critical bands (plus a zero).

    ``formula="iso"`` uses ``0.0635 * 10^(0.025 LTQ) * [(0.75 + 0.25 E/E_TQ)^0.25 - 1]``.
    ``formula="fastl"`` uses the textbook variant
    ``0.08 (E_TQ/E_0)^0.23 [(0.5 + 0.5 E/E_TQ)^0.23 - 1]``.
    """
    levels = np.asarray(levels, dtype=float)
    if levels.shape != (28,):
        raise ValueError("expected 28 third-octave levels")
    ti = np.zeros(11)
    for i in range(11):
        row = np.nonzero(levels[i] <= _RAP - _DLL[:, i])[0]
        j = row[0] if len(row) else len(_RAP) - 1
        ti[i] = 10 ** (0.1 * (levels[i] + _DLL[j, i]))
    low = np.array([ti[:6].sum(), ti[6:9].sum(), ti[9:11].sum()])
    with np.errstate(divide="ignore"):
        low = 10 * np.log10(low)
    le = np.concatenate([low, levels[11:]]) - _A0
    nc = np.zeros(21)
    above = le > LTQ
    le = np.where(above, le - _DCB, le)
    if formula == "iso":
        v = 0.0635 * 10 ** (0.025 * LTQ) * ((0.75 + 0.25 * 10 ** (0.1 * (le - LTQ))) ** 0.25 - 1)
    elif formula == "fastl":
        v = 0.08 * 10 ** (0.023 * LTQ) * ((0.5 + 0.5 * 10 ** (0.1 * (le - LTQ))) ** 0.23 - 1)
    else:
        raise ValueError(f"unknown specific loudness formula {formula!r}")
    nc[:20] = np.where(above, np.maximum(v, 0.0), 0.0)
    # the absolute threshold varies inside the lowest band
    nc[0] *= min(1.0, 0.4 + 0.32 * nc[0] ** 0.2)
    return nc


def specific_loudness(levels, formula: str = "iso") -> SpecificLoudness:
    """Specific loudness pattern for 28 third-octave band levels (dB SPL)."""
    nc = core_loudness(levels, formula)
    segs, _ = kernels.spread_specific_loudness(nc, _ZUP, _RNS, _USL)
    return SpecificLoudness.from_values(sample_pattern(segs, BARK))


def sample_pattern(segments, z) -> np.ndarray:
    """Evaluate a piecewise-linear pattern at ``z``.

    At a jump the mean of the two one-sided limits is used, which keeps the
    trapezoidal integral of the samples equal to the pattern's area when
    jumps fall on grid points.
    """
    seg = segments[segments[:, 1] - segments[:, 0] > 1e-12]
    z = np.asarray(z, dtype=float)
    zs, ze, ns, ne = seg.T

    def at(idx):
        idx = np.clip(idx, 0, len(seg) - 1)
        frac = np.clip((z - zs[idx]) / (ze[idx] - zs[idx]), 0.0, 1.0)
        return ns[idx] + frac * (ne[idx] - ns[idx])

    left = at(np.searchsorted(ze, z - 1e-9, side="left"))
    right = at(np.searchsorted(zs, z + 1e-9, side="right") - 1)
    left = np.where(z <= zs[0] + 1e-9, right, left)
    right = np.where(z >= ze[-1] - 1e-9, left, right)
    return 0.5 * (left + right)


@dataclass(frozen=True)
class LoudnessResult:
    times: np.ndarray  # block centres, s
    sone: np.ndarray
    phon: np.ndarray
    mean_phon: float
    silent: bool
    specific: SpecificLoudness  # of the long-term average spectrum
    calibration: CalibrationSpec

    def to_csv(self) -> str:
        lines = ["block_time_s,sone,phon"]
        lines += [f"{t!r},{s!r},{p!r}" for t, s, p in
                  zip(self.times.tolist(), self.sone.tolist(), self.phon.tolist())]
        return "\n".join(lines) + "\n"


def loudness(signal: MonoSignal, calib: CalibrationSpec | None = None, block_size: int = 2048,
             formula: str = "iso") -> LoudnessResult:
    """Block-wise loudness contour (50% overlap) and its mean in phon.

    The mean is taken over blocks with non-zero loudness; a signal with none
    reports ``mean_phon = 0`` and ``silent = True``.
    """
    calib = CalibrationSpec() if calib is None else calib
    if len(signal) == 0:
        raise ValueError("cannot compute loudness of an empty signal")
    if len(signal) < block_size:
        raise ValueError(f"signal shorter than one {block_size}-sample block")
    hop = block_size // 2
    blocks = frame_samples(signal.samples, block_size, hop)
    levels = third_octave_levels(blocks, signal.sample_rate, calib)
    patterns = [specific_loudness(lv, formula) for lv in levels]
    sone = np.array([p.total_sone for p in patterns])
    phon = np.array([p.phon for p in patterns])
    loud = sone > 0
    silent = not loud.any()
    mean_phon = 0.0 if silent else float(phon[loud].mean())
    with np.errstate(divide="ignore"):
        avg = 10 * np.log10(np.mean(10 ** (levels / 10), axis=0))
    longterm = specific_loudness(np.maximum(avg, SILENCE_DB), formula)
    times = (np.arange(len(blocks)) * hop + block_size / 2) / signal.sample_rate
    return LoudnessResult(times, sone, phon, mean_phon, silent, longterm, calib)


# ---------------------------------------------------------------- sharpness

def sharpness_weighting(z):
    z = np.asarray(z, dtype=float)
    return np.where(z <= 15.8, 1.0, 0.15 * np.exp(0.42 * (z - 15.8)) + 0.85)


def sharpness(spec: SpecificLoudness, k: float = SHARPNESS_K) -> float:
    """Weighted first moment of N'(z) in acum."""
    den = np.trapezoid(spec.values, BARK)
    if den <= 0:
        raise SilentSignalError("sharpness is undefined for zero loudness")
    num = np.trapezoid(spec.values * sharpness_weighting(BARK) * BARK, BARK)
    return float(k * num / den)
