"""Spectral-subtraction noise reduction.

The noise magnitude spectrum is averaged over speech pauses, then subtracted
from every frame's magnitude (``|S| = max(|X| - alpha |N|, beta |X|)``).
The noisy phase is reused and the signal is rebuilt by inverse FFT and
overlap-add.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyMaskError, SettingsMismatchError
from .signal import MonoSignal, frame_signal, istft, stft

FFT_SIZE = 2048


@dataclass(frozen=True)
class PauseMask:
    pause: np.ndarray  # bool per frame, True = noise only
    frame_length: int
    hop: int
    sample_rate: int
    fallback: bool = False

    def __len__(self):
        return len(self.pause)

    @property
    def times(self) -> np.ndarray:
        return (np.arange(len(self)) * self.hop + self.frame_length / 2) / self.sample_rate

    def sample_mask(self, n_samples: int) -> np.ndarray:
        """Per-sample pause flags, each sample taking the frame centred nearest to it."""
        if len(self) == 0:
            return np.zeros(n_samples, dtype=bool)
        idx = np.rint((np.arange(n_samples) - self.frame_length / 2) / self.hop)
        idx = np.clip(idx, 0, len(self) - 1).astype(int)
        return self.pause[idx]


@dataclass(frozen=True)
class NoiseProfile:
    magnitude: np.ndarray
    n_frames: int
    fft_size: int
    sample_rate: int

    def __post_init__(self):
        if len(self.magnitude) != self.fft_size // 2 + 1:
            raise ValueError("profile bin count must be fft_size/2 + 1")
        if np.any(self.magnitude < 0):
            raise ValueError("noise magnitudes must be non-negative")

    @classmethod
    def zeros(cls, fft_size: int = FFT_SIZE, sample_rate: int = 44100) -> "NoiseProfile":
        return cls(np.zeros(fft_size // 2 + 1), 1, fft_size, sample_rate)


def detect_pauses(signal: MonoSignal, frame_ms: float = 32.0, hop_ms: float = 16.0,
                  theta: float = 0.25) -> PauseMask:
    """Energy-threshold pause detector.

    A frame is a pause when its RMS is below ``theta`` times the median frame
    RMS. If nothing qualifies, the quietest 10% of frames are used instead so
    a noise profile can always be formed.
    """
    if len(signal) == 0:
        raise ValueError("cannot detect pauses in an empty signal")
    fr = frame_signal(signal, frame_ms, hop_ms)
    rms = np.sqrt(np.mean(fr.frames ** 2, axis=1))
    med = np.median(rms)
    mask = rms < theta * med if med > 0 else rms == 0
    fallback = False
    if not mask.any():
        n = max(1, math.ceil(0.1 * len(rms)))
        quiet = np.argsort(rms, kind="stable")[:n]
        mask = np.zeros(len(rms), dtype=bool)
        mask[quiet] = True
        fallback = True
    return PauseMask(mask, fr.frame_length, fr.hop, signal.sample_rate, fallback)


def estimate_noise_profile(signal: MonoSignal, mask: PauseMask, fft_size: int = FFT_SIZE) -> NoiseProfile:
    """Mean magnitude spectrum over the analysis frames that fall in pauses.

    An STFT frame counts as a pause when at least half of its window covers
    pause samples. Frames that reach into the zero padding at either end are
    only used when no interior frame qualifies; failing that, the frames
    with the largest pause share are used.
    """
    if not np.any(mask.pause):
        raise EmptyMaskError("pause mask marks no frames")
    spec = stft(signal, fft_size)
    per_sample = mask.sample_mask(len(signal)).astype(float)
    hop = spec.hop
    n_frames = spec.data.shape[0]
    share = np.zeros(n_frames)
    interior = np.zeros(n_frames, dtype=bool)
    for i in range(n_frames):
        # frame i covers samples [(i-1) hop, (i+1) hop), see signal.stft
        lo, hi = (i - 1) * hop, (i + 1) * hop
        share[i] = per_sample[max(0, lo):hi].sum() / fft_size
        interior[i] = lo >= 0 and hi <= len(signal)
    chosen = (share >= 0.5) & interior
    if not chosen.any():
        chosen = share >= 0.5
    if not chosen.any():
        chosen = share == share.max()
    mag = np.abs(spec.data[chosen]).mean(axis=0)
    return NoiseProfile(mag, int(chosen.sum()), fft_size, signal.sample_rate)


def subtract_magnitudes(mag, noise, alpha: float = 2.0, beta: float = 0.02):
    """``max(|X| - alpha |N|, beta |X|)`` bin by bin."""
    return np.maximum(mag - alpha * noise, beta * mag)


def spectral_subtract(noisy: MonoSignal, profile: NoiseProfile, alpha: float = 2.0,
                      beta: float = 0.02, fft_size: int = FFT_SIZE) -> MonoSignal:
    """Subtract ``alpha`` times the profile from each frame's magnitude.

    Raises
    ------
    SettingsMismatchError
        If the profile was built at another sample rate or FFT size.
    """
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    if not 0 <= beta < 1:
        raise ValueError("beta must be in [0, 1)")
    if profile.sample_rate != noisy.sample_rate:
        raise SettingsMismatchError(
            f"profile sample rate {profile.sample_rate} != signal rate {noisy.sample_rate}")
    if profile.fft_size != fft_size:
        raise SettingsMismatchError(f"profile fft size {profile.fft_size} != analysis size {fft_size}")
    spec = stft(noisy, fft_size)
    mag = np.abs(spec.data)
    phase = np.exp(1j * np.angle(spec.data))
    clean = subtract_magnitudes(mag, profile.magnitude[None, :], alpha, beta)
    return istft(spec.with_data(clean * phase))


def enhance(signal: MonoSignal, alpha: float = 2.0, beta: float = 0.02, pause_theta: float = 0.25,
            fft_size: int = FFT_SIZE) -> MonoSignal:
    """Pause detection, noise profiling and subtraction in one call."""
    mask = detect_pauses(signal, theta=pause_theta)
    profile = estimate_noise_profile(signal, mask, fft_size)
    return spectral_subtract(signal, profile, alpha, beta, fft_size)
