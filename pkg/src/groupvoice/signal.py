"""Waveform container, WAV I/O, framing and short-time Fourier transforms."""
from __future__ import annotations

import io
import math
import os
import struct
import tempfile
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MalformedWavError, UnsupportedEncodingError, WavFileNotFoundError

CANONICAL_RATE = 44100
_PCM = 1
_IEEE_FLOAT = 3
_EXTENSIBLE = 0xFFFE
_INT16_MAX = 32767 / 32768


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class MonoSignal:
    """A single-channel waveform.

    ``samples`` is stored as a read-only float64 array; amplitudes are
    dimensionless with full scale at +-1.
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        arr = _frozen(np.ravel(self.samples))
        if not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        rate = self.sample_rate
        if isinstance(rate, float) and rate.is_integer():
            rate = int(rate)
        if not isinstance(rate, (int, np.integer)) or rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(rate))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples) -> "MonoSignal":
        return MonoSignal(samples, self.sample_rate)


@dataclass(frozen=True)
class FrameSequence:
    frames: np.ndarray  # (n_frames, frame_length)
    frame_length: int
    hop: int
    sample_rate: int

    def __len__(self):
        return self.frames.shape[0]

    @property
    def starts(self) -> np.ndarray:
        return np.arange(len(self)) * self.hop

    @property
    def centers(self) -> np.ndarray:
        """Frame centre times in seconds."""
        return (self.starts + self.frame_length / 2) / self.sample_rate


@dataclass(frozen=True)
class Spectrogram:
    data: np.ndarray  # (n_frames, fft_size // 2 + 1), complex
    fft_size: int
    hop: int
    sample_rate: int
    n_samples: int
    window: str = "hann"

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)

    @property
    def phase(self) -> np.ndarray:
        return np.angle(self.data)

    @property
    def frequencies(self) -> np.ndarray:
        return np.fft.rfftfreq(self.fft_size, 1 / self.sample_rate)

    def with_data(self, data) -> "Spectrogram":
        return Spectrogram(np.asarray(data), self.fft_size, self.hop, self.sample_rate,
                           self.n_samples, self.window)


# ---------------------------------------------------------------- WAV I/O

def _read_chunks(raw: bytes):
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWavError("not a RIFF/WAVE file")
    pos = 12
    chunks = {}
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        (size,) = struct.unpack("<I", raw[pos + 4:pos + 8])
        body = raw[pos + 8:pos + 8 + size]
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)
    return chunks


def load_wav(path) -> list[MonoSignal]:
    """Read a PCM WAV file, returning one :class:`MonoSignal` per channel.

    16-bit integer samples are scaled by 1/32768; 32-bit IEEE float samples
    are taken as-is.

    Raises
    ------
    WavFileNotFoundError, MalformedWavError, UnsupportedEncodingError
    """
    path = Path(path)
    if not path.is_file():
        raise WavFileNotFoundError(f"no such WAV file: {path}")
    chunks = _read_chunks(path.read_bytes())
    fmt = chunks.get(b"fmt ")
    if fmt is None or len(fmt) < 16:
        raise MalformedWavError(f"{path}: missing or short fmt chunk")
    if b"data" not in chunks:
        raise MalformedWavError(f"{path}: missing data chunk")
    tag, channels, rate, _, block_align, bits = struct.unpack("<HHIIHH", fmt[:16])
    if tag == _EXTENSIBLE:
        if len(fmt) < 26:
            raise MalformedWavError(f"{path}: short WAVE_FORMAT_EXTENSIBLE header")
        (tag,) = struct.unpack("<H", fmt[24:26])
    if channels < 1 or rate < 1 or block_align != channels * bits // 8:
        raise MalformedWavError(f"{path}: inconsistent fmt chunk")
    if tag == _PCM and bits == 16:
        dtype, scale = np.dtype("<i2"), 1 / 32768
    elif tag == _IEEE_FLOAT and bits == 32:
        dtype, scale = np.dtype("<f4"), 1.0
    else:
        raise UnsupportedEncodingError(f"{path}: format tag {tag} with {bits} bits is not supported")
    data = chunks[b"data"]
    n_frames = len(data) // block_align
    pcm = np.frombuffer(data[:n_frames * block_align], dtype=dtype).reshape(n_frames, channels)
    pcm = pcm.astype(np.float64) * scale
    if not np.all(np.isfinite(pcm)):
        raise MalformedWavError(f"{path}: non-finite float samples")
    return [MonoSignal(pcm[:, c], rate) for c in range(channels)]


def quantize_pcm16(samples) -> np.ndarray:
    """Clamp to [-1, 1 - 2**-15] and round to int16."""
    x = np.clip(np.asarray(samples, dtype=float), -1.0, _INT16_MAX)
    return np.round(x * 32768).astype("<i2")


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def wav_bytes(signals, sample_rate: int) -> bytes:
    """Encode equal-length sample arrays as interleaved 16-bit PCM WAV bytes."""
    chans = [quantize_pcm16(s) for s in signals]
    if len({len(c) for c in chans}) > 1:
        raise ValueError("channels must have equal length")
    inter = np.stack(chans, axis=1) if chans else np.zeros((0, 1), dtype="<i2")
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wf:
        wf.setnchannels(max(len(chans), 1))
        wf.setsampwidth(2)
        wf.setframerate(int(sample_rate))
        wf.writeframes(inter.tobytes())
    return buf.getvalue()


def write_wav(signal: MonoSignal, path) -> None:
    """Write ``signal`` as 16-bit PCM mono. Out-of-range samples are clamped."""
    try:
        atomic_write_bytes(path, wav_bytes([signal.samples], signal.sample_rate))
    except (FileNotFoundError, PermissionError, IsADirectoryError, NotADirectoryError) as exc:
        raise OSError(f"cannot write WAV to {path}: {exc}") from exc


# ---------------------------------------------------------------- framing

def _frame_count(n: int, length: int, hop: int) -> int:
    if n < 1:
        return 0
    return math.ceil(max(0, n - length) / hop) + 1


def frame_samples(x, frame_length: int, hop: int) -> np.ndarray:
    """Split ``x`` into ``(n_frames, frame_length)``, zero-padding the tail."""
    if frame_length < 1 or hop < 1 or hop > frame_length:
        raise ValueError("need 0 < hop <= frame_length")
    x = np.asarray(x, dtype=float)
    count = _frame_count(len(x), frame_length, hop)
    if count == 0:
        return np.zeros((0, frame_length))
    padded = np.zeros((count - 1) * hop + frame_length)
    padded[:len(x)] = x
    idx = np.arange(count)[:, None] * hop + np.arange(frame_length)[None, :]
    return padded[idx]


def frame_signal(signal: MonoSignal, frame_ms: float, hop_ms: float) -> FrameSequence:
    if frame_ms <= 0 or hop_ms <= 0:
        raise ValueError("frame and hop durations must be positive")
    if hop_ms > frame_ms:
        raise ValueError("hop must not exceed the frame length")
    length = max(1, round(frame_ms * signal.sample_rate / 1000))
    hop = min(length, max(1, round(hop_ms * signal.sample_rate / 1000)))
    return FrameSequence(frame_samples(signal.samples, length, hop), length, hop, signal.sample_rate)


def hann_window(n: int) -> np.ndarray:
    """Symmetric Hann window, zero at both ends for ``n >= 2``."""
    if n < 1:
        raise ValueError("window length must be >= 1")
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * k / (n - 1))
    # force exact symmetry
    return 0.5 * (w + w[::-1])


# ---------------------------------------------------------------- STFT

def _check_stft(fft_size: int, hop: int):
    if fft_size < 64 or fft_size & (fft_size - 1):
        raise ValueError(f"fft_size must be a power of two >= 64, got {fft_size}")
    if hop != fft_size // 2:
        raise ValueError("hop must be fft_size / 2")


def stft(signal: MonoSignal, fft_size: int = 2048, hop: int | None = None,
         window: str = "hann") -> Spectrogram:
    """Hann-windowed STFT with 50% overlap.

    The signal is padded with ``hop`` zeros at both ends, so frame ``i`` is
    centred on sample ``i * hop`` and every input sample lies under two
    windows.
    """
    hop = fft_size // 2 if hop is None else hop
    _check_stft(fft_size, hop)
    if window != "hann":
        raise ValueError(f"unsupported window {window!r}")
    x = np.concatenate([np.zeros(hop), signal.samples, np.zeros(hop)])
    frames = frame_samples(x, fft_size, hop) * hann_window(fft_size)
    return Spectrogram(np.fft.rfft(frames, axis=1), fft_size, hop, signal.sample_rate, len(signal), window)


def istft(spec: Spectrogram) -> MonoSignal:
    """Weighted overlap-add with the Hann synthesis window, normalised by sum(w^2).

    Exact inverse of :func:`stft` for an unmodified spectrogram; for a
    modified one this is the least-squares signal estimate.
    """
    _check_stft(spec.fft_size, spec.hop)
    n_frames = spec.data.shape[0]
    if n_frames == 0:
        return MonoSignal(np.zeros(spec.n_samples), spec.sample_rate)
    w = hann_window(spec.fft_size)
    frames = np.fft.irfft(spec.data, n=spec.fft_size, axis=1) * w
    total = (n_frames - 1) * spec.hop + spec.fft_size
    out = np.zeros(total)
    wsum = np.zeros(total)
    for i in range(n_frames):
        s = i * spec.hop
        out[s:s + spec.fft_size] += frames[i]
        wsum[s:s + spec.fft_size] += w * w
    # only the padding ever sees a near-zero weight
    out /= np.maximum(wsum, 1e-12)
    return MonoSignal(out[spec.hop:spec.hop + spec.n_samples], spec.sample_rate)
