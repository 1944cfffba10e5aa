"""Ground-truth multi-speaker scenes and separation scoring.

Mixtures follow the instantaneous model ``x_i[n] = sum_j a_ij s_j[n]`` with
optional white Gaussian sensor noise. Random numbers come from numpy's
``default_rng`` (PCG64) seeded by the scene seed, so a scene is reproducible
bit for bit.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateSignalError, DimensionMismatchError, TooManySourcesError
from .signal import MonoSignal

SI_SDR_CAP_DB = 100.0
MAX_PERMUTATION_SOURCES = 5

DEMO_3 = np.array([[1.0, 0.5, 0.3],
                   [0.4, 1.0, 0.5],
                   [0.3, 0.4, 1.0]])


@dataclass(frozen=True)
class MixingMatrix:
    """Mixing weights, rows = sensors and columns = sources."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim == 1:
            w = w.reshape(1, -1)
        if w.ndim != 2 or w.size == 0:
            raise DimensionMismatchError("mixing weights must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(w)):
            raise ValueError("mixing weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_sensors(self) -> int:
        return self.weights.shape[0]

    @property
    def n_sources(self) -> int:
        return self.weights.shape[1]

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.weights))

    @classmethod
    def identity(cls, n: int) -> "MixingMatrix":
        return cls(np.eye(n))

    @classmethod
    def demo(cls, n: int = 3) -> "MixingMatrix":
        """Weights that decay with |i - j|, standing in for speaker distance."""
        if n == 3:
            return cls(DEMO_3)
        i, j = np.indices((n, n))
        return cls(0.5 ** np.abs(i - j))

    @classmethod
    def from_csv(cls, path) -> "MixingMatrix":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))

    def to_csv(self) -> str:
        rows = [",".join(repr(float(v)) for v in row) for row in self.weights]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class Scene:
    sources: tuple
    mixing: MixingMatrix
    noise_snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources:
            raise DimensionMismatchError("a scene needs at least one source")
        if len(self.sources) != self.mixing.n_sources:
            raise DimensionMismatchError(
                f"{len(self.sources)} sources but mixing matrix has {self.mixing.n_sources} columns")
        lengths = {len(s) for s in self.sources}
        rates = {s.sample_rate for s in self.sources}
        if len(lengths) > 1:
            raise DimensionMismatchError("sources must have equal length")
        if len(rates) > 1:
            raise DimensionMismatchError("sources must share one sample rate")

    @property
    def sample_rate(self) -> int:
        return self.sources[0].sample_rate


def mix(scene: Scene) -> list[MonoSignal]:
    """Sensor signals for ``scene``; noise (if any) is scaled to the exact SNR."""
    s = np.stack([src.samples for src in scene.sources])
    x = scene.mixing.weights @ s
    if scene.noise_snr_db is not None:
        rng = np.random.default_rng(scene.seed)
        for i in range(x.shape[0]):
            noise = rng.standard_normal(x.shape[1])
            p_sig = np.mean(x[i] ** 2)
            p_noise = np.mean(noise ** 2)
            if p_sig > 0 and p_noise > 0:
                target = p_sig / 10 ** (scene.noise_snr_db / 10)
                x[i] = x[i] + noise * np.sqrt(target / p_noise)
    return [MonoSignal(row, scene.sample_rate) for row in x]


def measured_snr_db(clean, noisy) -> float:
    clean = np.asarray(clean, dtype=float)
    resid = np.asarray(noisy, dtype=float) - clean
    return float(10 * np.log10(np.sum(clean ** 2) / np.sum(resid ** 2)))


# ---------------------------------------------------------------- synthesis

def am_sawtooth(f0: float, duration: float, sample_rate: int = 44100, am_rate: float = 4.0,
                am_depth: float = 0.8, phase: float = 0.0) -> MonoSignal:
    """Amplitude-modulated sawtooth, a crude stand-in for a sustained vowel."""
    t = np.arange(round(duration * sample_rate)) / sample_rate
    saw = 2.0 * np.mod(f0 * t + phase, 1.0) - 1.0
    env = 1.0 + am_depth * np.sin(2 * np.pi * am_rate * t + 2 * np.pi * phase)
    return MonoSignal(0.3 * env * saw, sample_rate)


def demo_sources(n: int = 3, duration: float = 5.0, sample_rate: int = 44100) -> list[MonoSignal]:
    """Distinct AM sawtooth voices (different pitch and syllable rate)."""
    f0s = [110.0, 175.0, 240.0, 145.0, 205.0]
    ams = [3.0, 4.7, 6.1, 2.3, 5.3]
    if not 1 <= n <= len(f0s):
        raise ValueError(f"demo supports 1..{len(f0s)} sources")
    return [am_sawtooth(f0s[k], duration, sample_rate, ams[k], phase=0.13 * k) for k in range(n)]


# ---------------------------------------------------------------- scoring

@dataclass(frozen=True)
class SeparationScore:
    """``permutation[i]`` is the estimate assigned to reference ``i``."""

    permutation: tuple
    per_source_correlation: tuple
    per_source_si_sdr_db: tuple
    signs: tuple

    @property
    def mean_correlation(self) -> float:
        return float(np.mean(self.per_source_correlation))

    @property
    def mean_si_sdr_db(self) -> float:
        return float(np.mean(self.per_source_si_sdr_db))

    def to_dict(self) -> dict:
        return {
            "permutation": list(self.permutation),
            "per_source_correlation": list(self.per_source_correlation),
            "per_source_si_sdr_db": list(self.per_source_si_sdr_db),
            "signs": list(self.signs),
        }


def _samples(x):
    return x.samples if isinstance(x, MonoSignal) else np.asarray(x, dtype=float)


def si_sdr(estimate, reference) -> float:
    """Scale-invariant SDR in dB, clipped to +-100 dB."""
    e = _samples(estimate)
    r = _samples(reference)
    if len(e) != len(r):
        raise DimensionMismatchError("estimate and reference lengths differ")
    if len(r) < 2:
        raise DimensionMismatchError("need at least two samples")
    rr = float(r @ r)
    if rr == 0.0:
        raise DegenerateSignalError("reference is all zero")
    target = (float(e @ r) / rr) * r
    resid = e - target
    num = float(target @ target)
    den = float(resid @ resid)
    if num == 0.0:
        return -SI_SDR_CAP_DB
    if den == 0.0 or num / den > 10 ** (SI_SDR_CAP_DB / 10):
        return SI_SDR_CAP_DB
    return float(max(-SI_SDR_CAP_DB, 10 * np.log10(num / den)))


def correlation_matrix(estimates, references) -> np.ndarray:
    """Pearson correlation, rows = references, columns = estimates."""
    e = np.stack([_samples(x) for x in estimates])
    r = np.stack([_samples(x) for x in references])
    e = e - e.mean(axis=1, keepdims=True)
    r = r - r.mean(axis=1, keepdims=True)
    en = np.sqrt(np.sum(e * e, axis=1))
    rn = np.sqrt(np.sum(r * r, axis=1))
    if np.any(en == 0) or np.any(rn == 0):
        raise DegenerateSignalError("zero-variance signal cannot be correlated")
    return np.clip((r @ e.T) / np.outer(rn, en), -1.0, 1.0)


def best_permutation(estimates, references) -> SeparationScore:
    """Assign estimates to references maximising mean |Pearson r|.

    Exhaustive over all permutations, so limited to five signals.
    """
    if len(estimates) != len(references):
        raise DimensionMismatchError("estimate and reference counts differ")
    n = len(references)
    if n > MAX_PERMUTATION_SOURCES:
        raise TooManySourcesError(f"exhaustive permutation search limited to {MAX_PERMUTATION_SOURCES}")
    if len({len(_samples(x)) for x in [*estimates, *references]}) > 1:
        raise DimensionMismatchError("all signals must have equal length")
    c = correlation_matrix(estimates, references)
    a = np.abs(c)
    best, best_val = None, -1.0
    for perm in itertools.permutations(range(n)):
        val = sum(a[i, perm[i]] for i in range(n))
        if val > best_val + 1e-12:
            best, best_val = perm, val
    corr = tuple(float(a[i, best[i]]) for i in range(n))
    signs = tuple(1 if c[i, best[i]] >= 0 else -1 for i in range(n))
    sdr = tuple(si_sdr(estimates[best[i]], references[i]) for i in range(n))
    return SeparationScore(tuple(int(p) for p in best), corr, sdr, signs)


# ---------------------------------------------------------------- manifest

def load_manifest(path) -> dict:
    """Parse a scene manifest ``{sources, mixing, snr_db, seed}``.

    Source and mixing paths are resolved relative to the manifest file.
    """
    path = Path(path)
    spec = json.loads(path.read_text())
    if not isinstance(spec, dict) or "sources" not in spec:
        raise ValueError("manifest must be an object with a 'sources' list")
    sources = spec["sources"]
    if not isinstance(sources, list) or not sources:
        raise ValueError("'sources' must be a non-empty list of WAV paths")
    base = path.parent
    mixing = spec.get("mixing", "identity")
    if mixing not in ("identity", "demo"):
        mixing = str((base / mixing).resolve()) if not Path(mixing).is_absolute() else mixing
    snr = spec.get("snr_db")
    return {
        "sources": [str(base / s) if not Path(s).is_absolute() else s for s in sources],
        "mixing": mixing,
        "snr_db": None if snr is None else float(snr),
        "seed": int(spec.get("seed", 0)),
    }


def resolve_mixing(kind: str, n: int) -> MixingMatrix:
    if kind == "identity":
        return MixingMatrix.identity(n)
    if kind == "demo":
        return MixingMatrix.demo(n)
    return MixingMatrix.from_csv(kind)
