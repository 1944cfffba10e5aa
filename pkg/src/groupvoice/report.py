"""Run configuration and per-signal feature reports.

Reports are plain JSON with sorted keys; nothing time-dependent goes into
them, so identical inputs and settings give byte-identical files. A feature
that cannot be computed is written as ``null`` and its reason code is listed
under ``null_reasons``.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .enhance import enhance
from .errors import (DegenerateSignalError, GroupVoiceError, InsufficientCyclesError,
                     SilentSignalError, UnvoicedSignalError)
from .perturb import classical_set, extract_cycles
from .perturb import feature_units as perturb_units
from .pitch import PitchContour, estimate_f0_contour
from .psycho import CalibrationSpec, LoudnessResult, loudness, semitone_sd, sharpness
from .signal import MonoSignal

SCHEMA_VERSION = "1.0"
SCHEMA_PATH = Path(__file__).with_name("report.schema.json")


class ConfigError(ValueError):
    """Bad run configuration (a usage error at the command line)."""


@dataclass
class RunConfig:
    """Every tunable of the processing chain, with the library defaults."""

    seed: int = 0
    # separation
    n_components: int | None = None
    contrast: str = "logcosh"
    tol: float = 1e-6
    max_iter: int = 200
    max_restarts: int = 3
    # enhancement
    alpha: float = 2.0
    beta: float = 0.02
    pause_theta: float = 0.25
    fft_size: int = 2048
    # pitch
    fmin: float = 60.0
    fmax: float = 400.0
    frame_ms: float = 40.0
    hop_ms: float = 10.0
    voicing_threshold: float = 0.45
    # perturbation quotient order for PPQ/APQ
    pq_k: int = 5
    # loudness
    calib_spl: float = 94.0
    loudness_block: int = 2048
    loudness_formula: str = "iso"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f"{f.name} must be finite")
        if self.n_components is not None and self.n_components < 1:
            raise ConfigError("n_components must be >= 1")
        if self.contrast not in ("logcosh", "gauss"):
            raise ConfigError("contrast must be 'logcosh' or 'gauss'")
        if self.tol <= 0 or self.max_iter < 1 or self.max_restarts < 0:
            raise ConfigError("tol must be > 0, max_iter >= 1, max_restarts >= 0")
        if self.alpha < 1 or not 0 <= self.beta < 1 or self.pause_theta <= 0:
            raise ConfigError("need alpha >= 1, 0 <= beta < 1, pause_theta > 0")
        if self.fft_size < 64 or self.fft_size & (self.fft_size - 1):
            raise ConfigError("fft_size must be a power of two >= 64")
        if not 0 < self.fmin < self.fmax:
            raise ConfigError("need 0 < fmin < fmax")
        if self.pq_k < 3 or self.pq_k % 2 == 0:
            raise ConfigError("pq_k must be odd and >= 3")
        if self.calib_spl <= 0:
            raise ConfigError("calib_spl must be positive")
        if self.loudness_formula not in ("iso", "fastl"):
            raise ConfigError("loudness_formula must be 'iso' or 'fastl'")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("run configuration must be a JSON object")
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - set(names))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        kw = {}
        for k, v in d.items():
            default = names[k].default
            if isinstance(default, bool) or v is None:
                kw[k] = v
            elif isinstance(default, int) or k == "n_components":
                if isinstance(v, bool) or not isinstance(v, (int, float)) or not float(v).is_integer():
                    raise ConfigError(f"{k} must be an integer")
                kw[k] = int(v)
            elif isinstance(default, float):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f"{k} must be a number")
                kw[k] = float(v)
            else:
                if not isinstance(v, str):
                    raise ConfigError(f"{k} must be a string")
                kw[k] = v
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"run configuration is not valid JSON: {exc}") from exc
        return cls.from_dict(d)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


# ---------------------------------------------------------------- features

FEATURE_UNITS_BASE = {
    "f0.mean_hz": "Hz",
    "f0.min_hz": "Hz",
    "f0.max_hz": "Hz",
    "f0.voiced_fraction": "1",
    "semitone_sd": "st",
    "loudness.mean_phon": "phon",
    "sharpness.acum": "acum",
}


def feature_units(k: int = 5) -> dict:
    units = dict(FEATURE_UNITS_BASE)
    units.update(perturb_units(k))
    return dict(sorted(units.items()))


def _reason(exc: BaseException) -> str:
    if isinstance(exc, UnvoicedSignalError):
        return "unvoiced"
    if isinstance(exc, InsufficientCyclesError):
        return "insufficient_cycles"
    if isinstance(exc, SilentSignalError):
        return "silent"
    if isinstance(exc, DegenerateSignalError):
        return "degenerate"
    return "error"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _finite_or_none(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class FeatureReport:
    """Features of one signal plus how they were obtained."""

    id: str
    duration_s: float
    sample_rate: int
    features: dict
    units: dict
    null_reasons: dict
    loudness: dict
    provenance: dict
    errors: list = dataclasses.field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "id": self.id,
            "duration_s": self.duration_s,
            "sample_rate": self.sample_rate,
            "features": self.features,
            "units": self.units,
            "null_reasons": self.null_reasons,
            "loudness": self.loudness,
            "errors": self.errors,
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    def rows(self):
        """``(signal_id, feature, value, unit)`` for the comparison table."""
        for key in sorted(self.features):
            yield self.id, key, self.features[key], self.units.get(key, "")

    @classmethod
    def failed(cls, signal_id: str, stage: str, exc: BaseException, config: RunConfig,
               inputs=(), duration_s: float = 0.0, sample_rate: int = 0) -> "FeatureReport":
        """Report for a signal whose chain stopped at ``stage``."""
        units = feature_units(config.pq_k)
        code = f"{stage}_failed"
        return cls(signal_id, duration_s, sample_rate, {k: None for k in units}, units,
                   {k: code for k in units}, {"calibration_spl": config.calib_spl, "silent": None},
                   provenance(config, inputs),
                   [{"stage": stage, "code": _reason(exc), "message": str(exc)}])


def provenance(config: RunConfig, inputs=()) -> dict:
    """Tool version, parameters and input hashes (``inputs`` = ``[(name, sha256)]``)."""
    return {
        "tool": "groupvoice",
        "version": __version__,
        "parameters": config.to_dict(),
        "seed": config.seed,
        "inputs": [{"name": n, "sha256": h} for n, h in inputs],
    }


@dataclass
class Analysis:
    report: FeatureReport
    contour: PitchContour | None = None
    loudness: LoudnessResult | None = None


def analyze_signal(signal: MonoSignal, config: RunConfig, signal_id: str, inputs=()) -> Analysis:
    """Run the feature battery on one signal.

    Each feature group fails independently; failures become nulls with a
    reason code instead of exceptions.
    """
    units = feature_units(config.pq_k)
    feats = {k: None for k in units}
    reasons = {}
    errors = []

    def null(keys, code):
        for k in keys:
            feats[k] = None
            reasons[k] = code

    pitch_keys = [k for k in units if k.startswith(("f0.", "jitter.", "shimmer."))] + ["semitone_sd"]
    contour = None
    try:
        contour = estimate_f0_contour(signal, config.fmin, config.fmax, config.frame_ms,
                                      config.hop_ms, config.voicing_threshold)
    except ValueError as exc:
        null(pitch_keys, "too_short" if len(signal) < 2 else "pitch_settings")
        errors.append({"stage": "pitch", "code": "error", "message": str(exc)})

    if contour is not None:
        f0 = contour.voiced_f0
        feats["f0.voiced_fraction"] = contour.voiced_fraction
        if len(f0):
            feats["f0.mean_hz"] = float(f0.mean())
            feats["f0.min_hz"] = float(f0.min())
            feats["f0.max_hz"] = float(f0.max())
        else:
            null(["f0.mean_hz", "f0.min_hz", "f0.max_hz"], "unvoiced")
        try:
            feats["semitone_sd"] = semitone_sd(contour)
        except DegenerateSignalError:
            null(["semitone_sd"], "unvoiced" if len(f0) == 0 else "insufficient_voiced")
        perturb_keys = [k for k in units if k.startswith(("jitter.", "shimmer."))]
        try:
            cycles = extract_cycles(signal, contour)
            feats.update(classical_set(cycles, config.pq_k))
        except GroupVoiceError as exc:
            null(perturb_keys, _reason(exc))

    lres = None
    silent = None
    if len(signal) < config.loudness_block:
        null(["loudness.mean_phon", "sharpness.acum"], "too_short")
    else:
        lres = loudness(signal, CalibrationSpec(config.calib_spl), config.loudness_block,
                        config.loudness_formula)
        silent = lres.silent
        feats["loudness.mean_phon"] = lres.mean_phon
        try:
            feats["sharpness.acum"] = sharpness(lres.specific)
        except SilentSignalError:
            null(["sharpness.acum"], "silent")

    for k, v in feats.items():
        if v is not None and _finite_or_none(v) is None:
            null([k], "non_finite")
        elif v is not None:
            feats[k] = float(v)
    report = FeatureReport(
        id=signal_id,
        duration_s=signal.duration,
        sample_rate=signal.sample_rate,
        features=dict(sorted(feats.items())),
        units=units,
        null_reasons=dict(sorted(reasons.items())),
        loudness={"calibration_spl": config.calib_spl, "silent": silent},
        provenance=provenance(config, inputs),
        errors=errors,
    )
    return Analysis(report, contour, lres)


def enhance_signal(signal: MonoSignal, config: RunConfig) -> MonoSignal:
    return enhance(signal, config.alpha, config.beta, config.pause_theta, config.fft_size)


def comparison_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["signal_id", "feature", "value", "unit"])
    for rep in reports:
        for sid, key, value, unit in rep.rows():
            w.writerow([sid, key, "" if value is None else repr(float(value)), unit])
    return buf.getvalue()


def load_schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text())


def as_jsonable(x):
    """numpy scalars/arrays to plain Python for ``json.dumps``."""
    if isinstance(x, dict):
        return {str(k): as_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [as_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return as_jsonable(x.tolist())
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return _finite_or_none(x)
    return x
