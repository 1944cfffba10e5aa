"""Acceptance criteria 1-9, one test each.

Every test records a one-line verdict in ``conftest.ACCEPTANCE_LINES``
before asserting, so the summary at the end of the session lists passes and
failures alike.
"""
import json
import time

import numpy as np
import pytest

import oracles
from conftest import ACCEPTANCE_LINES, RATE, sine
from groupvoice import cli
from groupvoice.enhance import (NoiseProfile, enhance, spectral_subtract, subtract_magnitudes)
from groupvoice.errors import WhiteningDegeneracyError
from groupvoice.ica import center, fastica, kurtosis, negentropy_approx, whiten
from groupvoice.perturb import CycleSequence, classical_set, extract_cycles, pq_schoentgen
from groupvoice.pitch import estimate_f0_contour
from groupvoice.psycho import loudness, semitone, semitone_sd, sharpness
from groupvoice.scene import MixingMatrix, Scene, demo_sources, mix
from groupvoice.signal import MonoSignal


def record(n, title, checks):
    """``checks`` is a list of ``(label, ok, detail)``."""
    ok = all(c[1] for c in checks)
    detail = "; ".join(f"{label} {d}{'' if good else ' FAIL'}" for label, good, d in checks)
    ACCEPTANCE_LINES[n] = f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}"
    return ok


# ---------------------------------------------------------------- 1

def test_criterion_1_separation():
    src = demo_sources(3, 5.0)
    t0 = time.perf_counter()
    res = fastica(mix(Scene(src, MixingMatrix.demo())), seed=0, refs=src)
    elapsed = time.perf_counter() - t0
    noisy = fastica(mix(Scene(src, MixingMatrix.demo(), 20.0, seed=0)), seed=0, refs=src)
    r = min(res.score.per_source_correlation)
    sdr = res.score.mean_si_sdr_db
    rn = min(noisy.score.per_source_correlation)
    assert record(1, "separation", [
        ("min|r|", r >= 0.95, f"{r:.4f}"),
        ("mean SI-SDR", sdr >= 15, f"{sdr:.1f} dB"),
        ("runtime", elapsed < 10, f"{elapsed:.2f} s"),
        ("min|r| at 20 dB SNR", rn >= 0.90, f"{rn:.4f}"),
    ])


# ---------------------------------------------------------------- 2

def test_criterion_2_whitening():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(5):
        a = rng.normal(size=(3, 3)) + np.eye(3)
        x = a @ rng.laplace(size=(3, 100_000)) + rng.normal(size=(3, 1))
        z, _ = whiten(center(x)[0])
        worst = max(worst, float(np.max(np.abs(z @ z.T / z.shape[1] - np.eye(3)))))
    x = rng.normal(size=(2, 100_000))
    deficient = np.vstack([x, x[0] + 2 * x[1]])
    try:
        whiten(center(deficient)[0])
        raised = False
    except WhiteningDegeneracyError:
        raised = True
    assert record(2, "whitening", [
        ("max|cov-I|", worst < 1e-6, f"{worst:.2e}"),
        ("rank-deficient raises", raised, str(raised)),
    ])


# ---------------------------------------------------------------- 3

def test_criterion_3_non_gaussianity():
    rng = np.random.default_rng(3)
    g = rng.standard_normal(1_000_000)
    kg = kurtosis(g)
    ku = kurtosis(rng.uniform(-1, 1, 1_000_000))
    ng = min(negentropy_approx(g, c) for c in ("logcosh", "gauss"))
    ng_max = max(negentropy_approx(g, c) for c in ("logcosh", "gauss"))
    samples = [rng.standard_normal(n) for n in (2, 10, 1000)]
    samples += [rng.laplace(size=5000), rng.uniform(size=5000), rng.exponential(size=5000),
                np.array([-1.0, 1.0]), rng.standard_t(3, size=5000)]
    neg_min = min(negentropy_approx(s, c) for s in samples for c in ("logcosh", "gauss"))
    assert record(3, "non-Gaussianity", [
        ("kurt gauss", -0.1 <= kg <= 0.1, f"{kg:+.4f}"),
        ("kurt uniform", -1.25 <= ku <= -1.15, f"{ku:+.4f}"),
        ("negentropy gauss", 0 <= ng and ng_max <= 1e-3, f"{ng_max:.2e}"),
        ("negentropy >= 0", neg_min >= 0, f"min {neg_min:.2e}"),
    ])


# ---------------------------------------------------------------- 4

def test_criterion_4_enhancement():
    rng = np.random.default_rng(4)
    s = MonoSignal(0.3 * rng.standard_normal(2 * RATE), RATE)
    out = spectral_subtract(s, NoiseProfile.zeros())
    ident = float(np.sqrt(np.mean((out.samples - s.samples)[1024:-1024] ** 2)))

    tone = sine(440, 2.0, amp=0.3).samples
    clean = np.concatenate([np.zeros(RATE // 2), tone, np.zeros(RATE // 2)])
    noisy = clean + rng.standard_normal(len(clean)) * np.sqrt(np.mean(tone ** 2))
    enh = enhance(MonoSignal(noisy, RATE)).samples
    sl = slice(RATE // 2, RATE // 2 + 2 * RATE)
    before = oracles.segmental_snr(clean[sl], noisy[sl])
    gain = oracles.segmental_snr(clean[sl], enh[sl]) - before

    violations = 0
    for _ in range(500):
        mag = rng.uniform(0, 10, 1025) * rng.uniform(0, 1, 1025) ** 4
        noise = rng.uniform(0, 5, 1025)
        alpha, beta = rng.uniform(1, 6), rng.uniform(0, 0.99)
        sub = subtract_magnitudes(mag, noise, alpha, beta)
        violations += int(np.any(sub > mag) or np.any(sub < beta * mag))
    assert record(4, "enhancement", [
        ("zero-profile RMS", ident < 1e-6, f"{ident:.1e}"),
        ("segSNR gain", gain >= 3 and abs(before) < 1, f"{gain:.1f} dB (from {before:+.2f})"),
        ("attenuation-only", violations == 0, f"{violations}/500 violations"),
    ])


# ---------------------------------------------------------------- 5

def test_criterion_5_pitch():
    c = estimate_f0_contour(sine(220, 1.0))
    f0 = c.f0[3:-3]
    err220 = float(np.nanmax(np.abs(f0 / 220 - 1)))
    all_voiced = bool(c.voiced[3:-3].all())

    pulses = oracles.pulse_train(0.01, 1.0, RATE)
    cp = estimate_f0_contour(MonoSignal(pulses, RATE))
    err100 = float(np.nanmax(np.abs(cp.f0[3:-3] / 100 - 1)))

    rng = np.random.default_rng(5)
    x = sine(173, 1.0).samples + 0.1 * rng.standard_normal(RATE)
    base = estimate_f0_contour(MonoSignal(x, RATE))
    exact = True
    near = 0.0
    for g in (2.0 ** -7, 0.5, 4.0, 2.0 ** 10):
        o = estimate_f0_contour(MonoSignal(g * x, RATE))
        exact &= np.array_equal(o.voiced, base.voiced) and np.array_equal(o.f0, base.f0, equal_nan=True)
    for g in (1e-3, 0.37, 3.3, 1234.5):
        o = estimate_f0_contour(MonoSignal(g * x, RATE))
        exact &= np.array_equal(o.voiced, base.voiced)
        near = max(near, float(np.nanmax(np.abs(o.f0 / base.f0 - 1))))

    t = np.arange(2 * RATE) / RATE
    sweep = estimate_f0_contour(MonoSignal(0.5 * np.sin(2 * np.pi * (200 * t + 25 * t * t)), RATE))
    inst = 200 + 50 * sweep.times[3:-3]
    err_sweep = float(np.nanmax(np.abs(sweep.f0[3:-3] / inst - 1)))
    assert record(5, "pitch", [
        ("220 Hz err", err220 < 0.01 and all_voiced, f"{100 * err220:.3f}%"),
        ("pulse train err", err100 < 0.01, f"{100 * err100:.3f}%"),
        ("gain invariance", exact and near <= 1e-12,
         f"bit-exact for 2^k, voicing identical, f0 rel {near:.0e} otherwise"),
        ("sweep err", err_sweep < 0.02, f"{100 * err_sweep:.3f}%"),
    ])


# ---------------------------------------------------------------- 6

def test_criterion_6_perturbation():
    sig = sine(200, 1.0)
    feats = classical_set(extract_cycles(sig, estimate_f0_contour(sig)))
    worst_pct = max(v for k, v in feats.items() if k.endswith(("_pct", "_db")))
    pq = pq_schoentgen([1, 1, 2, 1, 1], 3)

    rng = np.random.default_rng(6)
    worst_rel = 0.0
    for _ in range(100):
        # one to four voiced runs, each long enough for a 5-point quotient
        runs = np.concatenate([np.full(int(rng.integers(5, 80)), j)
                               for j in range(int(rng.integers(1, 5)))])
        n = len(runs)
        t = 0.005 * np.exp(0.05 * rng.standard_normal(n))
        a = rng.uniform(0.1, 1.0, n)
        got = classical_set(CycleSequence(t, a, runs, np.zeros(n)))
        ref = oracles.classical_loop(t, a, runs)
        for k in ref:
            worst_rel = max(worst_rel, abs(got[k] - ref[k]) / abs(ref[k]))
    assert record(6, "perturbation", [
        ("perfect sine max", worst_pct <= 1e-6, f"{worst_pct:.1e}%"),
        ("PQ [1,1,2,1,1] K=3", round(pq, 4) == 37.037, f"{pq:.4f}%"),
        ("100 random contours vs loops", worst_rel <= 1e-12, f"max rel diff {worst_rel:.1e}"),
    ])


# ---------------------------------------------------------------- 7

def test_criterion_7_semitone():
    rng = np.random.default_rng(7)
    f = np.exp(rng.uniform(np.log(1.0), np.log(2e4), 10_000))
    octave = float(np.max(np.abs((semitone(2 * f) - semitone(f)) - 12)))
    sd = semitone_sd([220.0, 440.0] * 50)
    f0 = rng.uniform(80, 300, 200)
    trans = max(abs(semitone_sd(c * f0) - semitone_sd(f0)) for c in (0.5, 1.5, 2.0, 3.7))
    assert record(7, "semitone", [
        ("semitone(440)", semitone(440) == 69, repr(semitone(440))),
        ("octave additivity", octave <= 1e-12, f"max dev {octave:.1e}"),
        ("220/440 SD", abs(sd - 6) <= 1e-9, f"{sd:.12f}"),
        ("transposition", trans <= 1e-9, f"max dev {trans:.1e}"),
    ])


# ---------------------------------------------------------------- 8

def _noise(lo, hi, spl, seconds=2.0, seed=1):
    return MonoSignal(oracles.band_noise(lo, hi, spl, RATE, seconds, seed), RATE)


def _equal_loudness(lo, hi, target):
    a, b = 20.0, 100.0
    for _ in range(30):
        m = 0.5 * (a + b)
        spec = loudness(_noise(lo, hi, m, seconds=1.0, seed=2)).specific
        a, b = (m, b) if spec.total_sone < target else (a, m)
    return spec


def test_criterion_8_psychoacoustics():
    l40 = loudness(MonoSignal(oracles.sine_at_spl(1000, 40, RATE, 1.0), RATE))
    l60 = loudness(MonoSignal(oracles.sine_at_spl(1000, 60, RATE, 1.0), RATE))
    ratio = l60.specific.total_sone / l40.specific.total_sone
    acum = sharpness(loudness(_noise(920, 1080, 60)).specific)
    low, high = _equal_loudness(20, 1000, 8.0), _equal_loudness(4000, 20000, 8.0)
    s_low, s_high = sharpness(low), sharpness(high)
    assert record(8, "psychoacoustics", [
        ("40 dB tone", abs(l40.mean_phon - 40) <= 2, f"{l40.mean_phon:.2f} phon"),
        ("+20 dB sone ratio", 3.5 <= ratio <= 4.5, f"{ratio:.2f}"),
        ("1 kHz band noise", abs(acum - 1) <= 0.05, f"{acum:.3f} acum"),
        ("HP vs LP at 8 sone", s_high > s_low, f"{s_high:.2f} > {s_low:.2f} acum"),
    ])


# ---------------------------------------------------------------- 9

def test_criterion_9_determinism(tmp_path):
    t0 = time.perf_counter()
    scene = tmp_path / "scene"
    assert cli.main(["simulate", "--demo", "--duration", "5", "--seed", "0", "--out", str(scene)]) == 0
    xs = [str(scene / f"x_{i}.wav") for i in (1, 2, 3)]
    runs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = cli.main(["pipeline", *xs, "--seed", "0", "--out", str(out)])
        runs.append((code, {p.relative_to(out).as_posix(): p.read_bytes()
                            for p in sorted(out.rglob("*"))
                            if p.is_file() and p.name != "run_info.json"}))
    elapsed = time.perf_counter() - t0
    (ca, fa), (cb, fb) = runs
    reports = sorted(k for k in fa if k.startswith("reports/"))
    same = fa == fb
    valid = len(reports) == 3 and all(json.loads(fa[k]) for k in reports)
    assert record(9, "determinism", [
        ("exit codes", ca == cb == 0, f"{ca}, {cb}"),
        ("reports", valid, f"{len(reports)} written"),
        ("byte-identical outputs", same, f"{len(fa)} files"),
        ("runtime", elapsed < 60, f"{elapsed:.1f} s"),
    ])
