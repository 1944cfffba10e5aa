import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from conftest import RATE
from groupvoice.errors import DegenerateSignalError, SilentSignalError
from groupvoice.pitch import PitchContour, estimate_f0_contour
from groupvoice.psycho import (BARK, SHARPNESS_K, CalibrationSpec, SpecificLoudness, loudness,
                               semitone, semitone_sd, sharpness, sharpness_weighting,
                               sone_to_phon, specific_loudness)
from groupvoice.signal import MonoSignal


def _tone(spl, freq=1000.0, seconds=1.0):
    return MonoSignal(oracles.sine_at_spl(freq, spl, RATE, seconds), RATE)


def _noise(lo, hi, spl, seconds=2.0, seed=1):
    return MonoSignal(oracles.band_noise(lo, hi, spl, RATE, seconds, seed), RATE)


# ---------------------------------------------------------------- semitones

def test_semitone_examples():
    assert semitone(440) == 69
    assert semitone(880) == 81
    assert semitone(261.6256) == pytest.approx(60.0, abs=1e-3)
    with pytest.raises(ValueError):
        semitone(0)
    with pytest.raises(ValueError):
        semitone([100, -1])


@settings(max_examples=200)
@given(st.floats(1e-3, 1e6))
def test_semitone_octave_and_oracle(f):
    assert semitone(2 * f) - semitone(f) == pytest.approx(12, abs=1e-9)
    assert semitone(f) == pytest.approx(oracles.semitone_direct(f), abs=1e-9)


@given(st.floats(1e-3, 1e5), st.floats(1e-3, 1e5))
def test_semitone_monotone(a, b):
    if a < b:
        assert semitone(a) < semitone(b)


def test_semitone_sd_examples():
    assert semitone_sd([220.0] * 50) == 0
    assert semitone_sd([220.0, 440.0] * 20) == pytest.approx(6.0, abs=1e-12)
    assert semitone_sd([np.nan, 220.0, 0.0, 440.0]) == pytest.approx(6.0, abs=1e-12)
    with pytest.raises(DegenerateSignalError):
        semitone_sd([220.0, np.nan])


def test_semitone_sd_swept_contour():
    t = np.arange(2 * RATE) / RATE
    x = 0.5 * np.sin(2 * np.pi * (200 * t + 50 * t * t))  # 200 -> 400 Hz
    c = estimate_f0_contour(MonoSignal(x, RATE))
    assert semitone_sd(c) == pytest.approx(oracles.pstdev_semitones(c.voiced_f0.tolist()), rel=1e-12)


@settings(max_examples=100)
@given(st.lists(st.floats(60, 400), min_size=2, max_size=50), st.floats(0.25, 4))
def test_semitone_sd_transposition_invariant(f0, c):
    f0 = np.asarray(f0)
    assert semitone_sd(c * f0) == pytest.approx(semitone_sd(f0), abs=1e-9)
    assert semitone_sd(PitchContour.from_f0(f0)) == pytest.approx(semitone_sd(f0), abs=1e-12)


# ---------------------------------------------------------------- loudness

def test_phon_sone_relation():
    assert sone_to_phon(1.0) == 40
    assert sone_to_phon(4.0) == 60
    assert sone_to_phon(0.0) == pytest.approx(40 * 0.0005 ** 0.35)


def test_silence_is_flagged():
    res = loudness(MonoSignal(np.zeros(RATE), RATE))
    assert res.silent and res.mean_phon == 0
    assert not res.sone.any()
    with pytest.raises(SilentSignalError):
        sharpness(res.specific)


@pytest.mark.parametrize("spl,phon", [(40, 40), (60, 60), (80, 80)])
def test_tone_calibration_points(spl, phon):
    res = loudness(_tone(spl))
    assert not res.silent
    assert abs(res.mean_phon - phon) <= 2.0


def test_sixty_db_is_about_four_sone():
    n = loudness(_tone(60)).specific.total_sone
    assert 3.0 <= n <= 5.0


@settings(max_examples=15, deadline=None)
@given(st.floats(30, 90))
def test_loudness_monotone_in_level(spl):
    a = loudness(_tone(spl, seconds=0.25)).mean_phon
    b = loudness(_tone(spl + 10, seconds=0.25)).mean_phon
    assert b >= a
    if spl >= 40:
        assert abs(b - (spl + 10)) <= 2.0


def test_below_threshold_is_zero():
    res = loudness(_tone(-10, freq=1000.0, seconds=0.25))
    assert res.silent


def test_calibration_offset_shifts_level():
    quiet = loudness(_tone(50), CalibrationSpec(94.0)).mean_phon
    loud = loudness(_tone(50), CalibrationSpec(104.0)).mean_phon
    assert loud > quiet
    with pytest.raises(ValueError):
        CalibrationSpec(0.0)
    with pytest.raises(ValueError):
        CalibrationSpec(float("nan"))
    assert CalibrationSpec().amplitude_for(94.0) == 1.0


def test_loudness_errors():
    with pytest.raises(ValueError):
        loudness(MonoSignal([], RATE))
    with pytest.raises(ValueError):
        loudness(MonoSignal(np.zeros(100), RATE))
    with pytest.raises(ValueError):
        specific_loudness(np.zeros(5))
    with pytest.raises(ValueError):
        loudness(_tone(60, seconds=0.1), formula="other")


@pytest.mark.parametrize("spl", [20, 45, 70, 95])
def test_total_is_trapezoid_of_pattern(spl):
    spec = loudness(_noise(200, 5000, spl, seconds=0.5)).specific
    assert np.all(spec.values >= 0)
    assert len(spec.values) == len(BARK) == 241
    assert spec.total_sone == pytest.approx(oracles.trapezoid_loop(spec.values, BARK), rel=1e-6)


def test_loudness_csv():
    res = loudness(_tone(60, seconds=0.2))
    lines = res.to_csv().splitlines()
    assert lines[0] == "block_time_s,sone,phon" and len(lines) == len(res.sone) + 1


# ---------------------------------------------------------------- sharpness

def test_weighting_is_continuous_and_unity_below_15_8():
    assert np.all(sharpness_weighting([0, 5, 15.8]) == 1)
    assert sharpness_weighting(15.8 + 1e-9) == pytest.approx(1.0, abs=1e-9)
    assert sharpness_weighting(24.0) > 4


def test_reference_noise_is_one_acum():
    # one critical band (160 Hz) around 1 kHz at 60 dB
    s = sharpness(loudness(_noise(920, 1080, 60)).specific)
    assert s == pytest.approx(1.0, abs=0.05)


def test_sharpness_matches_direct_formula():
    spec = loudness(_noise(500, 8000, 65)).specific
    assert sharpness(spec) == pytest.approx(
        oracles.sharpness_direct(spec.values, BARK, SHARPNESS_K), rel=1e-12)


def test_higher_band_is_sharper():
    s1 = sharpness(loudness(_noise(920, 1080, 60)).specific)
    s3 = sharpness(loudness(_noise(2825, 3175, 60)).specific)
    assert s3 > s1


def _at_loudness(lo, hi, target):
    a, b = 20.0, 100.0
    for _ in range(30):
        m = 0.5 * (a + b)
        spec = loudness(_noise(lo, hi, m, seconds=1.0, seed=2)).specific
        if spec.total_sone < target:
            a = m
        else:
            b = m
    return spec


def test_highpass_sharper_than_lowpass_at_equal_loudness():
    low = _at_loudness(20, 1000, 8.0)
    high = _at_loudness(4000, 20000, 8.0)
    assert low.total_sone == pytest.approx(high.total_sone, rel=0.01)
    assert sharpness(high) - sharpness(low) >= 0.5


@settings(max_examples=100)
@given(arrays(np.float64, 241, elements=st.floats(0, 10)), st.floats(1e-3, 1e3))
def test_sharpness_scale_invariant(values, c):
    if not values.any():
        return
    a = SpecificLoudness.from_values(values)
    b = SpecificLoudness.from_values(c * values)
    if a.total_sone > 0:
        assert sharpness(b) == pytest.approx(sharpness(a), rel=1e-9)
