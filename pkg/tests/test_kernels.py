"""Compiled and pure-Python kernels must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupvoice import kernels, psycho

BACKENDS = kernels.backends()
PY = BACKENDS["python"]
OTHERS = [name for name in BACKENDS if name != "python"]

needs_ext = pytest.mark.skipif(not OTHERS, reason="compiled kernels not built")


@pytest.fixture(params=OTHERS or ["python"])
def impl(request):
    return BACKENDS[request.param]


@needs_ext
@pytest.mark.parametrize("contrast", [kernels.LOGCOSH, kernels.GAUSS])
def test_fixed_point_terms(impl, contrast, rng):
    zt = rng.standard_normal((5000, 3))
    w = rng.standard_normal(3)
    w /= np.linalg.norm(w)
    a, da = PY.fixed_point_terms(w, zt, contrast)
    b, db = impl.fixed_point_terms(w, np.ascontiguousarray(zt), contrast)
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)
    assert da == pytest.approx(db, rel=1e-12)


@needs_ext
@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-20, 120), min_size=28, max_size=28))
def test_spread_specific_loudness(levels):
    impl = BACKENDS[OTHERS[0]]
    core = psycho.core_loudness(np.asarray(levels))
    args = (psycho._ZUP, psycho._RNS, psycho._USL)
    sa, ta = PY.spread_specific_loudness(core, *args)
    sb, tb = impl.spread_specific_loudness(core, *args)
    assert sa.shape == sb.shape
    assert np.array_equal(sa, sb)
    assert ta == tb


@needs_ext
@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(20, 800), st.floats(0, 0.3))
def test_track_cycle_boundaries(seed, period, jitter):
    rng = np.random.default_rng(seed)
    steps = period * (1 + jitter * rng.uniform(-1, 1, 60))
    steps[rng.integers(0, 60, 3)] *= 3  # a few gaps to break chains
    zc = np.cumsum(steps)
    per = np.full(len(zc), period)
    ba, ca = PY.track_cycle_boundaries(zc, per)
    bb, cb = BACKENDS[OTHERS[0]].track_cycle_boundaries(zc, per)
    assert np.array_equal(ba, bb) and np.array_equal(ca, cb)


@needs_ext
@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=0, max_size=80), st.integers(0, 2**31),
       st.sampled_from([3, 5, 7]))
def test_perturbation_sums(values, seed, order):
    impl = BACKENDS[OTHERS[0]]
    v = np.asarray(values, dtype=float)
    runs = np.sort(np.random.default_rng(seed).integers(0, 3, len(v))).astype(np.int64)
    # same summation order, so results agree bit for bit
    assert PY.successive_abs_diff(v, runs) == impl.successive_abs_diff(v, runs)
    assert PY.pq_deviation(v, runs, order) == impl.pq_deviation(v, runs, order)


def test_reports_match_across_backends(tmp_path):
    code = (
        "import sys; from groupvoice import cli; "
        "sys.exit(cli.main(['simulate', '--demo', '--duration', '2', '--out', sys.argv[1]]) or "
        "cli.main(['pipeline'] + [sys.argv[1] + f'/x_{i}.wav' for i in (1, 2, 3)] + ['--out', sys.argv[2]]))"
    )
    outs = {}
    for flag in ("0", "1"):
        env = dict(os.environ, GROUPVOICE_PURE_PYTHON=flag)
        out = tmp_path / f"run{flag}"
        subprocess.run([sys.executable, "-c", code, str(tmp_path / f"scene{flag}"), str(out)],
                       env=env, check=True)
        outs[flag] = {p.name: p.read_bytes() for p in sorted((out / "reports").glob("*.json"))}
    assert len(outs["0"]) == 3 and outs["0"] == outs["1"]


def test_pure_python_switch():
    env = dict(os.environ, GROUPVOICE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import groupvoice.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert kernels.BACKEND in BACKENDS
