"""The numba and numpy kernel paths must agree."""
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nlframe import _accel, certify, kernels, maps

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)
rows = arrays(float, st.tuples(st.integers(1, 6), st.integers(1, 5)), elements=finite)

pytestmark = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")


def both(fn, *args):
    out = []
    for flag in ("1", "0"):
        with pytest.MonkeyPatch.context() as mp:
            mp.setenv("NLFRAME_NUMBA", flag)
            out.append(fn(*args))
    return out


def test_flag_selects_path(monkeypatch):
    monkeypatch.setenv("NLFRAME_NUMBA", "0")
    assert not _accel.numba_enabled()
    monkeypatch.setenv("NLFRAME_NUMBA", "off")
    assert not _accel.numba_enabled()
    monkeypatch.setenv("NLFRAME_NUMBA", "1")
    assert _accel.numba_enabled()


@settings(max_examples=60, deadline=None)
@given(rows, st.sampled_from([1.0, 2.0, 3.0, math.inf]))
def test_pnorm_rows_parity(V, p):
    a, b = both(kernels.pnorm_rows, V, p)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(1, 8), st.sampled_from([1.0, 2.0, math.inf]), st.integers(0, 2**31))
def test_direction_stats_parity(m, N, p, seed):
    rng = np.random.default_rng(seed)
    A, B = rng.standard_normal((N, m)), rng.standard_normal((N, m))
    ra, rb = both(kernels.direction_stats, A, B, p)
    for x, y in zip(ra, rb):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-13)


def test_direction_stats_zero_rows_match():
    A = np.array([[1.0, 0.0], [0.0, 0.0]])
    B = np.array([[0.0, 0.0], [1.0, 0.0]])
    ra, rb = both(kernels.direction_stats, A, B, 2.0)
    for x, y in zip(ra, rb):
        np.testing.assert_array_equal(np.isnan(x), np.isnan(y))
        np.testing.assert_array_equal(np.isinf(x), np.isinf(y))


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 5), st.integers(1, 7)),
              elements=st.sampled_from([0.0, 1.0, 2.0, 2.5, 3.0])), st.integers(1, 7))
def test_topk_support_parity_with_ties(W, s):
    a, b = both(kernels.topk_support, W, s)
    np.testing.assert_array_equal(a, b)


def test_certified_constant_identical_on_both_paths():
    F, T = maps.e_map(2, math.pi / 6), maps.t1_operator()
    plan = certify.SamplingPlan(box_radius=4.0, n_pts=300, seed=5)
    a, b = both(lambda: certify.beta_FT(F, T, plan).estimate)
    assert a == pytest.approx(b, abs=1e-14)


def test_benchmark_script_runs():
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    out = subprocess.run([sys.executable, str(script), "--rows", "2000", "--repeat", "1"],
                         capture_output=True, text=True, timeout=300)
    assert out.returncode == 0, out.stderr
    assert "direction_stats" in out.stdout
