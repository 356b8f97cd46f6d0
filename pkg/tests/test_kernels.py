import os
import subprocess
import sys

import numpy as np
import pytest

from atiyah import kernels, precision
from atiyah.determinant import normalized_determinant, normalized_determinant_real
from atiyah.geometry import Configuration, sample_configuration

from test_determinant import SYMBOLIC_D

compiled = pytest.mark.skipif(kernels.BACKEND != "cython", reason="compiled kernel not built")


def batch(n, dim, count, sampler="uniform-ball", seed=0):
    return np.stack([sample_configuration(n, dim, sampler, seed * 10**6 + s).points for s in range(count)])


@pytest.mark.parametrize("n", [2, 3, 5, 8])
@pytest.mark.parametrize("real", [False, True])
def test_fallback_matches_reference(n, real):
    pts = batch(n, 2 if real else 3, 50, "gaussian", n)
    la, arg, rc = kernels.python_batch_eval(pts, real)
    for b in range(len(pts)):
        c = Configuration(pts[b])
        r = normalized_determinant_real(c) if real else normalized_determinant(c)
        assert abs(la[b] - r.log_abs_D) < 1e-10
        assert abs(np.exp(1j * arg[b]) - np.exp(1j * r.arg_D)) < 1e-9
        assert abs(rc[b] - r.condition_estimate) <= 1e-6 * r.condition_estimate


@compiled
@pytest.mark.parametrize("n", [2, 3, 4, 6, 9])
@pytest.mark.parametrize("real", [False, True])
def test_compiled_matches_fallback(n, real):
    pts = batch(n, 2 if real else 3, 200, "uniform-ball", n)
    a = kernels.batch_eval(pts, real)
    b = kernels.python_batch_eval(pts, real)
    np.testing.assert_allclose(a[0], b[0], atol=1e-10)
    np.testing.assert_allclose(np.exp(1j * a[1]), np.exp(1j * b[1]), atol=1e-9)
    np.testing.assert_allclose(a[2], b[2], rtol=1e-6)


@pytest.mark.parametrize("backend", ["python", "cython"])
def test_symbolic_oracle_through_kernels(backend):
    if backend == "cython" and kernels.BACKEND != "cython":
        pytest.skip("compiled kernel not built")
    fn = kernels.batch_eval if backend == "cython" else kernels.python_batch_eval
    for pts, expected in SYMBOLIC_D.values():
        la, arg, _ = fn(np.array(pts, dtype=float)[None])
        assert abs(la[0] - np.log(abs(expected))) < 1e-12
        assert abs(arg[0] - np.angle(expected)) < 1e-12


def test_extended_precision_agrees():
    pts = batch(4, 3, 20, "gaussian", 4)
    la, _, _ = kernels.batch_eval(pts)
    for b in range(len(pts)):
        assert abs(precision.log_abs_D(pts[b]) - la[b]) < 1e-11
    real = batch(4, 2, 10, "gaussian", 5)
    la, _, _ = kernels.batch_eval(real, real=True)
    for b in range(len(real)):
        assert abs(precision.log_abs_D(real[b], real=True) - la[b]) < 1e-11


def test_extended_precision_symbolic():
    for pts, expected in SYMBOLIC_D.values():
        assert abs(complex(precision.D(pts)) - expected) < 1e-25


def test_unseparated_samples_are_nan():
    pts = batch(3, 3, 4)
    pts[1, 2] = pts[1, 0] + 1e-12
    for fn in (kernels.batch_eval, kernels.python_batch_eval):
        la, arg, rc = fn(pts)
        assert np.isnan(la[1]) and np.isnan(arg[1]) and np.isnan(rc[1])
        assert np.all(np.isfinite(la[[0, 2, 3]]))


def test_kernel_shape_errors():
    for fn in (kernels.batch_eval, kernels.python_batch_eval):
        with pytest.raises(ValueError):
            fn(np.zeros((2, 3, 2)))
        with pytest.raises(ValueError):
            fn(np.zeros((2, 1, 3)))


def test_log_abs_D_helper():
    assert abs(kernels.log_abs_D(np.array(SYMBOLIC_D["triangle"][0], dtype=float)) - np.log(9 / 8)) < 1e-14


def test_backend_override():
    env = dict(os.environ, ATIYAH_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from atiyah import kernels; print(kernels.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
