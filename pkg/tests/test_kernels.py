import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import random_element
from ncricci import kernels
from ncricci.algebra import mul

BACKENDS = ["numpy"] + (["numba"] if kernels.have_numba() else [])


@pytest.fixture
def use_backend():
    start = kernels.backend()

    def switch(name):
        kernels.set_backend(name)

    yield switch
    kernels.set_backend(start)


def _brute_product(a, a_off, b, b_off, theta):
    out = {}
    for (i, j), x in np.ndenumerate(a):
        for (k, l), y in np.ndenumerate(b):
            m, n = i + a_off[0], j + a_off[1]
            mp_, np_ = k + b_off[0], l + b_off[1]
            key = (m + mp_, n + np_)
            out[key] = out.get(key, 0) + x * y * np.exp(2j * np.pi * theta * n * mp_)
    return out


@pytest.mark.parametrize("name", BACKENDS)
def test_twisted_convolution_matches_brute_force(use_backend, rng, name):
    use_backend(name)
    a = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
    c, off = kernels.twisted_convolve(a, (-1, 2), b, (0, -3), 0.37)
    ref = _brute_product(a, (-1, 2), b, (0, -3), 0.37)
    for (m, n), v in ref.items():
        assert abs(c[m - off[0], n - off[1]] - v) < 1e-12


@pytest.mark.parametrize("name", BACKENDS)
def test_multiplication_matrices(use_backend, nc_ctx, rng, name):
    use_backend(name)
    a = random_element(nc_ctx, rng, radius=1)
    x = random_element(nc_ctx, rng, radius=2)
    N = 4
    L = kernels.left_mult_matrix(a.coeffs, a.offset, nc_ctx.theta, N, N)
    R = kernels.right_mult_matrix(a.coeffs, a.offset, nc_ctx.theta, N)
    assert np.allclose(L @ x.to_box(N), mul(a, x).to_box(N), atol=1e-12)
    assert np.allclose(R @ x.to_box(N), mul(x, a).to_box(N), atol=1e-12)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="numba not installed")
def test_backends_agree(use_backend, rng):
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    b = rng.normal(size=(7, 6)) + 1j * rng.normal(size=(7, 6))
    shifts = rng.uniform(-2, 2, size=(30, 3))
    ys = np.linspace(-30, 30, 241)
    calls = [
        lambda: kernels.twisted_convolve(a, (-2, -2), b, (-3, -1), 0.21)[0],
        lambda: kernels.left_mult_matrix(a, (-2, -2), 0.21, 5, 7),
        lambda: kernels.right_mult_matrix(a, (-2, -2), 0.21, 5),
        lambda: kernels.radial_trapezoid(shifts, np.array([1.0, 2.0, 1.0]), 5, ys, ys[1] - ys[0]),
        lambda: kernels.radial_trapezoid(shifts, np.array([1.0, 1.5, 1.0]), 3, ys, ys[1] - ys[0]),
    ]
    for fn in calls:
        use_backend("numpy")
        ref = fn()
        use_backend("numba")
        assert np.allclose(fn(), ref, rtol=1e-12, atol=1e-13)


def test_set_backend_validates():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


@pytest.mark.parametrize("flag,expected", [("1", "numpy"), ("0", "numba" if kernels.have_numba() else "numpy")])
def test_environment_flag(flag, expected):
    env = dict(os.environ, NCG_RICCI_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from ncricci import kernels; print(kernels.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
