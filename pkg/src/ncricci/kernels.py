"""Hot numerical loops with a numba path and a pure-numpy fallback.

The backend is chosen once at import: numba is used when it imports cleanly
and the environment variable ``NCG_RICCI_DISABLE_NUMBA`` is unset or "0".
``set_backend`` switches at runtime (used by the benchmark and the tests that
compare the two paths).

Index conventions shared by every kernel:

* a coefficient array ``a`` with offset ``(m0, n0)`` stores the coefficient of
  ``U^(m0+i) V^(n0+j)`` at ``a[i, j]``;
* a square box of radius ``N`` is flattened row-major over ``(m, n)``, i.e.
  ``index = (m + N) * (2N + 1) + (n + N)``.
"""
from __future__ import annotations

import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def _env_disabled() -> bool:
    return os.environ.get("NCG_RICCI_DISABLE_NUMBA", "0").strip().lower() not in ("", "0", "false", "no")


_BACKEND = "numba" if (_HAVE_NUMBA and not _env_disabled()) else "numpy"


def backend() -> str:
    """Name of the active backend, ``"numba"`` or ``"numpy"``."""
    return _BACKEND


def set_backend(name: str) -> None:
    """Select ``"numba"`` or ``"numpy"``; numba must be importable for the former."""
    global _BACKEND
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not _HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _BACKEND = name


def have_numba() -> bool:
    return _HAVE_NUMBA


def _omega_table(theta: float, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """exp(2*pi*i*theta*r*c) for every pair, reducing r*c mod 1/theta-free via floats."""
    prod = np.multiply.outer(rows.astype(np.float64), cols.astype(np.float64))
    return np.exp(2j * np.pi * ((theta * prod) % 1.0))


# ---------------------------------------------------------------------------
# twisted convolution


@njit(cache=True)
def _twisted_conv_nb(a, b, phase):  # pragma: no cover - compiled
    ma, na = a.shape
    mb, nb = b.shape
    c = np.zeros((ma + mb - 1, na + nb - 1), dtype=np.complex128)
    for i in range(ma):
        for j in range(na):
            aij = a[i, j]
            if aij == 0:
                continue
            for k in range(mb):
                w = aij * phase[j, k]
                for l in range(nb):
                    c[i + k, j + l] += w * b[k, l]
    return c


def _twisted_conv_np(a, b, phase):
    ma, na = a.shape
    mb, nb = b.shape
    c = np.zeros((ma + mb - 1, na + nb - 1), dtype=np.complex128)
    nz_i, nz_j = np.nonzero(a)
    # one phased copy of b per column of a
    cols = {}
    for i, j in zip(nz_i.tolist(), nz_j.tolist()):
        bj = cols.get(j)
        if bj is None:
            bj = b * phase[j][:, None]
            cols[j] = bj
        c[i : i + mb, j : j + nb] += a[i, j] * bj
    return c


def twisted_convolve(a, a_off, b, b_off, theta):
    """Coefficients of the product (sum a U^m V^n)(sum b U^m' V^n').

    The phase of ``U^m V^n * U^m' V^n'`` is ``exp(2 pi i theta n m')``.
    Returns ``(c, c_off)``.
    """
    a = np.ascontiguousarray(a, dtype=np.complex128)
    b = np.ascontiguousarray(b, dtype=np.complex128)
    n_rows = np.arange(a.shape[1]) + a_off[1]
    m_cols = np.arange(b.shape[0]) + b_off[0]
    phase = _omega_table(theta, n_rows, m_cols)
    if _BACKEND == "numba":
        c = _twisted_conv_nb(a, b, phase)
    else:
        c = _twisted_conv_np(a, b, phase)
    return c, (a_off[0] + b_off[0], a_off[1] + b_off[1])


# ---------------------------------------------------------------------------
# multiplication matrices on a truncated box


@njit(cache=True)
def _left_matrix_nb(a, m0, n0, phase, n_out, n_in):  # pragma: no cover - compiled
    w_out = 2 * n_out + 1
    w_in = 2 * n_in + 1
    mat = np.zeros((w_out * w_out, w_in * w_in), dtype=np.complex128)
    ma, na = a.shape
    for mi in range(w_in):
        m = mi - n_in
        for ni in range(w_in):
            col = mi * w_in + ni
            for i in range(ma):
                mo = m + m0 + i
                if mo < -n_out or mo > n_out:
                    continue
                for j in range(na):
                    v = a[i, j]
                    if v == 0:
                        continue
                    no = ni - n_in + n0 + j
                    if no < -n_out or no > n_out:
                        continue
                    mat[(mo + n_out) * w_out + (no + n_out), col] += v * phase[j, mi]
    return mat


def _left_matrix_np(a, m0, n0, phase, n_out, n_in):
    w_out = 2 * n_out + 1
    w_in = 2 * n_in + 1
    mat = np.zeros((w_out * w_out, w_in * w_in), dtype=np.complex128)
    r = np.arange(-n_in, n_in + 1)
    m_in, n_in_g = np.meshgrid(r, r, indexing="ij")
    m_in = m_in.ravel()
    n_in_g = n_in_g.ravel()
    cols = np.arange(m_in.size)
    for i, j in zip(*np.nonzero(a)):
        mo = m_in + m0 + i
        no = n_in_g + n0 + j
        ok = (np.abs(mo) <= n_out) & (np.abs(no) <= n_out)
        rows = (mo[ok] + n_out) * w_out + (no[ok] + n_out)
        mat[rows, cols[ok]] += a[i, j] * phase[j, m_in[ok] + n_in]
    return mat


def left_mult_matrix(a, a_off, theta, n_out, n_in):
    """Matrix of ``x -> a x`` from the box of radius ``n_in`` to radius ``n_out``."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    q = np.arange(a.shape[1]) + a_off[1]
    m = np.arange(-n_in, n_in + 1)
    phase = _omega_table(theta, q, m)  # exp(2 pi i theta q m)
    fn = _left_matrix_nb if _BACKEND == "numba" else _left_matrix_np
    return fn(a, int(a_off[0]), int(a_off[1]), phase, int(n_out), int(n_in))


@njit(cache=True)
def _right_matrix_nb(a, m0, n0, phase, n_box):  # pragma: no cover - compiled
    w = 2 * n_box + 1
    mat = np.zeros((w * w, w * w), dtype=np.complex128)
    ma, na = a.shape
    for mi in range(w):
        for ni in range(w):
            col = mi * w + ni
            for i in range(ma):
                mo = mi - n_box + m0 + i
                if mo < -n_box or mo > n_box:
                    continue
                for j in range(na):
                    v = a[i, j]
                    if v == 0:
                        continue
                    no = ni - n_box + n0 + j
                    if no < -n_box or no > n_box:
                        continue
                    mat[(mo + n_box) * w + (no + n_box), col] += v * phase[ni, i]
    return mat


def _right_matrix_np(a, m0, n0, phase, n_box):
    w = 2 * n_box + 1
    mat = np.zeros((w * w, w * w), dtype=np.complex128)
    r = np.arange(-n_box, n_box + 1)
    m_in, n_in = np.meshgrid(r, r, indexing="ij")
    m_in = m_in.ravel()
    n_in = n_in.ravel()
    cols = np.arange(m_in.size)
    for i, j in zip(*np.nonzero(a)):
        mo = m_in + m0 + i
        no = n_in + n0 + j
        ok = (np.abs(mo) <= n_box) & (np.abs(no) <= n_box)
        rows = (mo[ok] + n_box) * w + (no[ok] + n_box)
        mat[rows, cols[ok]] += a[i, j] * phase[n_in[ok] + n_box, i]
    return mat


def right_mult_matrix(a, a_off, theta, n_box):
    """Matrix of ``x -> x a`` on the box of radius ``n_box`` (entries leaving the box are dropped)."""
    a = np.ascontiguousarray(a, dtype=np.complex128)
    n = np.arange(-n_box, n_box + 1)
    p = np.arange(a.shape[0]) + a_off[0]
    phase = _omega_table(theta, n, p)  # exp(2 pi i theta n p)
    fn = _right_matrix_nb if _BACKEND == "numba" else _right_matrix_np
    return fn(a, int(a_off[0]), int(a_off[1]), phase, int(n_box))


# ---------------------------------------------------------------------------
# radial kernel quadrature
#
#   J(sigma) = int_0^inf rho^p prod_g (exp(sigma_g) rho^2 + 1)^(-e_g) d rho
#            = 1/2 int_R x^((p+1)/2) prod_g (exp(sigma_g) x + 1)^(-e_g) dy,  x = e^y


@njit(cache=True)
def _radial_trap_nb(shifts, expo, p, ys, dy):  # pragma: no cover - compiled
    npts, ng = shifts.shape
    nys = ys.size
    xs = np.exp(ys)
    base = np.exp(0.5 * (p + 1) * ys)
    iexpo = np.empty(ng, dtype=np.int64)
    integral = True
    for g in range(ng):
        iexpo[g] = int(expo[g])
        if iexpo[g] != expo[g] or iexpo[g] < 0:
            integral = False
    out = np.zeros(npts, dtype=np.float64)
    for k in range(npts):
        es = np.exp(shifts[k])
        acc = 0.0
        for i in range(nys):
            v = base[i]
            for g in range(ng):
                if expo[g] == 0:
                    continue
                d = es[g] * xs[i] + 1.0
                if integral:
                    t = d
                    for _ in range(iexpo[g] - 1):
                        t *= d
                    v /= t
                else:
                    v *= d ** (-expo[g])
            acc += v
        out[k] = 0.5 * acc * dy
    return out


def _radial_trap_np(shifts, expo, p, ys, dy):
    x = np.exp(ys)[None, :]
    v = np.exp(0.5 * (p + 1) * ys)[None, :].repeat(shifts.shape[0], axis=0)
    for g in range(shifts.shape[1]):
        if expo[g] != 0:
            v = v * (np.exp(shifts[:, g])[:, None] * x + 1.0) ** (-float(expo[g]))
    return 0.5 * v.sum(axis=1) * dy


def radial_trapezoid(shifts, expo, p, ys, dy):
    """Trapezoid sum of the log-variable radial integrand at every row of ``shifts``."""
    shifts = np.ascontiguousarray(shifts, dtype=np.float64)
    expo = np.ascontiguousarray(expo, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    if _BACKEND == "numba":
        return _radial_trap_nb(shifts, expo, float(p), ys, float(dy))
    return _radial_trap_np(shifts, expo, float(p), ys, float(dy))
