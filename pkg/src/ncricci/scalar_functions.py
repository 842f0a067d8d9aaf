"""Stable evaluation of the curvature functions K, H, S and the auxiliaries f, g, g_j.

All functions take the modular variables ``s, t`` (eigenvalues of the modular
generator), so ``f`` and ``g`` are evaluated at ``u = exp(s)``.

The closed forms have removable singularities on ``s = 0``, ``t = 0`` and
``s + t = 0``.  The first two are removed exactly by rewriting H and S in
terms of three one-variable functions

    A(x) = (sinh x - x) / (x sinh(x/2))      (odd)
    B(x) = sinh(x/2) / x                     (even)
    C(x) = (x + sinh x) / sinh(x/2)          (even)

which are summed from exact rational power series near zero.  With these,

    S = 2 (A(s) B(t) + A(t) B(s)) / sinh(w/2)
    H = -(B(s) (C(t) - s A(t)) + B(t) (t A(s) - C(s))) / (w cosh^2(w/4))

where ``w = s + t``.  Only ``w = 0`` is left; inside ``taylor_radius`` of it
the value comes from a Taylor polynomial in ``w`` whose coefficients are
Cauchy integrals over a circle of radius ``cauchy_radius`` in the complex
``w`` plane, where the rewritten forms have no cancellation.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

_SERIES_TERMS = 24  # terms in y = x^2 for A, B, C; |x| < 1/2 gives ~1e-60 truncation
_SERIES_SWITCH = 0.5


def _series_divide(num: list[Fraction], den: list[Fraction], n: int) -> list[Fraction]:
    out: list[Fraction] = []
    for k in range(n):
        acc = num[k] if k < len(num) else Fraction(0)
        for j in range(1, min(k, len(den) - 1) + 1):
            acc -= den[j] * out[k - j]
        out.append(acc / den[0])
    return out


def exact_series() -> dict[str, list[Fraction]]:
    """Exact rational coefficients of the building blocks.

    ``A = x * a(x^2)``, ``B = b(x^2)``, ``C = c(x^2)`` and ``(e^x - 1)/x = e1(x)``.
    """
    n = _SERIES_TERMS + 2
    # sinh(x/2) = x * d(y), y = x^2
    d = [Fraction(1, 2 ** (2 * k + 1) * factorial(2 * k + 1)) for k in range(n)]
    # sinh x - x = x^3 * a_num(y)
    a_num = [Fraction(1, factorial(2 * k + 3)) for k in range(n)]
    # x + sinh x = x * c_num(y)
    c_num = [Fraction(2)] + [Fraction(1, factorial(2 * k + 1)) for k in range(1, n)]
    return {
        "A": _series_divide(a_num, d, _SERIES_TERMS),
        "B": d[:_SERIES_TERMS],
        "C": _series_divide(c_num, d, _SERIES_TERMS),
        "E1": [Fraction(1, factorial(k + 1)) for k in range(2 * _SERIES_TERMS)],
    }


_SER = {k: np.array([float(v) for v in vals]) for k, vals in exact_series().items()}
_A_SER, _B_SER, _C_SER, _E1_SER = _SER["A"], _SER["B"], _SER["C"], _SER["E1"]


def _horner(coeffs: np.ndarray, y):
    acc = np.zeros_like(y) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * y + c
    return acc


def _as_array(x):
    x = np.asarray(x)
    if not np.iscomplexobj(x):
        x = x.astype(np.float64)
    return x


def _blend(x, small_fn, big_fn):
    """Evaluate ``small_fn`` where |x| < switch and ``big_fn`` elsewhere."""
    x = _as_array(x)
    out = np.empty_like(x)
    small = np.abs(x) < _SERIES_SWITCH
    if small.any():
        out[small] = small_fn(x[small])
    if (~small).any():
        out[~small] = big_fn(x[~small])
    return out


def odd_block(x):
    """A(x) = (sinh x - x) / (x sinh(x/2))."""
    return _blend(x, lambda v: v * _horner(_A_SER, v * v),
                  lambda v: (np.sinh(v) - v) / (v * np.sinh(v / 2)))


def even_block(x):
    """B(x) = sinh(x/2) / x."""
    return _blend(x, lambda v: _horner(_B_SER, v * v), lambda v: np.sinh(v / 2) / v)


def even_block_c(x):
    """C(x) = (x + sinh x) / sinh(x/2)."""
    return _blend(x, lambda v: _horner(_C_SER, v * v), lambda v: (v + np.sinh(v)) / np.sinh(v / 2))


def expm1_ratio(x):
    """(e^x - 1) / x, equal to 1 at x = 0."""
    return _blend(x, lambda v: _horner(_E1_SER, v), lambda v: np.expm1(v) / v)


# ---------------------------------------------------------------------------
# auxiliary functions of the modular operator


def g_mod(s):
    """g(e^s) with g(u) = 2 (u - 1) / log u."""
    return 2.0 * expm1_ratio(s)


def f_mod(s):
    """f(e^s) with f(u) = 2 (sqrt(u) - 1) / log u."""
    return expm1_ratio(_as_array(s) / 2.0)


def gj_mod(j: int, s):
    """g_j(e^s) = e^{j s} g(e^s)."""
    s = _as_array(s)
    return np.exp(j * s) * g_mod(s)


def g_of_u(u):
    return g_mod(np.log(_as_array(u)))


def f_of_u(u):
    return f_mod(np.log(_as_array(u)))


# ---------------------------------------------------------------------------
# literal closed forms (reference; unstable near the singular set)


def K_closed(u):
    u = _as_array(u)
    return (0.5 + np.sinh(u / 2) / u) / np.cosh(u / 4) ** 2


def S_closed(s, t):
    s, t = np.broadcast_arrays(_as_array(s), _as_array(t))
    w = s + t
    num = w - t * np.cosh(s) - s * np.cosh(t) - np.sinh(s) - np.sinh(t) + np.sinh(w)
    den = s * t * np.sinh(s / 2) * np.sinh(t / 2) * np.sinh(w / 2)
    return num / den


def H_closed(s, t):
    s, t = np.broadcast_arrays(_as_array(s), _as_array(t))
    w = s + t
    num = t * w * np.cosh(s) - s * w * np.cosh(t) + (s - t) * (w + np.sinh(s) + np.sinh(t) - np.sinh(w))
    den = s * t * w * np.sinh(s / 2) * np.sinh(t / 2) * np.sinh(w / 2) ** 2
    return (1 - np.cosh(w / 2)) * num / den


# ---------------------------------------------------------------------------
# rewritten forms, regular except on w = 0


def _S_rewritten(s, t):
    w = s + t
    return 2.0 * (odd_block(s) * even_block(t) + odd_block(t) * even_block(s)) / np.sinh(w / 2)


def _H_rewritten(s, t):
    w = s + t
    num = even_block(s) * (even_block_c(t) - s * odd_block(t)) + even_block(t) * (
        t * odd_block(s) - even_block_c(s)
    )
    return -num / (w * np.cosh(w / 4) ** 2)


def _K_rewritten(u):
    return (0.5 + even_block(u)) / np.cosh(_as_array(u) / 4) ** 2


def _taylor_coefficients(fn, centers_s, centers_t, rho: float, order: int, nodes: int):
    """Taylor coefficients in w of fn(c_s + w/2, c_t + w/2) by a discrete Cauchy integral."""
    z = rho * np.exp(2j * np.pi * np.arange(nodes) / nodes)
    vals = fn(centers_s[:, None] + z[None, :] / 2, centers_t[:, None] + z[None, :] / 2)
    coef = np.fft.fft(vals, axis=1) / nodes
    scale = rho ** -np.arange(order + 1)
    return coef[:, : order + 1] * scale[None, :]


@dataclass(frozen=True)
class CurvatureFunctions:
    """Evaluator for K, H, S with a Taylor switch near ``s + t = 0`` (and ``u = 0`` for K)."""

    taylor_radius: float = 1e-2
    order: int = 6
    cauchy_radius: float = 0.5
    cauchy_nodes: int = 32

    def _line_switch(self, fn, s, t, method):
        s, t = np.broadcast_arrays(_as_array(s), _as_array(t))
        s = np.array(s, dtype=np.result_type(s, np.float64))
        t = np.array(t, dtype=np.result_type(t, np.float64))
        w = s + t
        if method == "closed":
            raise AssertionError("handled by caller")
        near = np.abs(w) < self.taylor_radius if method == "auto" else np.ones(w.shape, bool)
        out = np.empty(w.shape, dtype=np.result_type(s, t, np.float64))
        if (~near).any():
            out[~near] = fn(s[~near], t[~near])
        if near.any():
            c0 = (s[near] - t[near]) / 2
            coef = _taylor_coefficients(fn, c0, -c0, self.cauchy_radius, self.order, self.cauchy_nodes)
            wn = w[near]
            acc = np.zeros(wn.shape, complex)
            for k in range(self.order, -1, -1):
                acc = acc * wn + coef[:, k]
            out[near] = acc if np.iscomplexobj(out) else acc.real
        return out

    def S(self, s, t, method: str = "auto"):
        """S(s, t); ``method`` is "auto", "closed" (literal formula) or "taylor" (series in s+t)."""
        if method == "closed":
            return S_closed(s, t)
        return self._line_switch(_S_rewritten, s, t, method)

    def H(self, s, t, method: str = "auto"):
        if method == "closed":
            return H_closed(s, t)
        return self._line_switch(_H_rewritten, s, t, method)

    def K(self, u, method: str = "auto"):
        u = _as_array(u)
        if method == "closed":
            return K_closed(u)
        near = np.abs(u) < self.taylor_radius if method == "auto" else np.ones(u.shape, bool)
        out = np.empty(u.shape, dtype=np.result_type(u, np.float64))
        if (~near).any():
            out[~near] = _K_rewritten(u[~near])
        if near.any():
            z = self.cauchy_radius * np.exp(2j * np.pi * np.arange(self.cauchy_nodes) / self.cauchy_nodes)
            coef = np.fft.fft(K_closed(z)) / self.cauchy_nodes
            coef = coef[: self.order + 1] * self.cauchy_radius ** -np.arange(self.order + 1)
            un = u[near]
            acc = np.zeros(un.shape, complex)
            for k in range(self.order, -1, -1):
                acc = acc * un + coef[k]
            out[near] = acc if np.iscomplexobj(out) else acc.real
        return out


DEFAULT_FUNCTIONS = CurvatureFunctions()


def eval_K(u, method: str = "auto"):
    return DEFAULT_FUNCTIONS.K(u, method)


def eval_H(s, t, method: str = "auto"):
    return DEFAULT_FUNCTIONS.H(s, t, method)


def eval_S(s, t, method: str = "auto"):
    return DEFAULT_FUNCTIONS.S(s, t, method)
