"""Modular generator nabla = -[h, .] and its functional calculus.

The generator is Hermitian for the GNS inner product, so on a truncated box
of monomials it is diagonalized by ``numpy.linalg.eigh``.  One-variable
functions act by ``V diag(f(s)) V^H``.  Two-variable functions act on
products ``a b`` with the first variable on ``a`` and the second on ``b``:

    F(nabla_1, nabla_2)(a b) = sum_ij F(s_i, s_j) P_i(a) P_j(b).

The double sum is evaluated through a low-rank separation
``F(s, t) ~ sum_r sigma_r phi_r(s) psi_r(t)`` obtained from the SVD of ``F``
sampled on a Chebyshev grid covering the spectrum.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .algebra import TorusElement, expm, is_self_adjoint, mul

ScalarFn = Callable[[np.ndarray], np.ndarray]
ScalarFn2 = Callable[[np.ndarray, np.ndarray], np.ndarray]


def nabla(h: TorusElement, a: TorusElement) -> TorusElement:
    """-(h a - a h)."""
    return -(mul(h, a) - mul(a, h))


def modular_delta(h: TorusElement, a: TorusElement) -> TorusElement:
    """e^{-h} a e^{h}."""
    return mul(mul(expm(-h), a), expm(h))


def nabla_matrix(h: TorusElement, radius: int) -> np.ndarray:
    """Matrix of nabla on the box ``|m|, |n| <= radius`` in the monomial basis."""
    theta = h.ctx.theta
    L = kernels.left_mult_matrix(h.coeffs, h.offset, theta, radius, radius)
    R = kernels.right_mult_matrix(h.coeffs, h.offset, theta, radius)
    return -(L - R)


@dataclass(frozen=True, eq=False)
class ModularSpectrum:
    """Eigendecomposition of nabla restricted to a box of monomials."""

    dilaton: TorusElement
    radius: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    reconstruction_error: float
    cluster_tol: float = 1e-9

    @property
    def ctx(self):
        return self.dilaton.ctx

    @property
    def dimension(self) -> int:
        return self.eigenvalues.size

    @property
    def interval(self) -> tuple[float, float]:
        return float(self.eigenvalues.min()), float(self.eigenvalues.max())

    def eigenpairs(self) -> list[tuple[float, TorusElement]]:
        return [
            (float(s), TorusElement.from_box(self.ctx, self.eigenvectors[:, i], self.radius))
            for i, s in enumerate(self.eigenvalues)
        ]

    def clusters(self) -> list[tuple[float, np.ndarray]]:
        """Eigenvalues grouped within ``cluster_tol``, with the column indices of each group."""
        out: list[tuple[float, list[int]]] = []
        for i, s in enumerate(self.eigenvalues):
            if out and abs(s - out[-1][0]) <= self.cluster_tol:
                out[-1][1].append(i)
            else:
                out.append((float(s), [i]))
        return [(s, np.array(ix)) for s, ix in out]

    # -- coordinates ------------------------------------------------------
    def coordinates(self, a: TorusElement) -> np.ndarray:
        """Components of ``a`` along the eigenvectors (support outside the box is dropped)."""
        return self.eigenvectors.conj().T @ a.to_box(self.radius)

    def element(self, vec: np.ndarray) -> TorusElement:
        return TorusElement.from_box(self.ctx, vec, self.radius)

    def apply_coordinates(self, values: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Box vectors ``V (values[:, r] * coords)`` for every column ``r`` of ``values``."""
        values = np.asarray(values)
        if values.ndim == 1:
            return self.eigenvectors @ (values * coords)
        return self.eigenvectors @ (values * coords[:, None])

    def to_report(self) -> dict:
        return {
            "radius": self.radius,
            "dimension": self.dimension,
            "interval": list(self.interval),
            "reconstruction_error": self.reconstruction_error,
        }


def eigen_nabla(h: TorusElement, radius: int = 16) -> ModularSpectrum:
    """Hermitian eigendecomposition of nabla on the box of the given radius."""
    if not is_self_adjoint(h, atol=1e-12):
        raise ValueError("the dilaton must be self-adjoint")
    if h.radius > radius:
        raise ValueError("the dilaton support does not fit in the truncation box")
    A = nabla_matrix(h, radius)
    A = 0.5 * (A + A.conj().T)
    w, V = np.linalg.eigh(A)
    err = float(np.abs((V * w) @ V.conj().T - A).max()) if A.size else 0.0
    return ModularSpectrum(h, radius, w, V, err)


def _values(fn: ScalarFn, s: np.ndarray) -> np.ndarray:
    v = np.asarray(fn(s))
    if v.shape != s.shape:
        v = np.broadcast_to(v, s.shape)
    if not np.all(np.isfinite(v)):
        raise ValueError("function is not finite at every eigenvalue")
    return v


def apply_one_var(fn: ScalarFn, spectrum: ModularSpectrum, a: TorusElement) -> TorusElement:
    """sum_i fn(s_i) P_i(a)."""
    c = spectrum.coordinates(a)
    return spectrum.element(spectrum.apply_coordinates(_values(fn, spectrum.eigenvalues), c))


def _cheb_nodes(lo: float, hi: float, n: int) -> np.ndarray:
    k = np.arange(n)
    x = np.cos(np.pi * (2 * k + 1) / (2 * n))
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * x


def _lagrange_matrix(nodes: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric Lagrange basis values ``L[k, i] = ell_i(x_k)`` for Chebyshev (first kind) nodes."""
    n = nodes.size
    k = np.arange(n)
    w = (-1.0) ** k * np.sin(np.pi * (2 * k + 1) / (2 * n))
    diff = x[:, None] - nodes[None, :]
    exact = np.isclose(diff, 0.0, atol=1e-300, rtol=0)
    diff = np.where(exact, 1.0, diff)
    terms = w[None, :] / diff
    L = terms / terms.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        L[hit] = exact[hit].astype(float)
    return L


@dataclass(frozen=True)
class SeparatedKernel:
    """F(s, t) ~ sum_r weights[r] left[:, r](s) right[:, r](t) on the spectrum."""

    weights: np.ndarray
    left: np.ndarray
    right: np.ndarray
    sample_error: float


def separate(fn2: ScalarFn2, spectrum: ModularSpectrum, n: int = 40, rel_tol: float = 1e-15) -> SeparatedKernel:
    """Low-rank separation of ``fn2`` restricted to spectrum x spectrum."""
    s = spectrum.eigenvalues
    lo, hi = spectrum.interval
    if hi - lo < 1e-12:
        val = complex(np.asarray(fn2(np.array([lo]), np.array([lo])))[0])
        ones = np.ones((s.size, 1))
        return SeparatedKernel(np.array([val]), ones, ones, 0.0)
    pad = 1e-9 * max(1.0, hi - lo)
    nodes = _cheb_nodes(lo - pad, hi + pad, n)
    G = np.asarray(fn2(nodes[:, None], nodes[None, :]), dtype=complex)
    if not np.all(np.isfinite(G)):
        raise ValueError("two-variable function is not finite on the spectral grid")
    U, sig, Wh = np.linalg.svd(G)
    keep = sig > rel_tol * max(sig[0], 1e-300)
    r = max(1, int(keep.sum()))
    L = _lagrange_matrix(nodes, s)
    left = L @ U[:, :r]
    right = L @ Wh[:r, :].T
    # check on a random off-grid sample
    rng = np.random.default_rng(0)
    xs = rng.uniform(lo, hi, 7)
    ys = rng.uniform(lo, hi, 7)
    Lx = _lagrange_matrix(nodes, xs)
    Ly = _lagrange_matrix(nodes, ys)
    approx = (Lx @ U[:, :r] * sig[:r]) @ (Ly @ Wh[:r, :].T).T
    exact = np.asarray(fn2(xs[:, None], ys[None, :]), dtype=complex)
    err = float(np.abs(approx - exact).max() / max(1.0, np.abs(exact).max()))
    return SeparatedKernel(sig[:r].astype(complex), left, right, err)


def apply_two_var(
    fn2: ScalarFn2,
    spectrum: ModularSpectrum,
    a: TorusElement,
    b: TorusElement,
    n: int = 40,
    separated: SeparatedKernel | None = None,
) -> TorusElement:
    """sum_ij fn2(s_i, s_j) P_i(a) P_j(b) through a low-rank separation of fn2."""
    sep = separated if separated is not None else separate(fn2, spectrum, n)
    ca = spectrum.coordinates(a)
    cb = spectrum.coordinates(b)
    A = spectrum.apply_coordinates(sep.left, ca)
    B = spectrum.apply_coordinates(sep.right, cb)
    out = TorusElement.zero(a.ctx)
    for r in range(sep.weights.size):
        x = spectrum.element(A[:, r] * sep.weights[r])
        y = spectrum.element(B[:, r])
        out = out + mul(x, y)
    return out


def apply_two_var_exact(fn2: ScalarFn2, spectrum: ModularSpectrum, a: TorusElement, b: TorusElement) -> TorusElement:
    """Brute-force double sum over eigenpairs (reference for small boxes)."""
    s = spectrum.eigenvalues
    ca = spectrum.coordinates(a)
    cb = spectrum.coordinates(b)
    G = np.asarray(fn2(s[:, None], s[None, :]), dtype=complex)
    out = TorusElement.zero(a.ctx)
    V = spectrum.eigenvectors
    for j in np.flatnonzero(np.abs(cb) > 0):
        y = spectrum.element(V[:, j] * cb[j])
        x = spectrum.element(V @ (G[:, j] * ca))
        out = out + mul(x, y)
    return out


def exp_nabla(spectrum: ModularSpectrum, a: TorusElement) -> TorusElement:
    """exp(nabla)(a) by eigen-expansion; equals the modular automorphism."""
    return apply_one_var(np.exp, spectrum, a)
