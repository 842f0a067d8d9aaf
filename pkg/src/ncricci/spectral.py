"""Brute-force spectral oracle on truncated Fourier boxes.

Operators act on ``span{U^m V^n : |m|, |n| <= N}`` (tensored with C^2 for
one-forms).  Derivations are diagonal and left multiplication is a twisted
convolution matrix.  ``k Delta_0 k`` is assembled through a guard band of
``guard`` extra modes so that the inner product with ``Delta_0`` sees every
mode that ``k`` can reach; the one-form operators are compressions of
``delta_i L_{k^2} delta_j``, which needs no guard band because the outer
derivations are diagonal.

Heat traces ``Tr(F e^{-tP})`` are computed from one Hermitian eigensolve.
The constant term ``a2`` of the small-t expansion is obtained by a
least-squares fit of ``a0/t + a2 + a4 t + ...`` on a window placed just past
the point where modes at the edge of the box have decayed.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from math import pi
from pathlib import Path
from typing import Sequence

import numpy as np

from . import kernels
from .algebra import MatrixElement, TorusElement, exp_sa, is_self_adjoint

TARGETS = ("delta_h0", "delta_h1", "delta_phi01", "delta0")
FIT_TERMS = 5


@dataclass(frozen=True)
class TruncationGrid:
    """Box ``|m|, |n| <= N`` plus a guard band used while assembling ``k Delta_0 k``."""

    N: int
    guard: int = 12

    def __post_init__(self):
        if self.N < 1 or self.guard < 0:
            raise ValueError("grid needs N >= 1 and guard >= 0")

    @property
    def dimension(self) -> int:
        return (2 * self.N + 1) ** 2

    def modes(self, radius: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        r = self.N if radius is None else radius
        ax = np.arange(-r, r + 1)
        m, n = np.meshgrid(ax, ax, indexing="ij")
        return m.ravel(), n.ravel()


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Truncated operator with the diagonal Gram weights that make it self-adjoint."""

    target: str
    matrix: np.ndarray
    gram: np.ndarray
    grid: TruncationGrid
    blocks: int
    restriction_loss: float
    symmetrized: bool = True
    kernel_tol: float = 1e-8

    @cached_property
    def hermitian(self) -> np.ndarray:
        """``G^{1/2} P G^{-1/2}`` (Hermitian up to rounding)."""
        s = np.sqrt(self.gram)
        return s[:, None] * self.matrix / s[None, :]

    @cached_property
    def asymmetry(self) -> float:
        H = self.hermitian
        return float(np.abs(H - H.conj().T).max())

    @cached_property
    def eigen(self) -> tuple[np.ndarray, np.ndarray]:
        H = self.hermitian
        return np.linalg.eigh(0.5 * (H + H.conj().T))

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eigen[0]

    def kernel_indices(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.eigenvalues) < self.kernel_tol)

    @property
    def kernel_dimension(self) -> int:
        return int(self.kernel_indices().size)

    def smearing_matrix(self, F) -> np.ndarray:
        """Matrix of left multiplication by ``F`` in the symmetrized frame."""
        N = self.grid.N
        if isinstance(F, MatrixElement):
            if self.blocks != 2:
                raise ValueError("matrix-valued smearing needs a one-form operator")
            M = np.block([[_left(F[i, j], N) for j in range(2)] for i in range(2)])
        elif isinstance(F, TorusElement):
            L = _left(F, N)
            M = L if self.blocks == 1 else np.kron(np.eye(2), L)
        else:
            raise TypeError("smearing must be a TorusElement or MatrixElement")
        s = np.sqrt(self.gram)
        return s[:, None] * M / s[None, :]

    def smearing_weights(self, F) -> np.ndarray:
        """Diagonal ``<v_k, F v_k>`` in the eigenbasis."""
        V = self.eigen[1]
        return np.sum(V.conj() * (self.smearing_matrix(F) @ V), axis=0)


def _left(a: TorusElement, N: int) -> np.ndarray:
    return kernels.left_mult_matrix(a.coeffs, a.offset, a.ctx.theta, N, N)


def _tail_mass(a: TorusElement, radius: int) -> float:
    return float(sum(abs(v) for (m, n), v in a.items() if max(abs(m), abs(n)) > radius))


def build_operator(target: str, h: TorusElement, grid: TruncationGrid) -> OperatorMatrix:
    """Truncated ``Delta_{h,0}`` (= k Delta_0 k), ``Delta_{h,1}``, ``Delta_phi^{(0,1)}`` or ``Delta_0``."""
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")
    if not is_self_adjoint(h, atol=1e-12):
        raise ValueError("the dilaton must be self-adjoint")
    ctx = h.ctx
    t1, t2 = ctx.tau1, ctx.tau2
    tau = ctx.tau
    N = grid.N
    m, n = grid.modes()
    d1, d2 = m.astype(float), n.astype(float)
    if target == "delta0":
        lap = d1**2 + 2 * t1 * d1 * d2 + abs(tau) ** 2 * d2**2
        return OperatorMatrix(target, np.diag(lap).astype(complex), np.ones(lap.size), grid, 1, 0.0)
    if target == "delta_h0":
        k = exp_sa(h * 0.5)
        big = N + grid.guard
        me, ne = grid.modes(big)
        lap = me**2 + 2 * t1 * me * ne + abs(tau) ** 2 * ne**2
        L_in = kernels.left_mult_matrix(k.coeffs, k.offset, ctx.theta, big, N)
        L_out = kernels.left_mult_matrix(k.coeffs, k.offset, ctx.theta, N, big)
        P = L_out @ (lap[:, None] * L_in)
        return OperatorMatrix(target, P, np.ones(P.shape[0]), grid, 1, _tail_mass(k, grid.guard))
    k2 = exp_sa(h)
    L2 = _left(k2, N)

    def dld(a, b):
        return a[:, None] * L2 * b[None, :]

    if target == "delta_phi01":
        P = dld(d1, d1) + np.conj(tau) * dld(d1, d2) + tau * dld(d2, d1) + abs(tau) ** 2 * dld(d2, d2)
        return OperatorMatrix(target, P, np.ones(P.shape[0]), grid, 1, 0.0)
    diag = dld(d1, d1) + t1 * (dld(d1, d2) + dld(d2, d1)) + abs(tau) ** 2 * dld(d2, d2)
    X = dld(d1, d2) - dld(d2, d1)
    P = np.block([[diag, t2**2 * X], [-X, diag]])
    d = m.size
    gram = np.concatenate([np.full(d, 1.0 / t2), np.full(d, t2)])
    return OperatorMatrix(target, P, gram, grid, 2, 0.0)


def heat_trace(F, P: OperatorMatrix, t) -> np.ndarray:
    """``Tr(F e^{-tP})`` for a scalar or an array of ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    w = P.eigenvalues
    d = P.smearing_weights(F)
    return np.exp(-np.outer(t, w)) @ d


def edge_eigenvalue(h: TorusElement, N: int) -> float:
    """Lower bound ``N^2 e^{-|h|_1}`` for the eigenvalues of modes near the edge of the box."""
    return float(N**2 * np.exp(-np.abs(h.coeffs).sum()))


def default_t_window(lam_edge: float, samples: int = 16, factor: float = 4.0,
                     edge_product: float = 8.0) -> np.ndarray:
    """Geometric grid on ``[t_min, factor t_min]`` with ``lam_edge t_min = edge_product``.

    Truncation artefacts live in the modes at the edge of the box; their
    weight ``e^{-t lam_edge}`` is negligible once ``t lam_edge`` is a few units.
    """
    t_min = edge_product / lam_edge
    return t_min * np.geomspace(1.0, factor, samples)


@dataclass(frozen=True)
class HeatFit:
    """Fit of ``a0/t + a2 + a4 t + ...``; values are complex when the smearing is not self-adjoint."""

    samples: tuple[tuple[float, complex], ...]
    coefficients: tuple[complex, ...]
    a2_estimate: complex
    stderr: float
    residual: float

    def to_report(self) -> dict:
        def c(z):
            return [float(np.real(z)), float(np.imag(z))]

        return {
            "a0": c(self.coefficients[0]),
            "a2": c(self.a2_estimate),
            "higher": [c(z) for z in self.coefficients[2:]],
            "stderr": self.stderr,
            "residual": self.residual,
            "samples": [[t, *c(v)] for t, v in self.samples],
        }


def _lsq(ts: np.ndarray, vals: np.ndarray, terms: int) -> tuple[np.ndarray, float, float]:
    """Coefficients, max residual and the least-squares standard error of the constant term."""
    A = np.stack([ts ** (j - 1.0) for j in range(terms)], axis=1)
    scale = np.abs(A).max(axis=0)
    As = A / scale
    if np.linalg.cond(As) > 1e12:
        raise ValueError("ill-conditioned heat fit")
    coef = np.linalg.lstsq(As, vals, rcond=None)[0] / scale
    res = A @ coef - vals
    dof = ts.size - terms
    var = float(np.sum(np.abs(res) ** 2)) / dof if dof > 0 else 0.0
    se = np.sqrt(var * np.linalg.inv(As.T @ As)[1, 1]) / scale[1]
    return coef, float(np.abs(res).max()), float(se)


def fit_a2(ts: Sequence[float], values: Sequence[complex], terms: int = 3) -> HeatFit:
    """Fit ``sum_{j < terms} a_{2j} t^{j-1}``.

    The error bar is the larger of the least-squares standard error of the
    constant term and its drift when either end sample is dropped.
    """
    if terms < 2:
        raise ValueError("the fit needs at least the 1/t and constant terms")
    ts = np.asarray(ts, dtype=float)
    vals = np.asarray(values, dtype=complex)
    if ts.size < terms + 1 or ts.max() < 4 * ts.min() * (1 - 1e-12):
        raise ValueError(f"need at least {terms + 1} samples spanning a factor 4 in t")
    order = np.argsort(ts)
    ts, vals = ts[order], vals[order]
    coef, resid, se = _lsq(ts, vals, terms)
    drift = max(abs(_lsq(ts[1:], vals[1:], terms)[0][1] - coef[1]),
                abs(_lsq(ts[:-1], vals[:-1], terms)[0][1] - coef[1]))
    a2 = complex(coef[1])
    return HeatFit(tuple(zip(ts.tolist(), (complex(v) for v in vals))), tuple(complex(c) for c in coef),
                   a2, max(float(drift), se), resid)


def write_samples_csv(path: str | Path, ts: Sequence[float], values: Sequence[complex]) -> None:
    """(t, trace) table; the imaginary part gets its own column."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "trace", "trace_imag"])
        for t, v in zip(ts, values):
            w.writerow([repr(float(t)), repr(float(np.real(v))), repr(float(np.imag(v)))])


@dataclass(frozen=True, eq=False)
class RicciSpectralData:
    """Eigen-decompositions shared by every smearing of the spectral Ricci functional."""

    scalar: OperatorMatrix
    form: OperatorMatrix
    lam_edge: float

    @property
    def lam_max(self) -> float:
        return float(min(self.scalar.eigenvalues.max(), self.form.eigenvalues.max()))

    def window(self) -> np.ndarray:
        return default_t_window(self.lam_edge)

    def trace_difference(self, F: MatrixElement, ts) -> np.ndarray:
        """``Tr(tr(F) e^{-t Delta_{h,0}}) - Tr(F e^{-t Delta_{h,1}})``."""
        return heat_trace(F.trace(), self.scalar, ts) - heat_trace(F, self.form, ts)


def ricci_spectral_data(h: TorusElement, grid: TruncationGrid) -> RicciSpectralData:
    return RicciSpectralData(build_operator("delta_h0", h, grid), build_operator("delta_h1", h, grid),
                             edge_eigenvalue(h, grid.N))


def spectral_ricci(F: MatrixElement, data: RicciSpectralData, ts: Sequence[float] | None = None,
                   terms: int = FIT_TERMS) -> HeatFit:
    """Fitted ``a2`` of the trace difference, in the Lebesgue normalization of the heat trace."""
    ts = data.window() if ts is None else np.asarray(ts, dtype=float)
    return fit_a2(ts, data.trace_difference(F, ts), terms)


def kernel_trace(F, P: OperatorMatrix) -> complex:
    """``Tr(F Q)`` with ``Q`` the projection onto the numerical kernel."""
    idx = P.kernel_indices()
    if idx.size == 0:
        return 0j
    V = P.eigen[1][:, idx]
    return complex(np.trace(V.conj().T @ P.smearing_matrix(F) @ V))


def zeta_ricci(F: MatrixElement, data: RicciSpectralData, ts: Sequence[float] | None = None,
               gap_tol: float = 1e-6, terms: int = FIT_TERMS) -> complex:
    """zeta(0) of the smeared difference from nonzero modes, plus the kernel-projection traces."""
    for P in (data.scalar, data.form):
        w = np.abs(P.eigenvalues)
        nonzero = w[w >= P.kernel_tol]
        if nonzero.size and nonzero.min() < gap_tol:
            raise ValueError("kernel threshold is ambiguous: eigenvalue gap too small")
    ts = data.window() if ts is None else np.asarray(ts, dtype=float)

    def nonzero_trace(Fx, P):
        keep = np.abs(P.eigenvalues) >= P.kernel_tol
        d = P.smearing_weights(Fx)[keep]
        return np.exp(-np.outer(ts, P.eigenvalues[keep])) @ d

    vals = nonzero_trace(F.trace(), data.scalar) - nonzero_trace(F, data.form)
    zeta0 = fit_a2(ts, vals, terms).a2_estimate
    return zeta0 + kernel_trace(F.trace(), data.scalar) - kernel_trace(F, data.form)


def lebesgue_factor() -> float:
    """Ratio between the true heat coefficient and ``int b2 d xi`` with ``d xi = (2 pi)^{-2} d_L xi``."""
    return 4 * pi**2


NULL_REFERENCE_FRACTION = 0.1


def relative_discrepancy(value: complex, reference: complex, scale: float) -> float:
    """``|value - reference| / max(|reference|, 0.1 scale)``.

    ``scale`` bounds the size of the reference for smearings of comparable
    norm; it only takes over when the reference vanishes by cancellation
    (for instance ``F = I``, where the functional is zero).
    """
    denom = max(abs(reference), NULL_REFERENCE_FRACTION * scale)
    diff = abs(value - reference)
    if denom == 0:
        return 0.0 if diff == 0 else float("inf")
    return float(diff / denom)
