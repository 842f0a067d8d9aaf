"""Arithmetic of the smooth noncommutative two-torus in the twisted Fourier model.

Elements are finite sums ``sum a_mn U^m V^n`` with ``V U = exp(2 pi i theta) U V``.
They are stored densely on the smallest box containing their support, which
keeps products a single twisted convolution.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Iterator, Mapping

import numpy as np

from . import kernels


@dataclass(frozen=True)
class AlgebraContext:
    """Deformation parameter, conformal class and truncation policy.

    Coefficients below ``prune_tol`` are dropped after every operation; with
    ``relative_prune`` the threshold is scaled by the largest coefficient of
    the element, which keeps tiny elements at full relative precision.
    """

    theta: float = 0.0
    tau: complex = 1j
    prune_tol: float = 1e-14
    band_cap: int = 64
    relative_prune: bool = False

    def __post_init__(self):
        object.__setattr__(self, "tau", complex(self.tau))
        object.__setattr__(self, "theta", float(self.theta))
        if not self.tau.imag > 0:
            raise ValueError("Im(tau) must be positive")
        if self.prune_tol < 0:
            raise ValueError("prune_tol must be non-negative")
        if int(self.band_cap) < 1:
            raise ValueError("band_cap must be at least 1")
        object.__setattr__(self, "band_cap", int(self.band_cap))

    @property
    def tau1(self) -> float:
        return self.tau.real

    @property
    def tau2(self) -> float:
        return self.tau.imag

    def compatible(self, other: "AlgebraContext") -> bool:
        return self.theta == other.theta and self.tau == other.tau


class ContextMismatch(ValueError):
    """Raised when two operands live in different algebras."""


def _trim(coeffs: np.ndarray, off: tuple[int, int], tol: float, relative: bool = False):
    """Zero entries below ``tol`` (times the largest entry if ``relative``) and shrink the box."""
    if coeffs.size == 0:
        return np.zeros((0, 0), complex), (0, 0), 0.0
    if relative:
        tol = tol * float(np.abs(coeffs).max())
    mask = np.abs(coeffs) >= tol if tol > 0 else coeffs != 0
    dropped = float(np.abs(coeffs[~mask]).sum()) if tol > 0 else 0.0
    if not mask.any():
        return np.zeros((0, 0), complex), (0, 0), dropped
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    r0, r1, c0, c1 = rows[0], rows[-1] + 1, cols[0], cols[-1] + 1
    out = np.where(mask, coeffs, 0)[r0:r1, c0:c1].copy()
    return out, (off[0] + int(r0), off[1] + int(c0)), dropped


def _cap(coeffs: np.ndarray, off: tuple[int, int], cap: int):
    """Crop to ``|m|, |n| <= cap``; returns the l1 mass removed."""
    if coeffs.size == 0:
        return coeffs, off, 0.0
    m_lo, n_lo = off
    m_hi, n_hi = m_lo + coeffs.shape[0] - 1, n_lo + coeffs.shape[1] - 1
    if m_lo >= -cap and n_lo >= -cap and m_hi <= cap and n_hi <= cap:
        return coeffs, off, 0.0
    r0 = max(0, -cap - m_lo)
    r1 = coeffs.shape[0] - max(0, m_hi - cap)
    c0 = max(0, -cap - n_lo)
    c1 = coeffs.shape[1] - max(0, n_hi - cap)
    if r0 >= r1 or c0 >= c1:
        return np.zeros((0, 0), complex), (0, 0), float(np.abs(coeffs).sum())
    kept = coeffs[r0:r1, c0:c1]
    lost = float(np.abs(coeffs).sum() - np.abs(kept).sum())
    return kept.copy(), (m_lo + r0, n_lo + c0), max(lost, 0.0)


@dataclass(frozen=True, eq=False)
class TorusElement:
    """Finite twisted Fourier series ``sum coeffs[i, j] U^(m0+i) V^(n0+j)``.

    ``loss`` accumulates the l1 mass discarded by pruning and band capping
    along the computation that produced this value.
    """

    ctx: AlgebraContext
    coeffs: np.ndarray
    offset: tuple[int, int] = (0, 0)
    loss: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.ndim != 2:
            raise ValueError("coefficient array must be two-dimensional")
        c, off, lost = _cap(c, tuple(int(v) for v in self.offset), self.ctx.band_cap)
        c, off, dropped = _trim(c, off, self.ctx.prune_tol, self.ctx.relative_prune)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "offset", off)
        object.__setattr__(self, "loss", float(self.loss) + lost + dropped)

    # -- construction -----------------------------------------------------
    @classmethod
    def zero(cls, ctx: AlgebraContext) -> "TorusElement":
        return cls(ctx, np.zeros((0, 0), complex))

    @classmethod
    def scalar(cls, ctx: AlgebraContext, value: complex) -> "TorusElement":
        return cls(ctx, np.array([[complex(value)]]))

    @classmethod
    def one(cls, ctx: AlgebraContext) -> "TorusElement":
        return cls.scalar(ctx, 1.0)

    @classmethod
    def monomial(cls, ctx: AlgebraContext, m: int, n: int, value: complex = 1.0) -> "TorusElement":
        return cls(ctx, np.array([[complex(value)]]), (int(m), int(n)))

    @classmethod
    def from_dict(cls, ctx: AlgebraContext, coeffs: Mapping[tuple[int, int], complex]) -> "TorusElement":
        items = [(int(m), int(n), complex(v)) for (m, n), v in coeffs.items()]
        if not items:
            return cls.zero(ctx)
        ms = [m for m, _, _ in items]
        ns = [n for _, n, _ in items]
        m0, n0 = min(ms), min(ns)
        arr = np.zeros((max(ms) - m0 + 1, max(ns) - n0 + 1), complex)
        for m, n, v in items:
            arr[m - m0, n - n0] += v
        return cls(ctx, arr, (m0, n0))

    @classmethod
    def from_box(cls, ctx: AlgebraContext, vec: np.ndarray, radius: int) -> "TorusElement":
        """Inverse of :meth:`to_box` for a flattened box of the given radius."""
        w = 2 * radius + 1
        return cls(ctx, np.asarray(vec, complex).reshape(w, w), (-radius, -radius))

    # -- inspection -------------------------------------------------------
    def items(self) -> Iterator[tuple[tuple[int, int], complex]]:
        m0, n0 = self.offset
        for i, j in zip(*np.nonzero(self.coeffs)):
            yield (m0 + int(i), n0 + int(j)), complex(self.coeffs[i, j])

    def to_dict(self) -> dict[tuple[int, int], complex]:
        return dict(self.items())

    def coefficient(self, m: int, n: int) -> complex:
        i, j = m - self.offset[0], n - self.offset[1]
        if 0 <= i < self.coeffs.shape[0] and 0 <= j < self.coeffs.shape[1]:
            return complex(self.coeffs[i, j])
        return 0j

    @property
    def radius(self) -> int:
        """Largest ``max(|m|, |n|)`` in the support (0 for the zero element)."""
        if self.coeffs.size == 0:
            return 0
        m0, n0 = self.offset
        m1, n1 = m0 + self.coeffs.shape[0] - 1, n0 + self.coeffs.shape[1] - 1
        return int(max(abs(m0), abs(m1), abs(n0), abs(n1)))

    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    def to_box(self, radius: int) -> np.ndarray:
        """Flattened coefficients on ``|m|, |n| <= radius`` (support outside is dropped)."""
        w = 2 * radius + 1
        out = np.zeros((w, w), complex)
        if self.coeffs.size:
            m0, n0 = self.offset
            ms = np.arange(self.coeffs.shape[0]) + m0
            ns = np.arange(self.coeffs.shape[1]) + n0
            rm = (np.abs(ms) <= radius)
            rn = (np.abs(ns) <= radius)
            sub = self.coeffs[np.ix_(rm, rn)]
            out[np.ix_(ms[rm] + radius, ns[rn] + radius)] = sub
        return out.ravel()

    def norm1(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def max_abs(self) -> float:
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Pointwise values at theta = 0, with U = e^{ix}, V = e^{iy}."""
        out = np.zeros(np.broadcast(x, y).shape, complex)
        for (m, n), v in self.items():
            out += v * np.exp(1j * (m * x + n * y))
        return out

    # -- arithmetic -------------------------------------------------------
    def _check(self, other: "TorusElement"):
        if not self.ctx.compatible(other.ctx):
            raise ContextMismatch("operands belong to different algebra contexts")

    def _combine(self, other: "TorusElement", sign: float) -> "TorusElement":
        self._check(other)
        if other.is_zero():
            return self
        if self.is_zero():
            return other if sign > 0 else -other
        m0 = min(self.offset[0], other.offset[0])
        n0 = min(self.offset[1], other.offset[1])
        m1 = max(self.offset[0] + self.coeffs.shape[0], other.offset[0] + other.coeffs.shape[0])
        n1 = max(self.offset[1] + self.coeffs.shape[1], other.offset[1] + other.coeffs.shape[1])
        arr = np.zeros((m1 - m0, n1 - n0), complex)
        for el, s in ((self, 1.0), (other, sign)):
            i, j = el.offset[0] - m0, el.offset[1] - n0
            arr[i : i + el.coeffs.shape[0], j : j + el.coeffs.shape[1]] += s * el.coeffs
        return TorusElement(self.ctx, arr, (m0, n0), self.loss + other.loss)

    def __add__(self, other):
        if isinstance(other, TorusElement):
            return self._combine(other, 1.0)
        return self._combine(TorusElement.scalar(self.ctx, other), 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, TorusElement):
            return self._combine(other, -1.0)
        return self._combine(TorusElement.scalar(self.ctx, other), -1.0)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return TorusElement(self.ctx, -self.coeffs, self.offset, self.loss)

    def __mul__(self, other):
        if isinstance(other, TorusElement):
            return mul(self, other)
        return TorusElement(self.ctx, self.coeffs * complex(other), self.offset, self.loss)

    def __rmul__(self, other):
        return TorusElement(self.ctx, self.coeffs * complex(other), self.offset, self.loss)

    def __truediv__(self, other):
        return self * (1.0 / complex(other))

    def conj_coeffs(self):
        return TorusElement(self.ctx, self.coeffs.conj(), self.offset, self.loss)

    def adjoint(self) -> "TorusElement":
        return adjoint(self)

    def allclose(self, other: "TorusElement", atol: float = 1e-10) -> bool:
        return (self - other).max_abs() <= atol

    def __repr__(self):
        terms = ", ".join(f"({m},{n}):{v:.6g}" for (m, n), v in list(self.items())[:6])
        more = "" if len(self.coeffs.nonzero()[0]) <= 6 else ", ..."
        return f"TorusElement({{{terms}{more}}})"


def mul(a: TorusElement, b: TorusElement) -> TorusElement:
    """Product in the twisted Fourier model, pruned and band-capped."""
    a._check(b)
    if a.is_zero() or b.is_zero():
        return TorusElement(a.ctx, np.zeros((0, 0), complex), (0, 0), a.loss + b.loss)
    c, off = kernels.twisted_convolve(a.coeffs, a.offset, b.coeffs, b.offset, a.ctx.theta)
    return TorusElement(a.ctx, c, off, a.loss + b.loss)


def adjoint(a: TorusElement) -> TorusElement:
    """Involution with ``(U^m V^n)^* = exp(2 pi i theta m n) U^-m V^-n``.

    The phase makes ``(U^m V^n)^* (U^m V^n) = 1`` exactly.
    """
    if a.is_zero():
        return a
    m0, n0 = a.offset
    ms = np.arange(a.coeffs.shape[0]) + m0
    ns = np.arange(a.coeffs.shape[1]) + n0
    phase = np.exp(2j * np.pi * ((a.ctx.theta * np.multiply.outer(ms, ns)) % 1.0))
    c = (a.coeffs.conj() * phase)[::-1, ::-1]
    off = (-(m0 + a.coeffs.shape[0] - 1), -(n0 + a.coeffs.shape[1] - 1))
    return TorusElement(a.ctx, c, off, a.loss)


def delta(j: int, a: TorusElement) -> TorusElement:
    """Canonical derivation: multiplies ``a_mn`` by ``m`` (j=1) or ``n`` (j=2)."""
    if j not in (1, 2):
        raise ValueError("direction index must be 1 or 2")
    if a.is_zero():
        return a
    if j == 1:
        w = (np.arange(a.coeffs.shape[0]) + a.offset[0])[:, None]
    else:
        w = (np.arange(a.coeffs.shape[1]) + a.offset[1])[None, :]
    return TorusElement(a.ctx, a.coeffs * w, a.offset, a.loss)


def delta_word(dirs: Iterable[int], a: TorusElement) -> TorusElement:
    """Apply derivations right-to-left: ``dirs=(1, 2)`` gives ``delta_1(delta_2(a))``."""
    for j in reversed(tuple(dirs)):
        a = delta(j, a)
    return a


def trace_phi(a: TorusElement) -> complex:
    """Normalized trace: the coefficient of the unit."""
    return a.coefficient(0, 0)


def hs_inner(a: TorusElement, b: TorusElement) -> complex:
    """GNS inner product ``phi(b^* a)``."""
    return trace_phi(mul(adjoint(b), a))


def is_self_adjoint(a: TorusElement, atol: float = 1e-12) -> bool:
    return (a - adjoint(a)).max_abs() <= atol


def laplacian0(a: TorusElement) -> TorusElement:
    """Flat Laplacian ``delta_1^2 + 2 Re(tau) delta_1 delta_2 + |tau|^2 delta_2^2``."""
    t = a.ctx.tau
    d1 = delta(1, a)
    d2 = delta(2, a)
    return delta(1, d1) + 2 * t.real * delta(1, d2) + abs(t) ** 2 * delta(2, d2)


def _norm_bound(a: TorusElement) -> float:
    return a.norm1()


def exp_sa(a: TorusElement, terms: int = 20) -> TorusElement:
    """Exponential of a self-adjoint element by scaling and squaring.

    The argument is halved until its l1 norm (an upper bound on the operator
    norm) drops below 1/2, summed with a ``terms``-term Taylor series, then
    squared back.
    """
    if not is_self_adjoint(a, atol=max(1e-10, 10 * a.ctx.prune_tol)):
        raise ValueError("exp_sa requires a self-adjoint argument")
    return expm(a, terms)


def expm(a: TorusElement, terms: int = 20) -> TorusElement:
    """Exponential by scaling and squaring (no self-adjointness check).

    Intermediate products are pruned 1000x more finely than the context asks
    for, since every squaring doubles the relative error; the result is
    pruned at the context threshold.
    """
    out_ctx = a.ctx
    ctx = replace(out_ctx, prune_tol=out_ctx.prune_tol * 1e-3)
    a = TorusElement(ctx, a.coeffs, a.offset, a.loss)
    nrm = _norm_bound(a)
    squarings = 0
    while nrm / (2**squarings) >= 0.5:
        squarings += 1
    x = a * (1.0 / 2**squarings)
    result = TorusElement.one(ctx)
    term = TorusElement.one(ctx)
    for k in range(1, terms + 1):
        term = mul(term, x) * (1.0 / k)
        result = result + term
        if term.is_zero():
            break
    for _ in range(squarings):
        result = mul(result, result)
    return TorusElement(out_ctx, result.coeffs, result.offset, result.loss)


@dataclass(frozen=True, eq=False)
class SelfAdjointCalculus:
    """Functions of a self-adjoint element via the eigendecomposition of its left multiplication.

    ``f(a) = f(L_a) 1`` with ``L_a`` compressed to the box of the given radius;
    accurate when the coefficients of ``f(a)`` decay well inside the box.
    """

    element: TorusElement
    radius: int
    eigenvalues: np.ndarray
    unit_coordinates: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def build(cls, a: TorusElement, radius: int = 16) -> "SelfAdjointCalculus":
        if not is_self_adjoint(a, atol=1e-12):
            raise ValueError("functional calculus requires a self-adjoint element")
        L = kernels.left_mult_matrix(a.coeffs, a.offset, a.ctx.theta, radius, radius)
        w, V = np.linalg.eigh(0.5 * (L + L.conj().T))
        e0 = TorusElement.one(a.ctx).to_box(radius)
        return cls(a, radius, w, V.conj().T @ e0, V)

    def __call__(self, fn) -> TorusElement:
        vals = np.asarray(fn(self.eigenvalues))
        return TorusElement.from_box(self.element.ctx, self.eigenvectors @ (vals * self.unit_coordinates), self.radius)


def commutator(a: TorusElement, b: TorusElement) -> TorusElement:
    return mul(a, b) - mul(b, a)


# ---------------------------------------------------------------------------
# 2x2 matrices over the algebra


@dataclass(frozen=True, eq=False)
class MatrixElement:
    """Element of the algebra tensored with 2x2 complex matrices."""

    entries: tuple[tuple[TorusElement, TorusElement], tuple[TorusElement, TorusElement]]

    def __post_init__(self):
        ents = tuple(tuple(row) for row in self.entries)
        if len(ents) != 2 or any(len(r) != 2 for r in ents):
            raise ValueError("MatrixElement needs a 2x2 array of entries")
        ctx = ents[0][0].ctx
        for row in ents:
            for e in row:
                if not ctx.compatible(e.ctx):
                    raise ContextMismatch("matrix entries must share one context")
        object.__setattr__(self, "entries", ents)

    @property
    def ctx(self) -> AlgebraContext:
        return self.entries[0][0].ctx

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    @classmethod
    def from_parts(cls, identity_part: TorusElement, sigma_part: TorusElement) -> "MatrixElement":
        """``identity_part (x) I + sigma_part (x) sigma`` with sigma = [[i t2, t2^2], [-1, i t2]]."""
        t2 = identity_part.ctx.tau2
        return cls(
            (
                (identity_part + 1j * t2 * sigma_part, t2**2 * sigma_part),
                (-sigma_part, identity_part + 1j * t2 * sigma_part),
            )
        )

    @classmethod
    def diag(cls, a: TorusElement, b: TorusElement) -> "MatrixElement":
        z = TorusElement.zero(a.ctx)
        return cls(((a, z), (z, b)))

    @classmethod
    def identity(cls, ctx: AlgebraContext) -> "MatrixElement":
        one = TorusElement.one(ctx)
        return cls.diag(one, one)

    def __add__(self, other: "MatrixElement") -> "MatrixElement":
        return MatrixElement(tuple(tuple(self[i, j] + other[i, j] for j in range(2)) for i in range(2)))

    def __sub__(self, other: "MatrixElement") -> "MatrixElement":
        return MatrixElement(tuple(tuple(self[i, j] - other[i, j] for j in range(2)) for i in range(2)))

    def scale(self, c: complex) -> "MatrixElement":
        return MatrixElement(tuple(tuple(self[i, j] * c for j in range(2)) for i in range(2)))

    def matmul(self, other: "MatrixElement") -> "MatrixElement":
        return MatrixElement(
            tuple(
                tuple(mul(self[i, 0], other[0, j]) + mul(self[i, 1], other[1, j]) for j in range(2))
                for i in range(2)
            )
        )

    def right_mul(self, a: TorusElement) -> "MatrixElement":
        return MatrixElement(tuple(tuple(mul(self[i, j], a) for j in range(2)) for i in range(2)))

    def trace(self) -> TorusElement:
        return self[0, 0] + self[1, 1]

    def adjoint(self) -> "MatrixElement":
        return MatrixElement(tuple(tuple(adjoint(self[j, i]) for j in range(2)) for i in range(2)))

    def max_abs(self) -> float:
        return max(self[i, j].max_abs() for i in range(2) for j in range(2))

    def sigma_decomposition(self) -> tuple[TorusElement, TorusElement]:
        """Inverse of :meth:`from_parts`; valid when the matrix lies in span{I, sigma}."""
        sigma_part = -self[1, 0]
        t2 = self.ctx.tau2
        identity_part = self[0, 0] - 1j * t2 * sigma_part
        return identity_part, sigma_part


# ---------------------------------------------------------------------------
# serialization


def element_to_records(a: TorusElement) -> list[dict]:
    """List of ``{m, n, re, im}`` records sorted by ``(m, n)``."""
    return [
        {"m": m, "n": n, "re": float(v.real), "im": float(v.imag)}
        for (m, n), v in sorted(a.items())
    ]


def element_from_records(ctx: AlgebraContext, records: Iterable[Mapping]) -> TorusElement:
    acc: dict[tuple[int, int], complex] = {}
    for r in records:
        try:
            key = (int(r["m"]), int(r["n"]))
            val = complex(float(r.get("re", 0.0)), float(r.get("im", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed coefficient record {r!r}") from exc
        acc[key] = acc.get(key, 0j) + val
    return TorusElement.from_dict(ctx, acc)


def matrix_to_records(F: MatrixElement) -> list[list[list[dict]]]:
    return [[element_to_records(F[i, j]) for j in range(2)] for i in range(2)]


def matrix_from_records(ctx: AlgebraContext, rows) -> MatrixElement:
    if len(rows) != 2 or any(len(r) != 2 for r in rows):
        raise ValueError("a matrix element needs 2x2 entries")
    return MatrixElement(tuple(tuple(element_from_records(ctx, rows[i][j]) for j in range(2)) for i in range(2)))
