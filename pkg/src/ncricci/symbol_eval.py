"""Numerical evaluation of formal symbols at a point ``xi`` and the parametrix remainder test.

A word is evaluated by replacing each run with the function
``x -> e^{(2 nK + nk) x / 2} (e^x Q(xi) + 1)^{-nb}`` of the dilaton and each
tag with the corresponding derivative of ``k^2`` or ``k``.  The remainder of
the parametrix is then formed numerically: the composition

    sum_{|alpha| <= 2} (1/alpha!) d_xi^alpha(sigma(P) + 1)(xi) delta^alpha(b(xi))

is built from the evaluated elements ``b(xi) = b0 + b1 + b2`` with the
derivations applied to those numerical elements, and ``1`` is subtracted.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from math import factorial

import numpy as np

from .algebra import SelfAdjointCalculus, TorusElement, delta_word, exp_sa, mul
from .symbols import SymbolExpr, Word, laplacian_symbol, parametrix_of, xi_derivative_multi

_TWO_I = 2j


@dataclass(frozen=True, eq=False)
class MatrixValue:
    """``identity (x) I + sigma_part (x) sigma`` with ``sigma^2 = 2 i t2 sigma``."""

    identity: TorusElement
    sigma_part: TorusElement

    def __add__(self, o: "MatrixValue") -> "MatrixValue":
        return MatrixValue(self.identity + o.identity, self.sigma_part + o.sigma_part)

    def __sub__(self, o: "MatrixValue") -> "MatrixValue":
        return MatrixValue(self.identity - o.identity, self.sigma_part - o.sigma_part)

    def scale(self, c: complex) -> "MatrixValue":
        return MatrixValue(self.identity * c, self.sigma_part * c)

    def product(self, o: "MatrixValue") -> "MatrixValue":
        t2 = self.identity.ctx.tau2
        ident = mul(self.identity, o.identity)
        sig = (mul(self.identity, o.sigma_part) + mul(self.sigma_part, o.identity)
               + mul(self.sigma_part, o.sigma_part) * (_TWO_I * t2))
        return MatrixValue(ident, sig)

    def derivative(self, dirs: tuple[int, ...]) -> "MatrixValue":
        return MatrixValue(delta_word(dirs, self.identity), delta_word(dirs, self.sigma_part))

    def max_abs(self) -> float:
        return max(self.identity.max_abs(), self.sigma_part.max_abs())


class SymbolEvaluator:
    """Evaluates symbols of the formal calculus for one dilaton."""

    def __init__(self, h: TorusElement, radius: int = 12, lam: float = -1.0):
        # symbol values span many orders of magnitude in |xi|; prune relative to each element
        self.ctx = replace(h.ctx, relative_prune=True)
        h = TorusElement(self.ctx, h.coeffs, h.offset)
        self.h = h
        self.lam = lam
        self.calculus = SelfAdjointCalculus.build(h, radius)
        self._tags: dict[tuple, TorusElement] = {}
        self._runs: dict[tuple, TorusElement] = {}

    def quadratic(self, xi: tuple[float, float]) -> float:
        t1, tau = self.ctx.tau1, self.ctx.tau
        return xi[0] ** 2 + 2 * t1 * xi[0] * xi[1] + abs(tau) ** 2 * xi[1] ** 2

    def run(self, run: tuple, q: float) -> TorusElement:
        nK, nk, nb = run
        if run == (0, 0, 0):
            return TorusElement.one(self.ctx)
        key = (run, q if nb else None)
        if key not in self._runs:
            kp = 2 * nK + nk
            self._runs[key] = self.calculus(
                lambda x: np.exp(0.5 * kp * x) * (np.exp(x) * q - self.lam) ** (-float(nb))
            )
        return self._runs[key]

    def tag(self, tag: tuple) -> TorusElement:
        if tag not in self._tags:
            base, dirs = tag
            self._tags[tag] = delta_word(dirs, exp_sa(self.h * (1.0 if base == "K" else 0.5)))
        return self._tags[tag]

    def body(self, body: tuple, q: float) -> TorusElement:
        out = self.run(body[0], q)
        for i in range(1, len(body), 2):
            out = mul(mul(out, self.tag(body[i])), self.run(body[i + 1], q))
        return out

    def evaluate(self, e: SymbolExpr, xi: tuple[float, float]) -> MatrixValue:
        """Value at ``xi``; words sharing a body are combined before the body is evaluated."""
        q = self.quadratic(xi)
        t1, t2 = self.ctx.tau1, self.ctx.tau2
        weights: dict[tuple, complex] = {}
        for w, c in e.items():
            val = c.evaluate(t1, t2) * xi[0] ** w.p * xi[1] ** w.q * self.lam**w.lam
            key = (w.mat, w.body)
            weights[key] = weights.get(key, 0j) + val
        parts = [TorusElement.zero(self.ctx), TorusElement.zero(self.ctx)]
        for (mat, body), wt in sorted(weights.items(), key=repr):
            if wt != 0:
                parts[mat] = parts[mat] + self.body(body, q) * wt
        return MatrixValue(parts[0], parts[1])


def _multi_indices(max_order: int):
    for a1 in range(max_order + 1):
        for a2 in range(max_order + 1 - a1):
            yield a1, a2


def composition_remainder(target: str, evaluator: SymbolEvaluator, xi: tuple[float, float],
                          terms: int = 3) -> float:
    """max-abs of ``(sigma(P) - lambda) o (b0 + ... + b_{terms-1}) - 1`` at ``xi``, formed numerically."""
    sym = laplacian_symbol(target).full + SymbolExpr.word(Word(lam=1), -1)
    par = parametrix_of(target)
    b = [par.b0, par.b1, par.b2][:terms]
    total = SymbolExpr()
    for piece in b:
        total = total + piece
    b_val = evaluator.evaluate(total, xi)
    acc = MatrixValue(TorusElement.one(evaluator.ctx) * -1.0, TorusElement.zero(evaluator.ctx))
    for a1, a2 in _multi_indices(2):
        d_sym = xi_derivative_multi(sym, (a1, a2))
        if d_sym.is_zero():
            continue
        dirs = (1,) * a1 + (2,) * a2
        left = evaluator.evaluate(d_sym, xi)
        right = b_val.derivative(dirs) if dirs else b_val
        acc = acc + left.product(right).scale(1.0 / (factorial(a1) * factorial(a2)))
    return acc.max_abs()


@dataclass(frozen=True)
class RemainderDecay:
    scales: tuple[float, ...]
    angles: tuple[float, ...]
    norms: np.ndarray  # (angles, scales)
    slopes: np.ndarray  # log-log slope per angle

    @property
    def worst_slope(self) -> float:
        return float(self.slopes.max())

    def to_report(self) -> dict:
        return {
            "scales": list(self.scales),
            "angles": list(self.angles),
            "norms": self.norms.tolist(),
            "slopes": self.slopes.tolist(),
            "worst_slope": self.worst_slope,
        }


def remainder_decay(target: str, h: TorusElement, exponents=range(4, 9), n_angles: int = 8,
                    radius: int = 12, terms: int = 3) -> RemainderDecay:
    """Remainder norms at ``xi = 2^j (cos phi, sin phi)`` and their log-log slopes in ``|xi|``."""
    ev = SymbolEvaluator(h, radius)
    scales = tuple(float(2**j) for j in exponents)
    angles = tuple(2 * np.pi * i / n_angles for i in range(n_angles))
    norms = np.array([[composition_remainder(target, ev, (r * np.cos(a), r * np.sin(a)), terms)
                       for r in scales] for a in angles])
    logs = np.log(np.asarray(scales))
    slopes = np.array([np.polyfit(logs, np.log(np.maximum(row, 1e-300)), 1)[0] for row in norms])
    return RemainderDecay(scales, angles, norms, slopes)
