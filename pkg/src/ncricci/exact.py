"""Exact scalars for the symbol engine.

``GaussQ`` is a Gaussian rational ``a + b i``.  ``TauPoly`` is a Laurent
polynomial in ``tau1 = Re(tau)`` and ``tau2 = Im(tau)`` with Gaussian-rational
coefficients; negative powers of ``tau2`` appear after the polar substitution.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Iterator, Mapping


class GaussQ:
    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def coerce(cls, v) -> "GaussQ":
        if isinstance(v, GaussQ):
            return v
        if isinstance(v, complex):
            return cls(Fraction(v.real).limit_denominator(10**12), Fraction(v.imag).limit_denominator(10**12))
        return cls(v, 0)

    def __add__(self, o):
        o = GaussQ.coerce(o)
        return GaussQ(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = GaussQ.coerce(o)
        return GaussQ(self.re - o.re, self.im - o.im)

    def __neg__(self):
        return GaussQ(-self.re, -self.im)

    def __mul__(self, o):
        o = GaussQ.coerce(o)
        return GaussQ(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def conj(self) -> "GaussQ":
        return GaussQ(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __eq__(self, o):
        try:
            o = GaussQ.coerce(o)
        except (TypeError, ValueError):
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        return f"({self.re}{'+' if self.im > 0 else '-'}{abs(self.im)}i)"


I_UNIT = GaussQ(0, 1)


class TauPoly:
    """Immutable Laurent polynomial ``sum c[e1, e2] tau1^e1 tau2^e2``."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[tuple[int, int], GaussQ] | None = None):
        clean = {}
        for k, v in (terms or {}).items():
            v = GaussQ.coerce(v)
            if not v.is_zero():
                clean[(int(k[0]), int(k[1]))] = v
        self._terms = clean
        self._hash = None

    # constructors
    @classmethod
    def const(cls, c) -> "TauPoly":
        return cls({(0, 0): GaussQ.coerce(c)})

    @classmethod
    def monomial(cls, e1: int, e2: int, c=1) -> "TauPoly":
        return cls({(e1, e2): GaussQ.coerce(c)})

    @classmethod
    def tau(cls) -> "TauPoly":
        return cls({(1, 0): GaussQ(1), (0, 1): I_UNIT})

    @classmethod
    def tau_bar(cls) -> "TauPoly":
        return cls({(1, 0): GaussQ(1), (0, 1): -I_UNIT})

    @classmethod
    def abs_tau_sq(cls) -> "TauPoly":
        return cls({(2, 0): GaussQ(1), (0, 2): GaussQ(1)})

    # algebra
    def items(self) -> Iterator[tuple[tuple[int, int], GaussQ]]:
        return iter(sorted(self._terms.items()))

    def is_zero(self) -> bool:
        return not self._terms

    def __add__(self, o):
        o = _coerce_poly(o)
        out = dict(self._terms)
        for k, v in o._terms.items():
            out[k] = out[k] + v if k in out else v
        return TauPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return TauPoly({k: -v for k, v in self._terms.items()})

    def __sub__(self, o):
        return self + (-_coerce_poly(o))

    def __mul__(self, o):
        o = _coerce_poly(o)
        out: dict[tuple[int, int], GaussQ] = {}
        for (a1, a2), u in self._terms.items():
            for (b1, b2), v in o._terms.items():
                k = (a1 + b1, a2 + b2)
                out[k] = out[k] + u * v if k in out else u * v
        return TauPoly(out)

    __rmul__ = __mul__

    def evaluate(self, tau1: float, tau2: float) -> complex:
        return sum((complex(c) * tau1**e1 * tau2**e2 for (e1, e2), c in self._terms.items()), 0j)

    def __eq__(self, o):
        if not isinstance(o, TauPoly):
            try:
                o = _coerce_poly(o)
            except TypeError:
                return NotImplemented
        return self._terms == o._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self):
        if not self._terms:
            return "0"
        parts = []
        for (e1, e2), c in self.items():
            mono = "".join(
                f"*t{i}" + (f"^{e}" if e != 1 else "") for i, e in ((1, e1), (2, e2)) if e != 0
            )
            parts.append(f"{c!r}{mono}")
        return " + ".join(parts)


def _coerce_poly(o) -> TauPoly:
    if isinstance(o, TauPoly):
        return o
    if isinstance(o, (int, Fraction, GaussQ, complex)):
        return TauPoly.const(o)
    raise TypeError(f"cannot coerce {type(o).__name__} to TauPoly")


ZERO = TauPoly()
ONE = TauPoly.const(1)
