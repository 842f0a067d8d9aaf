"""Formal noncommutative symbol calculus for Laplace-type operators.

A word is ``coef * xi1^p xi2^q * lambda^lam * body * mat`` where

* ``body`` alternates *runs* and *tags*: ``(run, tag, run, ..., run)``;
* a run ``(nK, nk, nb)`` is the commuting product ``(k^2)^nK k^nk b0^nb``
  written in that order (all three commute, being functions of ``h``), with
  ``nk`` reduced to 0 or 1 so that ``k k`` is always stored as ``k^2``;
* a tag ``(base, dirs)`` is a derivative of ``k^2`` (base ``"K"``) or ``k``
  (base ``"k"``), ``dirs`` listed outermost first, so ``("K", (1, 2))`` is
  ``delta_1(delta_2(k^2))``;
* ``mat`` is 0 for the identity matrix and 1 for
  ``sigma = [[i t2, t2^2], [-1, i t2]]``, which satisfies ``sigma^2 = 2 i t2 sigma``.

``b0`` is the atom ``(a2(xi) - lambda)^{-1}`` evaluated at ``lambda = -1``,
with ``a2 = k^2 Q(xi)`` and ``Q(xi) = xi1^2 + 2 t1 xi1 xi2 + |tau|^2 xi2^2``.
Coefficients are exact :class:`TauPoly` values.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from math import factorial
from typing import Iterable, Iterator, Mapping

from .exact import ONE, ZERO, GaussQ, TauPoly

Run = tuple  # (nK, nk, nb)
Tag = tuple  # (base, dirs)
EMPTY_RUN: Run = (0, 0, 0)
EMPTY_BODY = (EMPTY_RUN,)
MAX_DERIVATIVE_ORDER = 4

_TWO_I_TAU2 = TauPoly.monomial(0, 1, GaussQ(0, 2))
_Q = (((2, 0), TauPoly.const(1)), ((1, 1), TauPoly.monomial(1, 0, 2)), ((0, 2), TauPoly.abs_tau_sq()))
_DQ = {
    1: (((1, 0), TauPoly.const(2)), ((0, 1), TauPoly.monomial(1, 0, 2))),
    2: (((1, 0), TauPoly.monomial(1, 0, 2)), ((0, 1), TauPoly.abs_tau_sq() * 2)),
}


class GeneratorError(ValueError):
    """A derivative left the supported generator set."""


def _norm_run(nK: int, nk: int, nb: int) -> Run:
    return (nK + nk // 2, nk % 2, nb)


def _concat(b1: tuple, b2: tuple) -> tuple:
    r, s = b1[-1], b2[0]
    return b1[:-1] + (_norm_run(r[0] + s[0], r[1] + s[1], r[2] + s[2]),) + b2[1:]


@dataclass(frozen=True, order=True)
class Word:
    p: int = 0
    q: int = 0
    lam: int = 0
    mat: int = 0
    body: tuple = EMPTY_BODY

    @property
    def n_b0(self) -> int:
        return sum(self.body[i][2] for i in range(0, len(self.body), 2))

    @property
    def order(self) -> int:
        """Homogeneity degree: xi counts 1, lambda counts 2, each b0 counts -2."""
        return self.p + self.q + 2 * self.lam - 2 * self.n_b0

    @property
    def tags(self) -> tuple:
        return self.body[1::2]

    @property
    def runs(self) -> tuple:
        return self.body[0::2]


def _word_mul(w1: Word, w2: Word) -> tuple[Word, TauPoly]:
    mat = w1.mat | w2.mat
    factor = _TWO_I_TAU2 if (w1.mat and w2.mat) else ONE
    return Word(w1.p + w2.p, w1.q + w2.q, w1.lam + w2.lam, mat, _concat(w1.body, w2.body)), factor


class SymbolExpr:
    """Formal sum of words with exact coefficients (zero coefficients are dropped)."""

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Word, TauPoly] | None = None):
        self._terms = {w: c for w, c in (terms or {}).items() if not c.is_zero()}

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[Word, TauPoly]]) -> "SymbolExpr":
        acc: dict[Word, TauPoly] = {}
        for w, c in pairs:
            acc[w] = acc[w] + c if w in acc else c
        return cls(acc)

    @classmethod
    def word(cls, w: Word, c=1) -> "SymbolExpr":
        return cls({w: c if isinstance(c, TauPoly) else TauPoly.const(c)})

    @classmethod
    def one(cls) -> "SymbolExpr":
        return cls.word(Word())

    def items(self) -> list[tuple[Word, TauPoly]]:
        return sorted(self._terms.items(), key=lambda kv: kv[0])

    def __iter__(self) -> Iterator[Word]:
        return iter(sorted(self._terms))

    def __len__(self):
        return len(self._terms)

    def coefficient(self, w: Word) -> TauPoly:
        return self._terms.get(w, ZERO)

    def is_zero(self) -> bool:
        return not self._terms

    def __add__(self, o: "SymbolExpr") -> "SymbolExpr":
        out = dict(self._terms)
        for w, c in o._terms.items():
            out[w] = out[w] + c if w in out else c
        return SymbolExpr(out)

    def __neg__(self):
        return SymbolExpr({w: -c for w, c in self._terms.items()})

    def __sub__(self, o):
        return self + (-o)

    def scale(self, c) -> "SymbolExpr":
        c = c if isinstance(c, TauPoly) else TauPoly.const(c)
        return SymbolExpr({w: v * c for w, v in self._terms.items()})

    def __mul__(self, o: "SymbolExpr") -> "SymbolExpr":
        acc: dict[Word, TauPoly] = {}
        for w1, c1 in self._terms.items():
            for w2, c2 in o._terms.items():
                w, f = _word_mul(w1, w2)
                v = c1 * c2 * f
                acc[w] = acc[w] + v if w in acc else v
        return SymbolExpr(acc)

    def __eq__(self, o):
        return isinstance(o, SymbolExpr) and self._terms == o._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def filter(self, pred) -> "SymbolExpr":
        return SymbolExpr({w: c for w, c in self._terms.items() if pred(w)})

    def xi_degree_part(self, deg: int) -> "SymbolExpr":
        return self.filter(lambda w: w.p + w.q == deg)

    def matrix_part(self, mat: int) -> "SymbolExpr":
        """Coefficient of I (mat=0) or sigma (mat=1), returned with mat set to 0."""
        return SymbolExpr({_with_mat(w, 0): c for w, c in self._terms.items() if w.mat == mat})

    def with_matrix(self, mat: int) -> "SymbolExpr":
        """Tensor a scalar-matrix expression with I (0) or sigma (1)."""
        if any(w.mat for w in self._terms):
            raise ValueError("expression already carries a matrix factor")
        return SymbolExpr({_with_mat(w, mat): c for w, c in self._terms.items()})

    def orders(self) -> set[int]:
        return {w.order for w in self._terms}

    def __repr__(self):
        return f"SymbolExpr({len(self)} terms)"


def _with_mat(w: Word, mat: int) -> Word:
    return Word(w.p, w.q, w.lam, mat, w.body)


# ---------------------------------------------------------------------------
# primitive symbols


def xi(j: int) -> SymbolExpr:
    return SymbolExpr.word(Word(p=1) if j == 1 else Word(q=1))


def xi_poly(pairs) -> SymbolExpr:
    return SymbolExpr.from_pairs((Word(p=pq[0], q=pq[1]), c) for pq, c in pairs)


def quadratic_form() -> SymbolExpr:
    """|xi|^2_tau = xi1^2 + 2 Re(tau) xi1 xi2 + |tau|^2 xi2^2."""
    return xi_poly(_Q)


def left_mult(base: str) -> SymbolExpr:
    """Symbol of left multiplication by k^2 (``"K"``) or k (``"k"``)."""
    run = (1, 0, 0) if base == "K" else (0, 1, 0)
    return SymbolExpr.word(Word(body=(run,)))


def tag_symbol(base: str, dirs: tuple[int, ...]) -> SymbolExpr:
    return SymbolExpr.word(Word(body=(EMPTY_RUN, (base, tuple(dirs)), EMPTY_RUN)))


def b0() -> SymbolExpr:
    return SymbolExpr.word(Word(body=((0, 0, 1),)))


def lam() -> SymbolExpr:
    return SymbolExpr.word(Word(lam=1))


# ---------------------------------------------------------------------------
# derivations


def _delta_word(w: Word, i: int) -> list[tuple[Word, TauPoly]]:
    out: list[tuple[Word, TauPoly]] = []
    body = w.body
    for pos, atom in enumerate(body):
        left, right = body[:pos], body[pos + 1 :]
        if pos % 2 == 1:
            base, dirs = atom
            if len(dirs) + 1 > MAX_DERIVATIVE_ORDER:
                raise GeneratorError(f"derivative order above {MAX_DERIVATIVE_ORDER} requested")
            out.append((Word(w.p, w.q, w.lam, w.mat, left + ((base, (i,) + dirs),) + right), ONE))
            continue
        nK, nk, nb = atom
        for a in range(nK):
            new = left + ((a, 0, 0), ("K", (i,)), (nK - a - 1, nk, nb)) + right
            out.append((Word(w.p, w.q, w.lam, w.mat, new), ONE))
        for a in range(nk):
            new = left + ((nK, a, 0), ("k", (i,)), (0, nk - a - 1, nb)) + right
            out.append((Word(w.p, w.q, w.lam, w.mat, new), ONE))
        for a in range(nb):
            # delta(b0) = -b0 delta(a2) b0 = -Q(xi) b0 delta(k^2) b0
            new = left + ((nK, nk, a + 1), ("K", (i,)), (0, 0, nb - a)) + right
            for (dp, dq), c in _Q:
                out.append((Word(w.p + dp, w.q + dq, w.lam, w.mat, new), -c))
    return out


def delta(e: SymbolExpr, i: int) -> SymbolExpr:
    """Derivation delta_i extended to symbols (acts on algebra coefficients only)."""
    if i not in (1, 2):
        raise ValueError("direction index must be 1 or 2")
    return SymbolExpr.from_pairs((nw, c * f) for w, c in e.items() for nw, f in _delta_word(w, i))


def delta_multi(e: SymbolExpr, dirs: Iterable[int]) -> SymbolExpr:
    """``dirs=(1, 2)`` gives delta_1(delta_2(e))."""
    for i in reversed(tuple(dirs)):
        e = delta(e, i)
    return e


def _xi_derivative_word(w: Word, i: int) -> list[tuple[Word, TauPoly]]:
    out: list[tuple[Word, TauPoly]] = []
    if i == 1 and w.p:
        out.append((Word(w.p - 1, w.q, w.lam, w.mat, w.body), TauPoly.const(w.p)))
    if i == 2 and w.q:
        out.append((Word(w.p, w.q - 1, w.lam, w.mat, w.body), TauPoly.const(w.q)))
    for pos in range(0, len(w.body), 2):
        nK, nk, nb = w.body[pos]
        if not nb:
            continue
        # each b0 contributes -b0 k^2 dQ b0; inside a run the result is the same for every b0
        new = w.body[:pos] + (_norm_run(nK + 1, nk, nb + 1),) + w.body[pos + 1 :]
        for (dp, dq), c in _DQ[i]:
            out.append((Word(w.p + dp, w.q + dq, w.lam, w.mat, new), c * (-nb)))
    return out


def xi_derivative(e: SymbolExpr, i: int) -> SymbolExpr:
    if i not in (1, 2):
        raise ValueError("direction index must be 1 or 2")
    return SymbolExpr.from_pairs((nw, c * f) for w, c in e.items() for nw, f in _xi_derivative_word(w, i))


def xi_derivative_multi(e: SymbolExpr, alpha: tuple[int, int]) -> SymbolExpr:
    for _ in range(alpha[0]):
        e = xi_derivative(e, 1)
    for _ in range(alpha[1]):
        e = xi_derivative(e, 2)
    return e


def compose(rho1: SymbolExpr, rho2: SymbolExpr, max_order_drop: int = 2) -> SymbolExpr:
    """Symbol of the operator product, sum over |alpha| <= max_order_drop of
    (1/alpha!) d_xi^alpha(rho1) delta^alpha(rho2)."""
    out = SymbolExpr()
    for a1 in range(max_order_drop + 1):
        for a2 in range(max_order_drop + 1 - a1):
            left = xi_derivative_multi(rho1, (a1, a2))
            if left.is_zero():
                continue
            right = delta_multi(rho2, (1,) * a1 + (2,) * a2)
            if right.is_zero():
                continue
            term = left * right
            out = out + term.scale(TauPoly.const(Fraction(1, factorial(a1) * factorial(a2))))
    return out


# ---------------------------------------------------------------------------
# Laplacians


TARGETS = ("delta_h1", "delta_phi01", "k_delta0_k")


@dataclass(frozen=True)
class LaplacianSymbol:
    a2: SymbolExpr
    a1: SymbolExpr
    a0: SymbolExpr

    @property
    def full(self) -> SymbolExpr:
        return self.a2 + self.a1 + self.a0


def _split(full: SymbolExpr) -> LaplacianSymbol:
    return LaplacianSymbol(full.xi_degree_part(2), full.xi_degree_part(1), full.xi_degree_part(0))


def dolbeault_symbol() -> SymbolExpr:
    """(delta_1 + tau delta_2) k^2 (delta_1 + conj(tau) delta_2)."""
    d = xi(1) + xi(2).scale(TauPoly.tau())
    dbar = xi(1) + xi(2).scale(TauPoly.tau_bar())
    return compose(d, compose(left_mult("K"), dbar))


def antisymmetric_symbol() -> SymbolExpr:
    """delta_1 k^2 delta_2 - delta_2 k^2 delta_1."""
    K = left_mult("K")
    return compose(xi(1), compose(K, xi(2))) - compose(xi(2), compose(K, xi(1)))


def laplacian_symbol(target: str) -> LaplacianSymbol:
    """Homogeneous parts of the symbol of one of the three Laplacians.

    ``"delta_h1"`` is the one-form Laplacian (identity part plus the
    antisymmetric perturbation times sigma), ``"delta_phi01"`` the Dolbeault
    type Laplacian, ``"k_delta0_k"`` the conformally perturbed Laplacian on
    functions.
    """
    if target == "delta_phi01":
        return _split(dolbeault_symbol())
    if target == "delta_h1":
        return _split(dolbeault_symbol().with_matrix(0) + antisymmetric_symbol().with_matrix(1))
    if target == "k_delta0_k":
        k = left_mult("k")
        return _split(compose(k, compose(quadratic_form(), k)))
    raise ValueError(f"unknown target {target!r}; expected one of {TARGETS}")


# ---------------------------------------------------------------------------
# parametrix


@dataclass(frozen=True)
class Parametrix:
    b0: SymbolExpr
    b1: SymbolExpr
    b2: SymbolExpr


def _check_a2(a2: SymbolExpr):
    expected_scalar = quadratic_form() * left_mult("K")
    ok = a2 == expected_scalar or a2 == expected_scalar.with_matrix(0)
    if not ok:
        raise ValueError("a2 must be k^2 |xi|^2_tau times the identity")


def parametrix(a2: SymbolExpr, a1: SymbolExpr, a0: SymbolExpr) -> Parametrix:
    """First three parametrix terms at lambda = -1 by the standard left recursion."""
    _check_a2(a2)
    B = b0()
    d = {i: xi_derivative(B, i) for i in (1, 2)}
    da2 = {i: delta(a2, i) for i in (1, 2)}
    b1 = -(B * a1 * B + d[1] * da2[1] * B + d[2] * da2[2] * B)
    half = TauPoly.const(Fraction(1, 2))
    db1 = {i: xi_derivative(b1, i) for i in (1, 2)}
    da1 = {i: delta(a1, i) for i in (1, 2)}
    d12 = xi_derivative(d[1], 2)
    d11 = xi_derivative(d[1], 1)
    d22 = xi_derivative(d[2], 2)
    b2 = -(
        B * a0 * B
        + b1 * a1 * B
        + d[1] * da1[1] * B
        + d[2] * da1[2] * B
        + db1[1] * da2[1] * B
        + db1[2] * da2[2] * B
        + d12 * delta_multi(a2, (1, 2)) * B
        + (d11 * delta_multi(a2, (1, 1)) * B).scale(half)
        + (d22 * delta_multi(a2, (2, 2)) * B).scale(half)
    )
    return Parametrix(B, b1, b2)


def parametrix_of(target: str) -> Parametrix:
    s = laplacian_symbol(target)
    return parametrix(s.a2, s.a1, s.a0)


def b2_doubleprime() -> SymbolExpr:
    """Sigma coefficient of b2 for the one-form Laplacian, assembled from a1' and a1''.

    Uses sigma^2 = 2 i Im(tau) sigma for the quadratic a1'' term.
    """
    dol = laplacian_symbol("delta_phi01")
    a2, a1p = dol.a2, dol.a1
    a1pp = antisymmetric_symbol()
    B = b0()
    d = {i: xi_derivative(B, i) for i in (1, 2)}
    inner = B * a1pp * B
    d_inner = {i: xi_derivative(inner, i) for i in (1, 2)}
    return (
        B * a1p * B * a1pp * B
        + d[1] * delta(a2, 1) * B * a1pp * B
        + d[2] * delta(a2, 2) * B * a1pp * B
        + (B * a1pp * B * a1pp * B).scale(_TWO_I_TAU2)
        + B * a1pp * B * a1p * B
        - d[1] * delta(a1pp, 1) * B
        - d[2] * delta(a1pp, 2) * B
        + d_inner[1] * delta(a2, 1) * B
        + d_inner[2] * delta(a2, 2) * B
    )


# ---------------------------------------------------------------------------
# printing, parsing and term multisets


def _fmt_tag(tag: Tag) -> str:
    base, dirs = tag
    s = "k^2" if base == "K" else "k"
    for i in reversed(dirs):
        s = f"d{i}({s})"
    return s


def _fmt_run(run: Run) -> list[str]:
    nK, nk, nb = run
    out = []
    kp = 2 * nK + nk
    if kp:
        out.append("k" if kp == 1 else f"k^{kp}")
    if nb:
        out.append("b0" if nb == 1 else f"b0^{nb}")
    return out


def format_body(body: tuple) -> str:
    parts: list[str] = []
    for pos, atom in enumerate(body):
        parts.extend([_fmt_tag(atom)] if pos % 2 else _fmt_run(atom))
    return " ".join(parts) if parts else "1"


_TOKEN = re.compile(r"d[12]\(|k\^\d+|k|b0\^\d+|b0|\)|1")


def parse_body(text: str) -> tuple:
    """Inverse of :func:`format_body`."""
    tokens = _TOKEN.findall(text.replace(" ", ""))
    if "".join(tokens) != text.replace(" ", ""):
        raise ValueError(f"cannot parse body {text!r}")
    body: list = [EMPTY_RUN]
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.startswith("d"):
            dirs = []
            while tokens[i].startswith("d"):
                dirs.append(int(tokens[i][1]))
                i += 1
            base_tok = tokens[i]
            base = "K" if base_tok == "k^2" else ("k" if base_tok == "k" else None)
            if base is None:
                raise ValueError(f"bad tag base in {text!r}")
            i += 1
            for _ in dirs:
                if tokens[i] != ")":
                    raise ValueError(f"unbalanced tag in {text!r}")
                i += 1
            body.extend([(base, tuple(dirs)), EMPTY_RUN])
            continue
        nK, nk, nb = body[-1]
        if tok == "1":
            pass
        elif tok.startswith("k"):
            kp = int(tok[2:]) if "^" in tok else 1
            body[-1] = _norm_run(nK, nk + kp, nb)
        elif tok.startswith("b0"):
            body[-1] = (nK, nk, nb + (int(tok[3:]) if "^" in tok else 1))
        i += 1
    return tuple(body)


def format_word(w: Word, c: TauPoly | None = None) -> str:
    parts = []
    if c is not None:
        parts.append(f"[{c!r}]")
    if w.p:
        parts.append("xi1" if w.p == 1 else f"xi1^{w.p}")
    if w.q:
        parts.append("xi2" if w.q == 1 else f"xi2^{w.q}")
    if w.lam:
        parts.append("lam" if w.lam == 1 else f"lam^{w.lam}")
    parts.append(format_body(w.body))
    if w.mat:
        parts.append("(x) sigma")
    return " ".join(parts)


def format_expr(e: SymbolExpr) -> str:
    return "\n".join(format_word(w, c) for w, c in e.items())


@dataclass(frozen=True, order=True)
class Term:
    """One fully expanded monomial: rational coefficient, tau and xi exponents, body."""

    body: str
    xi: tuple[int, int]
    tau: tuple[int, int]
    coef_re: Fraction
    coef_im: Fraction = Fraction(0)

    def to_json(self) -> dict:
        d = {
            "coef": str(self.coef_re),
            "tau1": self.tau[0],
            "tau2": self.tau[1],
            "xi1": self.xi[0],
            "xi2": self.xi[1],
            "body": self.body,
        }
        if self.coef_im:
            d["coef_im"] = str(self.coef_im)
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "Term":
        return cls(
            body=format_body(parse_body(d["body"])),
            xi=(int(d.get("xi1", 0)), int(d.get("xi2", 0))),
            tau=(int(d.get("tau1", 0)), int(d.get("tau2", 0))),
            coef_re=Fraction(d["coef"]),
            coef_im=Fraction(d.get("coef_im", "0")),
        )


def expand_terms(e: SymbolExpr) -> list[Term]:
    """Split every word coefficient into tau monomials; sorted canonical list."""
    out = []
    for w, c in e.items():
        if w.lam or w.mat:
            raise ValueError("expand_terms expects lambda-free identity-matrix words")
        body = format_body(w.body)
        for (e1, e2), v in c.items():
            out.append(Term(body, (w.p, w.q), (e1, e2), v.re, v.im))
    return sorted(out)


def multiset_diff(engine: Iterable[Term], golden: Iterable[Term]) -> tuple[list[Term], list[Term]]:
    """Terms only in the engine output and terms only in the golden list (with multiplicity)."""
    from collections import Counter

    a, b = Counter(engine), Counter(golden)
    only_a = sorted((a - b).elements())
    only_b = sorted((b - a).elements())
    return only_a, only_b


def load_golden(name: str) -> list[dict]:
    with resources.files("ncricci.golden").joinpath(name).open("r", encoding="utf-8") as fh:
        return json.load(fh)


def golden_b2_terms() -> list[Term]:
    return sorted(Term.from_json(d) for d in load_golden("b2_sigma_expansion.json"))
