from fractions import Fraction

import pytest

from conftest import cosine_dilaton
from ncricci.algebra import AlgebraContext, TorusElement
from ncricci.exact import TauPoly
from ncricci.symbol_eval import SymbolEvaluator
from ncricci.symbols import (
    TARGETS,
    Term,
    Word,
    b0,
    b2_doubleprime,
    compose,
    delta,
    delta_multi,
    expand_terms,
    format_body,
    golden_b2_terms,
    laplacian_symbol,
    left_mult,
    load_golden,
    multiset_diff,
    parametrix,
    parametrix_of,
    parse_body,
    quadratic_form,
    xi,
    xi_derivative,
    xi_derivative_multi,
)


@pytest.fixture(scope="module")
def b2_terms():
    return expand_terms(b2_doubleprime())


class TestGoldenExpansion:
    def test_matches_golden_multiset(self, b2_terms):
        only_engine, only_golden = multiset_diff(b2_terms, golden_b2_terms())
        assert only_engine == [] and only_golden == []
        assert len(b2_terms) == 76

    def test_perturbed_golden_reports_one_term(self, b2_terms):
        golden = golden_b2_terms()
        t = golden[5]
        golden[5] = Term(t.body, t.xi, t.tau, t.coef_re + 1, t.coef_im)
        only_engine, only_golden = multiset_diff(b2_terms, golden)
        assert len(only_engine) == 1 and len(only_golden) == 1
        assert only_golden[0].coef_re == t.coef_re + 1

    def test_quartic_xi_term_present(self, b2_terms):
        target = Term("b0 d1(k^2) k^2 b0^2 d1(k^2) b0", (3, 1), (0, 0), Fraction(-2))
        assert target in b2_terms

    def test_all_terms_have_order_minus_four(self):
        assert b2_doubleprime().orders() == {-4}

    @pytest.mark.parametrize("name", ["b2_sigma_expansion.json", "b2_sigma_angular.json"])
    def test_golden_bodies_round_trip(self, name):
        for d in load_golden(name):
            assert format_body(parse_body(d["body"])) == d["body"]

    def test_term_json_round_trip(self, b2_terms):
        for t in b2_terms[:10]:
            assert Term.from_json(t.to_json()) == t


class TestCalculus:
    def test_xi_derivative_of_resolvent(self):
        d1 = xi_derivative(b0(), 1)
        assert {format_body(w.body) for w in d1} == {"k^2 b0^2"}
        assert d1.coefficient(Word(p=1, body=((1, 0, 2),))) == TauPoly.const(-2)

    def test_mixed_xi_partials_commute(self):
        e = b0() * quadratic_form() * b0()
        assert xi_derivative_multi(e, (1, 1)) == xi_derivative(xi_derivative(e, 2), 1)

    def test_mixed_derivations_agree_numerically(self, nc_ctx):
        ev = SymbolEvaluator(cosine_dilaton(nc_ctx, 0.3, 0.2), radius=8)
        a = delta_multi(b0(), (1, 2))
        b = delta_multi(b0(), (2, 1))
        va, vb = ev.evaluate(a, (0.7, -1.3)), ev.evaluate(b, (0.7, -1.3))
        assert (va - vb).max_abs() < 1e-12

    def test_leibniz_on_symbols(self):
        e1, e2 = left_mult("K"), b0()
        assert delta(e1 * e2, 1) == delta(e1, 1) * e2 + e1 * delta(e2, 1)

    def test_compose_with_multiplication(self):
        # delta_1 composed with k^2 equals k^2 xi1 plus delta_1(k^2)
        out = compose(xi(1), left_mult("K"))
        assert out == left_mult("K") * xi(1) + delta(left_mult("K"), 1)

    def test_compose_associative_on_first_order(self):
        x, K, y = xi(1), left_mult("K"), xi(2)
        assert compose(compose(x, K), y) == compose(x, compose(K, y))

    @pytest.mark.parametrize("target", TARGETS)
    def test_parametrix_orders(self, target):
        p = parametrix_of(target)
        assert p.b0.orders() == {-2}
        assert p.b1.orders() == {-3}
        assert p.b2.orders() == {-4}

    def test_first_correction_contains_a1_sandwich(self):
        s = laplacian_symbol("delta_phi01")
        p = parametrix(s.a2, s.a1, s.a0)
        sandwich = -(b0() * s.a1 * b0())
        for w, c in sandwich.items():
            assert p.b1.coefficient(w) == c

    def test_principal_part_is_checked(self):
        s = laplacian_symbol("delta_phi01")
        with pytest.raises(ValueError):
            parametrix(s.a2.scale(2), s.a1, s.a0)

    def test_unknown_target(self):
        with pytest.raises(ValueError):
            laplacian_symbol("nope")

    @pytest.mark.parametrize("target", TARGETS)
    def test_principal_symbol_has_no_sigma_part(self, target):
        assert laplacian_symbol(target).a2.matrix_part(1).is_zero()


class TestFlatReduction:
    @pytest.mark.parametrize("target", TARGETS)
    def test_corrections_vanish_without_dilaton(self, target):
        ctx = AlgebraContext(0.37, 0.2 + 1.1j)
        ev = SymbolEvaluator(TorusElement.zero(ctx), radius=2)
        p = parametrix_of(target)
        xi_pt = (1.3, -0.4)
        q = ev.quadratic(xi_pt)
        v0 = ev.evaluate(p.b0, xi_pt)
        assert abs(v0.identity.coefficient(0, 0) - 1.0 / (q + 1.0)) < 1e-15
        assert ev.evaluate(p.b1, xi_pt).max_abs() < 1e-14
        if target != "delta_h1":
            assert ev.evaluate(p.b2, xi_pt).max_abs() < 1e-14

    def test_parse_rejects_garbage(self):
        with pytest.raises(ValueError):
            parse_body("b0 x b0")
