import numpy as np
import pytest

from conftest import cosine_dilaton, random_element, random_self_adjoint
from ncricci.algebra import AlgebraContext, TorusElement, delta, exp_sa, mul
from ncricci.modular import (
    apply_one_var,
    apply_two_var,
    apply_two_var_exact,
    eigen_nabla,
    exp_nabla,
    modular_delta,
    nabla,
    separate,
)
from ncricci.scalar_functions import eval_S, f_mod, g_mod


@pytest.fixture
def spectrum(reference_dilaton):
    return eigen_nabla(reference_dilaton, radius=12)


class TestSpectrum:
    def test_reconstruction(self, spectrum):
        assert spectrum.reconstruction_error < 1e-10

    def test_eigenvalues_come_in_opposite_pairs(self, spectrum):
        w = np.sort(spectrum.eigenvalues)
        assert np.allclose(w, -w[::-1], atol=1e-9)

    def test_zero_dilaton_has_single_eigenvalue(self, nc_ctx):
        spec = eigen_nabla(TorusElement.zero(nc_ctx), radius=4)
        assert np.abs(spec.eigenvalues).max() < 1e-14
        assert len(spec.clusters()) == 1

    def test_commutative_dilaton_is_central(self):
        ctx = AlgebraContext(0.0, 1j)
        spec = eigen_nabla(cosine_dilaton(ctx, 0.5), radius=4)
        assert np.abs(spec.eigenvalues).max() < 1e-14

    def test_eigenvector_equation(self, spectrum):
        for s, v in spectrum.eigenpairs()[::37]:
            lhs = nabla(spectrum.dilaton, v)
            # the box truncation only touches the outer shell
            inner = (lhs - v * s).to_box(spectrum.radius - 1)
            assert np.abs(inner).max() < 1e-9

    def test_rejects_non_self_adjoint(self, nc_ctx):
        with pytest.raises(ValueError):
            eigen_nabla(TorusElement.monomial(nc_ctx, 1, 0), radius=4)

    def test_report(self, spectrum):
        rep = spectrum.to_report()
        assert rep["dimension"] == 25**2 and rep["radius"] == 12


class TestOneVariable:
    def test_exp_matches_conjugation(self, spectrum, nc_ctx, rng):
        a = random_element(nc_ctx, rng, radius=1)
        assert exp_nabla(spectrum, a).allclose(modular_delta(spectrum.dilaton, a), atol=1e-10)

    def test_identity_function(self, spectrum, nc_ctx, rng):
        a = random_element(nc_ctx, rng, radius=2)
        assert apply_one_var(lambda s: np.ones_like(s), spectrum, a).allclose(a, atol=1e-12)

    def test_linear_function_is_nabla(self, spectrum, nc_ctx, rng):
        a = random_element(nc_ctx, rng, radius=1)
        assert apply_one_var(lambda s: s, spectrum, a).allclose(nabla(spectrum.dilaton, a), atol=1e-11)

    @pytest.mark.parametrize("j", [1, 2])
    def test_derivative_of_k_squared(self, spectrum, j):
        h = spectrum.dilaton
        lhs = delta(j, exp_sa(h))
        rhs = mul(exp_sa(h), apply_one_var(g_mod, spectrum, delta(j, h) * 0.5))
        assert lhs.allclose(rhs, atol=1e-10)

    @pytest.mark.parametrize("j", [1, 2])
    def test_derivative_of_k(self, spectrum, j):
        h = spectrum.dilaton
        lhs = delta(j, exp_sa(h * 0.5))
        rhs = mul(exp_sa(h * 0.5), apply_one_var(f_mod, spectrum, delta(j, h) * 0.5))
        assert lhs.allclose(rhs, atol=1e-10)

    def test_non_finite_function_rejected(self, spectrum, nc_ctx):
        with pytest.raises(ValueError):
            apply_one_var(lambda s: np.full_like(s, np.nan), spectrum, TorusElement.one(nc_ctx))


class TestTwoVariable:
    def test_separated_matches_double_sum(self, nc_ctx, rng):
        h = random_self_adjoint(nc_ctx, rng, radius=1, scale=0.3)
        spec = eigen_nabla(h, radius=6)
        a = random_element(nc_ctx, rng, radius=1)
        b = random_element(nc_ctx, rng, radius=1)
        fast = apply_two_var(eval_S, spec, a, b)
        slow = apply_two_var_exact(eval_S, spec, a, b)
        assert fast.allclose(slow, atol=1e-10)

    def test_product_function_factorizes(self, spectrum, nc_ctx, rng):
        a = random_element(nc_ctx, rng, radius=1)
        b = random_element(nc_ctx, rng, radius=1)
        out = apply_two_var(lambda s, t: np.exp(s) * np.cos(t), spectrum, a, b)
        ref = mul(exp_nabla(spectrum, a), apply_one_var(np.cos, spectrum, b))
        assert out.allclose(ref, atol=1e-10)

    def test_constant_is_plain_product(self, spectrum, nc_ctx, rng):
        a = random_element(nc_ctx, rng, radius=1)
        b = random_element(nc_ctx, rng, radius=1)
        out = apply_two_var(lambda s, t: 2.0 + 0 * s * t, spectrum, a, b)
        assert out.allclose(mul(a, b) * 2.0, atol=1e-11)

    def test_bilinear(self, spectrum, nc_ctx, rng):
        a, a2, b = (random_element(nc_ctx, rng, radius=1) for _ in range(3))
        sep = separate(eval_S, spectrum)
        lhs = apply_two_var(eval_S, spectrum, a * 2.0 + a2, b, separated=sep)
        rhs = apply_two_var(eval_S, spectrum, a, b, separated=sep) * 2.0 + apply_two_var(
            eval_S, spectrum, a2, b, separated=sep)
        assert lhs.allclose(rhs, atol=1e-11)
        assert sep.sample_error < 1e-10

    def test_flat_spectrum_uses_value_at_zero(self, nc_ctx, rng):
        spec = eigen_nabla(TorusElement.zero(nc_ctx), radius=3)
        a = random_element(nc_ctx, rng, radius=1)
        b = random_element(nc_ctx, rng, radius=1)
        out = apply_two_var(eval_S, spec, a, b)
        assert out.allclose(mul(a, b) * (2.0 / 3.0), atol=1e-12)
