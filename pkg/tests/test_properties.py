import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from ncricci.algebra import (
    AlgebraContext,
    TorusElement,
    adjoint,
    delta,
    exp_sa,
    hs_inner,
    mul,
    trace_phi,
)
from ncricci.modular import apply_one_var, eigen_nabla
from ncricci.scalar_functions import eval_H, eval_S, g_mod
from ncricci.spectral import fit_a2
from ncricci.symbols import format_body, parse_body

FAST = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])

finite = st.floats(-2.0, 2.0, allow_nan=False)
thetas = st.floats(0.0, 1.0, allow_nan=False)
taus = st.tuples(st.floats(-1.0, 1.0), st.floats(0.3, 2.0)).map(lambda p: complex(*p))


@st.composite
def elements(draw, radius=2, ctx=None):
    if ctx is None:
        ctx = AlgebraContext(draw(thetas), draw(taus))
    coeffs = draw(st.lists(st.tuples(finite, finite), min_size=(2 * radius + 1) ** 2,
                           max_size=(2 * radius + 1) ** 2))
    d = {}
    it = iter(coeffs)
    for m in range(-radius, radius + 1):
        for n in range(-radius, radius + 1):
            re, im = next(it)
            d[(m, n)] = complex(re, im)
    return TorusElement.from_dict(ctx, d)


@st.composite
def triples(draw):
    ctx = AlgebraContext(draw(thetas), draw(taus))
    return tuple(draw(elements(radius=1, ctx=ctx)) for _ in range(3))


@FAST
@given(triples(), st.sampled_from([1, 2]))
def test_leibniz(abc, j):
    a, b, _ = abc
    assert delta(j, mul(a, b)).allclose(mul(delta(j, a), b) + mul(a, delta(j, b)), atol=1e-10)


@FAST
@given(triples())
def test_trace_is_tracial(abc):
    a, b, _ = abc
    assert abs(trace_phi(mul(a, b)) - trace_phi(mul(b, a))) < 1e-10


@FAST
@given(triples(), st.sampled_from([1, 2]))
def test_integration_by_parts(abc, j):
    a, b, _ = abc
    assert abs(trace_phi(delta(j, a))) == 0
    assert abs(trace_phi(mul(delta(j, a), b)) + trace_phi(mul(a, delta(j, b)))) < 1e-10


@FAST
@given(triples())
def test_involution(abc):
    a, b, _ = abc
    assert adjoint(mul(a, b)).allclose(mul(adjoint(b), adjoint(a)), atol=1e-10)
    assert adjoint(adjoint(a)).allclose(a, atol=0)
    assert hs_inner(a, a).real >= 0


@FAST
@given(triples())
def test_associative(abc):
    a, b, c = abc
    assert mul(mul(a, b), c).allclose(mul(a, mul(b, c)), atol=1e-9)


@settings(max_examples=10, deadline=None)
@given(elements(radius=1), st.sampled_from([1, 2]), st.floats(0.0, 0.8))
def test_derivative_of_exponential(a, j, size):
    # the eigen-box truncation error grows with the l1 norm of h, so the norm is bounded
    h = a + a.adjoint()
    h = h * (size / h.norm1()) if h.norm1() > 0 else h
    spec = eigen_nabla(h, radius=10)
    lhs = delta(j, exp_sa(h))
    rhs = mul(exp_sa(h), apply_one_var(g_mod, spec, delta(j, h) * 0.5))
    assert lhs.allclose(rhs, atol=1e-9)


@FAST
@given(st.floats(-6, 6), st.floats(-6, 6))
def test_curvature_function_symmetries(s, t):
    assert abs(float(eval_S(s, t)) - float(eval_S(t, s))) < 1e-9 * max(1.0, abs(float(eval_S(s, t))))
    assert abs(float(eval_H(s, -s))) < 1e-12


@FAST
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.floats(0.005, 0.05))
def test_fit_recovers_constant(a0, a2, a4, t0):
    ts = t0 * np.geomspace(1, 4, 10)
    fit = fit_a2(ts, a0 / ts + a2 + a4 * ts)
    assert abs(fit.a2_estimate - a2) < 1e-8 * max(1.0, abs(a0) / t0)


bodies = st.lists(
    st.one_of(st.sampled_from(["k", "k^2", "k^3", "b0", "b0^2"]),
              st.sampled_from(["d1(k^2)", "d2(k)", "d1(d2(k^2))", "d2(d2(k))"])),
    min_size=1, max_size=6,
)


@FAST
@given(bodies)
def test_body_format_is_canonical(tokens):
    body = parse_body(" ".join(tokens))
    assert parse_body(format_body(body)) == body
