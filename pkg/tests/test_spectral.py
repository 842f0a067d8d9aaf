import csv
from math import pi

import numpy as np
import pytest

from conftest import cosine_dilaton
from ncricci.algebra import AlgebraContext, MatrixElement, TorusElement
from ncricci.spectral import (
    TruncationGrid,
    build_operator,
    default_t_window,
    edge_eigenvalue,
    fit_a2,
    heat_trace,
    kernel_trace,
    relative_discrepancy,
    ricci_spectral_data,
    spectral_ricci,
    write_samples_csv,
    zeta_ricci,
)


@pytest.fixture
def skew_flat():
    return TorusElement.zero(AlgebraContext(0.37, 0.3 + 1.1j))


class TestOperators:
    def test_flat_laplacian_spectrum(self, skew_flat):
        grid = TruncationGrid(5, guard=0)
        P = build_operator("delta0", skew_flat, grid)
        m, n = grid.modes()
        tau = skew_flat.ctx.tau
        assert np.allclose(np.sort(P.eigenvalues), np.sort(np.abs(m + tau * n) ** 2), atol=1e-12)

    def test_flat_heat_trace_matches_area(self, skew_flat):
        P = build_operator("delta0", skew_flat, TruncationGrid(20, guard=0))
        t = 0.1
        area = pi / (t * skew_flat.ctx.tau2)
        assert abs(heat_trace(TorusElement.one(skew_flat.ctx), P, t)[0] - area) < 1e-8

    @pytest.mark.parametrize("target,dim", [("delta_h0", 1), ("delta_h1", 2), ("delta_phi01", 1)])
    def test_kernel_dimensions(self, nc_ctx, target, dim):
        h = cosine_dilaton(nc_ctx, 0.3, 0.3)
        P = build_operator(target, h, TruncationGrid(4, guard=6))
        assert P.kernel_dimension == dim
        assert P.asymmetry < 1e-9

    def test_eigenvalues_non_negative(self, nc_ctx):
        h = cosine_dilaton(nc_ctx, 0.3, 0.3)
        for target in ("delta_h0", "delta_h1", "delta_phi01"):
            assert build_operator(target, h, TruncationGrid(4, guard=6)).eigenvalues.min() > -1e-9

    def test_unknown_target_and_bad_dilaton(self, nc_ctx):
        with pytest.raises(ValueError):
            build_operator("nope", TorusElement.zero(nc_ctx), TruncationGrid(2))
        with pytest.raises(ValueError):
            build_operator("delta0", TorusElement.monomial(nc_ctx, 1, 0), TruncationGrid(2))

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            TruncationGrid(0)


class TestHeatTrace:
    def test_identity_smearing_sums_exponentials(self, nc_ctx):
        h = cosine_dilaton(nc_ctx, 0.2)
        P = build_operator("delta_h0", h, TruncationGrid(4, guard=6))
        t = np.array([0.05, 0.3])
        ref = np.exp(-np.outer(t, P.eigenvalues)).sum(axis=1)
        assert np.allclose(heat_trace(TorusElement.one(nc_ctx), P, t), ref, rtol=1e-12)

    def test_decreasing_in_t(self, nc_ctx):
        P = build_operator("delta_h1", cosine_dilaton(nc_ctx, 0.2, 0.1), TruncationGrid(4, guard=6))
        vals = heat_trace(MatrixElement.identity(nc_ctx), P, np.linspace(0.01, 1.0, 20)).real
        assert np.all(np.diff(vals) < 0)

    def test_rejects_non_positive_time(self, nc_ctx):
        P = build_operator("delta0", TorusElement.zero(nc_ctx), TruncationGrid(2))
        with pytest.raises(ValueError):
            heat_trace(TorusElement.one(nc_ctx), P, 0.0)

    def test_kernel_trace_of_identity_is_dimension(self, nc_ctx):
        P = build_operator("delta_h1", cosine_dilaton(nc_ctx, 0.3), TruncationGrid(4, guard=6))
        assert abs(kernel_trace(MatrixElement.identity(nc_ctx), P) - 2) < 1e-10


class TestFit:
    def test_recovers_constant_term(self):
        ts = np.geomspace(0.01, 0.04, 12)
        fit = fit_a2(ts, 3 / ts + 5 + 2 * ts)
        assert abs(fit.a2_estimate - 5) < 1e-9
        assert fit.stderr < 1e-9 and fit.residual < 1e-9

    def test_higher_terms(self):
        ts = np.geomspace(0.02, 0.08, 16)
        vals = 1 / ts - 0.25 + 3 * ts - 7 * ts**2 + 11 * ts**3
        assert abs(fit_a2(ts, vals, terms=5).a2_estimate + 0.25) < 1e-8

    def test_needs_enough_span(self):
        with pytest.raises(ValueError):
            fit_a2([0.1, 0.2, 0.3, 0.35], [1, 2, 3, 4])
        with pytest.raises(ValueError):
            fit_a2([0.1, 0.4], [1, 2])

    def test_window(self):
        ts = default_t_window(100.0)
        assert ts.size == 16 and abs(ts[0] - 0.08) < 1e-15 and abs(ts[-1] / ts[0] - 4) < 1e-12
        assert edge_eigenvalue(TorusElement.zero(AlgebraContext(0.1, 1j)), 3) == 9.0

    def test_csv(self, tmp_path):
        p = tmp_path / "t.csv"
        write_samples_csv(p, [0.1, 0.2], [1 + 2j, 3.0])
        rows = list(csv.reader(open(p)))
        assert rows[0] == ["t", "trace", "trace_imag"]
        assert [float(x) for x in rows[1]] == [0.1, 1.0, 2.0]


class TestRicciOracle:
    def test_flat_is_zero(self, nc_ctx):
        data = ricci_spectral_data(TorusElement.zero(nc_ctx), TruncationGrid(6, guard=2))
        F = MatrixElement.identity(nc_ctx)
        assert abs(spectral_ricci(F, data).a2_estimate) < 1e-9
        assert abs(zeta_ricci(F, data)) < 1e-9

    def test_relative_discrepancy(self):
        assert relative_discrepancy(1.1, 1.0, 1.0) == pytest.approx(0.1)
        assert relative_discrepancy(0.01, 0.0, 1.0) == pytest.approx(0.1)
        assert relative_discrepancy(0.0, 0.0, 0.0) == 0.0
        assert relative_discrepancy(1e-3, 0.0, 0.0) == float("inf")
