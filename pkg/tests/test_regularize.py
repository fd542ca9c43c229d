"""Regularization: shifted-probe search, eigen-axis lifting, width oracles."""

from functools import partial

import numpy as np
import pytest

import crbkit as ck
from crbkit.fisher import fim_axis_lambda, fim_function


def uniform1_reg_closed(n_groups, eta, n, a):
    """Closed-form regularized information of the uniform model.

    The shifted-probe objective K x^(2(n-1)) / (1 + |x - a| sqrt(K) x^(n-1))^2
    is maximized at x_opt = ((n-1)/sqrt(K))^(1/n) when a <= x_opt, and at a
    itself otherwise.
    """
    k = 4.0 * n ** 2 * n_groups * eta ** n
    x_opt = ((n - 1) / np.sqrt(k)) ** (1.0 / n)
    if a >= x_opt:
        return k * a ** (2 * (n - 1))
    num = k * x_opt ** (2 * (n - 1))
    den = (1.0 + (x_opt - a) * np.sqrt(k) * x_opt ** (n - 1)) ** 2
    return num / den


class TestRegularize1D:
    def setup_method(self):
        self.model = ck.Uniform1Model(N=200, eta=0.7, n=2)
        self.fi = lambda a: ck.fim_poisson(self.model, [a]).matrix[0, 0]

    def test_dark_point_value(self):
        val = ck.regularize_1d(self.fi, 0.0, (0.0, 1.0))
        assert val == pytest.approx(np.sqrt(1568.0) / 4.0, rel=1e-9)
        assert val == pytest.approx(uniform1_reg_closed(200, 0.7, 2, 0.0),
                                    rel=1e-9)
        assert 1.0 / np.sqrt(val) == pytest.approx(0.3178, abs=2e-4)

    def test_bright_point_untouched(self):
        val = ck.regularize_1d(self.fi, 0.8, (0.0, 1.0))
        assert val == self.fi(0.8)
        assert val == pytest.approx(1003.52, rel=1e-10)

    def test_constant_information(self):
        assert ck.regularize_1d(lambda a: 3.75, 0.3, (0.0, 1.0)) == 3.75

    def test_closed_form_sweep(self):
        for a in (0.0, 0.05, 0.1, 0.1589, 0.3, 0.6, 1.0):
            val = ck.regularize_1d(self.fi, a, (0.0, 1.0))
            assert val == pytest.approx(uniform1_reg_closed(200, 0.7, 2, a),
                                        rel=1e-7)

    def test_monotone_utility_over_trace(self):
        # Delta_reg <= |theta' - theta| + F(theta')**-0.5 for every probe.
        val, trace = ck.regularize_1d(self.fi, 0.0, (0.0, 1.0),
                                      return_trace=True)
        delta_reg = 1.0 / np.sqrt(val)
        assert trace
        for theta_p, f_p in trace:
            bound = abs(theta_p) + (1.0 / np.sqrt(f_p) if f_p > 0 else np.inf)
            assert delta_reg <= bound + 1e-12

    def test_empty_domain(self):
        with pytest.raises(ck.EmptyDomain):
            ck.regularize_1d(self.fi, -0.5, (0.0, 1.0))


class TestRegularizeFim:
    def test_regular_point_is_fixed_point(self):
        m = ck.TwoPixelModel(N=1000, eta=0.7, h0=1.0, h1=0.8)
        th = np.array([0.5, 0.5])
        f = ck.fim_poisson(m, th)
        f_reg = ck.regularize_fim(fim_function(m), th, m.box())
        assert np.abs(f_reg.matrix - f.matrix).max() <= \
            1e-6 * np.abs(f.matrix).max()
        # grid oracle: the axis objective is maximized at zero shift
        vals, vecs = np.linalg.eigh(f.matrix)
        for i in range(2):
            lam = fim_axis_lambda(m, th, vecs[:, i],
                                  np.linspace(-0.45, 0.45, 181))
            obj = lam / (1.0 + np.abs(np.linspace(-0.45, 0.45, 181))
                         * np.sqrt(lam)) ** 2
            assert obj.max() <= vals[i] * (1.0 + 1e-9)

    def test_dark_slit_array_becomes_invertible(self):
        pattern = np.array([1, 1, 0, 0, 1, 1, 0, 0, 1, 1], dtype=float)
        m = ck.SlitArrayModel(N=1e4, M=10, d=0.5, d_R=1.0, reference=pattern)
        f = ck.fim_poisson(m, pattern)
        vals = np.linalg.eigvalsh(f.matrix)
        assert vals.min() < 1e-10 * vals.max()
        f_reg = ck.regularize_fim(fim_function(m), pattern, m.box(),
                                  axis_fi=partial(fim_axis_lambda, m))
        vr = np.linalg.eigvalsh(f_reg.matrix)
        assert vr.min() > 1e-12 * vr.max()
        assert np.isfinite(ck.total_variance(f_reg))

    def test_axis_fast_path_matches_generic(self):
        pattern = np.array([1, 0, 1, 0.5], dtype=float)
        m = ck.SlitArrayModel(N=500, M=4, d=0.5, d_R=1.0, reference=pattern)
        generic = ck.regularize_fim(fim_function(m), pattern, m.box())
        fast = ck.regularize_fim(fim_function(m), pattern, m.box(),
                                 axis_fi=partial(fim_axis_lambda, m))
        assert np.allclose(generic.matrix, fast.matrix, rtol=1e-9, atol=1e-12)

    def test_one_dimensional_consistency(self):
        m = ck.Uniform1Model(N=200, eta=0.7, n=2)
        fi = lambda a: ck.fim_poisson(m, [a]).matrix[0, 0]
        for a in (0.0, 0.1, 0.5):
            scalar = ck.regularize_1d(fi, a, (0.0, 1.0))
            matrix = ck.regularize_fim(
                lambda th: ck.fim_poisson(m, th), np.array([a]),
                ck.unit_box(1))
            assert matrix.matrix[0, 0] == scalar

    def test_output_commutes_with_input(self):
        pattern = np.array([1, 1, 0, 0, 1, 1, 0, 0, 1, 1], dtype=float)
        m = ck.SlitArrayModel(N=1e4, M=10, d=0.5, d_R=1.0, reference=pattern)
        f = ck.fim_poisson(m, pattern).matrix
        f_reg = ck.regularize_fim(fim_function(m), pattern, m.box(),
                                  axis_fi=partial(fim_axis_lambda, m)).matrix
        comm = f @ f_reg - f_reg @ f
        assert np.abs(comm).max() < 1e-10 * np.abs(f).max() * \
            np.abs(f_reg).max() / max(np.abs(f).max(), 1.0)

    def test_domain_must_contain_theta(self):
        m = ck.TwoPixelModel(N=1000, eta=0.7, h0=1.0, h1=0.8)
        with pytest.raises(ck.EmptyDomain):
            ck.regularize_fim(fim_function(m), np.array([1.5, 0.5]), m.box())


class TestWidthOracles:
    def test_y1_halfwidth(self):
        for x0_over_sigma in (0.5, 1.0, 2.0):
            p = ck.Y1Profile(x0=x0_over_sigma, sigma=1.0)
            closed = ck.profile_width_closed(p)
            assert closed == x0_over_sigma + 1.0
            assert ck.profile_width_numeric(p) == pytest.approx(closed,
                                                                rel=1e-6)

    def test_y2_halfwidth_k4(self):
        p = ck.Y2Profile(k=4.0, sigma=1.0)
        closed = ck.profile_width_closed(p)
        assert closed == pytest.approx(1.2779, abs=1e-3)
        assert ck.profile_width_numeric(p) == pytest.approx(closed, rel=1e-6)

    def test_numeric_matches_closed_sweep(self):
        for x0 in (0.5, 1.0, 2.0):
            for sigma in (0.5, 1.0, 2.0):
                p = ck.Y1Profile(x0=x0 * sigma, sigma=sigma)
                assert ck.profile_width_numeric(p) == pytest.approx(
                    ck.profile_width_closed(p), rel=1e-6)
        for k in (3.0, 4.0, 6.0, 8.0):
            for sigma in (0.5, 1.0, 2.0):
                p = ck.Y2Profile(k=k, sigma=sigma)
                assert ck.profile_width_numeric(p) == pytest.approx(
                    ck.profile_width_closed(p), rel=1e-6)

    def test_y2_near_parabolic_limit(self):
        # Closed form at k = 2.01 evaluates to 1.02420...; the ratio tends
        # to 1 as k -> 2 (2.4% away at this probe).
        p = ck.Y2Profile(k=2.01, sigma=1.0)
        assert ck.profile_width_closed(p) == pytest.approx(1.024204, abs=1e-5)
        assert ck.profile_width_closed(p) == pytest.approx(1.0, abs=0.025)

    def test_invalid_profiles(self):
        with pytest.raises(ck.ConfigError):
            ck.Y1Profile(x0=-1.0, sigma=1.0)
        with pytest.raises(ck.ConfigError):
            ck.Y2Profile(k=2.0, sigma=1.0)
