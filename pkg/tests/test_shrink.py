"""Constraint shaping: violation probabilities, shrink steps, correction."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import erf

import crbkit as ck
from crbkit.numerics import erf_inverse, sym_sqrt_pair


def trunc_var_quadrature(x_cut):
    """Variance of a standard normal conditioned on t <= x_cut (oracle)."""
    pdf = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
    mass = quad(pdf, -40, x_cut, epsabs=1e-13)[0]
    mean = quad(lambda t: t * pdf(t), -40, x_cut, epsabs=1e-13)[0] / mass
    return quad(lambda t: (t - mean) ** 2 * pdf(t), -40, x_cut,
                epsabs=1e-13)[0] / mass


def marginal_stats(g, direction, x_cut):
    """(violation probability, in-domain variance) along a unit direction."""
    t, t_inv = sym_sqrt_pair(g.kernel)
    # whitened coordinates: x = d . theta', theta' = T (theta - center)
    p = 0.5 * (1.0 - erf(x_cut / math.sqrt(2.0)))
    return p, trunc_var_quadrature(x_cut)


class TestViolationProbability:
    def test_boundary_through_center(self):
        g = ck.GaussianApprox([0.3, 0.4], np.diag([2.0, 5.0]))
        c = ck.LinearConstraint([1.0, 0.0], 0.3)
        assert ck.violation_probability(g, c) == pytest.approx(0.5, abs=1e-14)

    def test_standardized_tail(self):
        g = ck.GaussianApprox([0.0], [[1.0]])
        c = ck.LinearConstraint([1.0], 1.6449)
        assert ck.violation_probability(g, c) == pytest.approx(0.05, abs=1e-4)

    def test_far_boundary_tends_to_zero(self):
        g = ck.GaussianApprox([0.0], [[1.0]])
        c = ck.LinearConstraint([1.0], 40.0)
        assert ck.violation_probability(g, c) == pytest.approx(0.0, abs=1e-300)

    def test_singular_kernel_raises(self):
        g = ck.GaussianApprox([0.0, 0.0], np.diag([1.0, 0.0]))
        with pytest.raises(ck.SingularKernel):
            ck.violation_probability(g, ck.LinearConstraint([1.0, 0.0], 1.0))


class TestTruncatedVariance:
    def test_untruncated_limit(self):
        assert ck.truncated_variance_V(0.0, 40.0) == pytest.approx(1.0,
                                                                   abs=1e-12)

    def test_half_normal(self):
        assert ck.truncated_variance_V(0.5, 0.0) == pytest.approx(
            1.0 - 2.0 / math.pi, abs=1e-10)

    def test_quadrature_consistency(self):
        for p in (0.5, 0.3, 0.1, 0.02, 0.005):
            x = math.sqrt(2.0) * erf_inverse(1.0 - 2.0 * p)
            assert ck.truncated_variance_V(p, x) == pytest.approx(
                trunc_var_quadrature(x), abs=1e-8)

    def test_invalid_mass(self):
        with pytest.raises(ck.DomainError):
            ck.truncated_variance_V(1.0, 0.0)


class TestShrinkStep:
    def test_documented_first_step(self):
        g = ck.GaussianApprox([0.0], [[1.0]])
        c = ck.LinearConstraint([1.0], 0.0)
        g2, rec = ck.shrink_step(g, [c], 0.1)
        assert rec.p_before == pytest.approx(0.5, abs=1e-14)
        assert rec.p_target == pytest.approx(0.4, abs=1e-14)
        x_new = math.sqrt(2.0) * erf_inverse(1.0 - 2.0 * 0.4)
        assert x_new == pytest.approx(0.25335, abs=1e-5)
        assert ck.violation_probability(g2, c) == pytest.approx(0.4, abs=1e-8)

    def test_step_exactness_violation_and_variance(self):
        # Both defining requirements, recomputed on the post-step Gaussian
        # with an independent quadrature oracle: the selected constraint's
        # violation probability hits the target, and the conditional
        # variance of the physical functional a.theta given feasibility is
        # unchanged.
        rng = np.random.default_rng(0)
        a = rng.normal(size=(3, 3))
        kernel = a @ a.T + 0.5 * np.eye(3)
        center = np.array([0.6, 0.9, 0.2])
        cons = [ck.LinearConstraint([1.0, 0.0, 0.0], 0.7),
                ck.LinearConstraint([0.0, 1.0, 0.0], 1.0),
                ck.LinearConstraint([-1.0, 0.0, 1.0], 0.0)]
        g = ck.GaussianApprox(center, kernel)
        g2, rec = ck.shrink_step(g, cons, 0.1)
        c = cons[rec.constraint]
        assert ck.violation_probability(g2, c) == pytest.approx(rec.p_target,
                                                                abs=1e-8)

        def conditional_variance(gauss):
            sigma2 = float(c.a @ np.linalg.inv(gauss.kernel) @ c.a)
            z = (c.b - float(c.a @ gauss.center)) / math.sqrt(sigma2)
            return sigma2 * trunc_var_quadrature(z)

        assert conditional_variance(g2) == pytest.approx(
            conditional_variance(g), rel=1e-8)

    def test_kernel_update_is_rank_one_psd(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(4, 4))
        kernel = a @ a.T + np.eye(4)
        g = ck.GaussianApprox([0.9, 0.9, 0.5, 0.1], kernel)
        cons = [ck.LinearConstraint(e, 1.0) for e in np.eye(4)]
        g2, rec = ck.shrink_step(g, cons, 0.1)
        diff = g2.kernel - g.kernel
        vals = np.linalg.eigvalsh(diff)
        assert vals.min() >= -1e-10 * max(vals.max(), 1e-300)
        assert (np.abs(vals) > 1e-12 * np.abs(vals).max()).sum() == 1

    def test_orthogonal_direction_untouched(self):
        g = ck.GaussianApprox([0.0, 0.0], np.eye(2))
        c = ck.LinearConstraint([1.0, 0.0], 0.0)
        g2, _ = ck.shrink_step(g, [c], 0.1)
        assert g2.kernel[1, 1] == pytest.approx(1.0, abs=1e-14)
        assert g2.kernel[0, 1] == pytest.approx(0.0, abs=1e-14)
        assert g2.center[1] == 0.0

    def test_no_constraints(self):
        g = ck.GaussianApprox([0.0], [[1.0]])
        with pytest.raises(ck.NoConstraint):
            ck.shrink_step(g, [], 0.1)

    def test_whitening_round_trip(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(5, 5))
        kernel = a @ a.T + 0.1 * np.eye(5)
        t, t_inv = sym_sqrt_pair(kernel)
        assert np.allclose(t @ t_inv, np.eye(5), atol=1e-10)
        assert np.allclose(t @ t, kernel, rtol=1e-10, atol=1e-10)


class TestCorrectFim:
    def test_inactive_constraints_noop(self):
        m = ck.TwoPixelModel(N=1000, eta=0.7, h0=1.0, h1=0.8)
        th = np.array([0.5, 0.5])
        f = ck.fim_poisson(m, th)
        f_c, center, report = ck.correct_fim(f, th,
                                             ck.box_constraints(m.box()))
        assert report.iterations == 0
        assert np.array_equal(f_c.matrix, f.matrix)
        assert np.array_equal(center, th)

    def test_final_probabilities_below_threshold(self):
        pattern = np.array([1.0, 1.0, 0.0, 0.0, 1.0])
        m = ck.SlitArrayModel(N=2000, M=5, d=0.5, d_R=1.0, reference=pattern)
        from crbkit.scan import regularize_and_correct
        _, _, f_c, center, report = regularize_and_correct(m, pattern)
        assert np.all(report.final_violation_probs <= 0.01 + 1e-12)
        assert all(s.xi >= 0.0 for s in report.steps)

    def test_total_variance_never_grows(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            a = rng.normal(size=(3, 3))
            kernel = a @ a.T + 0.2 * np.eye(3)
            center = rng.uniform(0.6, 1.0, 3)
            cons = ck.box_constraints(ck.unit_box(3))
            f_c, _, _ = ck.correct_fim(kernel, center, cons)
            tv_in = np.trace(np.linalg.inv(kernel))
            tv_out = np.trace(np.linalg.inv(f_c.matrix))
            assert tv_out <= tv_in + 1e-10

    def test_closed_form_matches_loop_at_upper_bound(self):
        f = 1568.0
        closed = ck.correct_fim_1d_closed(f, 1.0)
        loop, _, _ = ck.correct_fim(np.array([[f]]), [1.0],
                                    ck.box_constraints(ck.unit_box(1)))
        assert closed == pytest.approx(loop.matrix[0, 0], rel=1e-6)
        assert closed > f
        assert 1.0 / math.sqrt(closed) < 1.0 / math.sqrt(f)

    def test_closed_form_matches_loop_on_regularized_dark_point(self):
        m = ck.Uniform1Model(N=200, eta=0.7, n=2)
        fi = lambda a: ck.fim_poisson(m, [a]).matrix[0, 0]
        f_reg = ck.regularize_1d(fi, 0.0, (0.0, 1.0))
        closed = ck.correct_fim_1d_closed(f_reg, 0.0)
        loop, _, _ = ck.correct_fim(np.array([[f_reg]]), [0.0],
                                    ck.box_constraints(ck.unit_box(1)))
        assert closed == pytest.approx(loop.matrix[0, 0], rel=1e-6)

    def test_closed_form_noop_midrange(self):
        # Both box constraints stay below threshold across the documented
        # activation window (0.242 <= A <= 0.937 for this model).
        assert ck.correct_fim_1d_closed(392.0, 0.5) == 392.0

    def test_two_active_constraints_raises(self):
        with pytest.raises(ck.TwoActiveConstraints):
            ck.correct_fim_1d_closed(1.0, 0.5)

    def test_correction_against_truncated_gaussian_oracle(self):
        # 2-parameter illustration: strongly correlated Gaussian near the
        # corner of two upper bounds; the corrected kernel's implied total
        # variance must track the directly truncated distribution.
        cov = np.array([[0.16, 0.06], [0.06, 0.0625]])
        kernel = np.linalg.inv(cov)
        center = np.array([0.85, 0.95])
        cons = [ck.LinearConstraint([1.0, 0.0], 1.0),
                ck.LinearConstraint([0.0, 1.0], 1.0)]
        f_c, c_new, _ = ck.correct_fim(kernel, center, cons)
        tv_in = np.trace(cov)
        tv_out = np.trace(np.linalg.inv(f_c.matrix))
        assert tv_out < tv_in
        rng = np.random.default_rng(8)
        draws = rng.multivariate_normal(center, cov, size=400_000)
        kept = draws[np.all(draws <= 1.0, axis=1)]
        tv_mc = np.trace(np.cov(kept.T))
        assert tv_out == pytest.approx(tv_mc, rel=0.25)

    def test_iteration_budget(self):
        kernel = np.eye(2)
        center = np.array([5.0, 5.0])   # deeply infeasible
        cons = ck.box_constraints(ck.unit_box(2))
        with pytest.raises(ck.IterationBudgetExceeded):
            ck.correct_fim(kernel, center, cons, max_iterations=3)


class TestReportSerialization:
    def test_shrink_report_json(self):
        kernel = np.array([[9.9]])
        f_c, center, report = ck.correct_fim(kernel, [0.0],
                                             ck.box_constraints(ck.unit_box(1)))
        doc = report.to_json()
        assert doc["iterations"] == len(doc["steps"]) == report.iterations
        assert all(s["xi"] >= 0 for s in doc["steps"])
        assert max(doc["final_violation_probs"]) <= 0.01
