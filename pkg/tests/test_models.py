"""Signal models: closed-form values, derivative checks, kernel oracles."""

import json

import numpy as np
import pytest

import crbkit as ck
from crbkit.models import KMAX_FACTOR, _sinc


def fd_jacobian(model, theta, h_rel=1e-4, h_min=1e-6):
    theta = np.asarray(theta, dtype=float)
    out = np.empty((ck.eval_signal(model, theta).size, theta.size))
    for mu in range(theta.size):
        h = max(h_min, h_rel * abs(theta[mu]))
        e = np.zeros(theta.size)
        e[mu] = h
        out[:, mu] = (ck.eval_signal(model, theta + e)
                      - ck.eval_signal(model, theta - e)) / (2 * h)
    return out


class TestUniform1:
    def test_zero_transmission_zero_signal(self):
        m = ck.Uniform1Model(N=200, eta=0.7, n=2)
        assert ck.eval_signal(m, [0.0])[0] == 0.0

    def test_signal_value(self):
        m = ck.Uniform1Model(N=200, eta=0.7, n=2)
        assert ck.eval_signal(m, [0.5])[0] == pytest.approx(6.125, rel=1e-12)

    def test_jacobian_value(self):
        m = ck.Uniform1Model(N=200, eta=0.7, n=2)
        assert ck.eval_jacobian(m, [0.5])[0, 0] == pytest.approx(49.0, rel=1e-12)

    def test_jacobian_vanishes_at_zero(self):
        m = ck.Uniform1Model(N=200, eta=0.7, n=2)
        assert ck.eval_jacobian(m, [0.0])[0, 0] == 0.0

    def test_loglog_slope_is_2n(self):
        for n in (1, 2, 3):
            m = ck.Uniform1Model(N=100, eta=0.5, n=n)
            a1, a2 = 0.3, 0.6
            s1 = ck.eval_signal(m, [a1])[0]
            s2 = ck.eval_signal(m, [a2])[0]
            slope = np.log(s2 / s1) / np.log(a2 / a1)
            assert slope == pytest.approx(2 * n, abs=1e-9)


class TestTwoPixel:
    def test_signal_value(self):
        m = ck.TwoPixelModel(N=1000, eta=0.7, h0=1.0, h1=0.8)
        s = ck.eval_signal(m, [0.5, 0.5])
        assert s == pytest.approx([99.225, 99.225], rel=1e-12)

    def test_jacobian_value(self):
        m = ck.TwoPixelModel(N=1000, eta=0.7, h0=1.0, h1=0.8)
        j = ck.eval_jacobian(m, [0.5, 0.5])
        assert j[0, 0] == pytest.approx(441.0, rel=1e-12)

    def test_jacobian_matches_finite_differences(self):
        m = ck.TwoPixelModel(N=1000, eta=0.7, h0=1.0, h1=0.8)
        rng = np.random.default_rng(1)
        for _ in range(20):
            th = rng.uniform(0.05, 0.95, 2)
            assert np.allclose(ck.eval_jacobian(m, th), fd_jacobian(m, th),
                               rtol=1e-5)


class TestValidation:
    def test_dimension_mismatch(self):
        m = ck.TwoPixelModel(N=1000, eta=0.7, h0=1.0, h1=0.8)
        with pytest.raises(ck.DimensionMismatch):
            ck.eval_signal(m, [0.5])

    def test_non_finite(self):
        m = ck.Uniform1Model(N=200, eta=0.7, n=2)
        with pytest.raises(ck.NonFiniteParameter):
            ck.eval_signal(m, [np.nan])

    def test_config_errors(self):
        with pytest.raises(ck.ConfigError):
            ck.Uniform1Model(N=-5, eta=0.7, n=2)
        with pytest.raises(ck.ConfigError):
            ck.Uniform1Model(N=5, eta=1.5, n=2)
        with pytest.raises(ck.ConfigError):
            ck.SlitArrayModel(N=10, M=4, d=-1.0)
        with pytest.raises(ck.ConfigError):
            ck.BiphotonG2Model(N=10, M=4, d=0.5, sigma_c=0.0)

    def test_signals_nonnegative_on_random_points(self):
        models = [
            ck.Uniform1Model(N=200, eta=0.7, n=2),
            ck.TwoPixelModel(N=1000, eta=0.7, h0=1.0, h1=0.8),
            ck.SlitArrayModel(N=100, M=4, d=0.5),
        ]
        rng = np.random.default_rng(2)
        for m in models:
            for _ in range(30):
                th = rng.uniform(0.0, 1.0, m.dim)
                assert np.all(ck.eval_signal(m, th) >= 0.0)


def trapezoid_sinc2_integral(lo, hi, x_j, d_r, panels=1_000_000):
    """Independent brute-force quadrature of the slit kernel coefficient."""
    k = KMAX_FACTOR / d_r
    s = np.linspace(lo, hi, panels + 1)
    y = _sinc(k * (s - x_j)) ** 2
    return 4.0 * k * k * np.trapezoid(y, s)


class TestSlitKernel:
    def test_point_pixel_limit(self):
        d_r = 1.0
        spec = ck.SlitArrayModel(N=10, M=3, d=0.001 * d_r, d_R=d_r)
        # Pixel 2 covers [0.001, 0.002]; detector j=3 sits at 0.0015 (its
        # center), so the integrand is sinc^2(~0) ~= 1 across the pixel.
        k = KMAX_FACTOR / d_r
        val = ck.slit_kernel_coeff(2, 3, spec)
        assert val == pytest.approx(4 * k * k * spec.d, rel=1e-5)

    def test_symmetric_offsets_equal(self):
        spec = ck.SlitArrayModel(N=10, M=4, d=0.5, d_R=1.0)
        # Detector j=2 sits at x = d, the shared edge of pixels 1 and 2,
        # which are mirror images through the sinc^2 peak.
        left = ck.slit_kernel_coeff(1, 2, spec)
        right = ck.slit_kernel_coeff(2, 2, spec)
        assert left == pytest.approx(right, rel=1e-10)

    def test_against_trapezoid_oracle(self):
        spec = ck.SlitArrayModel(N=10, M=4, d=0.5, d_R=1.0)
        val = ck.slit_kernel_coeff(2, 2, spec)   # pixel adjacent to x_j = d/2
        oracle = trapezoid_sinc2_integral(0.5, 1.0, 0.5, 1.0)
        assert val == pytest.approx(oracle, rel=1e-8)

    def test_shift_covariance(self):
        # Translating a detector by a full pixel equals shifting the pixel
        # index: D_m(x_j) == D_{m+1}(x_j + d), so pixel sums over
        # correspondingly shifted windows agree to quadrature tolerance.
        spec = ck.SlitArrayModel(N=10, M=8, d=0.5, d_R=1.0)
        j = 8                                     # x_j = 2.0, mid-array
        for m in range(1, 8):
            a = ck.slit_kernel_coeff(m, j, spec)
            b = ck.slit_kernel_coeff(m + 1, j + 2, spec)
            assert a == pytest.approx(b, rel=1e-9)
        sum_a = sum(ck.slit_kernel_coeff(m, j, spec) for m in range(1, 8))
        sum_b = sum(ck.slit_kernel_coeff(m, j + 2, spec) for m in range(2, 9))
        assert sum_a * spec.d == pytest.approx(sum_b * spec.d, rel=1e-9)


class TestBiphotonCoeffs:
    def test_ideal_limit_is_diagonal(self):
        spec = ck.BiphotonG2Model(N=10, M=4, d=0.5, d_R=1.0, sigma_c=0.5e-3)
        d4 = ck.biphoton_g2_coeffs(spec)
        diag = np.einsum("ijmm->ijm", d4)
        off = d4 - np.einsum("ijm,ml->ijml", diag, np.eye(4))
        assert np.abs(off).max() < 1e-3 * np.abs(diag).max()

    def test_ideal_limit_matches_slit_coefficients(self):
        # The leading finite-correlation correction is O(sigma_c / d), so
        # ratio constancy at 1e-6 needs sigma_c well below 1e-6 d.
        bi = ck.BiphotonG2Model(N=10, M=4, d=0.5, d_R=1.0, sigma_c=5e-8)
        slit = ck.SlitArrayModel(N=10, M=4, d=0.5, d_R=1.0)
        d4 = ck.biphoton_g2_coeffs(bi)
        xs = bi.detectors
        j_idx = np.round(xs / bi.step).astype(int)
        ratios = []
        for jj in range(0, xs.size, 5):
            for m in range(1, 5):
                slit_val = ck.slit_kernel_coeff(m, int(j_idx[jj]), slit)
                if slit_val > 1e-6:
                    ratios.append(d4[jj, jj, m - 1, m - 1] / slit_val)
        ratios = np.asarray(ratios)
        assert np.abs(ratios / ratios[0] - 1.0).max() < 1e-6

    def test_swap_symmetry_exact(self):
        spec = ck.BiphotonG2Model(N=10, M=3, d=0.4, d_R=1.0, sigma_c=0.3)
        d4 = ck.biphoton_g2_coeffs(spec)
        assert np.array_equal(d4, d4.transpose(1, 0, 3, 2))

    def test_jacobian_matches_finite_differences(self):
        m = ck.BiphotonG2Model(N=100, M=3, d=0.5, d_R=1.0, sigma_c=0.2)
        rng = np.random.default_rng(3)
        for _ in range(5):
            th = rng.uniform(0.2, 0.9, 3)
            assert np.allclose(ck.eval_jacobian(m, th), fd_jacobian(m, th),
                               rtol=1e-5, atol=1e-10)


class TestSlitArrayModel:
    def test_total_reference_signal_is_n(self):
        pattern = np.array([1.0, 0.5, 1.0, 0.0, 1.0])
        m = ck.SlitArrayModel(N=5000, M=5, d=0.6, d_R=1.0, reference=pattern)
        assert ck.eval_signal(m, pattern).sum() == pytest.approx(5000.0)

    def test_jacobian_matches_finite_differences(self):
        m = ck.SlitArrayModel(N=1e4, M=6, d=0.5, d_R=1.0)
        rng = np.random.default_rng(4)
        for _ in range(10):
            th = rng.uniform(0.1, 0.95, 6)
            assert np.allclose(ck.eval_jacobian(m, th), fd_jacobian(m, th),
                               rtol=1e-5, atol=1e-9)

    def test_detector_grid_covers_padded_support(self):
        m = ck.SlitArrayModel(N=10, M=10, d=0.5, d_R=1.0)
        xs = m.detectors
        assert xs.min() <= -2.0 + 1e-9 and xs.max() >= 5.0 + 2.0 - 1e-9
        assert np.allclose(np.diff(xs), 0.25)


class TestModelJson:
    def test_round_trip(self):
        docs = [
            {"variant": "Uniform1", "params": {"N": 200, "eta": 0.7, "n": 2}},
            {"variant": "TwoPixel",
             "params": {"N": 1000, "eta": 0.7, "h0": 1.0, "h1": 0.8}},
            {"variant": "SlitArray",
             "params": {"N": 100.0, "M": 4, "d": 0.5, "d_R": 1.0,
                        "reference": [1, 0, 1, 0], "pad_factor": 2.0,
                        "step_factor": 0.5}},
        ]
        for doc in docs:
            model = ck.model_from_json(doc)
            back = ck.model_to_json(model)
            again = ck.model_from_json(json.dumps(back))
            assert ck.model_to_json(again) == back

    def test_unknown_variant_rejected(self):
        with pytest.raises(ck.ConfigError):
            ck.model_from_json({"variant": "Nope", "params": {}})

    def test_unknown_parameter_rejected(self):
        with pytest.raises(ck.ConfigError):
            ck.model_from_json({"variant": "Uniform1",
                                "params": {"N": 1, "eta": 0.5, "n": 1,
                                           "bogus": 3}})
