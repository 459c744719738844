import math

import numpy as np
import pytest

from commonpool import errors, model

from conftest import MU, R


class TestValidation:
    def test_constant_model_passes(self, baseline):
        report = model.validate_assumptions(baseline, model.symmetric_game(1, R, 0.1))
        assert report.passed
        assert report.violations == ()
        assert report.linear_growth_C > 0

    def test_affine_model_passes(self):
        coeffs = model.affine_drift(2.0, 0.01, 1.0, r=0.05)
        report = model.validate_assumptions(coeffs, model.symmetric_game(2, 0.05, 0.5))
        assert report.passed

    def test_drift_derivative_at_r_fails(self):
        # mu(x) = r*x has mu' = r, violating the strict inequality
        coeffs = model.user_defined(lambda x: R * x + 1.0, lambda x: R,
                                    lambda x: 1.0)
        with pytest.raises(errors.DriftDerivativeTooLarge):
            model.validate_assumptions(coeffs, model.symmetric_game(1, R, 0.1))

    def test_nonpositive_sigma_fails(self):
        coeffs = model.user_defined(lambda x: 1.0, lambda x: 0.0,
                                    lambda x: 1.0 - 0.02 * x)
        with pytest.raises(errors.NonPositiveSigma):
            model.validate_assumptions(coeffs, model.symmetric_game(1, 0.1, 0.1),
                                       {"x_max": 100.0, "points": 200})

    def test_nonpositive_drift_at_zero_fails(self):
        coeffs = model.user_defined(lambda x: -1.0 + 0.01 * x, lambda x: 0.01,
                                    lambda x: 1.0)
        with pytest.raises(errors.NonPositiveDriftAtZero):
            model.validate_assumptions(coeffs, model.symmetric_game(1, 0.1, 0.1))

    def test_report_collects_violations_without_raising(self):
        coeffs = model.user_defined(lambda x: -1.0, lambda x: 0.0, lambda x: 1.0)
        report = model.validate_assumptions(coeffs, model.symmetric_game(1, 0.1, 0.1),
                                            raise_on_failure=False)
        assert not report.passed
        assert any(v[0] == "A4" for v in report.violations)

    def test_constructors_reject_bad_inputs(self):
        with pytest.raises(errors.NonPositiveSigma):
            model.constant(4.0, 0.0)
        with pytest.raises(errors.DriftDerivativeTooLarge):
            model.affine_drift(1.0, 0.1, 1.0, r=0.05)


class TestExtinctionBound:
    def test_constant_drift_quadratic_root(self, baseline):
        # independent oracle: smallest c solves r*c - 1/c = mu, the positive
        # root of r*c^2 - mu*c - 1 = 0
        expect = (MU + math.sqrt(MU * MU + 4.0 * R)) / (2.0 * R)
        c = model.extinction_bound(baseline, R)
        assert c == pytest.approx(expect, rel=1e-9)
        assert c == pytest.approx(80.2492, abs=5e-5)

    def test_negative_drift_returns_unit_bound(self):
        coeffs = model.user_defined(lambda x: -1.0, lambda x: 0.0, lambda x: 1.0)
        assert model.extinction_bound(coeffs, 1.0) == 1.0

    def test_defining_inequality_on_refined_grid(self, baseline, baseline_c):
        xs = np.linspace(baseline_c, 4 * baseline_c, 10_000)
        assert np.all(MU <= R * xs - 1.0 / baseline_c + 1e-9)

    def test_no_bound_below_ceiling(self):
        # drift approaches r*x so fast that r*x - mu(x) stays below any 1/c
        eps = 1e-12
        coeffs = model.user_defined(
            lambda x: 0.05 * x - eps * x / (1.0 + x) + 0.0,
            lambda x: 0.05 - eps / (1.0 + x) ** 2,
            lambda x: 1.0,
        )
        with pytest.raises(errors.NoExtinctionBound):
            model.extinction_bound(coeffs, 0.05, ceiling=1e6)


class TestGameParams:
    def test_symmetric_accessors(self):
        g = model.symmetric_game(30, R, 0.1)
        assert g.n == 30 and g.K == 0.1 and g.symmetric

    @pytest.mark.parametrize("seed", range(5))
    def test_rate_order_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        rates = rng.uniform(0.01, 2.0, size=rng.integers(2, 9))
        g = model.asymmetric_game(R, rates)
        assert np.all(np.diff(g.rates) >= 0)
        np.testing.assert_array_equal(g.rates_in_input_order(), rates)

    def test_rejects_bad_params(self):
        with pytest.raises(errors.InvalidConfig):
            model.symmetric_game(0, R, 0.1)
        with pytest.raises(errors.InvalidConfig):
            model.symmetric_game(2, -1.0, 0.1)
        with pytest.raises(errors.InvalidConfig):
            model.asymmetric_game(R, [0.1, 0.0])

    def test_K_undefined_for_asymmetric(self):
        g = model.asymmetric_game(R, [0.1, 0.2])
        with pytest.raises(errors.InvalidConfig):
            g.K


class TestShiftedDrift:
    def test_duplicate_positions_merge(self, baseline):
        d = model.ShiftedDrift.canonical(baseline, [(0.5, 0.1), (0.5, 0.2), (0.2, 0.3)])
        positions = [p for p, _ in d.jumps]
        assert positions == [0.2, 0.5]
        assert d.jumps[1][1] == pytest.approx(0.3)

    def test_constant_shift_is_jump_at_zero(self, baseline):
        d = model.ShiftedDrift.constant_shift(baseline, 3.6)
        assert d.jumps == ((0.0, 3.6),)
        assert d.mu_shifted(0.0) == MU - 3.6
        assert d.mu_shifted(10.0) == MU - 3.6

    def test_zero_sizes_dropped(self, baseline):
        d = model.ShiftedDrift.canonical(baseline, [(0.5, 0.0)])
        assert d.jumps == ()


class TestJsonInterface:
    def test_constant_model(self):
        m = model.model_from_json({"kind": "constant", "mu": 4.0, "sigma2": 2.0})
        assert m.kind == "constant"
        assert m.mu(3.0) == 4.0
        assert m.sigma2(0.0) == pytest.approx(2.0)

    def test_affine_model(self):
        m = model.model_from_json({"kind": "affine", "mu0": 2.0, "mu1": 0.01,
                                   "sigma2": 1.0, "r": 0.05})
        assert m.mu(2.0) == pytest.approx(2.02)

    def test_game_documents(self):
        g = model.game_from_json({"n": 30, "r": 0.05, "K": 0.1})
        assert g.symmetric and g.n == 30
        g2 = model.game_from_json({"r": 0.05, "rates": [0.2, 0.1]})
        assert not g2.symmetric and list(g2.rates) == [0.1, 0.2]

    @pytest.mark.parametrize("doc", [
        {"kind": "constant", "mu": 4.0, "sigma2": 2.0, "bogus": 1},
        {"kind": "mystery"},
        {},
    ])
    def test_unknown_model_keys_rejected(self, doc):
        with pytest.raises(errors.InvalidConfig):
            model.model_from_json(doc)

    def test_game_n_mismatch_rejected(self):
        with pytest.raises(errors.InvalidConfig):
            model.game_from_json({"n": 3, "r": 0.05, "rates": [0.1, 0.2]})
