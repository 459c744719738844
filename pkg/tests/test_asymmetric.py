import math

import numpy as np
import pytest

from commonpool import asymmetric as asym
from commonpool import closed_form as cf
from commonpool import errors, model, symmetric as sym

from conftest import MU, R, SIGMA2, fd_first, fd_second

XMAX = 321.0


@pytest.fixture(scope="module")
def eq_12(baseline):
    return asym.solve_asymmetric(baseline, model.asymmetric_game(R, [0.1, 0.2]))


class TestAgentFundamentals:
    def test_single_agent_reduces_to_plain_solutions(self, baseline):
        from commonpool import fundamentals as fu
        params = model.symmetric_game(1, R, 0.1)
        psi_i, phi_i = asym.agent_fundamentals(baseline, params, 0,
                                               np.array([]), XMAX)
        psi = fu.solve_psi(model.ShiftedDrift.constant_shift(baseline, 0.0), R, XMAX)
        phi = fu.solve_phi(model.ShiftedDrift.constant_shift(baseline, 0.1), R,
                           XMAX, verify_truncation=False)
        for x in (0.3, 1.0, 2.5):
            assert psi_i.eval(x)[0] == pytest.approx(psi.eval(x)[0], rel=1e-10)
            assert phi_i.eval(x)[0] == pytest.approx(phi.eval(x)[0], rel=1e-10)

    def test_zero_thresholds_equal_constant_shift(self, baseline):
        from commonpool import fundamentals as fu
        params = model.asymmetric_game(R, [0.1, 0.2, 0.3])
        psi_i, _ = asym.agent_fundamentals(baseline, params, 0,
                                           np.zeros(2), XMAX)
        shifted = fu.solve_psi(model.ShiftedDrift.constant_shift(baseline, 0.5),
                               R, XMAX)
        for x in (0.5, 1.5, 3.0):
            assert psi_i.eval(x)[0] == pytest.approx(shifted.eval(x)[0], rel=1e-10)

    def test_psi2_matches_two_piece_closed_form(self, baseline):
        # opponent (rate K1 = 0.1) at the symmetric two-player threshold
        b1 = 0.5212295
        params = model.asymmetric_game(R, [0.1, 0.2])
        psi2, _ = asym.agent_fundamentals(baseline, params, 1,
                                          np.array([b1]), XMAX)
        pieces = cf.two_player_pieces(MU, SIGMA2, R, 0.1, 0.2, b1, 2.0)
        roots = cf.roots_for(MU, SIGMA2, R, K1=0.1, K2=0.2)
        a1, b1_ = roots.alpha1, roots.beta1
        for x in (0.7, 1.2, 1.9):
            expect = (pieces.F1 * math.exp(a1 * x) - pieces.F2 * math.exp(b1_ * x))
            assert psi2.eval(x)[0] == pytest.approx(expect, rel=1e-7)


class TestBestResponse:
    def test_symmetric_consistency(self, baseline):
        b_sym = 0.521229503726216
        params = model.asymmetric_game(R, [0.1, 0.1])
        z = asym.best_response(baseline, params, 0, np.array([b_sym]), XMAX)
        assert z.b_Z == pytest.approx(b_sym, abs=1e-7)
        assert 0.0 < z.b_Z <= z.b_star_star

    def test_reference_best_response(self, baseline):
        params = model.asymmetric_game(R, [0.1, 0.2])
        z = asym.best_response(baseline, params, 0, np.array([0.704502]), XMAX)
        assert z.b_Z == pytest.approx(0.521229, abs=1e-5)

    def test_zero_branch_when_opponents_saturate(self, baseline):
        # opponents extracting 3.85 from zero leave no profitable threshold
        params = model.asymmetric_game(R, [0.1, 3.85])
        z = asym.best_response(baseline, params, 0, np.array([0.0]), XMAX)
        assert z.b_Z == 0.0
        assert z.E4 == pytest.approx(-0.1 / R)

    def test_smooth_fit_of_response_value(self, baseline):
        params = model.asymmetric_game(R, [0.1, 0.2])
        z = asym.best_response(baseline, params, 1, np.array([0.521229]), XMAX)
        assert z.value.prime(z.b_Z) == pytest.approx(1.0, abs=1e-8)

    def test_continuity_probe(self, baseline):
        params = model.asymmetric_game(R, [0.1, 0.2])
        base = asym.best_response(baseline, params, 0, np.array([0.7045]), XMAX).b_Z
        for eps in (1e-4, -1e-4):
            moved = asym.best_response(baseline, params, 0,
                                       np.array([0.7045 + eps]), XMAX).b_Z
            assert abs(moved - base) <= 1e-2


class TestSolve:
    def test_reference_equilibrium(self, eq_12):
        assert eq_12.thresholds[0] == pytest.approx(0.521229, abs=1e-5)
        assert eq_12.thresholds[1] == pytest.approx(0.704502, abs=1e-5)
        assert eq_12.residual <= 1e-8
        assert eq_12.alternatives == []

    def test_equal_rates_reproduce_symmetric(self, baseline):
        eq = asym.solve_asymmetric(baseline, model.asymmetric_game(R, [0.1, 0.1]))
        b_sym = sym.solve_symmetric(baseline, model.symmetric_game(2, R, 0.1)).b_hat
        assert eq.thresholds[0] == pytest.approx(b_sym, abs=1e-6)
        assert eq.thresholds[1] == pytest.approx(b_sym, abs=1e-6)

    def test_reordered_rates(self, baseline):
        eq = asym.solve_asymmetric(baseline, model.asymmetric_game(R, [0.1, 0.015]))
        assert np.all(np.diff(eq.thresholds) >= -1e-7)
        assert eq.thresholds[0] == pytest.approx(0.0446676213440961, abs=1e-4)
        by_input = eq.thresholds_in_input_order()
        assert by_input[1] == eq.thresholds[0]  # agent 2 holds the small rate

    def test_zero_threshold_agent_value_slope(self, baseline):
        eq = asym.solve_asymmetric(baseline, model.asymmetric_game(R, [0.005, 0.1]))
        assert eq.thresholds[0] == 0.0
        assert eq.values[0].prime(0.0) <= 1.0 + 1e-9

    def test_wide_rate_gap_matches_figure(self, baseline):
        eq = asym.solve_asymmetric(baseline, model.asymmetric_game(R, [0.1, 3.5]))
        assert eq.thresholds[1] == pytest.approx(1.93329908120611, abs=1e-3)

    def test_rejects_bad_damping(self, baseline):
        with pytest.raises(errors.InvalidConfig):
            asym.solve_asymmetric(baseline, model.asymmetric_game(R, [0.1, 0.2]),
                                  damping=0.0)


class TestEquilibriumValues:
    def test_boundaries_and_smooth_fit(self, eq_12):
        for i, K in enumerate((0.1, 0.2)):
            assert asym.value_at_i(eq_12, i, 0.0) == pytest.approx(0.0, abs=1e-12)
            assert asym.value_at_i(eq_12, i, 150.0) == pytest.approx(K / R, rel=1e-5)
            assert eq_12.values[i].prime(eq_12.thresholds[i]) == pytest.approx(
                1.0, abs=1e-8)

    def test_value_ordering(self, eq_12):
        for x in np.linspace(0.05, 6.0, 20):
            v1 = asym.value_at_i(eq_12, 0, x)
            v2 = asym.value_at_i(eq_12, 1, x)
            assert v1 <= v2 + 1e-10

    def test_ode_residuals_on_smooth_pieces(self, eq_12):
        # above both thresholds the drift carries all n extraction rates
        b2 = eq_12.thresholds[1]
        for i, K in enumerate((0.1, 0.2)):
            v = eq_12.values[i]
            for x in np.linspace(b2 + 0.2, b2 + 3.0, 6):
                resid = (0.5 * SIGMA2 * fd_second(v, x, h=1e-3)
                         + (MU - 0.3) * fd_first(v, x) - R * v(x) + K)
                assert abs(resid) <= 1e-5 * max(K / R * R, 1e-6)
        # below both thresholds no one extracts
        for i in range(2):
            v = eq_12.values[i]
            for x in np.linspace(0.05, eq_12.thresholds[0] - 0.05, 5):
                resid = (0.5 * SIGMA2 * fd_second(v, x, h=1e-3)
                         + MU * fd_first(v, x) - R * v(x))
                assert abs(resid) <= 1e-5

    def test_out_of_domain(self, eq_12):
        with pytest.raises(errors.OutOfDomain):
            asym.value_at_i(eq_12, 0, -1.0)

    def test_mc_band_anchor_values(self, eq_12):
        # frozen values consumed by the simulation cross-checks
        assert asym.value_at_i(eq_12, 0, 1.0) == pytest.approx(1.9561, abs=2e-4)
        assert asym.value_at_i(eq_12, 1, 1.0) == pytest.approx(3.9101, abs=4e-4)


class TestClosedFormAgreement:
    @pytest.mark.parametrize("seed", range(10))
    def test_two_player_oracle(self, baseline, seed):
        rng = np.random.default_rng(3000 + seed)
        K1 = float(rng.uniform(0.02, 0.5))
        K2 = float(rng.uniform(K1, 1.0))
        ref = cf.two_player_equilibrium(MU, SIGMA2, R, K1, K2)
        eq = asym.solve_asymmetric(baseline, model.asymmetric_game(R, [K1, K2]))
        assert eq.thresholds[0] == pytest.approx(ref.b1_hat, abs=1e-5)
        assert eq.thresholds[1] == pytest.approx(ref.b2_hat, abs=1e-5)


class TestSweepK2:
    def test_small_grid_matches_embedded_data(self, baseline):
        from commonpool import figdata
        header, ref = figdata.load("asym-thresholds")
        grid = [0.0, 0.05, 0.1, 0.2]
        tab = asym.sweep_K2(baseline, R, 0.1, grid)
        ref_map = {row[0]: (row[1], row[2]) for row in ref}
        for row in tab.rows:
            k2, b1, b2 = row[0], row[1], row[2]
            b2_ref, b1_ref = ref_map[k2]
            assert b1 == pytest.approx(b1_ref, abs=1e-4)
            assert b2 == pytest.approx(b2_ref, abs=1e-4)

    def test_single_agent_column(self, baseline):
        tab = asym.sweep_K2(baseline, R, 0.1, [0.05, 0.2])
        for row in tab.rows:
            single = sym.solve_symmetric(
                baseline, model.symmetric_game(1, R, row[0])).b_hat
            assert row[3] == pytest.approx(single, abs=1e-10)

    def test_thresholds_stay_below_one_player_barrier(self, baseline):
        b_star = cf.one_player_barrier(MU, SIGMA2, R)
        tab = asym.sweep_K2(baseline, R, 0.1, [0.05, 0.1, 0.2])
        assert np.all(tab.column("b2_hat") <= b_star)
        assert np.all(tab.column("b2_single_agent") <= b_star)
