import math

import numpy as np
import pytest

from commonpool import _mc, errors, model, simulate as simu, symmetric as sym

from conftest import MU, R, SIGMA2


def small_cfg(**kw):
    base = dict(x0=1.0, dt=2e-3, horizon=60.0, paths=10_000, seed=7,
                antithetic=True)
    base.update(kw)
    return simu.SimConfig(**base)


@pytest.fixture(scope="module")
def game2():
    return model.symmetric_game(2, R, 0.1)


@pytest.fixture(scope="module")
def eq2(baseline, game2):
    return sym.solve_symmetric(baseline, game2)


@pytest.fixture(scope="module")
def prof2(eq2):
    return np.array([eq2.b_hat, eq2.b_hat])


pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


class TestPhilox:
    # Known-answer vectors from the Random123 distribution (philox4x32-10).
    KAT = [
        ((0, 0, 0, 0), (0, 0),
         (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
        ((0xFFFFFFFF,) * 4, (0xFFFFFFFF, 0xFFFFFFFF),
         (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
        ((0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
         (0xA4093822, 0x299F31D0),
         (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1)),
    ]

    @pytest.mark.parametrize("ctr,key,expect", KAT)
    def test_known_answer_vectors(self, ctr, key, expect):
        counter = np.array([[c] for c in ctr], dtype=np.uint32)
        out = _mc.philox4x32_np(counter, (np.uint32(key[0]), np.uint32(key[1])))
        assert tuple(int(x[0]) for x in out) == expect

    def test_numba_normals_match_numpy_twin(self):
        ids = np.arange(37, dtype=np.uint64)
        want = _mc.normals4_np(123456789, ids, 42)
        got = np.empty(4)
        for p in range(37):
            _mc._normals4(np.uint64(42), np.uint64(p), np.uint64(123456789), got)
            np.testing.assert_array_equal(got, want[:, p])

    def test_normal_moments(self):
        ids = np.arange(50_000, dtype=np.uint64)
        z = np.concatenate([_mc.normals4_np(5, ids, blk).ravel()
                            for blk in range(4)])
        n = len(z)
        assert abs(z.mean()) < 4.0 / math.sqrt(n)
        assert abs(z.std() - 1.0) < 4.0 / math.sqrt(2 * n)
        assert abs((z ** 3).mean()) < 4.0 * math.sqrt(15.0 / n)
        assert abs((z ** 4).mean() - 3.0) < 4.0 * math.sqrt(96.0 / n)

    def test_paths_decorrelated(self):
        ids = np.arange(2, dtype=np.uint64)
        a = np.concatenate([_mc.normals4_np(9, ids[:1], b)[:, 0] for b in range(2500)])
        b = np.concatenate([_mc.normals4_np(9, ids[1:], b)[:, 0] for b in range(2500)])
        corr = np.corrcoef(a, b)[0, 1]
        assert abs(corr) < 4.0 / math.sqrt(len(a))


class TestEngineEquivalence:
    def test_jit_matches_numpy_reference(self, baseline, game2, prof2):
        cfg = simu.SimConfig(x0=1.0, dt=5e-3, horizon=3.0, paths=128, seed=11,
                             antithetic=True)
        user = model.user_defined(lambda x: 4.0 + 0.0 * x, lambda x: 0.0 * x,
                                  lambda x: math.sqrt(2.0) + 0.0 * x)
        fast = simu.estimate_reward(baseline, game2, prof2, 0, cfg)
        slow = simu.estimate_reward(user, game2, prof2, 0, cfg)
        assert fast.mean == pytest.approx(slow.mean, abs=1e-12)
        assert fast.absorbed_fraction == slow.absorbed_fraction

    def test_antithetic_pairs_flip_sign(self, baseline, game2):
        # with sigma flipped the even/odd twins of a pair must mirror around
        # the drift, which shows up as distinct deterministic estimates
        cfg_a = small_cfg(paths=2000, horizon=5.0)
        cfg_b = small_cfg(paths=2000, horizon=5.0, antithetic=False)
        ra = simu.estimate_reward(baseline, game2, np.zeros(2), 0, cfg_a)
        rb = simu.estimate_reward(baseline, game2, np.zeros(2), 0, cfg_b)
        assert ra.mean != rb.mean  # different path sets by construction
        assert ra.paths == rb.paths == 2000


class TestEstimateReward:
    def test_determinism(self, baseline, game2, prof2):
        cfg = small_cfg(paths=2000, horizon=10.0)
        a = simu.estimate_reward(baseline, game2, prof2, 0, cfg)
        b = simu.estimate_reward(baseline, game2, prof2, 0, cfg)
        assert (a.mean, a.std_error, a.absorbed_fraction) == \
            (b.mean, b.std_error, b.absorbed_fraction)
        c = simu.estimate_reward(baseline, game2, prof2, 0,
                                 small_cfg(paths=2000, horizon=10.0, seed=8))
        assert c.mean != a.mean

    def test_absorbed_at_start(self, baseline, game2, prof2):
        est = simu.estimate_reward(baseline, game2, prof2, 0,
                                   small_cfg(x0=0.0, paths=64, horizon=1.0))
        assert est.mean == 0.0
        assert est.absorbed_fraction == 1.0

    def test_never_extract_sentinel(self, baseline, game2):
        est = simu.estimate_reward(baseline, game2, np.array([np.inf, np.inf]),
                                   0, small_cfg(paths=64, horizon=1.0))
        assert est.mean == 0.0

    def test_estimate_within_natural_ceiling(self, baseline, game2, prof2):
        est = simu.estimate_reward(baseline, game2, prof2, 0,
                                   small_cfg(paths=4000, horizon=30.0))
        assert 0.0 <= est.mean <= 0.1 / R + est.tail_bound

    def test_matches_analytic_value(self, baseline, game2, eq2, prof2):
        cfg = small_cfg()
        est = simu.estimate_reward(baseline, game2, prof2, 0, cfg)
        band = (3.0 * est.std_error + est.tail_bound
                + math.sqrt(cfg.dt) * 0.1)
        assert abs(est.mean - eq2.value(1.0)) <= band

    def test_halving_dt_consistent(self, baseline, game2, prof2):
        a = simu.estimate_reward(baseline, game2, prof2, 0,
                                 small_cfg(paths=6000, horizon=40.0, dt=2e-3))
        b = simu.estimate_reward(baseline, game2, prof2, 0,
                                 small_cfg(paths=6000, horizon=40.0, dt=1e-3))
        width = 4.0 * math.hypot(a.std_error, b.std_error)
        assert abs(a.mean - b.mean) <= width + math.sqrt(2e-3) * 0.1

    def test_config_validation(self, baseline, game2, prof2):
        with pytest.raises(errors.InvalidConfig):
            simu.estimate_reward(baseline, game2, prof2, 0,
                                 small_cfg(paths=101, antithetic=True))
        with pytest.raises(errors.InvalidConfig):
            simu.estimate_reward(baseline, game2, prof2, 0, small_cfg(dt=-1.0))
        with pytest.raises(errors.InvalidConfig):
            simu.estimate_reward(baseline, game2, np.array([1.0]), 0, small_cfg())

    def test_horizon_warning(self, baseline, game2, prof2):
        with pytest.warns(UserWarning, match="discount tail"):
            simu.estimate_reward(baseline, game2, prof2, 0,
                                 small_cfg(paths=64, horizon=5.0))


class TestCommonRandomNumbers:
    def test_pathwise_monotone_in_extraction_rate(self, baseline):
        # all-zero thresholds: a larger K2 lowers the state pathwise, hence
        # agent 1's reward cannot increase on any path
        cfg = small_cfg(paths=512, horizon=5.0)
        lo = model.symmetric_game(2, R, 0.1)
        hi = model.asymmetric_game(R, [0.1, 0.3])
        r_lo, _, _, _ = simu.estimate_many(baseline, lo, [np.zeros(2)], cfg)
        r_hi, _, _, _ = simu.estimate_many(baseline, hi, [np.zeros(2)], cfg)
        assert np.all(r_hi[:, 0, 0] <= r_lo[:, 0, 0] + 1e-15)

    def test_deviation_scan_passes(self, baseline, game2, eq2, prof2):
        cfg = small_cfg()
        grid = np.linspace(0.0, 2.0 * eq2.b_hat, 11)
        verdict = simu.verify_nash(baseline, game2, prof2, 0, 1.0, grid, cfg)
        assert verdict.passes
        assert verdict.excesses[5] == 0.0  # the grid midpoint is b_hat itself
        assert verdict.std_errors[5] == 0.0
        assert verdict.max_excess <= 3.0 * verdict.std_error + verdict.bias_allowance

    def test_bad_profile_fails_deviation_scan(self, baseline, game2):
        # far-off threshold profile: deviating back toward the equilibrium
        # must show a significant gain
        cfg = small_cfg(paths=20_000)
        bad = np.array([2.5, 2.5])
        verdict = simu.verify_nash(baseline, game2, bad, 0, 1.0,
                                   np.linspace(0.0, 2.0, 11), cfg)
        assert not verdict.passes
        assert verdict.max_excess > 5.0 * verdict.bias_allowance


class TestExtinction:
    def test_absorbed_at_origin(self, baseline, game2, prof2):
        est = simu.estimate_extinction_time(baseline, game2, prof2, 0.0,
                                            small_cfg(paths=64, horizon=1.0))
        assert est.mean_discounted_survival == 1.0
        assert est.absorbed_fraction == 1.0

    def test_no_extraction_extends_survival(self, baseline, game2, prof2):
        cfg = small_cfg(paths=20_000, horizon=30.0, x0=0.5)
        none = simu.estimate_extinction_time(
            baseline, game2, np.array([np.inf, np.inf]), 0.5, cfg)
        eqm = simu.estimate_extinction_time(baseline, game2, prof2, 0.5, cfg)
        width = 2.0 * math.hypot(none.absorbed_std_error, eqm.absorbed_std_error)
        assert none.absorbed_fraction <= eqm.absorbed_fraction + width

    def test_competition_accelerates_extinction(self, baseline):
        # fixed total rate, increasing n: lower thresholds drain earlier
        cfg = small_cfg(paths=20_000, horizon=30.0, x0=2.0)
        fracs = []
        for n in (1, 4):
            K = 3.5 / n
            game = model.symmetric_game(n, R, K)
            b = sym.solve_symmetric(baseline, game).b_hat
            est = simu.estimate_extinction_time(baseline, game,
                                                np.full(n, b), 2.0, cfg)
            fracs.append((est.absorbed_fraction, est.absorbed_std_error))
        width = 2.0 * math.hypot(fracs[0][1], fracs[1][1])
        assert fracs[1][0] >= fracs[0][0] - width
