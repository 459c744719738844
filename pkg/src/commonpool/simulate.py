"""Monte-Carlo engine: reward estimation and statistical Nash verification.

Euler-Maruyama discretization of the controlled diffusion with threshold
strategies, absorption at 0 checked at step ends, and the reward integrand
e^{-rt} K_i 1{X >= b_i} accumulated by the left-point rule.  The noise is a
counter-based RNG (see :mod:`commonpool._mc`), so identical configurations
give bit-identical estimates and comparisons across strategy profiles use
common random numbers automatically.

The engine verifies equilibria statistically; it never solves for them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _mc
from .errors import InvalidConfig
from .model import CoefficientModel, GameParams

__all__ = [
    "SimConfig",
    "RewardEstimate",
    "DeviationVerdict",
    "ExtinctionEstimate",
    "estimate_reward",
    "estimate_many",
    "verify_nash",
    "estimate_extinction_time",
]

DISCOUNT_TAIL_CAP = 1e-4


@dataclass(frozen=True)
class SimConfig:
    """Discretization and sampling parameters.

    ``horizon=None`` defaults to 200/r at use.  With ``antithetic`` paths
    are simulated in sign-flipped pairs (an even path count is required);
    the reported standard errors are then computed over pair averages.
    """

    x0: float
    dt: float
    horizon: float | None = None
    paths: int = 100_000
    seed: int = 0
    antithetic: bool = False

    def validate(self) -> None:
        if self.x0 < 0.0:
            raise InvalidConfig("x0 must be >= 0")
        if self.dt <= 0.0:
            raise InvalidConfig("dt must be > 0")
        if self.horizon is not None and self.horizon <= 0.0:
            raise InvalidConfig("horizon must be > 0")
        if self.paths < 1:
            raise InvalidConfig("paths must be >= 1")
        if self.antithetic and self.paths % 2:
            raise InvalidConfig("antithetic pairing needs an even path count")


@dataclass(frozen=True)
class RewardEstimate:
    """Discounted-extraction estimate for one agent.

    ``tail_bound`` bounds the discounted reward mass beyond the horizon,
    (K_i/r) e^{-r*horizon} per unabsorbed path; it is reported, never
    silently dropped.
    """

    mean: float
    std_error: float
    paths: int
    absorbed_fraction: float
    tail_bound: float


@dataclass(frozen=True)
class DeviationVerdict:
    """Outcome of a threshold-deviation scan for one agent.

    ``max_excess`` is the largest estimated gain over the equilibrium reward
    across the scanned deviations, measured under common random numbers
    against the simulated equilibrium value at x0.  ``passes`` applies the
    rule max_excess <= 3*std_error + bias_allowance at the maximizing
    deviation, with bias_allowance = c_bias * sqrt(dt) * K_i covering the
    discretization bias of the comparison.
    """

    agent: int
    deviations_tested: tuple
    max_excess: float
    passes: bool
    std_error: float
    bias_allowance: float
    excesses: tuple
    std_errors: tuple
    equilibrium: RewardEstimate


@dataclass(frozen=True)
class ExtinctionEstimate:
    """E[e^{-r tau}] bracket and absorbed fraction within the horizon.

    Unabsorbed paths are charged e^{-r*horizon}, so the mean is an upper
    bracket of the discounted-extinction transform.
    """

    mean_discounted_survival: float
    absorbed_fraction: float
    std_error: float
    absorbed_std_error: float


def _thresholds_of(profile) -> np.ndarray:
    thr = getattr(profile, "thresholds", profile)
    return np.asarray(thr, dtype=float)


def _resolve(params: GameParams, cfg: SimConfig) -> tuple[float, int]:
    cfg.validate()
    horizon = cfg.horizon if cfg.horizon is not None else 200.0 / params.r
    tail = math.exp(-params.r * horizon)
    if tail > DISCOUNT_TAIL_CAP:
        warnings.warn(
            f"discount tail e^(-r*horizon) = {tail:.3g} exceeds "
            f"{DISCOUNT_TAIL_CAP}; estimates are noticeably truncated",
            stacklevel=3,
        )
    nsteps = int(round(horizon / cfg.dt))
    if nsteps < 1:
        raise InvalidConfig("horizon shorter than one step")
    return horizon, nsteps


def _run_matrix(coeffs: CoefficientModel, params: GameParams,
                thr_matrix: np.ndarray, cfg: SimConfig):
    """Simulate all strategy variants; returns (rewards, absorbed, taudisc).

    thr_matrix has shape (V, n); outputs are (paths, V, n), (paths, V) and
    (paths, V), path-major with antithetic twins interleaved.
    """
    horizon, nsteps = _resolve(params, cfg)
    V, n = thr_matrix.shape
    if n != params.n:
        raise InvalidConfig("threshold matrix width must equal the agent count")
    twins = 2 if cfg.antithetic else 1
    npairs = cfg.paths // twins
    thr = np.ascontiguousarray(thr_matrix.T)  # (n, V) for the kernel
    rew = np.empty((npairs, twins, V, n))
    absorbed = np.empty((npairs, twins, V), dtype=np.uint8)
    taudisc = np.empty((npairs, twins, V))

    if coeffs.params is not None:
        mu0, mu1, sigma0 = coeffs.params
        _mc.run_paths(npairs, twins, nsteps, cfg.x0, cfg.dt, mu0, mu1, sigma0,
                      params.r, params.rates, thr, np.uint64(cfg.seed),
                      rew, absorbed, taudisc)
    else:
        _mc.run_paths_np(npairs, twins, nsteps, cfg.x0, cfg.dt, coeffs.mu,
                         coeffs.sigma, params.r, params.rates, thr,
                         cfg.seed, rew, absorbed, taudisc)
    flat = lambda a: a.reshape(npairs * twins, *a.shape[2:])
    return flat(rew), flat(absorbed), flat(taudisc), horizon


def _mean_se(values: np.ndarray, antithetic: bool) -> tuple[float, float]:
    """Mean and standard error; antithetic pairs are averaged first."""
    if antithetic:
        values = 0.5 * (values[0::2] + values[1::2])
    m = float(np.mean(values))
    if len(values) < 2:
        return m, 0.0
    var = float(np.sum((values - m) ** 2)) / (len(values) - 1)
    return m, math.sqrt(var / len(values))


def _estimate_from_run(rew_v, absorbed_v, params, agent, cfg, horizon):
    mean, se = _mean_se(rew_v[:, agent], cfg.antithetic)
    absorbed_fraction = float(np.mean(absorbed_v))
    K = params.rates[agent]
    tail = (K / params.r) * math.exp(-params.r * horizon) * (1.0 - absorbed_fraction)
    return RewardEstimate(mean=mean, std_error=se, paths=cfg.paths,
                          absorbed_fraction=absorbed_fraction, tail_bound=tail)


def estimate_reward(coeffs: CoefficientModel, params: GameParams, profile,
                    agent: int, cfg: SimConfig) -> RewardEstimate:
    """Discounted extraction of one agent under a fixed threshold profile."""
    thr = _thresholds_of(profile)
    if len(thr) != params.n:
        raise InvalidConfig("profile length must equal the agent count")
    rew, absorbed, _, horizon = _run_matrix(coeffs, params, thr[None, :], cfg)
    return _estimate_from_run(rew[:, 0, :], absorbed[:, 0], params, agent,
                              cfg, horizon)


def estimate_many(coeffs: CoefficientModel, params: GameParams, profiles,
                  cfg: SimConfig):
    """Per-path rewards for several profiles under common random numbers.

    Returns (rewards, absorbed, taudisc, horizon) with rewards of shape
    (paths, V, n).  This is the building block for deviation scans and for
    any matched comparison between strategy profiles.
    """
    thr_matrix = np.stack([_thresholds_of(p) for p in profiles])
    return _run_matrix(coeffs, params, thr_matrix, cfg)


def verify_nash(coeffs: CoefficientModel, params: GameParams, profile,
                agent: int, x0: float, deviation_grid, cfg: SimConfig,
                c_bias: float = 1.0) -> DeviationVerdict:
    """Scan unilateral threshold deviations of one agent.

    All deviations are simulated with the Wiener increments of the
    equilibrium run, so each excess is a matched-pairs estimate whose
    standard error comes from the per-path differences.  A deviation equal
    to the agent's equilibrium threshold reproduces its paths exactly and
    has excess identically zero.
    """
    base = _thresholds_of(profile)
    cfg = SimConfig(x0=float(x0), dt=cfg.dt, horizon=cfg.horizon,
                    paths=cfg.paths, seed=cfg.seed, antithetic=cfg.antithetic)
    grid = [float(b) for b in deviation_grid]
    variants = [base]
    for b in grid:
        dev = base.copy()
        dev[agent] = b
        variants.append(dev)
    rew, absorbed, _, horizon = estimate_many(coeffs, params, variants, cfg)

    eq_rewards = rew[:, 0, agent]
    excesses, ses = [], []
    for k in range(len(grid)):
        diff = rew[:, k + 1, agent] - eq_rewards
        mean, se = _mean_se(diff, cfg.antithetic)
        excesses.append(mean)
        ses.append(se)
    j = int(np.argmax(excesses))
    bias_allowance = c_bias * math.sqrt(cfg.dt) * params.rates[agent]
    passes = excesses[j] <= 3.0 * ses[j] + bias_allowance
    equilibrium = _estimate_from_run(rew[:, 0, :], absorbed[:, 0], params,
                                     agent, cfg, horizon)
    return DeviationVerdict(
        agent=agent, deviations_tested=tuple(grid),
        max_excess=float(excesses[j]), passes=bool(passes),
        std_error=float(ses[j]), bias_allowance=float(bias_allowance),
        excesses=tuple(excesses), std_errors=tuple(ses),
        equilibrium=equilibrium,
    )


def estimate_extinction_time(coeffs: CoefficientModel, params: GameParams,
                             profile, x0: float,
                             cfg: SimConfig) -> ExtinctionEstimate:
    """Upper bracket of E[e^{-r tau}] plus the absorbed fraction."""
    thr = _thresholds_of(profile)
    cfg = SimConfig(x0=float(x0), dt=cfg.dt, horizon=cfg.horizon,
                    paths=cfg.paths, seed=cfg.seed, antithetic=cfg.antithetic)
    _, absorbed, taudisc, _ = _run_matrix(coeffs, params, thr[None, :], cfg)
    mean, se = _mean_se(taudisc[:, 0], cfg.antithetic)
    frac, fse = _mean_se(absorbed[:, 0].astype(float), cfg.antithetic)
    return ExtinctionEstimate(mean_discounted_survival=mean,
                              absorbed_fraction=frac, std_error=se,
                              absorbed_std_error=fse)
