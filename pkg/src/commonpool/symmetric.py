"""Symmetric game: equilibrium threshold, value function, benchmark, sweeps.

All n agents share the maximal rate K.  The equilibrium threshold is 0 when
phi_{nK}'(0) >= -r/K (ties resolve to 0) and otherwise the unique root of

    psi(b)/psi'(b) - phi_{nK}(b)/phi_{nK}'(b) = K/r

on (0, b*], b* the inflection point of psi.  The value function is
D1*psi below the threshold and K/r + D4*phi_{nK} above it, C^1 at the fit.

Two interchangeable engines: the general ODE pipeline, and the exact
constant-coefficient formulas (used automatically for constant models).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import closed_form as cf
from .errors import BracketFailure, InvalidConfig, OutOfDomain
from .fundamentals import (
    FundamentalSolution,
    RatioEvaluator,
    inflection_point,
    solve_phi,
    solve_psi,
)
from .model import CoefficientModel, GameParams, ShiftedDrift, extinction_bound
from .tableio import SweepTable

__all__ = [
    "SymmetricEquilibrium",
    "SingularBenchmark",
    "solve_symmetric",
    "value_at",
    "singular_benchmark",
    "sweep_n",
    "sweep_n_fixed_total",
    "sweep_K",
]


class _ClosedFormCurve:
    """Adapter giving closed-form exponential solutions the solver interface."""

    def __init__(self, pair_fn: Callable[[float], tuple], kind: str):
        self._pair = pair_fn
        self.kind = kind

    def eval(self, x: float) -> tuple[float, float]:
        return self._pair(x)

    def eval_scaled(self, x: float) -> tuple[float, float, float]:
        f, g = self._pair(x)
        return f, g, 0.0

    def ratio(self, x: float) -> float:
        f, g = self._pair(x)
        return f / g


@dataclass(frozen=True)
class SymmetricEquilibrium:
    """Threshold b_hat with the smooth-fit value function coefficients.

    If b_hat = 0 the value is (K/r)(1 - phi_nK) so D4 = -K/r and D1 is
    unused (stored as 0).
    """

    b_hat: float
    D1: float
    D4: float
    psi: object
    phi_nK: object
    params: GameParams
    b_star: float
    c_bound: float
    x_max: float
    engine: str

    def value(self, x: float) -> float:
        K_over_r = self.params.K / self.params.r
        if x <= self.b_hat:
            f, _ = self.psi.eval(x)
            return self.D1 * f
        f, _ = self.phi_nK.eval(x)
        return K_over_r + self.D4 * f

    def value_prime(self, x: float) -> float:
        if x <= self.b_hat:
            return self.D1 * self.psi.eval(x)[1]
        return self.D4 * self.phi_nK.eval(x)[1]


def value_at(eq: SymmetricEquilibrium, x: float) -> float:
    """Equilibrium value V(x); piecewise in the fundamentals, C^1 at b_hat."""
    if x < 0.0 or x > eq.x_max:
        raise OutOfDomain(f"x={x} outside [0, {eq.x_max}]")
    return eq.value(x)


def _fit_coefficients(psi, phi, b_hat: float, K: float, r: float):
    fp, gp = psi.eval(b_hat)
    fq, gq = phi.eval(b_hat)
    wron = fq * gp - gq * fp
    return -(K / r) * gq / wron, -(K / r) * gp / wron


def _solve_given_fundamentals(params: GameParams, psi, phi, b_star: float,
                              c_bound: float, x_max: float,
                              engine: str) -> SymmetricEquilibrium:
    K, r = params.K, params.r
    phi_d0 = phi.eval(0.0)[1]
    if K * phi_d0 >= -r:  # zero-threshold branch, ties included
        return SymmetricEquilibrium(0.0, 0.0, -K / r, psi, phi, params,
                                    b_star, c_bound, x_max, engine)
    ratios = RatioEvaluator(psi, phi) if engine == "ode" else None

    def defect(b: float) -> float:
        if ratios is not None:
            return ratios.f(b) - K / r
        return psi.ratio(b) - phi.ratio(b) - K / r

    hi = defect(b_star)
    if hi < 0.0:
        raise BracketFailure(
            f"threshold equation has no sign change on (0, b*={b_star:.6g}]; "
            f"defect at b* is {hi:.3g}"
        )
    b_hat = float(brentq(defect, 0.0, b_star, xtol=1e-10))
    D1, D4 = _fit_coefficients(psi, phi, b_hat, K, r)
    return SymmetricEquilibrium(b_hat, D1, D4, psi, phi, params,
                                b_star, c_bound, x_max, engine)


def _closed_form_equilibrium(coeffs: CoefficientModel, params: GameParams,
                             c_bound: float, x_max: float) -> SymmetricEquilibrium:
    mu0, _, sigma0 = coeffs.params
    sol = cf.symmetric_closed_form(mu0, sigma0 * sigma0, params.r,
                                   params.n, params.K)
    psi = _ClosedFormCurve(sol.psi, "increasing")
    phi = _ClosedFormCurve(sol.phi, "decreasing")
    b_star = cf.one_player_barrier(mu0, sigma0 * sigma0, params.r)
    return SymmetricEquilibrium(sol.b_hat, sol.D1, sol.D4, psi, phi, params,
                                b_star, c_bound, x_max, "closed_form")


def _pick_engine(coeffs: CoefficientModel, engine: str) -> str:
    if engine == "auto":
        return "closed_form" if coeffs.kind == "constant" else "ode"
    if engine not in ("ode", "closed_form"):
        raise InvalidConfig(f"unknown engine {engine!r}")
    if engine == "closed_form" and coeffs.kind != "constant":
        raise InvalidConfig("closed_form engine requires a constant model")
    return engine


def solve_symmetric(coeffs: CoefficientModel, params: GameParams,
                    engine: str = "auto", tol: float = 1e-10,
                    x_max: float | None = None,
                    verify_truncation: bool = True) -> SymmetricEquilibrium:
    """Equilibrium threshold and value function for the symmetric game.

    ``engine='auto'`` dispatches constant-coefficient models to the exact
    formulas and everything else to the ODE pipeline (forward psi, backward
    phi_{nK}, bracketed root finding on [0, b*]).
    """
    if not params.symmetric:
        raise InvalidConfig("solve_symmetric requires symmetric GameParams")
    engine = _pick_engine(coeffs, engine)
    c_bound = extinction_bound(coeffs, params.r)
    if x_max is None:
        x_max = 4.0 * c_bound
    if engine == "closed_form":
        return _closed_form_equilibrium(coeffs, params, c_bound, x_max)

    drift0 = ShiftedDrift.constant_shift(coeffs, 0.0)
    drift_nK = ShiftedDrift.constant_shift(coeffs, params.n * params.K)
    psi = solve_psi(drift0, params.r, x_max, tol)
    phi = solve_phi(drift_nK, params.r, x_max, tol,
                    verify_truncation=verify_truncation)
    b_star = inflection_point(psi)
    return _solve_given_fundamentals(params, psi, phi, b_star, c_bound,
                                     x_max, "ode")


@dataclass(frozen=True)
class SingularBenchmark:
    """One-player singular-control benchmark: reflect the state at b_star.

    U is C^2-fit at the barrier: U'(b_star)=1 and U''(b_star)=0, linear with
    unit slope above it.
    """

    b_star: float
    C_star: float
    U: Callable[[float], float]


def singular_benchmark(coeffs: CoefficientModel, r: float,
                       engine: str = "auto", tol: float = 1e-10,
                       x_max: float | None = None) -> SingularBenchmark:
    """Value function of the single-agent problem with unbounded extraction."""
    if coeffs.mu(0.0) <= 0.0:
        raise InvalidConfig("singular benchmark requires mu(0) > 0")
    engine = _pick_engine(coeffs, engine)
    if engine == "closed_form":
        mu0, _, sigma0 = coeffs.params
        roots = cf.roots_for(mu0, sigma0 * sigma0, r)
        a, b = roots.alpha, roots.beta

        def psi_pair(x: float, _a=a, _b=b) -> tuple[float, float]:
            ea, eb = math.exp(_a * x), math.exp(_b * x)
            return (ea - eb) / (_a - _b), (_a * ea - _b * eb) / (_a - _b)

        psi = _ClosedFormCurve(psi_pair, "increasing")
        b_star = cf.one_player_barrier(mu0, sigma0 * sigma0, r)
    else:
        if x_max is None:
            x_max = 4.0 * extinction_bound(coeffs, r)
        psi = solve_psi(ShiftedDrift.constant_shift(coeffs, 0.0), r, x_max, tol)
        b_star = inflection_point(psi)
    C_star = 1.0 / psi.eval(b_star)[1]
    u_at_barrier = C_star * psi.eval(b_star)[0]

    def U(x: float) -> float:
        if x <= b_star:
            return C_star * psi.eval(x)[0]
        return x - b_star + u_at_barrier

    return SingularBenchmark(b_star=b_star, C_star=C_star, U=U)


def _default_samples(b_star: float) -> np.ndarray:
    return np.linspace(0.2 * b_star, 2.0 * b_star, 10)


def sweep_n(coeffs: CoefficientModel, r: float, K: float, n_range,
            engine: str = "auto", x0_samples=None) -> SweepTable:
    """Per-n equilibrium thresholds and value samples at fixed individual K.

    ``extras['n_bar']`` is the first n in the range with a zero threshold.
    """
    from .model import symmetric_game

    n_range = list(n_range)
    if not n_range or any(b < a for a, b in zip(n_range, n_range[1:])):
        raise InvalidConfig("n_range must be nonempty ascending")
    rows = []
    n_bar = None
    samples = x0_samples
    for n in n_range:
        eq = solve_symmetric(coeffs, symmetric_game(n, r, K), engine=engine)
        if samples is None:
            samples = _default_samples(eq.b_star)
        if n_bar is None and eq.b_hat == 0.0:
            n_bar = n
        rows.append([n, eq.b_hat] + [eq.value(x) for x in samples])
    header = ("n", "b_hat") + tuple(f"V_x{j}" for j in range(len(samples)))
    return SweepTable(header, np.array(rows),
                      {"n_bar": n_bar, "x0_samples": np.asarray(samples)})


def sweep_n_fixed_total(coeffs: CoefficientModel, r: float, K_bar: float,
                        n_range, engine: str = "auto",
                        x0_samples=None) -> SweepTable:
    """Per-n sweep with K = K_bar/n, reporting total values n*V(x0)."""
    from .model import symmetric_game

    n_range = list(n_range)
    if not n_range or any(b < a for a, b in zip(n_range, n_range[1:])):
        raise InvalidConfig("n_range must be nonempty ascending")
    rows = []
    n_bar = None
    samples = x0_samples
    for n in n_range:
        eq = solve_symmetric(coeffs, symmetric_game(n, r, K_bar / n), engine=engine)
        if samples is None:
            samples = _default_samples(eq.b_star)
        if n_bar is None and eq.b_hat == 0.0:
            n_bar = n
        rows.append([n, eq.b_hat] + [n * eq.value(x) for x in samples])
    header = ("n", "b_hat") + tuple(f"nV_x{j}" for j in range(len(samples)))
    return SweepTable(header, np.array(rows),
                      {"n_bar": n_bar, "x0_samples": np.asarray(samples)})


def sweep_K(coeffs: CoefficientModel, r: float, n: int, K_range,
            engine: str = "auto") -> SweepTable:
    """Per-K equilibrium thresholds at fixed n.

    K = 0 rows are the degenerate no-extraction game with threshold 0.
    For n = 1 the threshold is nondecreasing in K; with competition the
    relationship is not monotone.
    """
    from .model import symmetric_game

    rows = []
    for K in K_range:
        if K == 0.0:
            rows.append([0.0, 0.0])
            continue
        eq = solve_symmetric(coeffs, symmetric_game(n, r, K), engine=engine)
        rows.append([K, eq.b_hat])
    return SweepTable(("K", "b_hat"), np.array(rows), {})
