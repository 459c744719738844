"""Asymmetric game with individual rates K_1 <= ... <= K_n.

Each agent i faces a one-player problem whose drift carries the opponents'
threshold extraction as negative jumps.  The best-response map sends a
profile of opponent thresholds to the agent's optimal threshold; its fixed
points are threshold Nash equilibria.  Existence comes from a fixed-point
argument on [0, c]^n, so the solver is a damped simultaneous best-response
iteration with quasi-random restarts and an honest failure mode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import (
    BracketFailure,
    InvalidConfig,
    NoConvergence,
    OrderingViolation,
    OutOfDomain,
)
from .fundamentals import FundamentalSolution, inflection_point, solve_phi, solve_psi
from .model import CoefficientModel, GameParams, ShiftedDrift, extinction_bound, symmetric_game
from .symmetric import solve_symmetric
from .tableio import SweepTable

__all__ = [
    "ThresholdProfile",
    "BestResponse",
    "AsymmetricEquilibrium",
    "agent_fundamentals",
    "best_response",
    "solve_asymmetric",
    "value_at_i",
    "sweep_K2",
]


@dataclass(frozen=True)
class ThresholdProfile:
    """Per-agent thresholds, in ascending-rate (canonical) agent order."""

    thresholds: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "thresholds",
                           np.asarray(self.thresholds, dtype=float))
        if np.any(self.thresholds < 0.0):
            raise InvalidConfig("thresholds must be nonnegative")

    def drop(self, i: int) -> np.ndarray:
        return np.delete(self.thresholds, i)


class _AgentValue:
    """Evaluable piecewise value: E1*psi below b, K/r + E4*phi above."""

    def __init__(self, E1, E4, b, K, r, psi, phi):
        self.E1, self.E4, self.b, self.K, self.r = E1, E4, b, K, r
        self.psi, self.phi = psi, phi

    def __call__(self, x: float) -> float:
        if x <= self.b:
            return self.E1 * self.psi.eval(x)[0]
        return self.K / self.r + self.E4 * self.phi.eval(x)[0]

    def prime(self, x: float) -> float:
        if x <= self.b:
            return self.E1 * self.psi.eval(x)[1]
        return self.E4 * self.phi.eval(x)[1]


def agent_fundamentals(coeffs: CoefficientModel, params: GameParams, i: int,
                       others: np.ndarray, x_max: float, tol: float = 1e-10,
                       verify_truncation: bool = False):
    """(psi_i, phi_i) for agent i given the opponents' thresholds.

    psi_i solves the ODE whose drift subtracts K_j at and above each
    opponent threshold b_j; phi_i additionally subtracts agent i's own K_i
    everywhere.  Both are C^1 across the drift jumps by construction.
    """
    others = np.asarray(others, dtype=float)
    if len(others) != params.n - 1:
        raise InvalidConfig("others must hold the n-1 opponent thresholds")
    rates_others = np.delete(params.rates, i)
    jumps = list(zip(others, rates_others))
    psi = solve_psi(ShiftedDrift.canonical(coeffs, jumps), params.r, x_max, tol)
    phi = solve_phi(ShiftedDrift.canonical(coeffs, jumps + [(0.0, params.rates[i])]),
                    params.r, x_max, tol, verify_truncation=verify_truncation)
    return psi, phi


@dataclass(frozen=True)
class BestResponse:
    """Optimal threshold of one agent against fixed opponent thresholds."""

    agent: int
    b_Z: float
    b_star_star: float
    value: _AgentValue
    E1: float
    E4: float


def _fit(psi, phi, b: float, K: float, r: float) -> tuple[float, float]:
    if b <= 0.0:
        return 0.0, -K / r
    fp, gp = psi.eval(b)
    fq, gq = phi.eval(b)
    wron = fq * gp - gq * fp
    return -(K / r) * gq / wron, -(K / r) * gp / wron


def best_response(coeffs: CoefficientModel, params: GameParams, i: int,
                  others: np.ndarray, x_max: float,
                  tol: float = 1e-10) -> BestResponse:
    """Solve agent i's one-player problem against fixed opponent thresholds.

    The threshold is 0 when phi_i'(0) >= -r/K_i or the inflection point of
    psi_i is 0; otherwise it is the unique root of
    psi_i/psi_i' - phi_i/phi_i' = K_i/r on (0, b**_i].
    """
    K, r = params.rates[i], params.r
    psi, phi = agent_fundamentals(coeffs, params, i, others, x_max, tol)
    b_ss = inflection_point(psi)
    phi_d0 = phi.eval(0.0)[1]
    if K * phi_d0 >= -r or b_ss <= 0.0:
        b_z = 0.0
    else:
        def defect(b: float) -> float:
            return psi.ratio(b) - phi.ratio(b) - K / r

        hi = defect(b_ss)
        if hi < 0.0:
            raise BracketFailure(
                f"agent {i}: ratio equation has no root on (0, b**={b_ss:.6g}]"
            )
        b_z = float(brentq(defect, 0.0, b_ss, xtol=1e-10))
    E1, E4 = _fit(psi, phi, b_z, K, r)
    return BestResponse(i, b_z, b_ss, _AgentValue(E1, E4, b_z, K, r, psi, phi),
                        E1, E4)


@dataclass(frozen=True)
class AsymmetricEquilibrium:
    """Converged threshold profile with per-agent value functions.

    ``residual`` is max_i |b_i - bZ_i(b_{-i})| re-evaluated with freshly
    built fundamentals at the converged profile.  ``alternatives`` lists
    additional converged profiles found by restarts that differ by more
    than 10x the tolerance; they are surfaced, not reconciled.
    """

    profile: ThresholdProfile
    E1: np.ndarray
    E4: np.ndarray
    values: list
    residual: float
    iterations: int
    params: GameParams
    c_bound: float
    x_max: float
    alternatives: list = field(default_factory=list)

    @property
    def thresholds(self) -> np.ndarray:
        return self.profile.thresholds

    def thresholds_in_input_order(self) -> np.ndarray:
        out = np.empty(self.params.n)
        out[list(self.params.order)] = self.thresholds
        return out


def value_at_i(eq: AsymmetricEquilibrium, i: int, x: float) -> float:
    """Agent i's equilibrium value V_i(x) (canonical agent order)."""
    if x < 0.0 or x > eq.x_max:
        raise OutOfDomain(f"x={x} outside [0, {eq.x_max}]")
    return eq.values[i](x)


def _halton(index: int, base: int) -> float:
    out, f = 0.0, 1.0
    i = index
    while i > 0:
        f /= base
        out += f * (i % base)
        i //= base
    return out


_HALTON_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


def _start_points(params: GameParams, coeffs, c_bound, restarts, init):
    starts = []
    if init is not None:
        starts.append(np.clip(np.asarray(init, dtype=float), 0.0, c_bound))
    else:
        single = [solve_symmetric(coeffs, symmetric_game(1, params.r, K)).b_hat
                  for K in params.rates]
        starts.append(np.clip(np.asarray(single), 0.0, c_bound))
    for k in range(restarts):
        pt = np.array([_halton(k + 1, _HALTON_BASES[j % len(_HALTON_BASES)])
                       for j in range(params.n)])
        starts.append(pt * c_bound)
    return starts


def solve_asymmetric(coeffs: CoefficientModel, params: GameParams,
                     init=None, damping: float = 0.5, tol: float = 1e-8,
                     max_iter: int = 500, restarts: int = 8,
                     ode_tol: float = 1e-10,
                     x_max: float | None = None) -> AsymmetricEquilibrium:
    """Damped simultaneous best-response iteration on the box [0, c]^n.

    b <- (1 - damping)*b + damping*bZ(b) until the residual max|b - bZ(b)|
    falls below ``tol``; on failure the iteration restarts from quasi-random
    points of the box.  Existence of a fixed point is guaranteed, convergence
    of this iteration is not, so exhausting all restarts raises
    :class:`NoConvergence` with the best residual found.

    The converged profile must be ordered like the rates and have pointwise
    ordered values; violations raise :class:`OrderingViolation` since such
    an iterate is not a valid equilibrium.
    """
    if not 0.0 < damping <= 1.0:
        raise InvalidConfig("damping must be in (0, 1]")
    c_bound = extinction_bound(coeffs, params.r)
    if x_max is None:
        x_max = 4.0 * c_bound

    def bz_all(b: np.ndarray, solve_tol: float) -> np.ndarray:
        return np.array([
            best_response(coeffs, params, i, np.delete(b, i), x_max, solve_tol).b_Z
            for i in range(params.n)
        ])

    best = (math.inf, None)
    converged: list[tuple[np.ndarray, int]] = []
    for attempt, start in enumerate(_start_points(params, coeffs, c_bound,
                                                  restarts, init)):
        b = start.copy()
        for it in range(1, max_iter + 1):
            bz = bz_all(b, ode_tol)
            residual = float(np.max(np.abs(b - bz)))
            if residual < best[0]:
                best = (residual, b.copy())
            if residual <= tol:
                converged.append((b.copy(), it))
                break
            b = np.clip((1.0 - damping) * b + damping * bz, 0.0, c_bound)
        if converged and attempt == 0:
            break  # restarts only probe for alternatives after a failure
    if not converged:
        raise NoConvergence(
            f"no fixed point to tolerance {tol} after {restarts + 1} starts",
            best_residual=best[0], best_profile=best[1],
        )

    b_conv, iterations = converged[0]
    # Snap to the exact best-response roots of the converged iterate, then
    # re-evaluate the residual with fresh fundamentals at the snapped profile.
    # This pins the smooth-fit property V_i'(b_i) = 1 to root-finder accuracy
    # instead of the looser fixed-point tolerance.
    b_fix = bz_all(b_conv, ode_tol)
    responses = [best_response(coeffs, params, i, np.delete(b_fix, i), x_max, ode_tol)
                 for i in range(params.n)]
    residual = float(np.max(np.abs(b_fix - np.array([z.b_Z for z in responses]))))
    values = []
    E1 = np.empty(params.n)
    E4 = np.empty(params.n)
    for i, z in enumerate(responses):
        e1, e4 = _fit(z.value.psi, z.value.phi, b_fix[i],
                      params.rates[i], params.r)
        E1[i], E4[i] = e1, e4
        values.append(_AgentValue(e1, e4, b_fix[i], params.rates[i], params.r,
                                  z.value.psi, z.value.phi))

    order_tol = 10.0 * tol
    if np.any(np.diff(b_fix) < -order_tol):
        raise OrderingViolation(
            f"thresholds {b_fix} not ordered with the rates {params.rates}"
        )
    xs = np.linspace(0.1, 2.0 * max(float(b_fix.max()), 1.0), 10)
    for x in xs:
        v = [values[i](float(x)) for i in range(params.n)]
        if np.any(np.diff(v) < -1e-6 * max(map(abs, v))):
            raise OrderingViolation(
                f"values not ordered with the rates at x={x:.4g}: {v}"
            )

    alternatives = [ThresholdProfile(p) for p, _ in converged[1:]
                    if np.max(np.abs(p - b_fix)) > 10.0 * tol]
    return AsymmetricEquilibrium(
        profile=ThresholdProfile(b_fix), E1=E1, E4=E4, values=values,
        residual=residual, iterations=iterations, params=params,
        c_bound=c_bound, x_max=x_max, alternatives=alternatives,
    )


def sweep_K2(coeffs: CoefficientModel, r: float, K1: float, K2_range,
             **solve_opts) -> SweepTable:
    """Two-player equilibria as the second agent's rate sweeps.

    Columns report thresholds by input label (agent 1 holds K1 fixed), the
    one-player threshold for rate K2 for comparison, and the solver
    diagnostics.  Each solve warm-starts from the neighboring K2 point.
    K2 = 0 is the degenerate one-player game: b2 = 0, b1 from n = 1.
    """
    from .model import asymmetric_game

    rows = []
    warm: np.ndarray | None = None  # by input label (b1, b2)
    for K2 in K2_range:
        K2 = float(K2)
        if K2 == 0.0:
            b1 = solve_symmetric(coeffs, symmetric_game(1, r, K1)).b_hat
            rows.append([0.0, b1, 0.0, 0.0, 0, 0.0])
            warm = np.array([b1, 0.0])
            continue
        params = asymmetric_game(r, [K1, K2])
        init = None
        if warm is not None:
            init = np.asarray(warm)[list(params.order)]  # input labels -> canonical
        eq = solve_asymmetric(coeffs, params, init=init, **solve_opts)
        by_input = eq.thresholds_in_input_order()
        single = solve_symmetric(coeffs, symmetric_game(1, r, K2)).b_hat
        rows.append([K2, by_input[0], by_input[1], single,
                     eq.iterations, eq.residual])
        warm = by_input
    header = ("K2", "b1_hat", "b2_hat", "b2_single_agent", "iterations", "residual")
    return SweepTable(header, np.array(rows), {})
