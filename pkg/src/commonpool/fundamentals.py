"""Fundamental solutions of 1/2*sigma^2 f'' + mu_A f' - r f = 0.

``solve_psi`` builds the increasing positive solution (f(0)=0, f'(0)=1) by
forward integration; ``solve_phi`` builds the decreasing positive solution
(f(0)=1, f(inf)=0) by backward integration from a truncation point with the
terminal slope taken from the local negative characteristic exponent.  Drift
jump positions are hard integration breakpoints, so solutions are C^1 there
by construction and C^2 elsewhere.

Values are stored per grid point as (f, f') in a local scale together with
an accumulated log-scale exponent; ratios f/f' are therefore evaluable
without overflow no matter how fast the solution grows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import _rk
from .errors import (
    InvalidConfig,
    NonMonotone,
    NoSignChange,
    SignViolation,
    StepSizeUnderflow,
)
from .model import ShiftedDrift

__all__ = [
    "FundamentalSolution",
    "RatioEvaluator",
    "solve_psi",
    "solve_phi",
    "inflection_point",
    "ratio_f",
]

DEFAULT_TOL = 1e-10


def _char_exponents(m: float, s2: float, r: float) -> tuple[float, float]:
    """Roots of 1/2*s2*z^2 + m*z - r = 0, (positive, negative)."""
    disc = math.sqrt(m * m + 2.0 * r * s2)
    return (-m + disc) / s2, (-m - disc) / s2


class _AffineSegmentRunner:
    def __init__(self, drift: ShiftedDrift, r: float):
        mu0, mu1, sigma0 = drift.base.params
        self.mu0, self.mu1, self.s2 = mu0, mu1, sigma0 * sigma0
        self.drift, self.r = drift, r

    def h_store(self, xa, xb, shift):
        z = 0.0
        for x in (xa, xb):
            zp, zm = _char_exponents(self.mu0 + self.mu1 * x - shift, self.s2, self.r)
            z = max(z, abs(zp), abs(zm))
        return min(1.0, _rk.H_Z / max(z, 1e-6))

    def sigma2(self, x):
        return self.s2

    def run(self, xa, xb, f0, g0, ls0, shift, tol, check, out):
        return _rk.segment_affine(xa, xb, f0, g0, ls0, self.mu0, self.mu1,
                                  shift, self.s2, self.r, tol,
                                  self.h_store(xa, xb, shift), check, *out)


class _CallableSegmentRunner:
    def __init__(self, drift: ShiftedDrift, r: float):
        self.drift, self.r = drift, r

    def h_store(self, xa, xb, shift):
        z = 0.0
        for x in (xa, xb):
            zp, zm = _char_exponents(self.drift.base.mu(x) - shift,
                                     self.drift.base.sigma2(x), self.r)
            z = max(z, abs(zp), abs(zm))
        return min(1.0, _rk.H_Z / max(z, 1e-6))

    def sigma2(self, x):
        return self.drift.base.sigma2(x)

    def run(self, xa, xb, f0, g0, ls0, shift, tol, check, out):
        return _rk.segment_callable(xa, xb, f0, g0, ls0, self.drift.base.mu,
                                    shift, self.drift.base.sigma2, self.r, tol,
                                    self.h_store(xa, xb, shift), check, *out)


_STATUS_ERRORS = {
    1: (StepSizeUnderflow, "adaptive step underflow; coefficient model pathological"),
    3: (NonMonotone, "f' <= 0 detected while integrating the increasing solution"),
    4: (SignViolation, "f <= 0 or f' >= 0 detected while integrating the decreasing solution"),
}


def _integrate(drift: ShiftedDrift, r: float, bounds: list[float], f0: float,
               g0: float, tol: float, check: int):
    """Integrate across consecutive segment bounds, concatenating the grids."""
    runner = (_AffineSegmentRunner(drift, r) if drift.base.is_affine
              else _CallableSegmentRunner(drift, r))
    xs, fs, gs, lss = [], [], [], []
    f, g, ls = f0, g0, 0.0
    for k in range(len(bounds) - 1):
        xa, xb = bounds[k], bounds[k + 1]
        shift = drift.shift_at(0.5 * (xa + xb))
        cap = int(abs(xb - xa) / runner.h_store(xa, xb, shift) * 3) + 256
        while True:
            out = tuple(np.empty(cap) for _ in range(4))
            m, status = runner.run(xa, xb, f, g, ls, shift, tol, check, out)
            if status != 2:
                break
            cap *= 4
        if status != 0:
            err, msg = _STATUS_ERRORS[status]
            raise err(f"{msg} (near x={out[0][m - 1]:.6g})")
        lo = 1 if k > 0 else 0  # segment start duplicates previous end
        xs.append(out[0][lo:m])
        fs.append(out[1][lo:m])
        gs.append(out[2][lo:m])
        lss.append(out[3][lo:m])
        f, g, ls = out[1][m - 1], out[2][m - 1], out[3][m - 1]
    return (np.concatenate(xs), np.concatenate(fs),
            np.concatenate(gs), np.concatenate(lss))


@dataclass(frozen=True)
class FundamentalSolution:
    """A positive monotone solution on [0, x_max], stored scale-safely.

    ``values`` at grid point i are (f_i, f'_i) in the local scale; the true
    values are f_i * exp(log_scale_i).  Between grid points the solution is
    evaluated by quintic Hermite interpolation from (f, f', f'') at both
    ends, with f'' always taken from the ODE identity.
    """

    kind: str  # "increasing" | "decreasing"
    drift: ShiftedDrift
    r: float
    grid: np.ndarray
    values_f: np.ndarray
    values_g: np.ndarray
    log_scale: np.ndarray
    x_max: float
    tol: float
    truncation_defect: float | None = None

    def _interval(self, x: float) -> int:
        if x < 0.0 or x > self.x_max * (1.0 + 1e-12):
            raise InvalidConfig(f"x={x} outside [0, {self.x_max}]")
        i = int(np.searchsorted(self.grid, x, side="right")) - 1
        return min(max(i, 0), len(self.grid) - 2)

    def _mu_A(self, x: float, shift: float) -> float:
        return self.drift.base.mu(x) - shift

    def eval_scaled(self, x: float) -> tuple[float, float, float]:
        """(f, f', log_scale) at x; true values are (f, f') * exp(log_scale)."""
        i = self._interval(float(x))
        x0, x1 = self.grid[i], self.grid[i + 1]
        f0, g0, l0 = self.values_f[i], self.values_g[i], self.log_scale[i]
        f1, g1, l1 = self.values_f[i + 1], self.values_g[i + 1], self.log_scale[i + 1]
        ls = max(l0, l1)
        if l0 < ls:
            adj = math.exp(l0 - ls)
            f0, g0 = f0 * adj, g0 * adj
        if l1 < ls:
            adj = math.exp(l1 - ls)
            f1, g1 = f1 * adj, g1 * adj
        h = x1 - x0
        shift = self.drift.shift_at(0.5 * (x0 + x1))
        s0 = 2.0 * (self.r * f0 - self._mu_A(x0, shift) * g0) / self.drift.base.sigma2(x0)
        s1 = 2.0 * (self.r * f1 - self._mu_A(x1, shift) * g1) / self.drift.base.sigma2(x1)

        t = (float(x) - x0) / h
        G0, G1 = g0 * h, g1 * h
        S0, S1 = s0 * h * h, s1 * h * h
        A = f1 - f0 - G0 - 0.5 * S0
        B = G1 - G0 - S0
        C = S1 - S0
        c3 = 10.0 * A - 4.0 * B + 0.5 * C
        c4 = -15.0 * A + 7.0 * B - C
        c5 = 6.0 * A - 3.0 * B + 0.5 * C
        f = f0 + t * (G0 + t * (0.5 * S0 + t * (c3 + t * (c4 + t * c5))))
        fp = (G0 + t * (S0 + t * (3.0 * c3 + t * (4.0 * c4 + t * 5.0 * c5)))) / h
        return f, fp, ls

    def eval(self, x: float) -> tuple[float, float]:
        """(f, f') in true scale; may overflow to inf for huge solutions."""
        f, g, ls = self.eval_scaled(x)
        scale = math.exp(ls) if ls < 709.0 else math.inf
        return f * scale, g * scale

    def ratio(self, x: float) -> float:
        """f(x)/f'(x), scale factors cancel."""
        f, g, _ = self.eval_scaled(x)
        return f / g

    def curvature_indicator(self, x: float) -> float:
        """Same sign as f''(x): r*f - mu_A*f' in the local scale."""
        f, g, _ = self.eval_scaled(x)
        return self.r * f - self.drift.mu_shifted(float(x)) * g


def solve_psi(drift: ShiftedDrift, r: float, x_max: float,
              tol: float = DEFAULT_TOL) -> FundamentalSolution:
    """Increasing positive solution with f(0)=0, f'(0)=1.

    Forward initial-value integration with adaptive error control (local
    error <= tol per unit step) and multiplicative rescaling; every drift
    jump position is an integration breakpoint.
    """
    if x_max <= 0.0:
        raise InvalidConfig(f"x_max must be > 0, got {x_max}")
    bounds = [0.0] + drift.breakpoints_in(0.0, x_max) + [x_max]
    grid, f, g, ls = _integrate(drift, r, bounds, 0.0, 1.0, tol,
                                _rk.CHECK_INCREASING)
    return FundamentalSolution("increasing", drift, r, grid, f, g, ls,
                               x_max, tol)


def solve_phi(drift: ShiftedDrift, r: float, x_max: float,
              tol: float = DEFAULT_TOL,
              verify_truncation: bool = True) -> FundamentalSolution:
    """Decreasing positive solution with f(0)=1, vanishing at infinity.

    The condition at infinity is imposed at the truncation point x_max via
    the terminal pair (f, f') = (1, z_-) with z_- the negative root of
    1/2*sigma^2 z^2 + mu_A z - r = 0 at x_max; the solution is integrated
    backward to 0 and then normalized so that f(0) = 1 exactly.

    With ``verify_truncation`` the solve is repeated at 2*x_max and the
    relative change of f'(0) is recorded as ``truncation_defect``.
    """
    if x_max <= 0.0:
        raise InvalidConfig(f"x_max must be > 0, got {x_max}")
    m_end = drift.mu_shifted(x_max)
    _, z_minus = _char_exponents(m_end, drift.base.sigma2(x_max), r)
    bounds = [x_max] + sorted(drift.breakpoints_in(0.0, x_max), reverse=True) + [0.0]
    grid, f, g, ls = _integrate(drift, r, bounds, 1.0, z_minus, tol,
                                _rk.CHECK_DECREASING)
    grid, f, g, ls = grid[::-1].copy(), f[::-1].copy(), g[::-1].copy(), ls[::-1].copy()
    # Normalize so phi(0) = 1: dividing both components by the local f(0) and
    # shifting all log scales by log_scale(0) rescales the true solution.
    f0, ls0 = f[0], ls[0]
    f /= f0
    g /= f0
    ls -= ls0

    defect = None
    if verify_truncation:
        wide = solve_phi(drift, r, 2.0 * x_max, tol, verify_truncation=False)
        d0 = g[0]
        d1 = wide.values_g[0]
        defect = abs(d1 - d0) / max(abs(d0), 1e-300)
    return FundamentalSolution("decreasing", drift, r, grid, f, g, ls,
                               x_max, tol, truncation_defect=defect)


def inflection_point(psi: FundamentalSolution) -> float:
    """Unique level where the increasing solution turns from concave to convex.

    Returns 0 when the effective drift at 0 is <= 0.  Otherwise brackets the
    sign change of f'' (computed from the ODE identity, never by differencing)
    on the stored grid and bisects to absolute tolerance 1e-10.  A jump in the
    drift may itself carry the sign change; the jump position is returned then.
    """
    if psi.kind != "increasing":
        raise InvalidConfig("inflection_point requires an increasing solution")
    if psi.drift.mu_shifted(0.0) <= 0.0:
        return 0.0

    grid = psi.grid
    f, g, ls = psi.values_f, psi.values_g, psi.log_scale
    prev = -1.0  # sign of f'' at 0 is negative since mu_A(0) > 0
    for i in range(len(grid) - 1):
        x0, x1 = grid[i], grid[i + 1]
        shift = psi.drift.shift_at(0.5 * (x0 + x1))
        sL = psi.r * f[i] - (psi.drift.base.mu(x0) - shift) * g[i]
        sR = psi.r * f[i + 1] - (psi.drift.base.mu(x1) - shift) * g[i + 1]
        if prev < 0.0 <= sL:
            return float(x0)  # sign change exactly at a drift jump
        if sL < 0.0 <= sR:
            if sR == 0.0:
                return float(x1)
            return float(brentq(psi.curvature_indicator, x0, x1, xtol=1e-10))
        prev = sR
    raise NoSignChange("f'' has no sign change on the grid; increase x_max "
                       "or revisit the model assumptions")


@dataclass(frozen=True)
class RatioEvaluator:
    """Evaluates psi/psi' and phi/phi' with all scale factors cancelled."""

    psi: FundamentalSolution
    phi: FundamentalSolution

    def f(self, b: float) -> float:
        return self.psi.ratio(b) - self.phi.ratio(b)


def ratio_f(ratios: RatioEvaluator, b: float) -> float:
    """psi(b)/psi'(b) - phi(b)/phi'(b); at b=0 this is -1/phi'(0)."""
    return ratios.f(b)
