"""Game data model: diffusion coefficients, game parameters, assumption checks.

The state process is dX = (mu(X) - total extraction) dt + sigma(X) dB,
absorbed at 0.  Everything downstream (fundamental solutions, thresholds,
simulation) takes a :class:`CoefficientModel` plus :class:`GameParams`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DriftDerivativeTooLarge,
    InvalidConfig,
    NoExtinctionBound,
    NonPositiveDriftAtZero,
    NonPositiveSigma,
)

__all__ = [
    "CoefficientModel",
    "GameParams",
    "ShiftedDrift",
    "AssumptionReport",
    "constant",
    "affine_drift",
    "user_defined",
    "validate_assumptions",
    "extinction_bound",
    "model_from_json",
    "game_from_json",
]


@dataclass(frozen=True)
class CoefficientModel:
    """Drift/diffusion coefficients with an explicit drift derivative.

    The derivative is supplied, never differenced numerically: the standing
    drift condition mu' < r must be checked exactly as given.

    ``kind`` is one of ``constant``, ``affine``, ``user``.  For the first two
    ``params = (mu0, mu1, sigma0)`` with mu(x) = mu0 + mu1*x and constant
    sigma0 > 0; solvers use this to dispatch to compiled kernels.
    """

    mu: Callable[[float], float]
    mu_prime: Callable[[float], float]
    sigma: Callable[[float], float]
    kind: str
    params: tuple | None = None

    @property
    def is_affine(self) -> bool:
        return self.params is not None

    def sigma2(self, x: float) -> float:
        s = self.sigma(x)
        return s * s


def constant(mu: float, sigma: float) -> CoefficientModel:
    """Model with constant drift mu and constant diffusion coefficient sigma."""
    if sigma <= 0.0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    mu = float(mu)
    sigma = float(sigma)
    return CoefficientModel(
        mu=lambda x, _m=mu: _m,
        mu_prime=lambda x: 0.0,
        sigma=lambda x, _s=sigma: _s,
        kind="constant",
        params=(mu, 0.0, sigma),
    )


def affine_drift(mu0: float, mu1: float, sigma: float, r: float) -> CoefficientModel:
    """Model with drift mu0 + mu1*x and constant sigma; requires mu1 < r."""
    if sigma <= 0.0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    if mu1 >= r:
        raise DriftDerivativeTooLarge(
            f"affine drift slope {mu1} must be < discount rate {r}"
        )
    mu0 = float(mu0)
    mu1 = float(mu1)
    sigma = float(sigma)
    return CoefficientModel(
        mu=lambda x, _a=mu0, _b=mu1: _a + _b * x,
        mu_prime=lambda x, _b=mu1: _b,
        sigma=lambda x, _s=sigma: _s,
        kind="affine",
        params=(mu0, mu1, sigma),
    )


def user_defined(mu, mu_prime, sigma) -> CoefficientModel:
    """Model from arbitrary callables (solved on the non-compiled path)."""
    return CoefficientModel(mu=mu, mu_prime=mu_prime, sigma=sigma, kind="user", params=None)


@dataclass(frozen=True)
class GameParams:
    """Number of agents, discount rate, maximal extraction rate(s).

    In asymmetric mode rates are stored ascending (K_1 <= ... <= K_n) and
    ``order`` records the permutation: ``rates[i]`` is the rate of input
    agent ``order[i]``, so the input ordering is always recoverable.
    """

    n: int
    r: float
    rates: np.ndarray
    symmetric: bool
    order: tuple = field(default=())

    def __post_init__(self):
        if self.n < 1:
            raise InvalidConfig(f"n must be >= 1, got {self.n}")
        if self.r <= 0.0:
            raise InvalidConfig(f"r must be > 0, got {self.r}")
        if np.any(np.asarray(self.rates) <= 0.0):
            raise InvalidConfig("every extraction rate must be > 0")

    @property
    def K(self) -> float:
        if not self.symmetric:
            raise InvalidConfig("K is only defined for symmetric games")
        return float(self.rates[0])

    def rates_in_input_order(self) -> np.ndarray:
        out = np.empty_like(self.rates)
        out[list(self.order)] = self.rates
        return out


def symmetric_game(n: int, r: float, K: float) -> GameParams:
    rates = np.full(n, float(K))
    return GameParams(n=int(n), r=float(r), rates=rates, symmetric=True,
                      order=tuple(range(int(n))))


def asymmetric_game(r: float, rates: Sequence[float]) -> GameParams:
    arr = np.asarray(rates, dtype=float)
    order = np.argsort(arr, kind="stable")
    return GameParams(n=len(arr), r=float(r), rates=arr[order],
                      symmetric=False, order=tuple(int(i) for i in order))


@dataclass(frozen=True)
class ShiftedDrift:
    """Drift shifted down by piecewise-constant extraction.

    The effective drift is mu(x) - sum of sizes over jumps with position <= x.
    A constant downward shift A is a jump at position 0.  Jump positions are
    canonicalized: sorted strictly, duplicates merged by summing sizes, zero
    sizes dropped.
    """

    base: CoefficientModel
    jumps: tuple = ()

    @staticmethod
    def canonical(base: CoefficientModel, jumps) -> "ShiftedDrift":
        merged: dict[float, float] = {}
        for pos, size in jumps:
            if pos < 0.0:
                raise InvalidConfig(f"jump position must be >= 0, got {pos}")
            merged[float(pos)] = merged.get(float(pos), 0.0) + float(size)
        clean = tuple(sorted((p, s) for p, s in merged.items() if s != 0.0))
        return ShiftedDrift(base=base, jumps=clean)

    @staticmethod
    def constant_shift(base: CoefficientModel, A: float) -> "ShiftedDrift":
        if A < 0.0:
            raise InvalidConfig(f"constant shift must be >= 0, got {A}")
        return ShiftedDrift.canonical(base, [(0.0, A)] if A > 0.0 else [])

    @staticmethod
    def from_thresholds(base: CoefficientModel, positions, sizes) -> "ShiftedDrift":
        return ShiftedDrift.canonical(base, zip(positions, sizes))

    def shift_at(self, x: float) -> float:
        return sum(s for p, s in self.jumps if x >= p)

    def mu_shifted(self, x: float) -> float:
        return self.base.mu(x) - self.shift_at(x)

    def breakpoints_in(self, lo: float, hi: float) -> list[float]:
        return [p for p, _ in self.jumps if lo < p < hi]


@dataclass(frozen=True)
class AssumptionReport:
    """Outcome of sampling the standing assumptions on a finite grid.

    ``violations`` holds (assumption id, witness grid point, observed value).
    ``c_bound`` is the extinction bound: mu(x) <= r*x - 1/c_bound for all
    checked x >= c_bound.  ``linear_growth_C`` is the fitted constant of the
    linear growth bound; informational only.
    """

    passed: bool
    violations: tuple
    c_bound: float
    linear_growth_C: float


_ASSUMPTION_ERRORS = {
    "A2": NonPositiveSigma,
    "A3-derivative": DriftDerivativeTooLarge,
    "A3-extinction": NoExtinctionBound,
    "A4": NonPositiveDriftAtZero,
}


def _hybrid_grid(x_max: float, points: int) -> np.ndarray:
    """Geometric + uniform sampling of [0, x_max], always including 0."""
    k = max(points // 2, 2)
    geo = np.geomspace(x_max * 1e-8, x_max, k)
    uni = np.linspace(0.0, x_max, points - k + 1)
    return np.unique(np.concatenate([[0.0], geo, uni]))


def validate_assumptions(coeffs: CoefficientModel, params: GameParams,
                         grid_spec: dict | None = None,
                         raise_on_failure: bool = True) -> AssumptionReport:
    """Spot-check the standing assumptions on a finite grid.

    This is necessary-condition checking, not a proof: the conditions are
    global but can only be sampled.  Checks, on a hybrid geometric/uniform
    grid over [0, x_max]:

    * sigma(x)^2 > 0                          (id ``A2``)
    * mu'(x) < r                              (id ``A3-derivative``)
    * mu(0) > 0                               (id ``A4``)
    * existence of the extinction bound c     (id ``A3-extinction``)

    The fitted linear-growth constant is reported but never fails validation.
    With ``raise_on_failure`` the exception matching the first violation is
    raised; otherwise the report is returned with ``passed=False``.
    """
    spec = {"x_max": 200.0, "points": 400}
    if grid_spec:
        spec.update(grid_spec)
    x_max, points = float(spec["x_max"]), int(spec["points"])
    if x_max <= 0.0 or points < 2:
        raise InvalidConfig("grid_spec requires x_max > 0 and points >= 2")

    grid = _hybrid_grid(x_max, points)
    violations = []

    for x in grid:
        s2 = coeffs.sigma2(float(x))
        if not (s2 > 0.0):
            violations.append(("A2", float(x), s2))
            break
    for x in grid:
        mp = coeffs.mu_prime(float(x))
        if not (mp < params.r):
            violations.append(("A3-derivative", float(x), mp))
            break
    mu0 = coeffs.mu(0.0)
    if not (mu0 > 0.0):
        violations.append(("A4", 0.0, mu0))

    c_bound = np.nan
    if not any(v[0] == "A3-derivative" for v in violations):
        try:
            c_bound = extinction_bound(coeffs, params.r, ceiling=x_max)
        except NoExtinctionBound:
            violations.append(("A3-extinction", x_max, np.nan))

    growth = max(
        (abs(coeffs.sigma(float(x))) + abs(coeffs.mu(float(x)))) / (1.0 + float(x))
        for x in grid
    )

    report = AssumptionReport(
        passed=not violations,
        violations=tuple(violations),
        c_bound=float(c_bound),
        linear_growth_C=float(growth),
    )
    if violations and raise_on_failure:
        aid, x, val = violations[0]
        raise _ASSUMPTION_ERRORS[aid](
            f"assumption {aid} fails at x={x:.6g} (observed {val!r})"
        )
    return report


def extinction_bound(coeffs: CoefficientModel, r: float,
                     ceiling: float = 1e8) -> float:
    """Smallest c >= 1 with mu(x) <= r*x - 1/c for all x >= c.

    Under the drift-derivative condition mu' < r the defect
    h(c) = r*c - 1/c - mu(c) is increasing in c and the inequality for all
    x >= c reduces to the single point x = c, so the bound is located by
    doubling from c = 1 and bracketed root finding (tolerance 1e-10*(1+c)).
    The result is verified a posteriori on a dense sample of [c, 4c]; this
    guards against callers whose mu_prime understates the actual drift.

    The returned c caps every equilibrium threshold and defines the
    fixed-point search box [0, c]^n for the asymmetric solver.
    """
    def h(c: float) -> float:
        return r * c - 1.0 / c - coeffs.mu(c)

    lo = 1.0
    if h(lo) >= 0.0:
        c = lo
    else:
        hi = 2.0
        while h(hi) < 0.0:
            lo, hi = hi, hi * 2.0
            if hi > ceiling:
                raise NoExtinctionBound(
                    f"no extinction bound below ceiling {ceiling:.3g}"
                )
        c = brentq(h, lo, hi, xtol=1e-10 * (1.0 + hi))
        if h(c) < 0.0:  # land on the feasible side of the root
            c += 2e-10 * (1.0 + c)
    if c > ceiling:
        raise NoExtinctionBound(f"extinction bound {c:.6g} above ceiling {ceiling:.3g}")

    xs = np.linspace(c, max(4.0 * c, c + 10.0), 1000)
    slack = 1e-9 * (1.0 + abs(r) * xs[-1])
    for x in xs:
        if coeffs.mu(float(x)) > r * x - 1.0 / c + slack:
            raise NoExtinctionBound(
                f"candidate c={c:.6g} fails the defining inequality at x={x:.6g}; "
                "drift does not satisfy the extinction condition"
            )
    return float(c)


# --- JSON wire format -------------------------------------------------------

def model_from_json(doc: dict) -> CoefficientModel:
    """Build a CoefficientModel from its JSON description.

    ``{"kind": "constant", "mu": 4.0, "sigma2": 2.0}`` or
    ``{"kind": "affine", "mu0": ..., "mu1": ..., "sigma2": ..., "r": ...}``.
    Unknown keys are rejected.
    """
    if not isinstance(doc, dict) or "kind" not in doc:
        raise InvalidConfig("model document must be an object with a 'kind' key")
    kind = doc["kind"]
    if kind == "constant":
        _require_keys(doc, {"kind", "mu", "sigma2"})
        return constant(float(doc["mu"]), float(np.sqrt(doc["sigma2"])))
    if kind == "affine":
        _require_keys(doc, {"kind", "mu0", "mu1", "sigma2", "r"})
        return affine_drift(float(doc["mu0"]), float(doc["mu1"]),
                            float(np.sqrt(doc["sigma2"])), float(doc["r"]))
    raise InvalidConfig(f"unknown model kind {kind!r}")


def game_from_json(doc: dict) -> GameParams:
    """Build GameParams from ``{"n":..,"r":..,"K":..}`` or ``{"r":..,"rates":[..]}``."""
    if not isinstance(doc, dict):
        raise InvalidConfig("game document must be an object")
    if "K" in doc:
        _require_keys(doc, {"n", "r", "K"})
        return symmetric_game(int(doc["n"]), float(doc["r"]), float(doc["K"]))
    if "rates" in doc:
        _require_keys(doc, {"r", "rates"} | ({"n"} if "n" in doc else set()))
        rates = [float(v) for v in doc["rates"]]
        if "n" in doc and int(doc["n"]) != len(rates):
            raise InvalidConfig("n does not match len(rates)")
        return asymmetric_game(float(doc["r"]), rates)
    raise InvalidConfig("game document needs either 'K' or 'rates'")


def _require_keys(doc: dict, allowed: set):
    extra = set(doc) - allowed
    if extra:
        raise InvalidConfig(f"unknown keys in config: {sorted(extra)}")
    missing = allowed - set(doc)
    if missing:
        raise InvalidConfig(f"missing keys in config: {sorted(missing)}")
