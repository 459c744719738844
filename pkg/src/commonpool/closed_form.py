"""Exact constant-coefficient engine.

For constant drift mu and diffusion sigma the fundamental solutions are
explicit exponentials, so symmetric thresholds and two-player asymmetric
equilibria reduce to algebra on the characteristic exponents.  This module
is the oracle against which the general ODE pipeline is verified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, InvalidConfig, NoEquilibriumFound, SingularSystem

__all__ = [
    "CharacteristicRoots",
    "ClosedFormSymmetric",
    "TwoPlayerPieces",
    "TwoPlayerEquilibrium",
    "roots_for",
    "one_player_barrier",
    "symmetric_closed_form",
    "two_player_pieces",
    "two_player_equilibrium",
]


@dataclass(frozen=True)
class CharacteristicRoots:
    """Roots of 1/2*sigma^2 z^2 + (drift) z - r = 0 for the drifts in play.

    alpha/beta belong to the unshifted drift mu, gamma to mu - n*K (the
    decreasing root), alpha1/beta1 to mu - K1 and beta2 to mu - K1 - K2
    in the two-player system.  Unused entries are NaN.
    """

    alpha: float
    beta: float
    gamma: float = math.nan
    alpha1: float = math.nan
    beta1: float = math.nan
    beta2: float = math.nan


def _pair(m: float, sigma2: float, r: float) -> tuple[float, float]:
    disc = math.sqrt((m / sigma2) ** 2 + 2.0 * r / sigma2)
    return -m / sigma2 + disc, -m / sigma2 - disc


def roots_for(mu: float, sigma2: float, r: float, *, nK: float = 0.0,
              K1: float | None = None, K2: float | None = None) -> CharacteristicRoots:
    alpha, beta = _pair(mu, sigma2, r)
    gamma = _pair(mu - nK, sigma2, r)[1] if nK or nK == 0.0 else math.nan
    if K1 is None:
        return CharacteristicRoots(alpha, beta, gamma)
    alpha1, beta1 = _pair(mu - K1, sigma2, r)
    beta2 = _pair(mu - K1 - (K2 or 0.0), sigma2, r)[1]
    return CharacteristicRoots(alpha, beta, gamma, alpha1, beta1, beta2)


def one_player_barrier(mu: float, sigma2: float, r: float) -> float:
    """Inflection point of the increasing solution, in closed form.

    The sign change of r*f - mu*f' happens where
    e^{(alpha-beta)x} = (r - mu*beta)/(r - mu*alpha); both sides of the
    quotient equal sigma^2 z^2/2 > 0, giving b* = 2 ln(|beta|/alpha)/(alpha-beta).
    """
    if mu <= 0.0:
        return 0.0
    alpha, beta = _pair(mu, sigma2, r)
    return 2.0 * math.log(-beta / alpha) / (alpha - beta)


@dataclass(frozen=True)
class ClosedFormSymmetric:
    """Symmetric equilibrium threshold and value parameters, exact."""

    b_hat: float
    D1: float
    D4: float
    K: float
    r: float
    roots: CharacteristicRoots

    def psi(self, x: float) -> tuple[float, float]:
        a, b = self.roots.alpha, self.roots.beta
        ea, eb = math.exp(a * x), math.exp(b * x)
        return (ea - eb) / (a - b), (a * ea - b * eb) / (a - b)

    def phi(self, x: float) -> tuple[float, float]:
        g = self.roots.gamma
        eg = math.exp(g * x)
        return eg, g * eg

    def value(self, x: float) -> float:
        if x <= self.b_hat:
            return self.D1 * self.psi(x)[0]
        return self.D4 * self.phi(x)[0] + self.K / self.r

    def value_prime(self, x: float) -> float:
        if x <= self.b_hat:
            return self.D1 * self.psi(x)[1]
        return self.D4 * self.phi(x)[1]


def symmetric_closed_form(mu: float, sigma2: float, r: float, n: int,
                          K: float) -> ClosedFormSymmetric:
    """Exact symmetric threshold for constant coefficients.

    The positive-threshold condition is (K/r)*(-gamma) > 1 (ties resolve to
    the zero threshold); in that case

        b_hat = ln((1 - (K/r + 1/gamma)*beta) / (1 - (K/r + 1/gamma)*alpha))
                / (alpha - beta).
    """
    if mu <= 0.0 or sigma2 <= 0.0 or r <= 0.0 or K < 0.0:
        raise InvalidConfig("need mu > 0, sigma2 > 0, r > 0, K >= 0")
    roots = roots_for(mu, sigma2, r, nK=n * K)
    a, b, g = roots.alpha, roots.beta, roots.gamma

    if K * (-g) <= r:  # zero-threshold branch, including the boundary tie
        return ClosedFormSymmetric(0.0, 0.0, -K / r, K, r, roots)

    q = K / r + 1.0 / g
    num, den = 1.0 - q * b, 1.0 - q * a
    if num <= 0.0 or den <= 0.0:
        raise DomainError(
            f"log argument nonpositive ({num:.3g}/{den:.3g}); "
            "threshold condition misclassified"
        )
    b_hat = math.log(num / den) / (a - b)

    psi_v = (math.exp(a * b_hat) - math.exp(b * b_hat)) / (a - b)
    psi_d = (a * math.exp(a * b_hat) - b * math.exp(b * b_hat)) / (a - b)
    phi_v = math.exp(g * b_hat)
    phi_d = g * phi_v
    wron = phi_v * psi_d - phi_d * psi_v
    D1 = -(K / r) * phi_d / wron
    D4 = -(K / r) * psi_d / wron
    return ClosedFormSymmetric(b_hat, D1, D4, K, r, roots)


# --- two-player asymmetric system -------------------------------------------

@dataclass(frozen=True)
class TwoPlayerPieces:
    """Pasting constants of the piecewise-exponential agent solutions.

    F1, F2 make the larger agent's increasing solution C^1 at b1; F3, F4 make
    the smaller agent's decreasing solution C^1 at b2.  C is the decreasing
    normalization of the larger agent; it cancels in every ratio and is
    recorded as the placeholder 1.
    """

    F1: float
    F2: float
    F3: float
    F4: float
    C: float = 1.0


def _psi_vals(x: float, a: float, b: float) -> tuple[float, float]:
    ea, eb = math.exp(a * x), math.exp(b * x)
    return (ea - eb) / (a - b), (a * ea - b * eb) / (a - b)


def _f3_of_b2(b2: float, a1: float, b1_: float, b2_: float) -> float:
    den = math.exp(a1 * b2) * (a1 - b2_) - math.exp(b1_ * b2) * (b1_ - b2_)
    if abs(den) < 1e-300:
        raise SingularSystem("degenerate pasting system for F3/F4")
    return -(b1_ - b2_) * math.exp(b1_ * b2) / den


def two_player_pieces(mu: float, sigma2: float, r: float, K1: float, K2: float,
                      b1: float, b2: float) -> TwoPlayerPieces:
    """Solve both 2x2 pasting systems by direct elimination.

    Exponentials are evaluated in shifted form around the pasting points,
    which keeps the systems well conditioned for large thresholds.
    """
    if not 0.0 <= b1 <= b2:
        raise InvalidConfig(f"need 0 <= b1 <= b2, got ({b1}, {b2})")
    roots = roots_for(mu, sigma2, r, K1=K1, K2=K2)
    a, b = roots.alpha, roots.beta
    a1, b1_, b2_ = roots.alpha1, roots.beta1, roots.beta2
    if abs(a1 - b1_) < 1e-300:
        raise SingularSystem("degenerate pasting system for F1/F2")

    psi_v, psi_d = _psi_vals(b1, a, b)
    G1 = (psi_d - b1_ * psi_v) / (a1 - b1_)
    G2 = (psi_d - a1 * psi_v) / (a1 - b1_)
    F1 = G1 * math.exp(-a1 * b1)
    F2 = G2 * math.exp(-b1_ * b1)

    F3 = _f3_of_b2(b2, a1, b1_, b2_)
    phi1_b2 = F3 * math.exp(a1 * b2) - (F3 - 1.0) * math.exp(b1_ * b2)
    F4 = phi1_b2 * math.exp(-b2_ * b2)
    return TwoPlayerPieces(F1, F2, F3, F4)


def _b2_of_b1(b1: float, roots: CharacteristicRoots, K2: float, r: float) -> float:
    """Threshold of the larger agent implied by the smaller agent's b1."""
    a, b = roots.alpha, roots.beta
    a1, b1_, b2_ = roots.alpha1, roots.beta1, roots.beta2
    psi_v, psi_d = _psi_vals(b1, a, b)
    q = K2 / r + 1.0 / b2_
    top = (psi_d - a1 * psi_v) * (1.0 - q * b1_)
    bot = (psi_d - b1_ * psi_v) * (1.0 - q * a1)
    if top <= 0.0 or bot <= 0.0:
        raise DomainError("log argument nonpositive in the b2(b1) formula")
    return (math.log(top / bot) + (a1 - b1_) * b1) / (a1 - b1_)


@dataclass(frozen=True)
class TwoPlayerEquilibrium:
    """Equilibrium thresholds in ascending-rate order (agent 1 has K1 <= K2).

    ``kind`` records which branch produced the result: ``interior`` for
    b2 >= b1 > 0, ``boundary-b1`` for (0, b2) with b2 > 0, ``origin`` for
    (0, 0).  The boundary kinds deserve extra scrutiny.
    """

    b1_hat: float
    b2_hat: float
    kind: str
    roots: CharacteristicRoots


def two_player_equilibrium(mu: float, sigma2: float, r: float, K1: float,
                           K2: float, scan_points: int = 2000) -> TwoPlayerEquilibrium:
    """Thresholds (b1_hat, b2_hat) for two agents with rates 0 < K1 <= K2.

    Scans b1 over (0, b*] for a root of the smaller agent's ratio equation,
    with b2 eliminated through the explicit b2(b1) mapping and F3 evaluated
    at that b2.  If no interior root exists, falls back to the boundary
    equilibrium (0, b2) and then to (0, 0), checking in each case that both
    agents' zero-threshold conditions actually hold.
    """
    if not 0.0 < K1 <= K2:
        raise InvalidConfig(f"need 0 < K1 <= K2, got ({K1}, {K2})")
    roots = roots_for(mu, sigma2, r, K1=K1, K2=K2)
    a1, b1_, b2_ = roots.alpha1, roots.beta1, roots.beta2
    b_star = one_player_barrier(mu, sigma2, r)

    def ratio_defect(b1v: float) -> float:
        # Below the diagonal the b2(b1) mapping leaves the ordered regime;
        # clamping b2 to b1 is the exact continuation there, since C^1
        # pasting at b2 makes phi1/phi1' equal 1/beta2 at the threshold.
        b2v = max(_b2_of_b1(b1v, roots, K2, r), b1v)
        f3 = _f3_of_b2(b2v, a1, b1_, b2_)
        e_a, e_b = math.exp(a1 * b1v), math.exp(b1_ * b1v)
        phi_v = f3 * e_a - (f3 - 1.0) * e_b
        phi_d = f3 * a1 * e_a - (f3 - 1.0) * b1_ * e_b
        psi_v, psi_d = _psi_vals(b1v, roots.alpha, roots.beta)
        return psi_v / psi_d - phi_v / phi_d - K1 / r

    grid = np.linspace(b_star / scan_points, b_star, scan_points)
    trace = []
    prev = None
    for b1v in grid:
        try:
            val = ratio_defect(float(b1v))
        except (DomainError, SingularSystem):
            prev = None
            continue
        trace.append((float(b1v), val))
        if prev is not None and prev[1] * val <= 0.0:
            if val == 0.0:
                b1_hat = float(b1v)
            else:
                b1_hat = float(brentq(ratio_defect, prev[0], float(b1v), xtol=1e-12))
            b2_raw = _b2_of_b1(b1_hat, roots, K2, r)
            if b2_raw >= b1_hat - 1e-6 * (1.0 + b1_hat):
                return TwoPlayerEquilibrium(b1_hat, max(b2_raw, b1_hat),
                                            "interior", roots)
            break  # clamped root is not a joint equilibrium; try boundaries
        prev = (float(b1v), val)

    # kind (ii): agent 1 always extracts; agent 2 solves a one-player game
    # against the constant shift K1.
    sub = symmetric_closed_form(mu - K1, sigma2, r, 1, K2) if mu - K1 > 0.0 else None
    b2_hat = sub.b_hat if sub is not None else 0.0
    if b2_hat > 0.0:
        f3 = _f3_of_b2(b2_hat, a1, b1_, b2_)
        phi1_d0 = f3 * a1 - (f3 - 1.0) * b1_
        if phi1_d0 * K1 >= -r:  # agent 1's best response to b2 is 0
            return TwoPlayerEquilibrium(0.0, b2_hat, "boundary-b1", roots)
    # kind (i): both always extract; decreasing solutions are e^{beta2 x}.
    if b2_ * K1 >= -r and b2_ * K2 >= -r:
        return TwoPlayerEquilibrium(0.0, 0.0, "origin", roots)
    raise NoEquilibriumFound(
        "no interior, boundary or origin equilibrium found", scan_trace=trace
    )
