"""Asymptotic Poincaré map of the normal form and the first period doubling.

All formulas are leading-order expressions evaluated without their
remainders. Points on the section S- are described by ``(zeta0, J0)`` with
``0 < J0 < 1/e``; the small parameter ``k = 1/ln(1/J0)`` governs the size of
the neglected terms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (DegenerateCoefficients, DegenerateFold, NegativeDiscriminant,
                     NoConvergence, OutOfRange)
from .normalform import NormalFormCoeffs
from .systems import Jet3

__all__ = [
    "SectionPoint",
    "MapExpansion",
    "PDPrediction",
    "k_of",
    "A_of",
    "F_mu_expansion",
    "F_mu_map",
    "asymptotic_P_first_order",
    "solve_fixed_point",
    "sigma_for_J0",
    "trace_DF2",
    "predict_first_pd",
    "fhn_delta_star",
    "fold_distance",
    "hopf_estimate",
]

SQRT_PI = math.sqrt(math.pi)
LN4 = math.log(4.0)
EPS_MAX = 0.1


@dataclass(frozen=True)
class SectionPoint:
    zeta0: float
    J0: float

    def __post_init__(self):
        if not self.J0 > 0:
            raise OutOfRange(f"J0 = {self.J0!r} must be positive")

    @property
    def k(self) -> float:
        return k_of(self.J0)


@dataclass(frozen=True)
class MapExpansion:
    """First- and second-order components of F(mu) at a section point."""

    zeta1_3: float
    zeta2_3: float
    J1_3: float
    J2_3: float
    k: float


@dataclass(frozen=True)
class PDPrediction:
    eps: float
    zeta0_star: float
    J0_star: float
    delta_star: float
    sigma_star: float
    a_star: float

    def to_dict(self) -> dict:
        return {
            "eps": self.eps,
            "zeta0_star": self.zeta0_star,
            "J0_star": self.J0_star,
            "delta_star": self.delta_star,
            "sigma_star": self.sigma_star,
            "a_star": self.a_star,
        }


def k_of(J0: float) -> float:
    if not 0 < J0 < math.exp(-1.0):
        raise OutOfRange(f"J0 = {J0!r} outside (0, 1/e)")
    return 1.0 / math.log(1.0 / J0)


def A_of(zeta0: float, c: NormalFormCoeffs, sigma: float) -> float:
    """Leading first-order change of J across the map F(mu)."""
    return 0.5 * SQRT_PI * (-1.5 * c.gamma + c.alpha2 * zeta0 - 0.5 * c.alpha1
                            - c.gamma0_of(sigma))


def F_mu_expansion(p: SectionPoint, c: NormalFormCoeffs, sigma: float) -> MapExpansion:
    k = k_of(p.J0)
    z0, J0 = p.zeta0, p.J0
    b = c.beta1 + c.beta2 * k * z0
    A = A_of(z0, c, sigma)
    zeta1 = k ** -1.5 * (c.beta1 / 3 + c.beta2 * k * z0
                         + 0.5 * b * k * (math.log(1 / k) + LN4) - c.beta1 * k)
    zeta2 = -A * k ** -0.5 * b / (2 * J0)
    J2 = -A * k ** -1.5 * (c.alpha1 / 3 + c.alpha2 * k * z0 - c.gamma)
    return MapExpansion(zeta1_3=zeta1, zeta2_3=zeta2, J1_3=A, J2_3=J2, k=k)


def F_mu_map(p: SectionPoint, c: NormalFormCoeffs, sigma: float, mu: float) -> tuple[float, float]:
    """Image of ``p`` on S+ truncated after the mu^2 terms."""
    e = F_mu_expansion(p, c, sigma)
    return (p.zeta0 + mu * e.zeta1_3 + mu * mu * e.zeta2_3,
            p.J0 + mu * e.J1_3 + mu * mu * e.J2_3)


def asymptotic_P_first_order(p: SectionPoint, c: NormalFormCoeffs, sigma: float,
                             mu: float) -> tuple[float, float]:
    """Leading mismatch ``F(mu) - F(-mu)`` at ``p``, i.e. ``2 mu (zeta1, J1)``.

    It vanishes exactly at the fixed points of the return map to this order.
    """
    e = F_mu_expansion(p, c, sigma)
    return 2 * mu * e.zeta1_3, 2 * mu * e.J1_3


def _require_nondegenerate(c: NormalFormCoeffs) -> None:
    zero = [n for n in ("kappa", "alpha2", "beta1", "beta2") if getattr(c, n) == 0]
    if zero:
        raise DegenerateCoefficients(f"vanishing coefficient(s): {', '.join(zero)}")


def _offset(c: NormalFormCoeffs) -> float:
    return (3 * c.gamma + c.alpha1 + 2 * c.nu) / (2 * c.kappa)


def sigma_for_J0(J0: float, c: NormalFormCoeffs) -> float:
    """sigma whose asymptotic fixed point has the given J0 (expanded form)."""
    _require_nondegenerate(c)
    L = math.log(1 / J0)
    return (-(c.alpha2 * c.beta1) / (3 * c.beta2 * c.kappa) * (L + math.log(L) + LN4 - 3)
            - _offset(c))


def solve_fixed_point(sigma: float, c: NormalFormCoeffs, method: str = "asymptotic",
                      max_iter: int = 200, tol: float = 1e-14) -> SectionPoint:
    """Fixed point of the asymptotic return map for a given ``sigma``.

    Parameters
    ----------
    method : {"asymptotic", "exact"}
        ``"asymptotic"`` inverts the expanded relations
        ``zeta0 = -(beta1/3beta2) (L + ln L + ln 4 - 3)`` and the matching
        sigma(L) law, with ``L = ln(1/J0)``. ``"exact"`` instead zeroes the
        retained terms of ``zeta1`` and ``J1 = A(zeta0)`` simultaneously.

    Raises
    ------
    DegenerateCoefficients
        If kappa, alpha2, beta1 or beta2 vanishes.
    OutOfRange
        If sigma is too small for a solution with ``J0 < 1/e``.
    NoConvergence
        If the iteration on L does not settle within ``max_iter`` steps.
    """
    _require_nondegenerate(c)
    b1, b2 = c.beta1, c.beta2
    if method == "asymptotic":
        S = (sigma + _offset(c)) * (-3 * b2 * c.kappa / (c.alpha2 * b1))

        def update(L):
            return S - math.log(L) - LN4 + 3

        L0 = S
    elif method == "exact":
        zeta_t = (1.5 * c.gamma + 0.5 * c.alpha1 + c.gamma0_of(sigma)) / c.alpha2
        r = -(b2 / b1) * zeta_t

        def update(L):
            lnL = math.log(L)
            return 3 * (r * (1 + (lnL + LN4) / (2 * L)) - (lnL + LN4 - 2) / 2)

        L0 = 3 * r
    else:
        raise ValueError(f"unknown method {method!r}")

    L = L0
    for _ in range(max_iter):
        if not L > 1:
            raise OutOfRange(f"sigma = {sigma!r} gives no fixed point with J0 < 1/e")
        L_new = update(L)
        if abs(L_new - L) <= tol * abs(L):
            L = L_new
            break
        L = L_new
    else:
        raise NoConvergence(f"iteration on ln(1/J0) did not converge for sigma={sigma!r}")
    if not L > 1:
        raise OutOfRange(f"sigma = {sigma!r} gives no fixed point with J0 < 1/e")
    if method == "asymptotic":
        zeta0 = -b1 / (3 * b2) * (L + math.log(L) + LN4 - 3)
    else:
        zeta0 = zeta_t
    return SectionPoint(zeta0=zeta0, J0=math.exp(-L))


def trace_DF2(p: SectionPoint, c: NormalFormCoeffs) -> float:
    """Leading term of Tr D F2 at ``p``."""
    k = k_of(p.J0)
    return -SQRT_PI * k ** -0.5 / (4 * p.J0) * c.alpha2 * (c.beta1 + c.beta2 * k * p.zeta0)


def _pd_bracket(eps: float, c: NormalFormCoeffs) -> float:
    L = math.log(1 / eps)
    return L + 0.5 * math.log(L) - math.log(SQRT_PI * c.alpha2 * c.beta1 * math.e ** 3 / 24)


def predict_first_pd(eps: float, c: NormalFormCoeffs) -> PDPrediction:
    """Closed-form location of the first period doubling.

    Raises
    ------
    OutOfRange
        Unless ``0 < eps < 0.1``.
    DegenerateCoefficients
        If kappa, alpha2, beta1 or beta2 vanishes.
    NegativeDiscriminant
        If ``alpha2*beta1 <= 0``.
    """
    if not 0 < eps < EPS_MAX:
        raise OutOfRange(f"eps = {eps!r} outside (0, {EPS_MAX})")
    _require_nondegenerate(c)
    ab = c.alpha2 * c.beta1
    if not ab > 0:
        raise NegativeDiscriminant(f"alpha2*beta1 = {ab!r} must be positive")
    br = _pd_bracket(eps, c)
    zeta0 = -c.beta1 / (3 * c.beta2) * br
    J0 = SQRT_PI * ab / 6 * eps * math.sqrt(math.log(1 / eps))
    delta = -ab / (3 * c.beta2 * c.kappa) * eps * br - _offset(c) * eps
    return PDPrediction(eps=eps, zeta0_star=zeta0, J0_star=J0, delta_star=delta,
                        sigma_star=delta / eps, a_star=1.0 - delta)


def fhn_delta_star(eps: float) -> float:
    """The FitzHugh-Nagumo reduction of the doubling condition, written out."""
    L = math.log(1 / eps)
    return (eps / 12 * (L + 0.5 * math.log(L) - math.log(SQRT_PI * math.e ** 3 / 96))
            + 3 / 8 * eps)


def fold_distance(delta: float, jet: Jet3) -> float:
    """Leading-order distance between the equilibrium and the fold."""
    s = jet.F_y ** 2 + jet.F_z ** 2
    den = (jet.F_y * jet.F_xz) ** 2 + jet.F_xx ** 2 * s
    if s == 0 or den == 0:
        raise DegenerateFold("fold distance denominator vanishes")
    return delta * jet.F_xdelta * math.sqrt(s / den)


def hopf_estimate(eps: float) -> float:
    """Leading-order Andronov-Hopf value of ``a`` for FitzHugh-Nagumo."""
    return 1.0 - eps / 4
