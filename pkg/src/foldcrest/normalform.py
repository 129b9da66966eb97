"""Normal form near an equilibrium-fold pair.

The coefficients are obtained through three stages: the linear change that
diagonalises the obvious integral of the leading part (stage 2), the scaling
that brings the leading part to ``xi' = xi^2 - eta, eta' = 2 xi`` (stage 3),
and a close-to-identity change that removes the remaining first-order terms.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .errors import DegenerateFold, OutOfRange, StabilityViolation
from .systems import Jet3, check_conditions

__all__ = [
    "StageCoeffs",
    "Scaling",
    "StagedCoeffs",
    "NormalFormCoeffs",
    "MuQuadraticCoeffs",
    "NFState",
    "compute_D",
    "stage2",
    "stage3",
    "scaling",
    "final_coeffs",
    "fhn_coeffs",
    "closed_beta1",
    "closed_alpha2",
    "closed_beta2",
    "closed_nu",
    "nf_rhs",
    "nf_field",
    "nf_rhs_fhn_exact",
    "nf_field_fhn_exact",
    "J_of",
    "J_rate",
    "eta_on_section",
    "eta_on_section_plus",
]

_INV_E = math.exp(-1.0)


@dataclass(frozen=True)
class StageCoeffs:
    gamma0: float
    gamma1: float
    gamma2: float
    gamma3: float
    alpha1: float
    alpha2: float
    alpha3: float
    beta1: float
    beta2: float
    beta3: float


@dataclass(frozen=True)
class Scaling:
    """``X2 = k X3, Y2 = m Y3, s = n tau``."""

    m: float
    k_scale: float
    n: float


@dataclass(frozen=True)
class StagedCoeffs:
    stage2: StageCoeffs
    stage3: StageCoeffs
    scaling: Scaling
    sigma: float

    def to_dict(self) -> dict:
        out = {f"{k}_2": v for k, v in asdict(self.stage2).items()}
        out.update({f"{k}_3": v for k, v in asdict(self.stage3).items()})
        out.update(asdict(self.scaling))
        out["sigma"] = self.sigma
        return out


@dataclass(frozen=True)
class MuQuadraticCoeffs:
    """Coefficients of the second-order terms g1, g2, g3.

    They are not derived from the original system; all zero by default.
    """

    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 0.0
    gamma4: float = 0.0
    gamma5: float = 0.0
    gamma6: float = 0.0
    gamma7: float = 0.0
    alpha3: float = 0.0
    alpha4: float = 0.0
    alpha5: float = 0.0
    beta3: float = 0.0
    beta4: float = 0.0
    beta5: float = 0.0


ZERO_Q = MuQuadraticCoeffs()


@dataclass(frozen=True)
class NormalFormCoeffs:
    """First-order normal-form coefficients; ``gamma0 = kappa*sigma + nu``."""

    D: float
    kappa: float
    nu: float
    gamma: float
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float
    staged: StagedCoeffs | None = None

    def gamma0_of(self, sigma: float) -> float:
        return self.kappa * sigma + self.nu

    def to_dict(self, staged: bool = False) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "staged"}
        if staged and self.staged is not None:
            out["staged"] = self.staged.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "NormalFormCoeffs":
        names = [f.name for f in fields(cls) if f.name != "staged"]
        missing = [n for n in names if n not in data]
        if missing:
            raise KeyError(f"missing coefficients: {', '.join(missing)}")
        return cls(**{n: float(data[n]) for n in names})

    def with_overrides(self, **values: float) -> "NormalFormCoeffs":
        allowed = {f.name for f in fields(self)} - {"staged"}
        bad = set(values) - allowed
        if bad:
            raise KeyError(f"unknown coefficient(s): {', '.join(sorted(bad))}")
        return replace(self, staged=None, **{k: float(v) for k, v in values.items()})


@dataclass(frozen=True)
class NFState:
    xi: float
    eta: float
    zeta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.xi, self.eta, self.zeta])

    @property
    def J(self) -> float:
        return J_of(self)


def compute_D(jet: Jet3) -> float:
    return jet.F_y * jet.G1_x + jet.F_z * jet.G2_x


def _require_stable(jet: Jet3) -> float:
    D = compute_D(jet)
    if not D < 0:
        raise StabilityViolation(f"D = {D!r} must be negative")
    return D


def stage2(jet: Jet3, sigma: float = 1.0) -> StageCoeffs:
    D = _require_stable(jet)
    j = jet
    return StageCoeffs(
        gamma0=sigma * j.F_xdelta,
        gamma1=(j.F_xy * j.G1_x + j.F_xz * j.G2_x) / D,
        gamma2=(j.F_xz * j.F_y - j.F_xy * j.F_z) / D,
        gamma3=j.F_xxx / 6,
        alpha1=(j.F_y * j.G1_x * j.G1_y + j.F_y * j.G1_z * j.G2_x
                + j.F_z * j.G1_x * j.G2_y + j.F_z * j.G2_x * j.G2_z) / D,
        alpha2=(j.F_y ** 2 * j.G1_z - j.F_z ** 2 * j.G2_y
                + j.F_y * j.F_z * j.G2_z - j.F_y * j.F_z * j.G1_y) / D,
        alpha3=0.5 * (j.F_y * j.G1_xx + j.F_z * j.G2_xx),
        beta1=(j.G1_x ** 2 * j.G2_y - j.G1_x * j.G2_x * j.G1_y
               + j.G1_x * j.G2_x * j.G2_z - j.G2_x ** 2 * j.G1_z) / D,
        beta2=(-j.F_z * j.G1_x * j.G2_y + j.F_z * j.G2_x * j.G1_y
               + j.F_y * j.G1_x * j.G2_z - j.F_y * j.G2_x * j.G1_z) / D,
        beta3=0.5 * (j.G1_x * j.G2_xx - j.G2_x * j.G1_xx),
    )


def scaling(D: float, F_xx: float) -> Scaling:
    if not D < 0:
        raise StabilityViolation(f"D = {D!r} must be negative")
    if F_xx == 0:
        raise DegenerateFold("F_xx vanishes")
    return Scaling(m=D / F_xx, k_scale=math.sqrt(-2 * D) / F_xx, n=math.sqrt(2 / -D))


def stage3(s2: StageCoeffs, D: float, F_xx: float) -> StageCoeffs:
    sc = scaling(D, F_xx)
    n, k = sc.n, sc.k_scale
    cubic = 2 * math.sqrt(-2 * D) / F_xx ** 2
    return StageCoeffs(
        gamma0=n * s2.gamma0,
        gamma1=-k * s2.gamma1,
        gamma2=n * s2.gamma2,
        gamma3=cubic * s2.gamma3,
        alpha1=n * s2.alpha1,
        alpha2=n * F_xx / D * s2.alpha2,
        alpha3=-2 * math.sqrt(2) / (F_xx * math.sqrt(-D)) * s2.alpha3,
        beta1=-k * s2.beta1,
        beta2=n * s2.beta2,
        beta3=cubic * s2.beta3,
    )


def final_coeffs(jet: Jet3, sigma: float = 1.0) -> NormalFormCoeffs:
    """Normal-form coefficients of ``jet``.

    ``sigma`` only selects the value of gamma0 stored in the staged
    intermediates; the returned ``kappa``/``nu`` law covers every sigma.

    Raises
    ------
    StabilityViolation
        If ``D >= 0``.
    DegenerateFold
        If any of the fold conditions fails.
    """
    report = check_conditions(jet)
    if not report["stability"].passes:
        raise StabilityViolation(f"D = {jet.D!r} must be negative")
    if report.failures:
        raise DegenerateFold(f"fold conditions fail: {', '.join(report.failures)}")
    D = jet.D
    s2 = stage2(jet, sigma)
    s3 = stage3(s2, D, jet.F_xx)
    kappa = scaling(D, jet.F_xx).n * jet.F_xdelta
    return NormalFormCoeffs(
        D=D,
        kappa=kappa,
        nu=s3.gamma1 - s3.alpha3,
        gamma=s3.gamma3,
        alpha1=s3.alpha1 + s3.alpha3 - s3.gamma1,
        alpha2=s3.alpha2 - s3.gamma2,
        beta1=s3.beta1 + s3.beta3,
        beta2=s3.beta2,
        staged=StagedCoeffs(s2, s3, scaling(D, jet.F_xx), sigma),
    )


def fhn_coeffs() -> NormalFormCoeffs:
    from .systems import jet_analytic_fhn

    return final_coeffs(jet_analytic_fhn())


def _det3(rows) -> float:
    return float(np.linalg.det(np.array(rows, dtype=float)))


def closed_beta1(jet: Jet3) -> float:
    # determinant form; prefactor carries F_xx**2 (see module tests)
    D = _require_stable(jet)
    j = jet
    top = [j.F_xx, j.G1_xx, j.G2_xx]
    mid = [0.0, j.G1_x, j.G2_x]
    dy = _det3([top, mid, [j.F_y, j.G1_y, j.G2_y]])
    dz = _det3([top, mid, [j.F_z, j.G1_z, j.G2_z]])
    return math.sqrt(2) / (j.F_xx ** 2 * math.sqrt(-D)) * (j.G1_x * dy + j.G2_x * dz)


def closed_alpha2(jet: Jet3) -> float:
    D = _require_stable(jet)
    j = jet
    top = [j.F_xx, j.F_xy, j.F_xz]
    mid = [0.0, j.F_y, j.F_z]
    d1 = _det3([top, mid, [j.G1_x, j.G1_y, j.G1_z]])
    d2 = _det3([top, mid, [j.G2_x, j.G2_y, j.G2_z]])
    return math.sqrt(2) / (-D) ** 2.5 * (j.F_y * d1 + j.F_z * d2)


def closed_beta2(jet: Jet3) -> float:
    D = _require_stable(jet)
    j = jet
    d = _det3([[0.0, j.F_y, j.F_z],
               [j.G1_x, j.G1_y, j.G1_z],
               [j.G2_x, j.G2_y, j.G2_z]])
    return math.sqrt(2) / (-D) ** 1.5 * d


def closed_nu(jet: Jet3) -> float:
    D = _require_stable(jet)
    if jet.F_xx == 0:
        raise DegenerateFold("F_xx vanishes")
    return math.sqrt(2 / -D) * jet.D_x / jet.F_xx


def nf_field(mu: float, c: NormalFormCoeffs, sigma: float,
             q: MuQuadraticCoeffs = ZERO_Q):
    """Return ``f(tau, y)`` evaluating the truncated normal form."""
    g0 = c.gamma0_of(sigma)
    ga, a1, a2, b1, b2 = c.gamma, c.alpha1, c.alpha2, c.beta1, c.beta2
    mu2 = mu * mu
    quadratic = q != ZERO_Q

    def field_(t, y):
        xi, eta, zeta = y[0], y[1], y[2]
        x2 = xi * xi
        dxi = x2 - eta + mu * (g0 * xi + ga * x2 * xi)
        deta = 2 * xi + mu * (a1 * eta + a2 * zeta)
        dzeta = mu * (b1 * eta + b2 * zeta)
        if quadratic:
            dxi += mu2 * (q.gamma1 * eta + q.gamma2 * eta * eta + q.gamma3 * zeta * zeta
                          + q.gamma4 * eta * zeta + x2 * (q.gamma5 * eta + q.gamma6 * zeta)
                          + q.gamma7 * x2 * x2)
            deta += mu2 * (xi * (q.alpha3 * eta + q.alpha4 * zeta) + q.alpha5 * x2 * xi)
            dzeta += mu2 * (xi * (q.beta3 * eta + q.beta4 * zeta) + q.beta5 * x2 * xi)
        return np.array([dxi, deta, dzeta])

    return field_


def _as_array(state) -> np.ndarray:
    if isinstance(state, NFState):
        return state.as_array()
    return np.asarray(state, dtype=float)


def nf_rhs(state, mu: float, c: NormalFormCoeffs, sigma: float,
           q: MuQuadraticCoeffs = ZERO_Q) -> np.ndarray:
    """Right-hand side ``(xi', eta', zeta')`` of the truncated normal form."""
    return nf_field(mu, c, sigma, q)(0.0, _as_array(state))


def nf_field_fhn_exact(mu: float, sigma: float):
    """FitzHugh-Nagumo written exactly in normal-form variables."""
    mu2, mu3 = mu * mu, mu ** 3

    def field_(t, y):
        xi, eta, zeta = y[0], y[1], y[2]
        lin = -0.5 * eta - 0.5 * zeta
        dxi = (xi * xi - eta + mu * (2 * sigma * xi - xi ** 3 / 3)
               - mu2 * sigma * xi * xi - mu3 * sigma * sigma * xi)
        return np.array([dxi, 2 * xi + mu * lin, mu * lin])

    return field_


def nf_rhs_fhn_exact(state, mu: float, sigma: float) -> np.ndarray:
    return nf_field_fhn_exact(mu, sigma)(0.0, _as_array(state))


def J_of(state) -> float:
    """Second integral ``(eta + 1 - xi^2) exp(-(eta + 1))`` of the unperturbed flow."""
    xi, eta = _as_array(state)[:2]
    return float((eta + 1 - xi * xi) * math.exp(-(eta + 1)))


def J_rate(state, mu: float, c: NormalFormCoeffs, sigma: float,
           q: MuQuadraticCoeffs = ZERO_Q) -> float:
    """dJ/dtau along the normal form, assembled from the f4/g4 terms."""
    xi, eta, zeta = _as_array(state)
    x2 = xi * xi
    f1 = c.gamma0_of(sigma) * xi + c.gamma * x2 * xi
    f2 = c.alpha1 * eta + c.alpha2 * zeta
    g1 = (q.gamma1 * eta + q.gamma2 * eta * eta + q.gamma3 * zeta * zeta + q.gamma4 * eta * zeta
          + x2 * (q.gamma5 * eta + q.gamma6 * zeta) + q.gamma7 * x2 * x2)
    g2 = xi * (q.alpha3 * eta + q.alpha4 * zeta) + q.alpha5 * x2 * xi
    f4 = (x2 - eta) * f2 - 2 * xi * f1
    g4 = (x2 - eta) * g2 - 2 * xi * g1
    return float((mu * f4 + mu * mu * g4) * math.exp(-(eta + 1)))


def _solve_w(J0: float, lo: float, hi: float, w: float, tol: float, max_iter: int) -> float:
    """Safeguarded Newton for ``w exp(-w) = J0`` on a monotone bracket."""
    increasing = hi <= 1.0
    for _ in range(max_iter):
        ew = math.exp(-w)
        r = w * ew - J0
        if (r > 0) == increasing:
            hi = w
        else:
            lo = w
        dr = (1 - w) * ew
        w_new = w - r / dr if dr != 0 else 0.5 * (lo + hi)
        if not lo < w_new < hi:
            w_new = 0.5 * (lo + hi)
        if abs(w_new - w) <= tol * max(w, 1e-300) or hi - lo <= tol * max(w, 1e-300):
            return w_new
        w = w_new
    return w


def _check_J0(J0: float) -> None:
    if not (0.0 < J0 <= _INV_E * (1 + 1e-15)):
        raise OutOfRange(f"J0 = {J0!r} outside (0, 1/e]")


def eta_on_section(J0: float, tol: float = 1e-14, max_iter: int = 100) -> float:
    """eta0 in (-1, 0] with ``(eta0 + 1) exp(-(eta0 + 1)) = J0`` (section S-)."""
    _check_J0(J0)
    if J0 >= _INV_E:
        return 0.0
    return _solve_w(J0, 0.0, 1.0, J0, tol, max_iter) - 1.0


def eta_on_section_plus(J0: float, tol: float = 1e-14, max_iter: int = 200) -> float:
    """eta0 >= 0 with ``(eta0 + 1) exp(-(eta0 + 1)) = J0`` (section S+)."""
    _check_J0(J0)
    if J0 >= _INV_E:
        return 0.0
    hi = 2.0
    while hi * math.exp(-hi) > J0:
        hi *= 2
    L = math.log(1 / J0)
    w0 = min(max(L + math.log(L), 1.0 + 1e-12), hi)
    return _solve_w(J0, 1.0, hi, w0, tol, max_iter) - 1.0
