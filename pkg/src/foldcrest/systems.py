"""Slow-fast systems with one fast and two slow variables.

A system couples a right-hand side ``(F, G1, G2)`` in its original
coordinates with the location of the equilibrium as a function of the
unfolding parameter ``delta``. Everything downstream works in coordinates
shifted to that equilibrium; :class:`Jet3` holds the derivatives at
``(x, y, z; delta) = (0, 0, 0; 0)`` that feed the normal-form pipeline.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable

import numpy as np

from .errors import NonFiniteEvaluation

__all__ = [
    "Jet3",
    "SlowFastSystem",
    "ConditionResult",
    "ConditionReport",
    "builtin_fhn",
    "fhn_original",
    "jet_analytic_fhn",
    "jet_finite_difference",
    "check_conditions",
    "TOL_FOLD",
]

TOL_FOLD = 1e-8

# finite-difference steps for first, second and third derivatives
H1, H2, H3 = 5e-6, 1e-4, 5e-4


@dataclass(frozen=True)
class Jet3:
    """Partial derivatives of F, G1, G2 at the equilibrium for delta = 0."""

    F_x: float = 0.0
    F_y: float = 0.0
    F_z: float = 0.0
    F_xx: float = 0.0
    F_xxx: float = 0.0
    F_xy: float = 0.0
    F_xz: float = 0.0
    F_xdelta: float = 0.0
    G1_x: float = 0.0
    G1_y: float = 0.0
    G1_z: float = 0.0
    G1_xx: float = 0.0
    G2_x: float = 0.0
    G2_y: float = 0.0
    G2_z: float = 0.0
    G2_xx: float = 0.0

    @property
    def D(self) -> float:
        return self.F_y * self.G1_x + self.F_z * self.G2_x

    @property
    def D_x(self) -> float:
        """x-derivative of F_y*G1_x + F_z*G2_x along the fast fibre."""
        return (self.F_xy * self.G1_x + self.F_y * self.G1_xx
                + self.F_xz * self.G2_x + self.F_z * self.G2_xx)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class SlowFastSystem:
    """``eps*x' = F, y' = G1, z' = G2`` with parameter ``delta``.

    Parameters
    ----------
    name : str
        Identifier used by the CLI (``--system``).
    rhs : callable
        ``rhs(x, y, z, delta) -> (F, G1, G2)`` in the original coordinates.
    equilibrium : callable
        ``equilibrium(delta) -> (x0, y0, z0)``.
    jet : Jet3, optional
        Exact jet when known. The numerical verification only needs ``rhs``.
    param_name : str
        Name of the user-facing bifurcation parameter. ``to_delta`` and
        ``from_delta`` convert between it and ``delta``.
    nf_embedding : callable, optional
        ``nf_embedding(mu, (xi, eta, zeta)) -> (x, y, z)`` mapping normal-form
        variables to shifted coordinates, used to seed periodic orbits.
    """

    name: str
    rhs: Callable[[float, float, float, float], tuple]
    equilibrium: Callable[[float], tuple] = field(default=lambda delta: (0.0, 0.0, 0.0))
    jet: Jet3 | None = None
    param_name: str = "delta"
    to_delta: Callable[[float], float] = field(default=lambda p: p)
    from_delta: Callable[[float], float] = field(default=lambda d: d)
    nf_embedding: Callable[[float, tuple], tuple] | None = None

    def shifted_rhs(self, x: float, y: float, z: float, delta: float) -> tuple:
        x0, y0, z0 = self.equilibrium(delta)
        return self.rhs(x + x0, y + y0, z + z0, delta)

    def fast_field(self, eps: float, delta: float) -> Callable[[float, np.ndarray], np.ndarray]:
        """Autonomous field in fast time, shifted coordinates:
        ``x' = F, y' = eps*G1, z' = eps*G2``."""
        x0, y0, z0 = self.equilibrium(delta)
        rhs = self.rhs

        def field_(t, s):
            F, G1, G2 = rhs(s[0] + x0, s[1] + y0, s[2] + z0, delta)
            return np.array([F, eps * G1, eps * G2])

        return field_


def _fhn_shifted(x, y, z, delta):
    F = -x ** 3 / 3 + x * x * (1 - delta) + x * (2 * delta - delta * delta) - y - z
    return F, x, x - z


def _fhn_embedding(mu, state):
    xi, eta, zeta = state
    mu2 = mu * mu
    return mu * xi, 0.5 * mu2 * (eta - zeta), 0.5 * mu2 * (eta + zeta)


def builtin_fhn() -> SlowFastSystem:
    """FitzHugh-Nagumo system shifted so the equilibrium sits at the origin.

    ``delta = 1 - a``; the fold is reached at ``a = 1``.
    """
    return SlowFastSystem(
        name="fhn",
        rhs=_fhn_shifted,
        jet=jet_analytic_fhn(),
        param_name="a",
        to_delta=lambda a: 1.0 - a,
        from_delta=lambda d: 1.0 - d,
        nf_embedding=_fhn_embedding,
    )


def _fhn_raw(x, y, z, delta):
    a = 1.0 - delta
    return x - x ** 3 / 3 - y - z, a + x, a + x - z


def _fhn_raw_equilibrium(delta):
    a = 1.0 - delta
    return -a, -a + a ** 3 / 3, 0.0


def fhn_original() -> SlowFastSystem:
    """FitzHugh-Nagumo in its original coordinates, equilibrium at ``x = -a``."""
    return SlowFastSystem(
        name="fhn-original",
        rhs=_fhn_raw,
        equilibrium=_fhn_raw_equilibrium,
        jet=jet_analytic_fhn(),
        param_name="a",
        to_delta=lambda a: 1.0 - a,
        from_delta=lambda d: 1.0 - d,
        nf_embedding=_fhn_embedding,
    )


def jet_analytic_fhn() -> Jet3:
    return Jet3(
        F_x=0.0, F_y=-1.0, F_z=-1.0, F_xx=2.0, F_xxx=-2.0, F_xy=0.0, F_xz=0.0,
        F_xdelta=2.0, G1_x=1.0, G2_x=1.0, G2_z=-1.0,
    )


def jet_finite_difference(system: SlowFastSystem) -> Jet3:
    """Central-difference jet of ``system`` at its equilibrium for delta = 0."""

    def ev(x=0.0, y=0.0, z=0.0, d=0.0):
        out = np.asarray(system.shifted_rhs(x, y, z, d), dtype=float)
        if not np.all(np.isfinite(out)):
            raise NonFiniteEvaluation(
                f"{system.name}: rhs not finite at x={x}, y={y}, z={z}, delta={d}")
        return out

    def d1(var):
        return (ev(**{var: H1}) - ev(**{var: -H1})) / (2 * H1)

    def mixed(var):
        h = H2
        return (ev(x=h, **{var: h}) - ev(x=h, **{var: -h})
                - ev(x=-h, **{var: h}) + ev(x=-h, **{var: -h})) / (4 * h * h)

    fx, fy, fz = d1("x"), d1("y"), d1("z")
    f0 = ev()
    fxx = (ev(x=H2) - 2 * f0 + ev(x=-H2)) / H2 ** 2
    fxxx = (ev(x=2 * H3) - 2 * ev(x=H3) + 2 * ev(x=-H3) - ev(x=-2 * H3)) / (2 * H3 ** 3)
    values = dict(
        F_x=fx[0], F_y=fy[0], F_z=fz[0], F_xx=fxx[0], F_xxx=fxxx[0],
        F_xy=mixed("y")[0], F_xz=mixed("z")[0], F_xdelta=mixed("d")[0],
        G1_x=fx[1], G1_y=fy[1], G1_z=fz[1], G1_xx=fxx[1],
        G2_x=fx[2], G2_y=fy[2], G2_z=fz[2], G2_xx=fxx[2],
    )
    return Jet3(**{k: float(v) for k, v in values.items()})


@dataclass(frozen=True)
class ConditionResult:
    value: float
    passes: bool
    tolerance: float


@dataclass(frozen=True)
class ConditionReport:
    conditions: dict[str, ConditionResult]

    @property
    def passes(self) -> bool:
        return all(c.passes for c in self.conditions.values())

    @property
    def failures(self) -> list[str]:
        return [name for name, c in self.conditions.items() if not c.passes]

    def __getitem__(self, name: str) -> ConditionResult:
        return self.conditions[name]

    def to_dict(self) -> dict:
        return {
            "passes": self.passes,
            "conditions": {k: asdict(v) for k, v in self.conditions.items()},
        }


def check_conditions(jet: Jet3, system: SlowFastSystem | None = None,
                     tol_fold: float = TOL_FOLD,
                     deltas=(-0.05, 0.0, 0.05)) -> ConditionReport:
    """Evaluate the equilibrium, fold and stability conditions.

    The equilibrium condition needs a right-hand side; for a bare jet it is
    taken as satisfied (value 0), since a jet is by construction evaluated at
    the equilibrium.
    """
    if system is None:
        eq_residual = 0.0
    else:
        eq_residual = max(
            float(np.max(np.abs(system.shifted_rhs(0.0, 0.0, 0.0, d)))) for d in deltas)
    eq_tol = 1e-12
    grad = math.sqrt(jet.F_x ** 2 + jet.F_y ** 2 + jet.F_z ** 2)
    D = jet.D
    return ConditionReport({
        "equilibrium": ConditionResult(eq_residual, eq_residual < eq_tol, eq_tol),
        "fold": ConditionResult(jet.F_x, abs(jet.F_x) < tol_fold, tol_fold),
        "gradient_nonzero": ConditionResult(grad, grad > tol_fold, tol_fold),
        "fold_nondegenerate": ConditionResult(jet.F_xx, abs(jet.F_xx) > tol_fold, tol_fold),
        "stability": ConditionResult(D, D < 0.0, 0.0),
    })
