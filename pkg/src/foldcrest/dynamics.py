"""Poincaré sections, return maps and periodic orbits.

A :class:`SectionSpec` is a hyperplane ``normal . y = offset`` crossed in a
given direction, together with a two-dimensional chart. Two charts exist:

* ``plane``: orthonormal in-plane coordinates, optionally divided by
  ``scale`` so that the chart is O(1) on the orbits of interest;
* ``nf_xi_zero``: the normal-form sections ``xi = 0`` with coordinates
  ``(zeta, J)``; direction +1 is S- (``-1 < eta < 0``), direction -1 is S+
  (``eta > 0``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (Escaped, MaxTimeExceeded, NoConvergence, NoReturn, StepUnderflow,
                     TangentialCrossing, OutOfRange)
from .integrator import IntegratorConfig, Step, dopri_steps
from .normalform import J_of, eta_on_section, eta_on_section_plus

__all__ = [
    "SectionSpec",
    "ReturnResult",
    "OrbitResult",
    "nf_section",
    "plane_section",
    "first_return",
    "return_map",
    "return_map_jacobian",
    "find_periodic_orbit",
    "iterate_map",
    "write_trajectory_csv",
    "NFTransit",
    "nf_transit",
    "H_JAC",
    "TRANSIENT_RETURNS",
]

Rhs = Callable[[float, np.ndarray], np.ndarray]

H_JAC = 1e-5
TRANSIENT_RETURNS = 20
_TANGENT_TOL = 1e-8


def _plane_basis(normal: np.ndarray) -> np.ndarray:
    """Orthonormal basis (2 x 3) of the plane orthogonal to ``normal``.

    Deterministic: the standard basis vectors least aligned with ``normal``
    are Gram-Schmidt orthogonalised, in index order.
    """
    n = normal / np.linalg.norm(normal)
    order = np.argsort(np.abs(n), kind="stable")[:2]
    basis = []
    for i in sorted(order):
        v = np.zeros(3)
        v[i] = 1.0
        v -= (v @ n) * n
        for b in basis:
            v -= (v @ b) * b
        basis.append(v / np.linalg.norm(v))
    return np.array(basis)


@dataclass(frozen=True)
class SectionSpec:
    kind: str
    normal: tuple[float, float, float]
    offset: float = 0.0
    direction: int = 1
    scale: float = 1.0
    _n: np.ndarray = field(init=False, repr=False, compare=False)
    _basis: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if n.shape != (3,) or not np.linalg.norm(n) > 0:
            raise ValueError("section normal must be a nonzero 3-vector")
        if self.kind not in ("plane", "nf_xi_zero"):
            raise ValueError(f"unknown section kind {self.kind!r}")
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "_n", n)
        object.__setattr__(self, "_basis", _plane_basis(n))

    def value(self, y: np.ndarray) -> float:
        return float(self._n @ y - self.offset)

    def accepts(self, y: np.ndarray) -> bool:
        if self.kind == "nf_xi_zero":
            return -1.0 < y[1] < 0.0 if self.direction > 0 else y[1] > 0.0
        return True

    @property
    def origin(self) -> np.ndarray:
        return self._n * self.offset / (self._n @ self._n)

    def chart(self, y: np.ndarray) -> np.ndarray:
        """Section coordinates of a state on the section."""
        if self.kind == "nf_xi_zero":
            return np.array([y[2], J_of(y)])
        return self._basis @ (y - self.origin) / self.scale

    def lift(self, c: Sequence[float]) -> np.ndarray:
        """State on the section with section coordinates ``c``."""
        if self.kind == "nf_xi_zero":
            zeta, J = float(c[0]), float(c[1])
            eta = eta_on_section(J)
            if self.direction < 0:
                eta = eta_on_section_plus(J)
            return np.array([0.0, eta, zeta])
        return self.origin + self.scale * (np.asarray(c, dtype=float) @ self._basis)


def nf_section(plus: bool = False) -> SectionSpec:
    """S- (``xi`` increasing) or, with ``plus=True``, S+ (``xi`` decreasing)."""
    return SectionSpec("nf_xi_zero", (1.0, 0.0, 0.0), 0.0, -1 if plus else 1)


def plane_section(normal, offset: float = 0.0, direction: int = 1,
                  scale: float = 1.0) -> SectionSpec:
    return SectionSpec("plane", tuple(float(v) for v in normal), float(offset),
                       int(direction), float(scale))


@dataclass(frozen=True)
class ReturnResult:
    endpoint: np.ndarray
    return_time: float
    crossings_skipped: int


@dataclass(frozen=True)
class OrbitResult:
    anchor: np.ndarray
    period: float
    multipliers: tuple[complex, complex]
    residual: float
    jacobian: np.ndarray
    iterations: int

    @property
    def stable(self) -> bool:
        return max(abs(m) for m in self.multipliers) < 1.0

    @property
    def pd_function(self) -> float:
        """``det(DP + I)``; changes sign where a real multiplier passes -1."""
        return float(np.linalg.det(self.jacobian + np.eye(2)))


def _locate(step: Step, section: SectionSpec, rhs: Rhs, tol: float) -> tuple[float, np.ndarray]:
    lo, hi = step.t_old, step.t_new
    g_lo = section.value(step.y_old)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = section.value(step(mid))
        if abs(g_mid) < 0.1 * tol or mid in (lo, hi):
            break
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    t = mid
    y = step(t)
    f = np.asarray(rhs(t, y), dtype=float)
    slope = float(section._n @ f)
    # geometric test: angle between the flow and the section plane
    if abs(slope) <= _TANGENT_TOL * float(np.linalg.norm(f)) * float(np.linalg.norm(section._n)):
        raise TangentialCrossing(f"flow nearly tangent to the section at t={t}")
    t_new = t - section.value(y) / slope
    t_new = min(max(t_new, min(step.t_old, step.t_new)), max(step.t_old, step.t_new))
    y_new = step(t_new)
    if abs(section.value(y_new)) <= abs(section.value(y)):
        t, y = t_new, y_new
    return t, y


def first_return(rhs: Rhs, section: SectionSpec, state0, config: IntegratorConfig = IntegratorConfig(),
                 skip: int = 0, t0: float = 0.0, backward: bool = False,
                 record: list | None = None, replay: Sequence[float] | None = None,
                 steps_out: list | None = None) -> ReturnResult:
    """Integrate until the ``(skip + 1)``-th directed crossing of ``section``.

    If ``record`` is a list, ``(t, state)`` at every accepted step is
    appended to it, followed by the crossing itself. ``steps_out`` collects
    the accepted step sizes, which can be passed back as ``replay`` (see
    :func:`foldcrest.integrator.dopri_steps`).

    Raises
    ------
    NoReturn
        If the trajectory escapes, exceeds ``max_time`` or stalls before
        returning.
    TangentialCrossing
        If the crossing is (numerically) tangential.
    """
    sign = section.direction * (-1 if backward else 1)
    t_end = t0 - config.max_time if backward else t0 + config.max_time
    seen = 0
    try:
        for step in dopri_steps(rhs, t0, state0, t_end, config, replay):
            if steps_out is not None:
                steps_out.append(abs(step.h))
            g_old = section.value(step.y_old)
            g_new = section.value(step.y_new)
            # backward steps see a forward crossing with the sign reversed
            if not sign * g_old < 0 <= sign * g_new:
                if record is not None:
                    record.append((step.t_new, step.y_new))
                continue
            t, y = _locate(step, section, rhs, config.event_tol)
            if not section.accepts(y) or seen < skip:
                if section.accepts(y):
                    seen += 1
                if record is not None:
                    record.append((step.t_new, step.y_new))
                continue
            if record is not None:
                record.append((t, y))
            return ReturnResult(endpoint=y, return_time=abs(t - t0), crossings_skipped=seen)
    except (Escaped, MaxTimeExceeded, StepUnderflow) as exc:
        raise NoReturn(f"no return to the section: {exc}") from exc
    raise NoReturn("integration ended without returning to the section")


def return_map(rhs: Rhs, section: SectionSpec, c, config: IntegratorConfig = IntegratorConfig(),
               skip: int = 0, replay: Sequence[float] | None = None,
               steps_out: list | None = None) -> tuple[np.ndarray, float]:
    """Chart coordinates of the first return of the point with chart ``c``."""
    res = first_return(rhs, section, section.lift(c), config, skip=skip, replay=replay,
                       steps_out=steps_out)
    return section.chart(res.endpoint), res.return_time


def return_map_jacobian(rhs: Rhs, section: SectionSpec, anchor,
                        config: IntegratorConfig = IntegratorConfig(),
                        h_jac: float = H_JAC, skip: int = 0) -> np.ndarray:
    """Central-difference Jacobian of the return map in chart coordinates.

    The step for coordinate ``i`` is ``h_jac * (1 + |anchor_i|)``. The
    backward-perturbed return replays the step sequence of the forward one,
    so the quotient does not pick up step-size control noise.
    """
    anchor = np.asarray(anchor, dtype=float)
    jac = np.empty((2, 2))
    for i in range(2):
        h = h_jac * (1.0 + abs(anchor[i]))
        dc = np.zeros(2)
        dc[i] = h
        steps: list[float] = []
        plus, _ = return_map(rhs, section, anchor + dc, config, skip, steps_out=steps)
        minus, _ = return_map(rhs, section, anchor - dc, config, skip, replay=steps)
        jac[:, i] = (plus - minus) / (2 * h)
    return jac


def iterate_map(rhs: Rhs, section: SectionSpec, c, n: int,
                config: IntegratorConfig = IntegratorConfig()) -> np.ndarray:
    """Apply the return map ``n`` times; used to shed transients."""
    c = np.asarray(c, dtype=float)
    for _ in range(n):
        c, _ = return_map(rhs, section, c, config)
    return c


def find_periodic_orbit(rhs: Rhs, section: SectionSpec, guess,
                        config: IntegratorConfig = IntegratorConfig(),
                        newton_tol: float = 1e-9, max_newton: int = 20,
                        h_jac: float = H_JAC, transient: int = 0,
                        period_multiple: int = 1) -> OrbitResult:
    """Newton iteration on ``P(c) - c`` in section coordinates.

    ``period_multiple = 2`` looks for fixed points of the second-return map
    (period-2 orbits). Steps are halved while they fail to reduce the
    residual.

    Raises
    ------
    NoConvergence
        After ``max_newton`` iterations without reaching ``newton_tol``, or when
        the difference stencil leaves the section chart.
    NoReturn
        If the return map is undefined at an iterate.
    """
    skip = period_multiple - 1
    c = np.asarray(guess, dtype=float)
    if transient:
        c = iterate_map(rhs, section, c, transient, config)

    def residual(c):
        img, T = return_map(rhs, section, c, config, skip)
        return img - c, T

    r, T = residual(c)
    for it in range(max_newton + 1):
        try:
            jac = return_map_jacobian(rhs, section, c, config, h_jac, skip)
        except OutOfRange as exc:
            raise NoConvergence(f"difference stencil left the section chart at iteration {it}") from exc
        norm_r = float(np.linalg.norm(r))
        if norm_r < newton_tol:
            mult = np.linalg.eigvals(jac)
            return OrbitResult(anchor=c, period=T, multipliers=(complex(mult[0]), complex(mult[1])),
                               residual=norm_r, jacobian=jac, iterations=it)
        if it == max_newton:
            break
        try:
            dc = np.linalg.solve(jac - np.eye(2), -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence("singular Newton matrix (multiplier at +1)") from exc
        lam = 1.0
        for _ in range(6):
            trial = c + lam * dc
            try:
                r_trial, T_trial = residual(trial)
                if np.linalg.norm(r_trial) < norm_r or lam < 0.05:
                    break
            except (NoReturn, OutOfRange):
                r_trial = None
            lam *= 0.5
        if r_trial is None:
            raise NoConvergence(f"Newton step left the section domain at iteration {it}")
        c, r, T = trial, r_trial, T_trial
    raise NoConvergence(f"Newton did not converge in {max_newton} iterations "
                        f"(residual {float(np.linalg.norm(r)):.3e})")


@dataclass(frozen=True)
class NFTransit:
    """One loop of the normal form started on S-.

    ``plus`` is the first crossing of S+, ``minus`` the following return to
    S-; both hold ``(zeta, J)`` and the elapsed time from the start.
    """

    start: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    t_plus: float
    t_minus: float
    samples: list


def nf_transit(rhs: Rhs, zeta0: float, J0: float,
               config: IntegratorConfig = IntegratorConfig(), record: bool = False) -> NFTransit:
    """Follow the normal form from ``(0, eta0(J0), zeta0)`` through S+ back to S-."""
    s_minus, s_plus = nf_section(), nf_section(plus=True)
    y0 = s_minus.lift([zeta0, J0])
    samples = [(0.0, y0)] if record else None
    half = first_return(rhs, s_plus, y0, config, record=samples)
    back = first_return(rhs, s_minus, half.endpoint, config, t0=half.return_time,
                        record=samples)
    return NFTransit(start=np.array([zeta0, J0]), plus=s_plus.chart(half.endpoint),
                     minus=s_minus.chart(back.endpoint), t_plus=half.return_time,
                     t_minus=half.return_time + back.return_time,
                     samples=samples or [])


def write_trajectory_csv(dest, t: Sequence[float], states: np.ndarray, header: Sequence[str],
                         extra: Callable[[np.ndarray], Sequence[float]] | None = None) -> None:
    """Dump a trajectory with 17 significant digits to a path or text stream."""
    if hasattr(dest, "write"):
        _write_rows(dest, t, states, header, extra)
        return
    with open(dest, "w", newline="") as fh:
        _write_rows(fh, t, states, header, extra)


def _write_rows(fh, t, states, header, extra) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for ti, yi in zip(t, states):
        row = [ti, *yi]
        if extra is not None:
            row.extend(extra(yi))
        w.writerow([f"{float(v):.17g}" for v in row])
