"""Dormand-Prince 5(4) integrator with dense output.

The stepper is a plain generator over accepted steps, so callers that only
care about section crossings (see :mod:`foldcrest.dynamics`) never store the
trajectory. :func:`integrate` collects the steps into a :class:`Trajectory`
that can be sampled anywhere in the integration interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import Escaped, MaxTimeExceeded, NonFiniteEvaluation, StepUnderflow

__all__ = ["IntegratorConfig", "Step", "Trajectory", "dopri_steps", "integrate"]

Rhs = Callable[[float, np.ndarray], np.ndarray]

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# 5th minus embedded 4th order weights, including the FSAL stage
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# continuous extension: y(t0 + th*h) = y0 + h * K.T @ (_P @ [th, th^2, th^3, th^4])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 5.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and limits for one integration.

    ``max_step`` and ``max_time`` are measured in the integration time of the
    system being integrated (fast time for the original system, tau for the
    normal form).
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    max_time: float = 1e7
    event_tol: float = 1e-12
    max_norm: float = 1e6

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "max_time", "event_tol", "max_norm"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.rel_tol < 1e-13:
            raise ValueError("rel_tol below 1e-13 is not supported in double precision")


@dataclass
class Step:
    """One accepted step together with the stage derivatives."""

    t_old: float
    t_new: float
    y_old: np.ndarray
    y_new: np.ndarray
    K: np.ndarray

    @property
    def h(self) -> float:
        return self.t_new - self.t_old

    def __call__(self, t: float) -> np.ndarray:
        h = self.t_new - self.t_old
        th = (t - self.t_old) / h
        powers = np.array([th, th * th, th ** 3, th ** 4])
        return self.y_old + h * (self.K.T @ (_P @ powers))


def _eval(rhs: Rhs, t: float, y: np.ndarray) -> np.ndarray:
    f = np.asarray(rhs(t, y), dtype=float)
    if not np.all(np.isfinite(f)):
        raise NonFiniteEvaluation(f"right-hand side is not finite at t={t!r}, y={y!r}")
    return f


def _initial_step(rhs, t0, y0, f0, direction, cfg: IntegratorConfig) -> float:
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, cfg.max_step)
    y1 = y0 + direction * h0 * f0
    f1 = _eval(rhs, t0 + direction * h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, cfg.max_step)


def dopri_steps(
    rhs: Rhs,
    t0: float,
    y0,
    t_end: float,
    cfg: IntegratorConfig = IntegratorConfig(),
    replay: Sequence[float] | None = None,
) -> Iterator[Step]:
    """Yield accepted steps from ``t0`` towards ``t_end`` (either direction).

    If ``replay`` is given, its step sizes are taken first without error
    control, after which adaptive stepping resumes. Replaying the steps of a
    nearby trajectory makes the end state a smooth function of the initial
    state, which finite-difference Jacobians rely on.

    Raises
    ------
    StepUnderflow
        If the controller asks for a step below the floating-point resolution.
    MaxTimeExceeded
        If ``|t - t0|`` exceeds ``cfg.max_time`` before ``t_end`` is reached.
    Escaped
        If the state norm exceeds ``cfg.max_norm``.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    direction = 1.0 if t_end >= t0 else -1.0
    f = _eval(rhs, t, y)
    h_abs = _initial_step(rhs, t, y, f, direction, cfg)
    n = y.size
    K = np.empty((7, n))
    err_exp = -1 / 5
    fixed = iter(replay) if replay is not None else iter(())

    while direction * (t_end - t) > 0:
        if abs(t - t0) > cfg.max_time:
            raise MaxTimeExceeded(f"integration passed max_time={cfg.max_time} at t={t}")
        min_step = 10 * np.spacing(abs(t)) if t != 0 else 1e-300
        h_fixed = next(fixed, None)
        forced = h_fixed is not None
        h_abs = h_fixed if forced else min(h_abs, cfg.max_step)
        accepted = False
        while not accepted:
            if h_abs < min_step:
                raise StepUnderflow(f"step size underflow at t={t}, y={y}")
            h = direction * h_abs
            t_new = t + h
            if direction * (t_new - t_end) > 0:
                t_new = t_end
                h = t_new - t
                h_abs = abs(h)
            K[0] = f
            for i in range(1, 6):
                K[i] = _eval(rhs, t + _C[i] * h, y + h * (_A[i] @ K[:i]))
            y_new = y + h * (_B @ K[:6])
            f_new = _eval(rhs, t_new, y_new)
            K[6] = f_new
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = math.sqrt(float(np.mean((h * (_E @ K) / scale) ** 2)))
            if err <= 1.0 or forced:
                accepted = True
                fac = _FAC_MAX if err == 0 else min(_FAC_MAX, _SAFETY * err ** err_exp)
                h_next = h_abs * fac
            else:
                h_abs *= max(_FAC_MIN, _SAFETY * err ** err_exp)
        step = Step(t, t_new, y, y_new, K.copy())
        if not float(np.max(np.abs(y_new))) <= cfg.max_norm:
            raise Escaped(f"state norm exceeded {cfg.max_norm} at t={t_new}")
        yield step
        t, y, f = t_new, y_new, f_new
        h_abs = h_next


class Trajectory:
    """Piecewise dense solution assembled from accepted steps."""

    def __init__(self, steps: list[Step]):
        if not steps:
            raise ValueError("empty trajectory")
        self.steps = steps
        self.t = np.array([steps[0].t_old] + [s.t_new for s in steps])
        self.y = np.vstack([steps[0].y_old] + [s.y_new for s in steps])
        self._forward = self.t[-1] >= self.t[0]

    @property
    def t_final(self) -> float:
        return float(self.t[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.y[-1]

    def __call__(self, t: float) -> np.ndarray:
        knots = self.t if self._forward else -self.t
        key = t if self._forward else -t
        lo, hi = knots[0], knots[-1]
        if key < lo - 1e-12 * max(1.0, abs(lo)) or key > hi + 1e-12 * max(1.0, abs(hi)):
            raise ValueError(f"t={t} outside integrated interval [{self.t[0]}, {self.t[-1]}]")
        i = int(np.searchsorted(knots, key, side="right")) - 1
        i = min(max(i, 0), len(self.steps) - 1)
        return self.steps[i](t)


def integrate(rhs: Rhs, state0, t_span: tuple[float, float],
              config: IntegratorConfig = IntegratorConfig()) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` over ``t_span`` and return a dense sampler."""
    t0, t1 = t_span
    return Trajectory(list(dopri_steps(rhs, t0, state0, t1, config)))
