"""Numerical location of the first period doubling and related scans.

Periodic orbits are tracked along a one-parameter :class:`OrbitFamily` by
natural continuation: every solve is seeded from the nearest parameter
value already converged, with the asymptotic fixed point as a cold start.
The doubling is bracketed on ``phi(p) = det(DP + I) = (1 + l1)(1 + l2)``,
which is positive for a complex pair or two multipliers above -1 and
changes sign when a single real multiplier passes through -1.
"""
from __future__ import annotations

import math
import os
from bisect import bisect_left
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .asymptotics import hopf_estimate, predict_first_pd, solve_fixed_point
from .dynamics import (OrbitResult, SectionSpec, TRANSIENT_RETURNS, find_periodic_orbit, nf_section,
                       plane_section)
from .errors import (BracketInvalid, ComplexPair, NoConvergence, NoOrbit, NoReturn,
                     NumericalError, OutOfRange, TangentialCrossing)
from .integrator import IntegratorConfig
from .normalform import (NormalFormCoeffs, eta_on_section, fhn_coeffs, final_coeffs, nf_field,
                         nf_field_fhn_exact)
from .systems import SlowFastSystem, builtin_fhn, jet_analytic_fhn

__all__ = [
    "PDSearchConfig",
    "PDResult",
    "ComparisonRow",
    "SweepRow",
    "OrbitFamily",
    "fhn_family",
    "nf_family",
    "critical_multiplier",
    "locate_pd",
    "locate_pd_family",
    "nf_pd_check",
    "compare_table",
    "sweep",
    "locate_hopf",
    "period_two_orbit",
    "worker_count",
    "TABLE1_EPS",
]

TABLE1_EPS = (1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12)

_ORBIT_ERRORS = (NoConvergence, NoReturn, TangentialCrossing, OutOfRange)


def worker_count() -> int:
    """Parallel workers, capped by ``FOLDCREST_THREADS`` when set."""
    n = os.cpu_count() or 1
    env = os.environ.get("FOLDCREST_THREADS")
    if env:
        try:
            n = min(n, max(1, int(env)))
        except ValueError:
            pass
    return n


@dataclass(frozen=True)
class PDSearchConfig:
    """Bisection settings. ``bracket = None`` selects the automatic window."""

    bracket: tuple[float, float] | None = None
    param_tol: float = 1e-8
    multiplier_tol: float = 1e-6
    max_bisections: int = 200
    max_polish: int = 12

    def __post_init__(self):
        if self.bracket is not None:
            lo, hi = self.bracket
            if not lo < hi:
                raise OutOfRange(f"bracket ({lo}, {hi}) must satisfy lo < hi")
        if not self.param_tol > 0:
            raise OutOfRange("param_tol must be positive")
        if not self.multiplier_tol > 0:
            raise OutOfRange("multiplier_tol must be positive")


@dataclass(frozen=True)
class PDResult:
    a_num: float
    multipliers_at_a: tuple[complex, complex]
    orbit: OrbitResult
    iterations: int
    bracket: tuple[float, float] = (math.nan, math.nan)
    polish_steps: int = 0

    @property
    def critical(self) -> float:
        """Most negative real multiplier; within multiplier_tol of -1."""
        return _critical(self.multipliers_at_a)

    def to_dict(self) -> dict:
        return {
            "a_num": self.a_num,
            "multipliers": [[m.real, m.imag] for m in self.multipliers_at_a],
            "critical_multiplier": self.critical,
            "period": self.orbit.period,
            "anchor": [float(v) for v in self.orbit.anchor],
            "iterations": self.iterations,
            "polish_steps": self.polish_steps,
            "bracket": list(self.bracket),
        }


@dataclass(frozen=True)
class ComparisonRow:
    eps: float
    a_asym: float
    a_num: float | None = None

    @property
    def diff(self) -> float | None:
        if self.a_num is None:
            return None
        return self.a_num - self.a_asym


@dataclass(frozen=True)
class SweepRow:
    a: float
    period: float | None
    multipliers: tuple[complex, complex] | None
    pd_function: float | None
    stable: bool | None


def _critical(mult) -> float:
    """The multiplier that reaches -1 first: the smallest real part."""
    return float(min(m.real for m in mult))


@dataclass
class OrbitFamily:
    """Periodic orbits of ``field(p)`` on ``section`` as ``p`` varies.

    Parameters
    ----------
    field : callable
        ``field(p) -> rhs(t, y)``.
    section : SectionSpec
    seed : callable
        ``seed(p) -> chart point`` used when nothing has converged yet.
    name : str
        Label of the parameter in messages.
    retreat : float
        Signed parameter step towards the side where cold starts are
        reliable. When a cold start at ``p`` fails, up to ``max_retreats``
        cold starts at ``p + k*retreat`` are tried and the first success is
        continued back to ``p``.
    min_anchor_norm : float
        Converged anchors closer than this to the chart origin are rejected;
        for the plane section through the equilibrium they are small
        oscillations, not the orbit being tracked.
    """

    field: Callable[[float], Callable]
    section: SectionSpec
    seed: Callable[[float], np.ndarray]
    name: str = "a"
    config: IntegratorConfig = field(default_factory=IntegratorConfig)
    newton_tol: float = 1e-9
    max_newton: int = 20
    min_anchor_norm: float = 0.0
    max_substeps: int = 6
    retreat: float = 0.0
    max_retreats: int = 4
    _known: list = field(default_factory=list, repr=False)

    def _solve(self, p: float, guess, transient: int = 0) -> OrbitResult:
        orb = find_periodic_orbit(self.field(p), self.section, guess, self.config,
                                  newton_tol=self.newton_tol, max_newton=self.max_newton,
                                  transient=transient)
        if np.linalg.norm(orb.anchor) < self.min_anchor_norm:
            raise NoConvergence(f"Newton collapsed onto the equilibrium at {self.name}={p}")
        return orb

    def _remember(self, p: float, orb: OrbitResult) -> None:
        keys = [k for k, _ in self._known]
        i = bisect_left(keys, p)
        if i < len(keys) and keys[i] == p:
            self._known[i] = (p, orb)
        else:
            self._known.insert(i, (p, orb))

    def _nearest(self, p: float):
        return min(self._known, key=lambda kv: abs(kv[0] - p))

    def _predict(self, p: float) -> np.ndarray:
        """Secant extrapolation from the two nearest converged anchors."""
        if len(self._known) < 2:
            return self._nearest(p)[1].anchor
        (p1, o1), (p2, o2) = sorted(self._known, key=lambda kv: abs(kv[0] - p))[:2]
        if p1 == p2:
            return o1.anchor
        w = (p - p1) / (p2 - p1)
        if abs(w) > 2:
            return o1.anchor
        return o1.anchor + w * (o2.anchor - o1.anchor)

    def orbit(self, p: float) -> OrbitResult:
        """Converged periodic orbit at ``p``.

        Raises
        ------
        NoOrbit
            If neither continuation nor a cold start converges.
        """
        for k, orb in self._known:
            if k == p:
                return orb
        if self._known:
            try:
                orb = self._continue(p, self.max_substeps)
                self._remember(p, orb)
                return orb
            except _ORBIT_ERRORS:
                pass
        last = None
        n_retreat = self.max_retreats if self.retreat else 0
        for k in range(n_retreat + 1):
            q = p + k * self.retreat
            orb, last = self._cold(q)
            if orb is None:
                continue
            self._remember(q, orb)
            if k == 0:
                return orb
            try:
                orb = self._continue(p, self.max_substeps)
                self._remember(p, orb)
                return orb
            except _ORBIT_ERRORS as exc:
                last = exc
                break
        raise NoOrbit(f"no periodic orbit located at {self.name}={p}: {last}") from last

    def _cold(self, p: float):
        last = None
        for transient in (0, TRANSIENT_RETURNS):
            try:
                return self._solve(p, self.seed(p), transient), None
            except _ORBIT_ERRORS as exc:
                last = exc
        return None, last

    def _continue(self, p: float, depth: int) -> OrbitResult:
        try:
            return self._solve(p, self._predict(p))
        except _ORBIT_ERRORS:
            if depth <= 0:
                raise
        p0 = self._nearest(p)[0]
        mid = 0.5 * (p0 + p)
        if mid in (p0, p):
            raise NoConvergence(f"continuation step underflow at {self.name}={p}")
        self._remember(mid, self._continue(mid, depth - 1))
        return self._continue(p, depth - 1)

    def phi(self, p: float) -> float:
        return self.orbit(p).pd_function


def fhn_family(eps: float, system: SlowFastSystem | None = None,
               config: IntegratorConfig | None = None,
               retreat: float = 0.0) -> OrbitFamily:
    """Orbit family of a slow-fast system in the bifurcation parameter.

    The section is the plane through the equilibrium normal to the fast
    direction, crossed with the fast variable increasing, and charted by the
    slow coordinates divided by ``eps``. Seeds come from the asymptotic
    fixed point carried back from normal-form variables.
    """
    system = system or builtin_fhn()
    if system.nf_embedding is None:
        raise OutOfRange(f"system {system.name!r} has no normal-form embedding for seeding")
    mu = math.sqrt(eps)
    c = final_coeffs(system.jet if system.jet is not None else jet_analytic_fhn())
    section = plane_section((1.0, 0.0, 0.0), 0.0, 1, scale=eps)

    def field_(a):
        return system.fast_field(eps, system.to_delta(a))

    def seed(a):
        p = solve_fixed_point(system.to_delta(a) / eps, c)
        nf = (0.0, eta_on_section(p.J0), p.zeta0)
        return section.chart(np.asarray(system.nf_embedding(mu, nf), dtype=float))

    return OrbitFamily(field=field_, section=section, seed=seed, name=system.param_name,
                       config=config or IntegratorConfig(), min_anchor_norm=1e-3,
                       retreat=retreat)


def nf_family(mu: float, c: NormalFormCoeffs, exact: bool = False,
              config: IntegratorConfig | None = None,
              retreat: float = 0.0) -> OrbitFamily:
    """Orbit family of the normal form on S- with sigma as parameter.

    ``exact=True`` integrates FitzHugh-Nagumo written in normal-form
    variables instead of the truncated normal form.
    """
    section = nf_section()

    def field_(sigma):
        return nf_field_fhn_exact(mu, sigma) if exact else nf_field(mu, c, sigma)

    def seed(sigma):
        p = solve_fixed_point(sigma, c)
        return np.array([p.zeta0, p.J0])

    return OrbitFamily(field=field_, section=section, seed=seed, name="sigma",
                       config=config or IntegratorConfig(), retreat=retreat)


def critical_multiplier(eps: float, a: float, system: SlowFastSystem | None = None,
                        multiplier_tol: float = 1e-6,
                        family: OrbitFamily | None = None) -> float:
    """The real Floquet multiplier that passes through -1 at the doubling.

    With two real multipliers this is the smaller one, so it lies in
    ``(-1, 0)`` before the doubling and below -1 after it.

    Raises
    ------
    ComplexPair
        If the multipliers are complex with imaginary part above
        ``multiplier_tol``.
    NoOrbit
        If no periodic orbit is found.
    """
    family = family or fhn_family(eps, system)
    orb = family.orbit(a)
    if max(abs(m.imag) for m in orb.multipliers) > multiplier_tol:
        m = orb.multipliers[0]
        raise ComplexPair(f"multipliers {m.real:.6g} ± {abs(m.imag):.6g}i at a={a}")
    return _critical(orb.multipliers)


def _phi_or_invalid(family: OrbitFamily, p: float) -> float:
    try:
        return family.phi(p)
    except NoOrbit as exc:
        raise BracketInvalid(f"no periodic orbit at bracket end {family.name}={p}") from exc


def _auto_bracket(family: OrbitFamily, center: float, width0: float, width_max: float,
                  upper: float, lower: float = -math.inf) -> tuple[float, float, float, float]:
    """Grow a window around ``center`` until phi changes sign.

    The orbit at ``center`` is converged first so that both window ends are
    reached by continuation rather than by cold starts on the unstable side.
    """
    try:
        family.orbit(center)
    except NoOrbit:
        pass
    w = width0
    while True:
        lo = max(center - w, lower)
        hi = min(center + w, upper)
        f_lo, f_hi = family.phi(lo), family.phi(hi)
        if (f_lo > 0) != (f_hi > 0):
            return lo, hi, f_lo, f_hi
        if w >= width_max:
            raise BracketInvalid(f"no multiplier crossing -1 within {family.name} ∈ [{lo}, {hi}]")
        w = min(2 * w, width_max)


def locate_pd_family(family: OrbitFamily, search: PDSearchConfig,
                     auto: tuple[float, float, float, float] | None = None) -> PDResult:
    """Bisection on ``phi`` followed by a safeguarded secant polish.

    ``auto = (center, width0, width_max, upper)`` requests the growing
    window when ``search.bracket`` is None.
    """
    if search.bracket is not None:
        lo, hi = search.bracket
        f_lo, f_hi = _phi_or_invalid(family, lo), _phi_or_invalid(family, hi)
        if (f_lo > 0) == (f_hi > 0):
            raise BracketInvalid(
                f"det(DP+I) has the same sign at {family.name}={lo} ({f_lo:.3e}) "
                f"and {family.name}={hi} ({f_hi:.3e})")
    elif auto is not None:
        lo, hi, f_lo, f_hi = _auto_bracket(family, *auto)
    else:
        raise OutOfRange("either a bracket or an automatic window is required")
    bracket = (lo, hi)

    it = 0
    while hi - lo >= search.param_tol:
        if it >= search.max_bisections:
            raise NoConvergence(f"bisection did not reach param_tol in {it} iterations")
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f_mid = family.phi(mid)
        it += 1
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid

    # regula falsi inside the final bracket drives |l + 1| below multiplier_tol
    p = lo if abs(f_lo) < abs(f_hi) else hi
    orb = family.orbit(p)
    polish = 0
    a, fa, b, fb = lo, f_lo, hi, f_hi
    while abs(_critical(orb.multipliers) + 1) >= search.multiplier_tol \
            and polish < search.max_polish:
        if fb == fa:
            break
        p = b - fb * (b - a) / (fb - fa)
        if not min(a, b) < p < max(a, b) or p in (a, b):
            break
        orb = family.orbit(p)
        polish += 1
        fp = orb.pd_function
        if (fp > 0) == (fa > 0):
            a, fa = p, fp
        else:
            b, fb = p, fp
    return PDResult(a_num=p, multipliers_at_a=orb.multipliers, orbit=orb, iterations=it,
                    bracket=bracket, polish_steps=polish)


def locate_pd(eps: float, search: PDSearchConfig = PDSearchConfig(),
              system: SlowFastSystem | None = None,
              config: IntegratorConfig | None = None) -> PDResult:
    """First period doubling of a slow-fast system at fixed ``eps``.

    Without an explicit bracket the window starts at ``a* ± (1 - a*)/10``
    around the asymptotic prediction and doubles up to ``a* ± 10 (1 - a*)``,
    always staying below the Hopf estimate.

    Raises
    ------
    BracketInvalid
        If ``det(DP + I)`` does not change sign over the bracket, or no orbit
        exists at one of its ends.
    """
    system = system or builtin_fhn()
    family = fhn_family(eps, system, config)
    auto = None
    if search.bracket is None:
        c = final_coeffs(system.jet)
        a_star = predict_first_pd(eps, c).a_star
        d = abs(1.0 - a_star)
        upper = a_star + 0.5 * (hopf_estimate(eps) - a_star)
        auto = (a_star, 0.1 * d, 10 * d, upper)
    return locate_pd_family(family, search, auto)


def nf_pd_check(mu: float, c: NormalFormCoeffs, exact: bool = False,
                search: PDSearchConfig | None = None,
                config: IntegratorConfig | None = None) -> PDResult:
    """Period doubling of the normal form at fixed ``mu`` with sigma as parameter.

    The result's ``a_num`` holds the located sigma. The automatic window is
    centred on ``sigma*`` from the asymptotic prediction with ``eps = mu^2``.
    """
    pred = predict_first_pd(mu * mu, c)
    s = pred.sigma_star
    # smaller sigma moves the orbit away from the separatrix
    family = nf_family(mu, c, exact, config, retreat=-0.05 * abs(s))
    search = search or PDSearchConfig()
    auto = (s, 0.05 * abs(s), 0.5 * abs(s), math.inf)
    return locate_pd_family(family, search, auto)


def _table_row(args) -> ComparisonRow:
    eps, numeric, search = args
    a_asym = predict_first_pd(eps, fhn_coeffs()).a_star
    if not numeric:
        return ComparisonRow(eps=eps, a_asym=a_asym)
    return ComparisonRow(eps=eps, a_asym=a_asym, a_num=locate_pd(eps, search).a_num)


def compare_table(eps_list: Sequence[float] = TABLE1_EPS, numeric_upto: float = 1.0,
                  search: PDSearchConfig = PDSearchConfig(),
                  workers: int | None = None) -> list[ComparisonRow]:
    """Asymptotic and (for ``eps >= numeric_upto``) numerical doubling values."""
    jobs = [(float(e), float(e) >= numeric_upto, search) for e in eps_list]
    n_numeric = sum(1 for j in jobs if j[1])
    workers = min(workers or worker_count(), max(n_numeric, 1))
    if workers <= 1 or n_numeric <= 1:
        return [_table_row(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_table_row, jobs))


def _sweep_chunk(args) -> list[SweepRow]:
    eps, values = args
    family = fhn_family(eps)
    rows = []
    for a in values:
        try:
            orb = family.orbit(a)
        except NumericalError:
            rows.append(SweepRow(a=a, period=None, multipliers=None, pd_function=None,
                                 stable=None))
            continue
        rows.append(SweepRow(a=a, period=orb.period, multipliers=orb.multipliers,
                             pd_function=orb.pd_function, stable=orb.stable))
    return rows


def sweep(eps: float, a_values: Sequence[float], workers: int | None = None) -> list[SweepRow]:
    """Orbit period and multipliers over a grid of ``a`` at fixed ``eps``.

    The sorted grid is cut into contiguous chunks, one per worker; within a
    chunk orbits are continued from neighbour to neighbour. Points without
    a located orbit get empty fields.
    """
    values = sorted(float(a) for a in a_values)[::-1]
    if not values:
        return []
    workers = max(1, min(workers or worker_count(), len(values)))
    chunks = [list(c) for c in np.array_split(np.array(values), workers) if len(c)]
    if workers == 1:
        out = _sweep_chunk((eps, values))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = [r for part in pool.map(_sweep_chunk, [(eps, c) for c in chunks])
                   for r in part]
    return sorted(out, key=lambda r: r.a)


def _max_real_eig(system: SlowFastSystem, eps: float, a: float, h: float = 1e-7) -> float:
    f = system.fast_field(eps, system.to_delta(a))
    jac = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        jac[:, j] = (f(0.0, e) - f(0.0, -e)) / (2 * h)
    return float(np.max(np.linalg.eigvals(jac).real))


def locate_hopf(eps: float, system: SlowFastSystem | None = None,
                bracket: tuple[float, float] | None = None, tol: float = 1e-12) -> float:
    """Parameter value where the equilibrium loses stability.

    Bisection on the largest real part of the eigenvalues of the
    finite-difference Jacobian of the fast-time field at the equilibrium.
    """
    system = system or builtin_fhn()
    lo, hi = bracket or (system.from_delta(2 * eps), system.from_delta(0.0))
    g_lo, g_hi = _max_real_eig(system, eps, lo), _max_real_eig(system, eps, hi)
    if (g_lo > 0) == (g_hi > 0):
        raise BracketInvalid(f"equilibrium stability does not change over [{lo}, {hi}]")
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        g = _max_real_eig(system, eps, mid)
        if (g > 0) == (g_lo > 0):
            lo, g_lo = mid, g
        else:
            hi, g_hi = mid, g
    return 0.5 * (lo + hi)


def period_two_orbit(family: OrbitFamily, p: float, kick: float = 0.05) -> OrbitResult:
    """Fixed point of the second-return map that is not a period-1 orbit.

    The search starts from the period-1 anchor displaced along the
    eigenvector of the multiplier closest to -1, first by iterating the
    second-return map and then by Newton.

    Raises
    ------
    NoOrbit
        If every attempt falls back onto the period-1 orbit or fails.
    """
    p1 = family.orbit(p)
    vals, vecs = np.linalg.eig(p1.jacobian)
    i = int(np.argmin(np.abs(vals.real + 1)))
    v = np.real(vecs[:, i])
    v = v / np.linalg.norm(v)
    rhs = family.field(p)
    scale = max(1.0, float(np.linalg.norm(p1.anchor)))
    for sgn in (1.0, -1.0):
        for k in (kick, kick / 5):
            guess = p1.anchor + sgn * k * scale * v
            for transient in (0, TRANSIENT_RETURNS):
                try:
                    orb = find_periodic_orbit(rhs, family.section, guess, family.config,
                                              newton_tol=family.newton_tol,
                                              max_newton=family.max_newton,
                                              transient=transient, period_multiple=2)
                except _ORBIT_ERRORS:
                    continue
                if np.linalg.norm(orb.anchor - p1.anchor) > 1e-4 * scale:
                    return orb
    raise NoOrbit(f"no period-two orbit distinct from the period-one orbit at {family.name}={p}")
