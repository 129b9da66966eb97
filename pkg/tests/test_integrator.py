from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from foldcrest.errors import Escaped, MaxTimeExceeded, NonFiniteEvaluation
from foldcrest.integrator import IntegratorConfig, dopri_steps, integrate
from foldcrest.systems import builtin_fhn


def harmonic(t, y):
    return np.array([y[1], -y[0]])


def test_harmonic_full_period():
    tr = integrate(harmonic, [1.0, 0.0], (0.0, 2 * math.pi))
    assert np.max(np.abs(tr.y_final - [1.0, 0.0])) < 1e-9


def test_dense_output_matches_solution():
    tr = integrate(harmonic, [1.0, 0.0], (0.0, 10.0))
    for t in np.linspace(0, 10, 97):
        assert np.max(np.abs(tr(t) - [math.cos(t), -math.sin(t)])) < 1e-9


def test_backward_integration():
    tr = integrate(harmonic, [1.0, 0.0], (0.0, -3.0))
    assert tr.t_final == -3.0
    assert np.max(np.abs(tr.y_final - [math.cos(3.0), math.sin(3.0)])) < 1e-9
    assert np.max(np.abs(tr(-1.5) - [math.cos(1.5), math.sin(1.5)])) < 1e-9


def test_sampling_outside_interval():
    tr = integrate(harmonic, [1.0, 0.0], (0.0, 1.0))
    with pytest.raises(ValueError):
        tr(1.5)


def test_max_step_respected():
    cfg = IntegratorConfig(max_step=0.05)
    assert all(s.h <= 0.05 + 1e-15 for s in dopri_steps(harmonic, 0.0, [1, 0], 5.0, cfg))


def test_error_scales_with_tolerance():
    def err(rtol):
        cfg = IntegratorConfig(rel_tol=rtol, abs_tol=rtol * 1e-2, max_step=10.0)
        tr = integrate(harmonic, [1.0, 0.0], (0.0, 20.0), cfg)
        return np.max(np.abs(tr.y_final - [math.cos(20), -math.sin(20)]))
    assert err(1e-9) < err(1e-6) / 10


def test_fhn_stays_bounded():
    sys = builtin_fhn()
    f = sys.fast_field(1e-2, sys.to_delta(0.995))
    tr = integrate(f, [0.05, 0.0, 0.0], (0.0, 200.0))
    assert np.all(np.abs(tr.y[:, 0]) < 3)
    assert np.all(np.abs(tr.y[:, 1]) + np.abs(tr.y[:, 2]) < 3)


def test_fhn_agrees_with_scipy():
    sys = builtin_fhn()
    f = sys.fast_field(1e-2, sys.to_delta(0.99))
    y0 = [0.0, 0.0074, -0.0174]
    tr = integrate(f, y0, (0.0, 150.0))
    ref = solve_ivp(f, (0.0, 150.0), y0, method="DOP853", rtol=1e-13, atol=1e-15)
    assert np.max(np.abs(tr.y_final - ref.y[:, -1])) < 1e-6


@pytest.mark.parametrize("kw", [dict(rel_tol=0.0), dict(abs_tol=-1.0), dict(max_step=0.0),
                                dict(max_time=0.0), dict(event_tol=0.0), dict(rel_tol=1e-14)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        IntegratorConfig(**kw)


def test_max_time():
    with pytest.raises(MaxTimeExceeded):
        integrate(harmonic, [1.0, 0.0], (0.0, 100.0), IntegratorConfig(max_time=10.0))


def test_escape():
    with pytest.raises(Escaped):
        integrate(lambda t, y: y * y, [1.0], (0.0, 2.0))


def test_non_finite():
    with pytest.raises(NonFiniteEvaluation):
        integrate(lambda t, y: np.array([math.nan]), [1.0], (0.0, 1.0))
