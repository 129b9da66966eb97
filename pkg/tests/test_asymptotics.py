from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import TABLE1
from foldcrest.asymptotics import (A_of, F_mu_expansion, F_mu_map, SectionPoint,
                                   asymptotic_P_first_order, fhn_delta_star, fold_distance,
                                   hopf_estimate, k_of, predict_first_pd, sigma_for_J0,
                                   solve_fixed_point, trace_DF2)
from foldcrest.errors import DegenerateCoefficients, NegativeDiscriminant, OutOfRange
from foldcrest.normalform import NormalFormCoeffs
from foldcrest.systems import Jet3, jet_analytic_fhn

SQRT_PI = math.sqrt(math.pi)
K_1E4 = 1 / math.log(1e4)
# residual bound |1 + eps Tr DF2| <= C / ln(1/eps) at the predicted point, fitted on the reference eps values
TRACE_C = 1.0


def test_A_examples(fhn_c):
    assert A_of(0.0, fhn_c, 0.0) == pytest.approx(SQRT_PI / 2 * 0.75, abs=1e-15)
    assert A_of(0.0, fhn_c, 0.0) == pytest.approx(0.6646702, abs=1e-7)
    assert A_of(1.5, fhn_c, 0.0) == pytest.approx(0.0, abs=1e-15)
    z = NormalFormCoeffs(D=-2, kappa=1, nu=0, gamma=0, alpha1=0, alpha2=0, beta1=1, beta2=1)
    assert A_of(3.7, z, 0.0) == 0.0


def test_expansion_vanishes_with_A(fhn_c):
    e = F_mu_expansion(SectionPoint(1.5, 1e-3), fhn_c, 0.0)
    assert e.J1_3 == 0 and e.zeta2_3 == 0 and e.J2_3 == 0


def test_expansion_fhn_desk_values(fhn_c):
    e = F_mu_expansion(SectionPoint(0.0, 1e-4), fhn_c, 0.0)
    assert e.k == pytest.approx(0.108574, abs=1e-6)
    # desk evaluation of the zeta1 formula with beta1 = beta2 = -1/2, zeta0 = 0
    k = K_1E4
    desk = k ** -1.5 * (-1 / 6 - 0.25 * k * (math.log(1 / k) + math.log(4)) + 0.5 * k)
    assert e.zeta1_3 == pytest.approx(desk, rel=1e-14)
    assert e.zeta1_3 == pytest.approx(-5.8776387235311, rel=1e-12)
    assert e.J1_3 == pytest.approx(0.6646702, abs=1e-7)


def test_P_first_order(fhn_c):
    p = SectionPoint(0.0, 1e-4)
    dz, dJ = asymptotic_P_first_order(p, fhn_c, 0.0, 1e-3)
    assert dJ == pytest.approx(2e-3 * 0.6646701940895685, rel=1e-14)
    dz2, dJ2 = asymptotic_P_first_order(p, fhn_c, 0.0, 5e-4)
    assert (dz2, dJ2) == pytest.approx((dz / 2, dJ / 2), rel=1e-15)


def test_P_first_order_zero_at_fixed_point(fhn_c):
    p = solve_fixed_point(0.9, fhn_c, method="exact")
    dz, dJ = asymptotic_P_first_order(p, fhn_c, 0.9, 0.1)
    assert abs(dz) < 1e-12 and abs(dJ) < 1e-12


def test_F_mu_map_truncation(fhn_c):
    p = SectionPoint(0.2, 1e-3)
    e = F_mu_expansion(p, fhn_c, 0.5)
    z, J = F_mu_map(p, fhn_c, 0.5, 1e-2)
    assert z == pytest.approx(0.2 + 1e-2 * e.zeta1_3 + 1e-4 * e.zeta2_3, rel=1e-15)
    assert J == pytest.approx(1e-3 + 1e-2 * e.J1_3 + 1e-4 * e.J2_3, rel=1e-15)


@pytest.mark.parametrize("J0", [0.0, -1e-3, math.exp(-1), 0.5])
def test_k_out_of_range(J0):
    with pytest.raises(OutOfRange):
        k_of(J0)


def test_section_point_requires_positive_J():
    with pytest.raises(OutOfRange):
        SectionPoint(0.0, 0.0)


@pytest.mark.parametrize("method", ["asymptotic", "exact"])
@pytest.mark.parametrize("sigma", [0.7, 0.9, 1.3, 2.0])
def test_fixed_point_consistency(fhn_c, method, sigma):
    p = solve_fixed_point(sigma, fhn_c, method=method)
    e = F_mu_expansion(p, fhn_c, sigma)
    assert abs(e.J1_3) < 1e-10
    if method == "exact":
        assert abs(e.zeta1_3) < 1e-8 * e.k ** -1.5


def test_fixed_point_matches_sigma_law(fhn_c):
    L = math.log(1e4)
    sigma = (L + math.log(L) + math.log(4) - 3) / 12 + 3 / 8
    assert sigma_for_J0(1e-4, fhn_c) == pytest.approx(sigma, rel=1e-14)
    p = solve_fixed_point(sigma, fhn_c)
    assert p.J0 == pytest.approx(1e-4, rel=1e-12)
    assert p.zeta0 == pytest.approx(-(1 / 3) * (L + math.log(L) + math.log(4) - 3), rel=1e-12)


def test_fixed_point_monotone_in_sigma(fhn_c):
    J = [solve_fixed_point(s, fhn_c).J0 for s in np.linspace(0.7, 3.0, 24)]
    assert all(b < a for a, b in zip(J, J[1:]))


def test_fixed_point_errors(fhn_c):
    with pytest.raises(DegenerateCoefficients):
        solve_fixed_point(1.0, fhn_c.with_overrides(alpha2=0.0))
    with pytest.raises(OutOfRange):
        solve_fixed_point(-5.0, fhn_c)
    with pytest.raises(ValueError):
        solve_fixed_point(1.0, fhn_c, method="nope")


def test_trace_examples(fhn_c):
    p = SectionPoint(0.0, 1e-4)
    expected = -(SQRT_PI * K_1E4 ** -0.5 / 4e-4) * 0.25
    assert trace_DF2(p, fhn_c) == pytest.approx(expected, rel=1e-14)
    assert trace_DF2(p, fhn_c) < 0
    assert trace_DF2(p, fhn_c.with_overrides(alpha2=0.0)) == 0.0


@pytest.mark.parametrize("eps", sorted(TABLE1))
def test_trace_self_consistency(fhn_c, eps):
    p = predict_first_pd(eps, fhn_c)
    tr = trace_DF2(SectionPoint(p.zeta0_star, p.J0_star), fhn_c)
    assert abs(1 + eps * tr) <= TRACE_C / math.log(1 / eps)


@pytest.mark.parametrize("eps", sorted(TABLE1))
def test_predict_reproduces_table(fhn_c, eps):
    p = predict_first_pd(eps, fhn_c)
    assert abs(p.a_star - TABLE1[eps][1]) < 1e-12
    assert abs(fhn_delta_star(eps) - p.delta_star) < 1e-15
    assert p.delta_star > 0 and 0.98 < p.a_star < 1 and p.J0_star > 0


def test_predict_J0_desk(fhn_c):
    p = predict_first_pd(1e-4, fhn_c)
    assert p.J0_star == pytest.approx(SQRT_PI / 24 * 1e-4 * math.sqrt(math.log(1e4)), rel=1e-14)
    assert p.J0_star == pytest.approx(2.2413e-5, abs=5e-9)
    assert p.sigma_star == pytest.approx(p.delta_star / 1e-4, rel=1e-15)


@pytest.mark.parametrize("eps", [0.0, -1e-3, 0.1, 0.5])
def test_predict_range(fhn_c, eps):
    with pytest.raises(OutOfRange):
        predict_first_pd(eps, fhn_c)


def test_predict_degenerate(fhn_c):
    for name in ("kappa", "alpha2", "beta1", "beta2"):
        with pytest.raises(DegenerateCoefficients):
            predict_first_pd(1e-3, fhn_c.with_overrides(**{name: 0.0}))
    with pytest.raises(NegativeDiscriminant):
        predict_first_pd(1e-3, fhn_c.with_overrides(alpha2=0.5))


@given(st.floats(0, 0.05))
def test_fold_distance_fhn_equals_delta(delta):
    assert fold_distance(delta, jet_analytic_fhn()) == pytest.approx(delta, rel=1e-15, abs=0)


def test_fold_distance_degenerate():
    from foldcrest.errors import DegenerateFold
    with pytest.raises(DegenerateFold):
        fold_distance(0.01, Jet3(F_xdelta=1.0))


def test_hopf_estimate():
    assert hopf_estimate(1e-2) == pytest.approx(0.9975, abs=1e-16)
    assert hopf_estimate(0.0) == 1.0
    assert hopf_estimate(1e-4) == pytest.approx(0.999975, abs=1e-16)
