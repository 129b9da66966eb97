from __future__ import annotations

import math

import numpy as np
import pytest

from conftest import ORACLES, TABLE1
from foldcrest.asymptotics import predict_first_pd
from foldcrest.bifurcation import (PDSearchConfig, compare_table, critical_multiplier,
                                   locate_hopf, locate_pd, nf_pd_check, period_two_orbit,
                                   sweep, worker_count)
from foldcrest.errors import (BracketInvalid, ComplexPair, DegenerateCoefficients, NoOrbit,
                              OutOfRange)

A_NUM = TABLE1[1e-2][0]
MANUAL = (0.9895, 0.9925)

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def pd_manual():
    return locate_pd(1e-2, PDSearchConfig(bracket=MANUAL))


@pytest.fixture(scope="module")
def nf_truncated(fhn_c):
    return nf_pd_check(0.1, fhn_c)


def test_search_config_validation():
    with pytest.raises(OutOfRange):
        PDSearchConfig(bracket=(0.99, 0.98))
    with pytest.raises(OutOfRange):
        PDSearchConfig(param_tol=0.0)


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("FOLDCREST_THREADS", "1")
    assert worker_count() == 1
    monkeypatch.setenv("FOLDCREST_THREADS", "junk")
    assert worker_count() >= 1


def test_critical_multiplier_complex_pair_at_0992(family_1e2):
    # at a = 0.992 the multipliers are a complex pair inside the unit circle
    with pytest.raises(ComplexPair):
        critical_multiplier(1e-2, 0.992, family=family_1e2)
    assert family_1e2.orbit(0.992).stable


def test_critical_multiplier_stable_side(family_1e2):
    # the multipliers stay real only within ~6e-5 above the doubling
    lam = critical_multiplier(1e-2, 0.99095, family=family_1e2)
    assert -1 < lam < 0


def test_critical_multiplier_unstable_side(family_1e2):
    assert critical_multiplier(1e-2, 0.990, family=family_1e2) < -1


def test_critical_multiplier_near_hopf():
    try:
        lam = critical_multiplier(1e-2, 0.9975)
    except (NoOrbit, ComplexPair):
        return
    assert math.isfinite(lam)


def test_locate_pd_manual_bracket(pd_manual):
    assert abs(pd_manual.a_num - A_NUM) < 1e-6
    assert abs(pd_manual.critical + 1) < 1e-6
    assert all(m.imag == 0 for m in pd_manual.multipliers_at_a)


def test_bisection_iteration_bound(pd_manual):
    lo, hi = MANUAL
    assert pd_manual.iterations <= math.ceil(math.log2((hi - lo) / 1e-8)) + 2


def test_sign_change_brackets_result(pd_manual, family_1e2):
    a = pd_manual.a_num
    assert family_1e2.phi(a - 1e-6) < 0 < family_1e2.phi(a + 1e-6)


def test_auto_bracket_matches_manual(pd_manual):
    auto = locate_pd(1e-2)
    assert abs(auto.a_num - pd_manual.a_num) < 1e-7
    lo, hi = auto.bracket
    assert lo < auto.a_num < hi < 0.9975


def test_param_tol_refinement(pd_manual):
    coarse = locate_pd(1e-2, PDSearchConfig(bracket=MANUAL, param_tol=1e-6))
    assert abs(coarse.a_num - pd_manual.a_num) < 1e-6


def test_bracket_on_stable_side():
    with pytest.raises(BracketInvalid):
        locate_pd(1e-2, PDSearchConfig(bracket=(0.999, 0.9995)))


def test_bracket_without_sign_change(family_1e2):
    from foldcrest.bifurcation import locate_pd_family
    with pytest.raises(BracketInvalid):
        locate_pd_family(family_1e2, PDSearchConfig(bracket=(0.9915, 0.992)))


def test_stable_orbit_after_doubling(pd_manual, family_1e2):
    orb = family_1e2.orbit(pd_manual.a_num + 5e-4)
    assert all(abs(m) < 1 for m in orb.multipliers)


def test_period_two_orbit_before_doubling(pd_manual, family_1e2):
    a = pd_manual.a_num - 5e-4
    p1 = family_1e2.orbit(a)
    p2 = period_two_orbit(family_1e2, a)
    assert p2.residual < 1e-9
    assert np.linalg.norm(p2.anchor - p1.anchor) > 1e-3
    assert p2.period == pytest.approx(2 * p1.period, rel=0.05)


def test_compare_table_asymptotic_only():
    rows = compare_table(numeric_upto=1.0)
    assert [r.eps for r in rows] == sorted(TABLE1, reverse=True)
    for r in rows:
        assert r.a_num is None and r.diff is None
        assert abs(r.a_asym - TABLE1[r.eps][1]) < 1e-12


def test_compare_table_empty():
    assert compare_table([], numeric_upto=1e-2) == []


def test_compare_table_numeric_row():
    rows = compare_table(numeric_upto=1e-2, search=PDSearchConfig(bracket=MANUAL))
    assert len(rows) == 6
    first = rows[0]
    assert first.eps == 1e-2 and first.diff == first.a_num - first.a_asym
    assert abs(abs(first.diff) - 2.88e-5) < 1e-6
    assert all(r.a_num is None for r in rows[1:])


def test_nf_pd_check_truncated(nf_truncated, fhn_c):
    pred = predict_first_pd(1e-2, fhn_c)
    assert abs(nf_truncated.a_num * 1e-2 / pred.delta_star - 1) < 0.15
    assert abs(nf_truncated.critical + 1) < 1e-6


def test_nf_pd_check_exact_vs_truncated(nf_truncated, fhn_c):
    exact = nf_pd_check(0.1, fhn_c, exact=True)
    gap = abs(exact.a_num - nf_truncated.a_num) / nf_truncated.a_num
    # O(mu) relative with mu = 0.1
    assert gap < 0.1


def test_nf_pd_check_degenerate(fhn_c):
    with pytest.raises(DegenerateCoefficients):
        nf_pd_check(0.1, fhn_c.with_overrides(alpha2=0.0))


def test_hopf_against_routh_hurwitz():
    ref = ORACLES["fhn_hopf_eps_1e-2"]["value"]
    assert abs(locate_hopf(1e-2) - ref) < 1e-9
    assert abs(locate_hopf(1e-2) - 0.9975) < 5e-4


def test_hopf_bracket_invalid():
    with pytest.raises(BracketInvalid):
        locate_hopf(1e-2, bracket=(0.9, 0.95))


def test_sweep_rows(pd_manual):
    a_values = [0.9905, 0.9915, 0.992]
    rows = sweep(1e-2, a_values, workers=1)
    assert [r.a for r in rows] == sorted(a_values)
    assert rows[0].pd_function < 0 < rows[1].pd_function
    assert rows[2].stable
    assert sweep(1e-2, []) == []
