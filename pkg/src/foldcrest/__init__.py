"""Period-doubling analysis near an equilibrium-fold pair of slow-fast systems.

Normal-form coefficients from a jet, asymptotic prediction of the first
period doubling, and numerical verification by Poincaré return maps.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .asymptotics import PDPrediction, predict_first_pd, solve_fixed_point
from .bifurcation import PDSearchConfig, PDResult, compare_table, locate_pd, nf_pd_check
from .dynamics import SectionSpec, find_periodic_orbit, first_return, return_map_jacobian
from .integrator import IntegratorConfig, integrate
from .normalform import NormalFormCoeffs, final_coeffs, fhn_coeffs, nf_rhs
from .systems import Jet3, SlowFastSystem, builtin_fhn, check_conditions, jet_analytic_fhn

__all__ = [
    "__version__",
    "Jet3",
    "SlowFastSystem",
    "builtin_fhn",
    "jet_analytic_fhn",
    "check_conditions",
    "NormalFormCoeffs",
    "final_coeffs",
    "fhn_coeffs",
    "nf_rhs",
    "PDPrediction",
    "predict_first_pd",
    "solve_fixed_point",
    "IntegratorConfig",
    "integrate",
    "SectionSpec",
    "first_return",
    "return_map_jacobian",
    "find_periodic_orbit",
    "PDSearchConfig",
    "PDResult",
    "locate_pd",
    "nf_pd_check",
    "compare_table",
]
