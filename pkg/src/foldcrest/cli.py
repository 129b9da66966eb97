"""Command-line interface: ``foldcrest <command> [options]``.

Exit codes: 0 success, 1 usage or I/O error, 2 violated mathematical
precondition, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import asymptotics, bifurcation
from .dynamics import nf_transit, write_trajectory_csv
from .errors import FoldcrestError, MathPreconditionError, OutOfRange
from .integrator import IntegratorConfig
from .io import RunManifest, dump_json, load_jet, table_csv
from .normalform import J_of, NormalFormCoeffs, final_coeffs, nf_field, nf_field_fhn_exact
from .systems import SlowFastSystem, builtin_fhn, check_conditions, fhn_original

__all__ = ["main", "build_parser", "SYSTEMS", "VERIFY_EPS_MIN"]

SYSTEMS = {"fhn": builtin_fhn, "fhn-original": fhn_original}
VERIFY_EPS_MIN = 1e-4


class UsageError(FoldcrestError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class _Source:
    name: str
    system: SlowFastSystem | None
    jet: object


def _resolve(args) -> _Source:
    if getattr(args, "jet", None):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            jet, _ = load_jet(args.jet)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
        return _Source(name=str(args.jet), system=None, jet=jet)
    system = SYSTEMS[args.system]()
    return _Source(name=system.name, system=system, jet=system.jet)


def _overrides(pairs) -> dict:
    out = {}
    for item in pairs or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        try:
            out[key.strip()] = float(value)
        except ValueError as exc:
            raise UsageError(f"--set {key}: {value!r} is not a number") from exc
    return out


def _coeffs(src: _Source, args) -> NormalFormCoeffs:
    c = final_coeffs(src.jet)
    ov = _overrides(getattr(args, "set", None))
    if ov:
        try:
            c = c.with_overrides(**ov)
        except KeyError as exc:
            raise UsageError(str(exc.args[0])) from exc
    return c


def _range(text: str, n_parts: int, flag: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != n_parts:
        raise UsageError(f"{flag} expects {n_parts} colon-separated numbers, got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise UsageError(f"{flag}: cannot parse {text!r}") from exc


def _manifest(args) -> dict:
    inputs = {k: v for k, v in vars(args).items() if k not in ("func", "command")}
    return RunManifest(command=args.command, inputs=inputs).to_dict()


def _emit(args, text: str) -> None:
    """Write to --out (with a manifest next to it for non-JSON output) or stdout."""
    out = getattr(args, "out", None)
    if out:
        Path(out).write_text(text)
        if getattr(args, "format", "json") != "json":
            Path(str(out) + ".manifest.json").write_text(dump_json(_manifest(args)))
    else:
        sys.stdout.write(text)


def _config(args) -> IntegratorConfig:
    rel = getattr(args, "rel_tol", None)
    return IntegratorConfig(rel_tol=rel) if rel else IntegratorConfig()


def _mult(m) -> list:
    return [{"re": complex(v).real, "im": complex(v).imag} for v in m]


def cmd_coeffs(args) -> int:
    src = _resolve(args)
    report = check_conditions(src.jet, src.system)
    doc = {"manifest": _manifest(args), "system": src.name, "jet": src.jet.to_dict(),
           "conditions": report.to_dict(), "coefficients": None, "staged": None}
    code = 0
    try:
        c = final_coeffs(src.jet, sigma=args.sigma)
        staged = c.staged
        c = _coeffs(src, args)
        doc["coefficients"] = c.to_dict()
        doc["coefficients"]["gamma0"] = c.gamma0_of(args.sigma)
        doc["staged"] = staged.to_dict() if staged is not None else None
    except MathPreconditionError as exc:
        if report.passes:
            print(f"error: {exc}", file=sys.stderr)
        code = exc.exit_code
    if not report.passes:
        print(f"error: conditions failed: {', '.join(report.failures)}", file=sys.stderr)
        code = 2
    _emit(args, dump_json(doc))
    return code


def cmd_predict(args) -> int:
    src = _resolve(args)
    c = _coeffs(src, args)
    pred = asymptotics.predict_first_pd(args.eps, c)
    doc = {"manifest": _manifest(args), "system": src.name, **pred.to_dict()}
    if src.system is None:
        doc["a_star"] = None
        doc["hopf_estimate"] = None
    else:
        doc["param_name"] = src.system.param_name
        doc["a_star"] = src.system.from_delta(pred.delta_star)
        doc["hopf_estimate"] = asymptotics.hopf_estimate(args.eps)
    doc["fold_distance"] = asymptotics.fold_distance(pred.delta_star, src.jet)
    _emit(args, dump_json(doc))
    return 0


def cmd_verify(args) -> int:
    if not args.eps > 0:
        raise UsageError(f"--eps must be positive, got {args.eps}")
    if args.eps < VERIFY_EPS_MIN and not args.force:
        raise UsageError(f"refusing numerical verification at eps={args.eps:g} < "
                         f"{VERIFY_EPS_MIN:g}: integration cost grows without bound; "
                         f"pass --force to run anyway")
    src = _resolve(args)
    if src.system is None:
        raise UsageError("numerical verification needs a built-in system (--system)")
    bracket = tuple(_range(args.bracket, 2, "--bracket")) if args.bracket else None
    search = bifurcation.PDSearchConfig(bracket=bracket, param_tol=args.param_tol)
    a_asym = src.system.from_delta(
        asymptotics.predict_first_pd(args.eps, final_coeffs(src.jet)).delta_star)
    res = bifurcation.locate_pd(args.eps, search, src.system, _config(args))
    row = bifurcation.ComparisonRow(eps=args.eps, a_asym=a_asym, a_num=res.a_num)
    if args.format == "csv":
        _emit(args, table_csv([row]))
        return 0
    doc = {"manifest": _manifest(args), "system": src.name, "eps": args.eps,
           "a_num": res.a_num, "a_asym": a_asym, "diff": row.diff,
           "period": res.orbit.period, "multipliers": _mult(res.multipliers_at_a),
           "critical_multiplier": res.critical, "anchor": [float(v) for v in res.orbit.anchor],
           "bracket": list(res.bracket), "iterations": res.iterations,
           "polish_steps": res.polish_steps}
    _emit(args, dump_json(doc))
    return 0


def _eps_list(text: str | None) -> list[float]:
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"--eps-list: cannot parse {text!r}") from exc


def cmd_table1(args) -> int:
    eps = list(bifurcation.TABLE1_EPS)
    eps += [e for e in _eps_list(args.eps_list) if e not in eps]
    numeric_upto = 1e-2 if args.numeric else math.inf
    rows = bifurcation.compare_table(eps, numeric_upto=numeric_upto)
    if args.format == "json":
        doc = {"manifest": _manifest(args),
               "rows": [{"eps": r.eps, "a_num": r.a_num, "a_asym": r.a_asym, "diff": r.diff}
                        for r in rows]}
        _emit(args, dump_json(doc))
    else:
        _emit(args, table_csv(rows))
    return 0


def cmd_simulate_nf(args) -> int:
    src = _resolve(args)
    c = _coeffs(src, args)
    if not 0 < args.J0 < math.exp(-1):
        raise OutOfRange(f"--J0 {args.J0!r} outside (0, 1/e)")
    rhs = nf_field_fhn_exact(args.mu, args.sigma) if args.exact else nf_field(args.mu, c, args.sigma)
    want_samples = args.format == "csv" or bool(args.trajectory)
    tr = nf_transit(rhs, args.zeta0, args.J0, _config(args), record=want_samples)
    if tr.samples and (args.trajectory or args.format == "csv"):
        t = [s[0] for s in tr.samples]
        y = np.array([s[1] for s in tr.samples])
        header = ("tau", "xi", "eta", "zeta", "J")
        if args.trajectory:
            write_trajectory_csv(args.trajectory, t, y, header, extra=lambda s: (J_of(s),))
        if args.format == "csv":
            write_trajectory_csv(sys.stdout, t, y, header, extra=lambda s: (J_of(s),))
            return 0
    d_zeta, d_J = tr.plus - tr.start
    numeric = {"plus": {"zeta": tr.plus[0], "J": tr.plus[1], "t": tr.t_plus},
               "minus": {"zeta": tr.minus[0], "J": tr.minus[1], "t": tr.t_minus},
               "delta_zeta": d_zeta, "delta_J": d_J,
               "return_delta_zeta": tr.minus[0] - args.zeta0,
               "return_delta_J": tr.minus[1] - args.J0}
    p = asymptotics.SectionPoint(args.zeta0, args.J0)
    e = asymptotics.F_mu_expansion(p, c, args.sigma)
    z_img, J_img = asymptotics.F_mu_map(p, c, args.sigma, args.mu)
    asym = {"zeta1_3": e.zeta1_3, "zeta2_3": e.zeta2_3, "J1_3": e.J1_3, "J2_3": e.J2_3,
            "k": e.k, "delta_zeta": z_img - args.zeta0, "delta_J": J_img - args.J0}
    if args.mu > 0:
        numeric["delta_J_over_mu"] = d_J / args.mu
        numeric["delta_zeta_over_mu"] = d_zeta / args.mu
    doc = {"manifest": _manifest(args), "mu": args.mu, "sigma": args.sigma,
           "zeta0": args.zeta0, "J0": args.J0, "exact": args.exact,
           "numeric": numeric, "asymptotic": asym}
    _emit(args, dump_json(doc))
    return 0


def cmd_sweep(args) -> int:
    lo, hi, n = _range(args.a_range, 3, "--a-range")
    if n < 1 or n != int(n):
        raise UsageError("--a-range count must be a positive integer")
    grid = np.linspace(lo, hi, int(n)) if n > 1 else np.array([lo])
    rows = bifurcation.sweep(args.eps, grid)
    if args.format == "csv":
        lines = ["a,period,mult1_re,mult1_im,mult2_re,mult2_im,pd_function,stable"]
        for r in rows:
            if r.period is None:
                lines.append(f"{r.a:.17g},,,,,,,")
                continue
            m1, m2 = r.multipliers
            vals = [r.a, r.period, m1.real, m1.imag, m2.real, m2.imag, r.pd_function]
            lines.append(",".join(f"{v:.17g}" for v in vals) + f",{int(r.stable)}")
        _emit(args, "\n".join(lines) + "\n")
        return 0
    doc = {"manifest": _manifest(args), "eps": args.eps,
           "rows": [{"a": r.a, "period": r.period,
                     "multipliers": _mult(r.multipliers) if r.multipliers else None,
                     "pd_function": r.pd_function, "stable": r.stable} for r in rows]}
    _emit(args, dump_json(doc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="foldcrest",
                     description="Period doubling near an equilibrium-fold pair.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    source = _Parser(add_help=False)
    source.add_argument("--system", choices=sorted(SYSTEMS), default="fhn")
    source.add_argument("--jet", help="JSON file with jet entries (overrides --system)")
    source.add_argument("--set", action="append", metavar="KEY=VAL",
                        help="override a normal-form coefficient (repeatable)")

    def output(default="json"):
        parent = _Parser(add_help=False)
        parent.add_argument("--out", help="write the result here instead of stdout")
        parent.add_argument("--format", choices=("json", "csv"), default=default)
        return parent

    tol = _Parser(add_help=False)
    tol.add_argument("--rel-tol", type=float, default=None)

    p = sub.add_parser("coeffs", parents=[source, output()], help="normal-form coefficients")
    p.add_argument("--sigma", type=float, default=1.0)
    p.set_defaults(func=cmd_coeffs)

    p = sub.add_parser("predict", parents=[source, output()], help="asymptotic first doubling")
    p.add_argument("--eps", type=float, required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("verify", parents=[source, output(), tol],
                       help="locate the first doubling numerically")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--bracket", metavar="LO:HI")
    p.add_argument("--param-tol", type=float, default=1e-8)
    p.add_argument("--force", action="store_true", help=f"allow eps < {VERIFY_EPS_MIN:g}")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("table1", parents=[output("csv")], help="numerical vs asymptotic table")
    p.add_argument("--numeric", action="store_true", help="add a_num for eps >= 1e-2")
    p.add_argument("--eps-list", help="comma-separated extra eps values")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("simulate-nf", parents=[source, output(), tol],
                       help="one loop of the normal form from S-")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--zeta0", type=float, default=0.0)
    p.add_argument("--J0", type=float, required=True)
    p.add_argument("--exact", action="store_true",
                   help="FitzHugh-Nagumo in normal-form variables, not the truncation")
    p.add_argument("--trajectory", help="also write the sampled loop as CSV here")
    p.set_defaults(func=cmd_simulate_nf)

    p = sub.add_parser("sweep", parents=[output()], help="orbit multipliers over a grid of a")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--a-range", required=True, metavar="LO:HI:N")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FoldcrestError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BrokenPipeError:
        # downstream closed the pipe (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
