"""Command-line front end.

Each subcommand prints a JSON report (or writes CSV for the scans). Exit codes:
0 ok, 1 invariant failure, 2 input error, 3 geometry or feasibility error,
4 unresolved numerics.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .bodies import CenteredBody, LinearImage, body_from_dict, loewner_ellipsoid
from .bounds import (
    SCAN_RULE,
    admissible,
    alpha_star,
    classify_slope,
    divergent_family,
    gamma_scan,
    region_scan,
)
from .errors import (
    BodyParseError,
    BoundViolation,
    CenterNotInterior,
    DegenerateFit,
    DegenerateInput,
    EquivalenceViolation,
    InvalidBody,
    NoConvergence,
    NonFiniteIntegrand,
    PolarUnavailable,
    SupportUnavailable,
    SymmetryMismatch,
    UnresolvedAsymptotics,
)
from .functionals import (
    ExponentPair,
    bs_product,
    dual_quermassintegral,
    polar_radial_power_integral,
    radial_power_integral,
    s_integral,
    santalo_point,
)
from .quadrature import RuleConfig, gauss_product_rule, grading_for

SCHEMA_VERSION = "bslab-report/1"
SCAN_HEADER = ["gamma", "I_alpha", "J_beta", "product", "log10_gamma", "log10_product"]
REGION_HEADER = ["alpha", "beta", "admissible", "predicted_slope", "slope", "classification", "agrees"]

EXIT_OK, EXIT_INVARIANT, EXIT_INPUT, EXIT_GEOMETRY, EXIT_UNRESOLVED = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


def _fmt(x: float) -> str:
    return "%.17g" % x


def _real(text: str):
    """Parse a positive exponent; fractions like ``4/3`` stay exact."""
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        try:
            value = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not math.isfinite(value):
            raise argparse.ArgumentTypeError(f"not finite: {text!r}")
        return value
    return int(value) if value.denominator == 1 else value


def _vector(text: str) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text!r}") from None
    if not np.all(np.isfinite(v)):
        raise argparse.ArgumentTypeError("vector entries must be finite")
    return v


def _real_list(text: str) -> list:
    return [_real(t) for t in text.split(",")]


def parse_gammas(text: str) -> np.ndarray:
    """``lo:hi:count`` (log-spaced) or ``lo:hi:count:lin``."""
    parts = text.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("lin", "log")):
        raise InputError(f"--gammas: expected lo:hi:count[:lin], got {text!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"--gammas: malformed numbers in {text!r}") from None
    if count < 4:
        raise InputError("--gammas: count must be at least 4")
    if not (1.0 <= lo < hi <= 1e6):
        raise InputError("--gammas: need 1 <= lo < hi <= 1e6")
    if len(parts) == 4 and parts[3] == "lin":
        return np.linspace(lo, hi, count)
    return np.geomspace(lo, hi, count)


def _load_body(path: Optional[str]):
    if path is None:
        raise InputError("--body is required")
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return body_from_dict(doc)
    except BodyParseError as exc:
        raise InputError(f"{path}: invalid body at key '{exc.key or 'body'}': {exc}") from None


def _rule_config(args, nodes: int = 32, grading: Optional[int] = 0) -> RuleConfig:
    try:
        return RuleConfig(
            engine=args.engine,
            nodes=args.nodes if args.nodes is not None else nodes,
            samples=args.samples,
            seed=args.seed,
            region=args.region,
            grading=grading,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _center(args, dim: int) -> Optional[np.ndarray]:
    if args.center is None:
        return None
    if args.center.size != dim:
        raise InputError(f"--center needs {dim} coordinates")
    return args.center


def _body_anisotropy(spec) -> float:
    """Rough radial anisotropy, used only to pick the rule grading."""
    if spec.is_coordinate:
        return float(max(spec.a) / min(spec.a))
    if isinstance(spec, LinearImage):
        return float(np.linalg.cond(spec.T)) * _body_anisotropy(spec.base)
    return 1.0


def _to_jsonable(x):
    if isinstance(x, dict):
        return {k: _to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _to_jsonable(x.tolist())
    if isinstance(x, (np.floating, Fraction)):
        return float(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _all_finite(x) -> bool:
    if isinstance(x, dict):
        return all(_all_finite(v) for v in x.values())
    if isinstance(x, list):
        return all(_all_finite(v) for v in x)
    if isinstance(x, float):
        return math.isfinite(x)
    return True


def make_report(command: str, argv: Sequence[str], parameters: dict, results: dict, errors: dict, t0: float) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "parameters": _to_jsonable(parameters),
        "results": _to_jsonable(results),
        "error_indicators": _to_jsonable(errors),
        "wall_time": time.perf_counter() - t0,
    }


def _emit_report(report: dict, out: Optional[str]) -> int:
    if not _all_finite(report):
        print("error: report contains non-finite values", file=sys.stderr)
        text = json.dumps(report, indent=2, sort_keys=True)
        code = EXIT_INVARIANT
    else:
        text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
        code = EXIT_OK
    _write(text + "\n", out)
    return code


def _write(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _echo_body(spec, out: Optional[str]) -> int:
    _write(json.dumps(spec.to_dict(), sort_keys=True) + "\n", out)
    return EXIT_OK


# -- subcommands ------------------------------------------------------------

def cmd_integrate(args, argv, t0) -> int:
    spec = _load_body(args.body)
    if args.echo_body:
        return _echo_body(spec, args.out)
    if args.alpha is None:
        raise InputError("--alpha is required")
    body = CenteredBody(spec, _center(args, spec.dim))
    rule = _rule_config(args).build(spec.n, body.is_unconditional(), _body_anisotropy(spec))
    est = radial_power_integral(body, float(args.alpha), rule)
    report = make_report(
        "integrate", argv,
        {"body": spec.to_dict(), "alpha": args.alpha, "center": body.z, "engine": rule.engine, "nodes": rule.size},
        {"value": est.value, "evaluations": est.evaluations},
        {"error_indicator": est.error_indicator}, t0,
    )
    return _emit_report(report, args.out)


def cmd_product(args, argv, t0) -> int:
    spec = _load_body(args.body)
    if args.echo_body:
        return _echo_body(spec, args.out)
    if args.alpha is None or args.beta is None:
        raise InputError("--alpha and --beta are required")
    pair = _pair(args.alpha, args.beta, spec.n)
    z = _center(args, spec.dim)
    cfg = _rule_config(args)
    unconditional = spec.is_coordinate and z is None and not args.santalo
    rule = cfg.build(spec.n, unconditional, _body_anisotropy(spec))
    results = {"product_at_center": bs_product(spec, z, pair, rule), "center": np.zeros(spec.dim) if z is None else z}
    errors = {
        "I_error": radial_power_integral(CenteredBody(spec, z), pair.alpha, rule).error_indicator,
        "J_error": polar_radial_power_integral(spec, z, pair.beta, rule).error_indicator,
    }
    if args.santalo:
        res = santalo_point(spec, pair, rule, mode=args.santalo_mode, z0=z)
        results.update({
            "santalo_point": res.z,
            "product_at_santalo": bs_product(spec, res.z, pair, rule),
            "santalo_iterations": res.iterations,
            "santalo_converged": res.converged,
        })
    report = make_report(
        "product", argv,
        {"body": spec.to_dict(), "alpha": pair.alpha, "beta": pair.beta, "engine": rule.engine, "nodes": rule.size},
        results, errors, t0,
    )
    return _emit_report(report, args.out)


def _pair(alpha, beta, n) -> ExponentPair:
    try:
        return ExponentPair(alpha, beta, n)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def scan_csv(result, predicted: float, verdict: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SCAN_HEADER)
    for r in result.rows:
        w.writerow([_fmt(r.gamma), _fmt(r.I), _fmt(r.J), _fmt(r.product),
                    _fmt(math.log10(r.gamma)), _fmt(math.log10(r.product))])
    buf.write(f"# family,{' '.join(_fmt(c) for c in result.family)}\n")
    buf.write(f"# fitted_slope,{_fmt(result.fit.slope)}\n")
    buf.write(f"# lower_fitted_slope,{_fmt(result.lower_fit.slope)}\n")
    buf.write(f"# predicted_slope,{_fmt(predicted)}\n")
    buf.write(f"# verdict,{verdict}\n")
    return buf.getvalue()


def cmd_scan_gamma(args, argv, t0) -> int:
    if args.alpha is None or args.beta is None or args.n is None:
        raise InputError("--alpha, --beta and --n are required")
    gammas = parse_gammas(args.gammas)
    pair = _pair(args.alpha, args.beta, args.n)
    if args.center_mode == "santalo" and args.region == "octant":
        raise InputError("--center-mode santalo needs --region full or auto")
    cfg = _rule_config(args, nodes=SCAN_RULE.nodes, grading=None)
    family, predicted = divergent_family(pair)
    result = gamma_scan(pair, gammas, family=family, rule=cfg, center_mode=args.center_mode, strict=False)
    verdict = classify_slope(result.fit.slope, predicted) if result.resolved else "unresolved"
    _write(scan_csv(result, predicted, verdict), args.out)
    return EXIT_OK if result.resolved else EXIT_UNRESOLVED


def cmd_region(args, argv, t0) -> int:
    if args.n is None or args.alphas is None or args.betas is None:
        raise InputError("--n, --alphas and --betas are required")
    cfg = _rule_config(args, nodes=SCAN_RULE.nodes, grading=None)
    rows = region_scan(args.n, args.alphas, args.betas, gamma_max=args.gamma_max, rule=cfg, points=args.points)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REGION_HEADER)
    for r in rows:
        w.writerow([_fmt(r.alpha), _fmt(r.beta), int(r.admissible), _fmt(r.predicted_slope),
                    _fmt(r.slope), r.classification, int(r.agrees)])
    agree = sum(r.agrees for r in rows)
    buf.write(f"# agreement,{agree}/{len(rows)}\n")
    _write(buf.getvalue(), args.out)
    return EXIT_OK


def cmd_s_integral(args, argv, t0) -> int:
    if args.beta is None or args.a is None:
        raise InputError("--beta and --a are required")
    a = args.a
    if a.size < 2 or np.any(a <= 0):
        raise InputError("--a needs at least two positive entries")
    n = a.size - 1
    nodes = args.nodes if args.nodes is not None else 32
    if nodes < 2:
        raise InputError("--nodes must be >= 2")
    rule = gauss_product_rule(n, nodes, "octant", grading_for(float(a.max() / a.min())))
    est = s_integral(float(args.beta), a, rule)
    report = make_report(
        "s-integral", argv, {"beta": args.beta, "a": a, "nodes": rule.size},
        {"value": est.value, "evaluations": est.evaluations},
        {"error_indicator": est.error_indicator}, t0,
    )
    return _emit_report(report, args.out)


def cmd_dualquermass(args, argv, t0) -> int:
    spec = _load_body(args.body)
    if args.echo_body:
        return _echo_body(spec, args.out)
    if args.q is None:
        raise InputError("--q is required")
    body = CenteredBody(spec, _center(args, spec.dim))
    rule = _rule_config(args).build(spec.n, body.is_unconditional(), _body_anisotropy(spec))
    W = dual_quermassintegral(body, float(args.q), rule)
    report = make_report(
        "dualquermass", argv, {"body": spec.to_dict(), "q": args.q, "center": body.z, "nodes": rule.size},
        {"value": W}, {}, t0,
    )
    return _emit_report(report, args.out)


def cmd_mvee(args, argv, t0) -> int:
    spec = _load_body(args.body)
    if args.echo_body:
        return _echo_body(spec, args.out)
    try:
        V = spec.vertex_array()
    except (SupportUnavailable, PolarUnavailable, NotImplementedError):
        raise InputError("--body must have a vertex list") from None
    if V.size == 0:
        raise InputError("--body must have a vertex list")
    L = loewner_ellipsoid(V, eps=args.eps)
    k = np.einsum("ij,jk,ik->i", V, L.A, V)
    report = make_report(
        "mvee", argv, {"body": spec.to_dict(), "eps": args.eps},
        {"matrix": L.A, "iterations": L.iterations, "john_factor": L.john_factor()},
        {"max_vertex_level": float(k.max())}, t0,
    )
    return _emit_report(report, args.out)


def cmd_verify(args, argv, t0) -> int:
    from .verify import format_table, run_suite

    rows = run_suite(quick=args.quick)
    _write(format_table(rows), args.out)
    failed = [r for r in rows if not r.passed]
    if failed:
        print(f"error: invariant failed: {failed[0].name}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_admissible(args, argv, t0) -> int:
    if args.alpha is None or args.beta is None or args.n is None:
        raise InputError("--alpha, --beta and --n are required")
    pair = _pair(args.alpha, args.beta, args.n)
    adm = admissible(pair)
    star = alpha_star(pair.alpha, pair.n)
    report = make_report(
        "admissible", argv, {"alpha": pair.alpha, "beta": pair.beta, "n": pair.n},
        {"admissible": adm.main_holds, "alpha_star": str(star) if star != math.inf else "inf"}, {}, t0,
    )
    return _emit_report(report, args.out)


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    rule = argparse.ArgumentParser(add_help=False)
    rule.add_argument("--engine", choices=("auto", "gauss", "mc"), default="auto")
    rule.add_argument("--nodes", type=int, default=None, help="Gauss nodes per angular panel")
    rule.add_argument("--samples", type=int, default=100_000)
    rule.add_argument("--seed", type=int, default=0)
    rule.add_argument("--region", choices=("auto", "octant", "full"), default="auto")
    rule.add_argument("--out", default=None, help="write output here instead of stdout")

    body = argparse.ArgumentParser(add_help=False)
    body.add_argument("--body", metavar="FILE")
    body.add_argument("--center", type=_vector, default=None, metavar="x,y,...")
    body.add_argument("--echo-body", action="store_true", help="print the parsed body as JSON and exit")

    p = argparse.ArgumentParser(prog="bslab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("integrate", parents=[rule, body], help="radial power integral")
    s.add_argument("--alpha", type=_real)
    s.set_defaults(func=cmd_integrate)

    s = sub.add_parser("product", parents=[rule, body], help="I^(1/alpha) J^(1/beta)")
    s.add_argument("--alpha", type=_real)
    s.add_argument("--beta", type=_real)
    s.add_argument("--santalo", action="store_true", help="also minimise over the center")
    s.add_argument("--santalo-mode", choices=("product", "polar-only"), default="product")
    s.set_defaults(func=cmd_product)

    s = sub.add_parser("scan-gamma", parents=[rule], help="product along an eccentric rhombus family (CSV)")
    s.add_argument("--alpha", type=_real)
    s.add_argument("--beta", type=_real)
    s.add_argument("--n", type=int)
    s.add_argument("--gammas", default="10:1e4:8", metavar="lo:hi:count[:lin]")
    s.add_argument("--center-mode", choices=("origin", "santalo"), default="origin")
    s.set_defaults(func=cmd_scan_gamma)

    s = sub.add_parser("region", parents=[rule], help="empirical admissibility classification (CSV)")
    s.add_argument("--n", type=int)
    s.add_argument("--alphas", type=_real_list)
    s.add_argument("--betas", type=_real_list)
    s.add_argument("--gamma-max", type=float, default=1e5)
    s.add_argument("--points", type=int, default=8)
    s.set_defaults(func=cmd_region)

    s = sub.add_parser("s-integral", parents=[rule], help="octant integral of (a.x)^-beta")
    s.add_argument("--beta", type=_real)
    s.add_argument("--a", type=_vector)
    s.set_defaults(func=cmd_s_integral)

    s = sub.add_parser("dualquermass", parents=[rule, body], help="dual quermassintegral W_q")
    s.add_argument("--q", type=_real)
    s.set_defaults(func=cmd_dualquermass)

    s = sub.add_parser("mvee", parents=[rule, body], help="Löwner ellipsoid of the body's vertices")
    s.add_argument("--eps", type=float, default=1e-6)
    s.set_defaults(func=cmd_mvee)

    s = sub.add_parser("admissible", parents=[rule], help="exact admissibility check")
    s.add_argument("--alpha", type=_real)
    s.add_argument("--beta", type=_real)
    s.add_argument("--n", type=int)
    s.set_defaults(func=cmd_admissible)

    s = sub.add_parser("verify", parents=[rule], help="run the invariant suite")
    s.add_argument("--quick", action="store_true", help="smaller sample sizes")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    t0 = time.perf_counter()
    try:
        return args.func(args, argv, t0)
    except (InputError, InvalidBody, DegenerateFit, SymmetryMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (CenterNotInterior, DegenerateInput, PolarUnavailable, SupportUnavailable, NonFiniteIntegrand) as exc:
        print(f"geometry error: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (NoConvergence, UnresolvedAsymptotics) as exc:
        print(f"unresolved: {exc}", file=sys.stderr)
        return EXIT_UNRESOLVED
    except (EquivalenceViolation, BoundViolation) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
