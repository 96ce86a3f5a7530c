"""Invariant suite behind ``bslab verify``.

Every check returns a :class:`Check` row; the suite never stops at the first
failure so the table always shows the full picture.
"""

from __future__ import annotations

import contextlib
import io
import json
import math
import os
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .bodies import (
    Box,
    CenteredBody,
    Ellipsoid,
    LinearImage,
    Rhombus,
    body_from_dict,
    contains,
    loewner_ellipsoid,
    polar,
    radial_at,
    random_symmetric_polytope,
    sandwich_check,
    support_at,
)
from .bounds import (
    BOUNDED_SLOPE,
    SLOPE_TOL,
    admissible,
    divergent_family,
    gamma_scan,
    induction_ratio,
    log_damping,
    sign_condition_terms,
)
from .functionals import (
    ExponentPair,
    bs_product,
    cone_rules,
    mean_power,
    polar_radial_power_integral,
    radial_power_integral,
    s_integral,
    santalo_point,
)
from .quadrature import gauss_product_rule, grading_for, monte_carlo_rule, unit_sphere_measure


@dataclass(frozen=True)
class Check:
    module: str
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def random_directions(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    U = rng.standard_normal((count, d))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def random_axes(rng: np.random.Generator, d: int, max_ratio: float = 10.0) -> tuple[float, ...]:
    return tuple(float(x) for x in np.exp(rng.uniform(0.0, math.log(max_ratio), d)))


def random_body(rng: np.random.Generator, d: int, kind: str):
    """One random origin-symmetric body of the given kind in R^d."""
    if kind == "rhombus":
        return Rhombus(random_axes(rng, d))
    if kind == "box":
        return Box(random_axes(rng, d))
    if kind == "ellipsoid":
        return Ellipsoid(random_axes(rng, d))
    if kind == "hpolytope":
        return random_symmetric_polytope(d, int(rng.integers(d, 3 * d + 4)), rng)
    if kind == "linear_image":
        base = random_body(rng, d, str(rng.choice(["rhombus", "box", "ellipsoid"])))
        T = np.eye(d) + 0.4 * rng.standard_normal((d, d))
        while abs(np.linalg.det(T)) < 0.1:
            T = np.eye(d) + 0.4 * rng.standard_normal((d, d))
        return LinearImage(base, T)
    raise ValueError(kind)


KINDS = ("rhombus", "box", "ellipsoid", "hpolytope", "linear_image")


def bs_ball_value(n: int) -> float:
    return unit_sphere_measure(n) ** (2.0 / (n + 1))


# -- bodies -----------------------------------------------------------------

def check_involution(quick: bool):
    rng = np.random.default_rng(1)
    worst = 0.0
    for i in range(10 if quick else 50):
        d = 2 + i % 3
        S = random_body(rng, d, KINDS[i % len(KINDS)])
        U = random_directions(rng, 1000, d)
        r = radial_at(CenteredBody(S), U)
        r2 = radial_at(CenteredBody(polar(polar(S))), U)
        worst = max(worst, float(np.max(np.abs(r2 - r) / np.maximum(1.0, r))))
    return worst <= 1e-12, f"max |r** - r| = {worst:.2e}"


def check_reciprocity(quick: bool):
    rng = np.random.default_rng(2)
    worst = 0.0
    for i in range(10 if quick else 50):
        d = 2 + i % 3
        S = random_body(rng, d, KINDS[i % len(KINDS)])
        U = random_directions(rng, 1000, d)
        prod = radial_at(CenteredBody(polar(S)), U) * support_at(S, U)
        worst = max(worst, float(np.max(np.abs(prod - 1.0))))
    return worst <= 1e-10, f"max |r*.h - 1| = {worst:.2e}"


def check_inclusion_reversal(quick: bool):
    rng = np.random.default_rng(3)
    bad = 0
    for i in range(10 if quick else 30):
        d = 2 + i % 3
        a = random_axes(rng, d)
        U = random_directions(rng, 1000, d)
        chain = [Rhombus(a), Ellipsoid(a), Box(a)]
        for S, Sp in zip(chain, chain[1:]):
            r, rp = radial_at(CenteredBody(S), U), radial_at(CenteredBody(Sp), U)
            if np.all(r <= rp * (1 + 1e-12)):
                q = radial_at(CenteredBody(polar(S)), U)
                qp = radial_at(CenteredBody(polar(Sp)), U)
                bad += int(np.any(qp > q * (1 + 1e-12)))
    return bad == 0, f"{bad} reversed-inclusion failures"


def check_scaling(quick: bool):
    rng = np.random.default_rng(4)
    worst = 0.0
    for i in range(10 if quick else 50):
        d = 2 + i % 3
        S = random_body(rng, d, KINDS[i % len(KINDS)])
        t = float(np.exp(rng.uniform(-2, 2)))
        U = random_directions(rng, 1000, d)
        r = radial_at(CenteredBody(S), U)
        rt = radial_at(CenteredBody(LinearImage(S, t * np.eye(d))), U)
        worst = max(worst, float(np.max(np.abs(rt - t * r) / (t * r))))
    return worst <= 1e-13, f"max relative error {worst:.2e}"


def check_sandwich(quick: bool):
    rng = np.random.default_rng(5)
    worst = 0.0
    for i in range(20):
        d = 2 + i % 4
        a = random_axes(rng, d, 1e3)
        worst = max(worst, sandwich_check(a, samples=1000, seed=i).max_violation)
    return worst <= 1e-12, f"max violation {worst:.2e}"


def check_loewner(quick: bool):
    rng = np.random.default_rng(6)
    eps = 1e-3
    bad = []
    for i in range(5 if quick else 20):
        d = 2 + i % 3
        P = random_symmetric_polytope(d, int(rng.integers(d, 41)), rng)
        V = P.vertex_array()
        L = loewner_ellipsoid(V, eps=eps)
        level = np.einsum("ij,jk,ik->i", V, L.A, V)
        inner = L.as_body(L.john_factor())
        U = random_directions(rng, 200, d)
        pts = U * radial_at(CenteredBody(inner), U)[:, None]
        inside = all(contains(P, x) for x in pts)
        if level.max() > 1 + eps or not inside:
            bad.append(i)
    return not bad, "all polytopes sandwiched" if not bad else f"failures at {bad}"


# -- quadrature -------------------------------------------------------------

def check_octant_full(quick: bool):
    rng = np.random.default_rng(7)
    worst = 0.0
    for n in (1, 2, 3):
        body = CenteredBody(Ellipsoid(random_axes(rng, n + 1)))
        oct_ = radial_power_integral(body, 2.5, gauss_product_rule(n, 16, "octant"))
        full = radial_power_integral(body, 2.5, gauss_product_rule(n, 16, "full"))
        allowed = 10 * max(oct_.error_indicator, full.error_indicator, 1e-14 * abs(full.value))
        worst = max(worst, abs(oct_.value - full.value) / allowed)
    return worst <= 1.0, f"max |octant - full| / allowance = {worst:.2e}"


def check_gauss_mc(quick: bool):
    rng = np.random.default_rng(8)
    worst = 0.0
    for n in (1, 2, 3, 4):
        body = CenteredBody(Ellipsoid(random_axes(rng, n + 1, 3.0)))
        g = radial_power_integral(body, 2.0, gauss_product_rule(n, 16, "full"))
        m = radial_power_integral(body, 2.0, monte_carlo_rule(n, 100_000, seed=n))
        worst = max(worst, abs(g.value - m.value) / m.error_indicator)
    return worst <= 4.0, f"max |gauss - mc| = {worst:.2f} standard errors"


def check_convergence(quick: bool):
    rng = np.random.default_rng(9)
    bad = 0
    for n in (1, 2):
        body = CenteredBody(Ellipsoid(random_axes(rng, n + 1, 10.0)))
        ref = radial_power_integral(body, 3.0, gauss_product_rule(n, 64, "full")).value
        errs = [abs(radial_power_integral(body, 3.0, gauss_product_rule(n, m, "full")).value - ref) for m in (4, 8, 16)]
        floor = 1e-13 * abs(ref)
        for e0, e1 in zip(errs, errs[1:]):
            bad += int(e1 > e0 and e1 > floor)
    return bad == 0, f"{bad} non-monotone refinements"


def check_weights(quick: bool):
    worst = 0.0
    for n in range(1, 5):
        for region in ("octant", "full"):
            rule = gauss_product_rule(n, 8, region, grading=2 if n < 3 else 0)
            total = rule.weights.sum() * (rule.octant_scale if rule.is_octant else 1.0)
            worst = max(worst, abs(total / unit_sphere_measure(n) - 1))
        mc = monte_carlo_rule(n, 1000, 0)
        worst = max(worst, abs(mc.weights.sum() / unit_sphere_measure(n) - 1))
    return worst <= 1e-12, f"max relative weight-sum error {worst:.2e}"


# -- functionals ------------------------------------------------------------

def check_polar_consistency(quick: bool):
    rng = np.random.default_rng(10)
    worst = 0.0
    for i in range(9):
        d = 2 + i % 3
        S = random_body(rng, d, ("rhombus", "box", "ellipsoid")[i % 3])
        rule = gauss_product_rule(d - 1, 12, "octant", grading_for(max(S.a) / min(S.a)))
        J = polar_radial_power_integral(S, None, 2.5, rule).value
        I = radial_power_integral(CenteredBody(polar(S)), 2.5, rule).value
        worst = max(worst, abs(J - I) / I)
    return worst <= 1e-10, f"max relative difference {worst:.2e}"


def check_holder(quick: bool):
    rng = np.random.default_rng(11)
    worst = 0.0
    for i in range(10 if quick else 50):
        d = 2 + i % 3
        n = d - 1
        body = CenteredBody(random_body(rng, d, KINDS[i % len(KINDS)]))
        rule = gauss_product_rule(n, 8, "full")
        means = [mean_power(body, a, rule) for a in (0.5, 1, 2, n + 1)]
        drops = [(m0 - m1) / m0 for m0, m1 in zip(means, means[1:])]
        worst = max(worst, max(drops))
    return worst <= 1e-10, f"largest relative decrease {worst:.2e}"


def check_bs_ellipsoids(quick: bool):
    rng = np.random.default_rng(12)
    worst = 0.0
    for i in range(10):
        n = 1 + i % 3
        E = Ellipsoid(random_axes(rng, n + 1, 5.0))
        rule = gauss_product_rule(n, 32, "octant")
        p = bs_product(E, None, ExponentPair(n + 1, n + 1, n), rule)
        worst = max(worst, abs(p / bs_ball_value(n) - 1))
    return worst <= 1e-8, f"max relative deviation from the ball value {worst:.2e}"


def check_bs_polytopes(quick: bool):
    rng = np.random.default_rng(13)
    worst = 0.0
    for i in range(10 if quick else 100):
        d = 2 + i % 3
        n = d - 1
        P = random_symmetric_polytope(d, int(rng.integers(d, 3 * d + 4)), rng)
        pair = ExponentPair(n + 1, n + 1, n)
        _, rule_J = cone_rules(P, None, 6)
        z = santalo_point(P, pair, rule_J, mode="polar-only").z
        rule_I, _ = cone_rules(P, z, 6)
        worst = max(worst, bs_product(P, z, pair, rule_I, rule_J) / bs_ball_value(n))
    return worst <= 1 + 1e-6, f"max product / ball value = {worst:.6f}"


def check_j_convexity(quick: bool):
    rng = np.random.default_rng(14)
    worst = -math.inf
    for i in range(10 if quick else 40):
        d = 2 + i % 2
        S = random_body(rng, d, KINDS[i % len(KINDS)])
        rule = gauss_product_rule(d - 1, 8, "full")
        V = random_directions(rng, 2, d)
        z1, z2 = V * (rng.uniform(0.1, 0.6, 2) * radial_at(CenteredBody(S), V))[:, None]
        J = lambda z: polar_radial_power_integral(S, z, 2.0, rule).value  # noqa: E731
        mid = J(0.5 * (z1 + z2))
        worst = max(worst, mid / (0.5 * (J(z1) + J(z2))) - 1)
    return worst <= 1e-10, f"max midpoint excess {worst:.2e}"


def check_domain_monotone(quick: bool):
    rng = np.random.default_rng(15)
    bad = 0
    for i in range(10):
        d = 2 + i % 3
        a = random_axes(rng, d)
        rule = gauss_product_rule(d - 1, 12, "octant", grading_for(max(a) / min(a)))
        chain = [Rhombus(a), Ellipsoid(a), Box(a)]
        I = [radial_power_integral(CenteredBody(S), 1.5, rule).value for S in chain]
        J = [polar_radial_power_integral(S, None, 1.5, rule).value for S in chain]
        bad += int(not (I[0] <= I[1] <= I[2] and J[0] >= J[1] >= J[2]))
    return bad == 0, f"{bad} monotonicity failures"


def check_homogeneity(quick: bool):
    rng = np.random.default_rng(16)
    worst = 0.0
    for i in range(20):
        n = 1 + i % 3
        a = np.array(random_axes(rng, n + 1))
        beta = float(rng.uniform(0.3, 4.0))
        t = float(np.exp(rng.uniform(-3, 3)))
        rule = gauss_product_rule(n, 8, "octant", 2)
        s1 = s_integral(beta, t * a, rule).value
        s0 = s_integral(beta, a, rule).value
        worst = max(worst, abs(s1 / (t ** -beta * s0) - 1))
    return worst <= 1e-12, f"max relative error {worst:.2e}"


# -- bounds -----------------------------------------------------------------

def random_rationals(rng: np.random.Generator, count: int, n: int) -> list[tuple[Fraction, Fraction]]:
    """Random positive rationals, with a share placed exactly on the region boundary."""
    out = []
    for i in range(count):
        a = Fraction(int(rng.integers(1, 400)), int(rng.integers(1, 40)))
        if i % 4 == 0 and a > 1:
            b = Fraction(a, a - n) if a > n else Fraction(n * a, a - 1)
            if b <= 0:
                b = Fraction(int(rng.integers(1, 400)), int(rng.integers(1, 40)))
        else:
            b = Fraction(int(rng.integers(1, 400)), int(rng.integers(1, 40)))
        out.append((a, b))
    return out


def check_equivalence(quick: bool):
    rng = np.random.default_rng(17)
    count = 0
    for n in (1, 2, 3, 4):
        for a, b in random_rationals(rng, 1000 if quick else 10_000, n):
            admissible(ExponentPair(a, b, n))  # raises on disagreement
            count += 1
    return True, f"{count} pairs agree"


def check_sign_condition(quick: bool):
    bad, count = 0, 0
    for n in (1, 2, 3, 4):
        for num in range(1, 400):
            alpha = Fraction(n + 1) + Fraction(num, 7)
            for term in sign_condition_terms(alpha, n):
                count += 1
                bad += int(term > 0)
    return bad == 0, f"{bad} positive terms out of {count}"


def check_damping(quick: bool):
    worst = 0.0
    for n in (1, 2, 3):
        for k in range(2, 6):
            # integer beta = k on the boundary needs alpha = k n / (k - 1) > n + 1
            alpha = k * n / (k - 1)
            if alpha <= n + 1:
                continue
            g = np.geomspace(1.0, 1e8, 4001)
            vals = log_damping(alpha, k, g)
            if not np.all(np.isfinite(vals)):
                return False, f"non-finite damping at alpha={alpha}"
            j = int(np.argmax(vals))
            if j == len(g) - 1:
                return False, f"maximum at the right end for alpha={alpha}, beta={k}"
            worst = max(worst, float(vals[j]))
    return True, f"max damping value {worst:.3f}"


def check_scan_slopes(quick: bool):
    gammas = np.geomspace(10, 1e4, 6 if quick else 8)
    notes, ok = [], True
    for alpha, beta in ((3, 3), (3, 2)):
        pair = ExponentPair(alpha, beta, 2)
        slope = gamma_scan(pair, gammas, family=divergent_family(pair)[0], strict=False).fit.slope
        ok &= slope <= BOUNDED_SLOPE
        notes.append(f"({alpha},{beta}) {slope:+.3f}")
    for alpha, beta in ((10, Fraction(5, 2)), (2, 10)):
        pair = ExponentPair(alpha, beta, 2)
        family, predicted = divergent_family(pair)
        slope = gamma_scan(pair, gammas, family=family, strict=False).fit.slope
        ok &= abs(slope - predicted) <= SLOPE_TOL
        notes.append(f"({alpha},{beta}) {slope:+.3f} vs {predicted:+.3f}")
    return ok, "; ".join(notes)


def check_induction(quick: bool):
    worst = 0.0
    grids = {2: np.geomspace(math.sqrt(2), 1e3, 4), 3: np.geomspace(math.sqrt(2), 1e2, 3)}
    for n, grid in grids.items():
        for beta in (1.5, 2.5):
            rule_n = gauss_product_rule(n, 6, "octant", grading_for(grid[-1] ** n))
            rule_lo = gauss_product_rule(n - 1, 6, "octant", grading_for(grid[-1] ** n))
            for gam in np.array(np.meshgrid(*[grid] * n)).reshape(n, -1).T:
                a = np.concatenate([np.cumprod(gam[::-1])[::-1], [1.0]])
                worst = max(worst, induction_ratio(beta, a, rule_n, rule_lo))
    return math.isfinite(worst), f"estimated constant {worst:.3f}"


# -- cli --------------------------------------------------------------------

def _run_cli(argv) -> tuple[int, str]:
    from .cli import main

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(io.StringIO()):
        code = main(argv)
    return code, buf.getvalue()


def check_cli_determinism(quick: bool):
    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for k in range(2):
            path = os.path.join(tmp, f"scan{k}.csv")
            _run_cli(["scan-gamma", "--alpha", "4", "--beta", "4/3", "--n", "1",
                      "--gammas", "10:1e3:5", "--seed", "7", "--out", path])
            with open(path, "rb") as fh:
                outs.append(fh.read())
    return outs[0] == outs[1] and len(outs[0]) > 0, f"{len(outs[0])} bytes, identical={outs[0] == outs[1]}"


def check_cli_schema(quick: bool):
    from .cli import SCHEMA_VERSION

    code, out = _run_cli(["s-integral", "--beta", "2", "--a", "1,1"])
    report = json.loads(out)
    ok = code == 0 and report.get("schema") == SCHEMA_VERSION and abs(report["results"]["value"] - 1) < 1e-10
    return ok, f"schema={report.get('schema')}"


def check_cli_roundtrip(quick: bool):
    rng = np.random.default_rng(18)
    bad = 0
    with tempfile.TemporaryDirectory() as tmp:
        for i, kind in enumerate(KINDS):
            S = random_body(rng, 3, kind)
            path = os.path.join(tmp, f"body{i}.json")
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(S.to_dict(), fh)
            _, out = _run_cli(["integrate", "--body", path, "--echo-body"])
            bad += int(body_from_dict(json.loads(out)) != S)
    return bad == 0, f"{bad} round-trip mismatches"


SUITE: list[tuple[str, str, Callable]] = [
    ("bodies", "duality involution", check_involution),
    ("bodies", "radial/support reciprocity", check_reciprocity),
    ("bodies", "inclusion reversal", check_inclusion_reversal),
    ("bodies", "scaling", check_scaling),
    ("bodies", "covering chain", check_sandwich),
    ("bodies", "Löwner sandwich", check_loewner),
    ("quadrature", "octant/full consistency", check_octant_full),
    ("quadrature", "Gauss/MC consistency", check_gauss_mc),
    ("quadrature", "convergence", check_convergence),
    ("quadrature", "weight sums", check_weights),
    ("functionals", "polar consistency", check_polar_consistency),
    ("functionals", "Hölder monotonicity", check_holder),
    ("functionals", "classical equality on ellipsoids", check_bs_ellipsoids),
    ("functionals", "classical inequality on polytopes", check_bs_polytopes),
    ("functionals", "convexity of J in z", check_j_convexity),
    ("functionals", "domain monotonicity", check_domain_monotone),
    ("functionals", "s_integral homogeneity", check_homogeneity),
    ("bounds", "admissibility equivalence", check_equivalence),
    ("bounds", "boundary sign condition", check_sign_condition),
    ("bounds", "boundary damping", check_damping),
    ("bounds", "scan slopes", check_scan_slopes),
    ("bounds", "induction ratio", check_induction),
    ("cli", "determinism", check_cli_determinism),
    ("cli", "schema", check_cli_schema),
    ("cli", "echo-body round trip", check_cli_roundtrip),
]


def run_suite(quick: bool = False, only: Callable[[str], bool] = lambda name: True) -> list[Check]:
    rows = []
    for module, name, fn in SUITE:
        if not only(name):
            continue
        t0 = time.perf_counter()
        try:
            passed, detail = fn(quick)
        except Exception as exc:  # noqa: BLE001 - a crash is a failed invariant
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append(Check(module, name, bool(passed), detail, time.perf_counter() - t0))
    return rows


def format_table(rows: list[Check]) -> str:
    w = max(len(r.name) for r in rows) if rows else 10
    lines = [f"{'module':<12} {'invariant':<{w}} result  seconds  detail"]
    for r in rows:
        lines.append(f"{r.module:<12} {r.name:<{w}} {'pass' if r.passed else 'FAIL':<6}  {r.seconds:7.2f}  {r.detail}")
    return "\n".join(lines) + "\n"
