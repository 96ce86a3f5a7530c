"""Acceptance criteria, one test (or a small group) per numbered criterion.

The terminal summary prints one PASS/FAIL line per criterion.
"""

import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from bslab.bodies import (
    Box,
    CenteredBody,
    Ellipsoid,
    Rhombus,
    contains,
    loewner_ellipsoid,
    polar,
    radial_at,
    random_symmetric_polytope,
    sandwich_check,
    support_at,
)
from bslab.bounds import (
    admissible,
    fit_slope,
    gamma_scan,
    predicted_product_slope,
    sign_condition_terms,
    verify_qest,
)
from bslab.functionals import (
    ExponentPair,
    bs_product,
    cone_rules,
    mean_power,
    s_integral,
    santalo_point,
)
from bslab.quadrature import gauss_product_rule, integrate, monte_carlo_rule, unit_sphere_measure
from bslab.verify import KINDS, bs_ball_value, random_axes, random_body, random_directions, random_rationals

SCAN_GAMMAS = np.geomspace(10, 1e4, 8)


def timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.mark.acceptance(1, "sphere measure (Gauss and Monte Carlo)")
def test_sphere_measure():
    def run():
        for n in range(1, 5):
            sigma = unit_sphere_measure(n)
            # f = 1 is unconditional: the octant rule has 32 nodes on every angle
            g = integrate(gauss_product_rule(n, 32, "octant"), lambda U: np.ones(len(U)), "unconditional")
            assert abs(g.value / sigma - 1) <= 1e-10
            mc = integrate(monte_carlo_rule(n, 100_000, seed=n), lambda U: np.ones(len(U)))
            assert abs(mc.value - sigma) <= max(4 * mc.error_indicator, 1e-12 * sigma)
        # full-sphere Gauss on a smaller grid as well
        for n in (1, 2, 3):
            g = integrate(gauss_product_rule(n, 16, "full"), lambda U: np.ones(len(U)))
            assert abs(g.value / unit_sphere_measure(n) - 1) <= 1e-10

    _, dt = timed(run)
    assert dt < 5.0


@pytest.mark.acceptance(2, "duality identities")
def test_duality_identities():
    rng = np.random.default_rng(2)

    def run():
        worst_recip = worst_inv = 0.0
        for i in range(50):
            d = 2 + i % 3
            S = random_body(rng, d, KINDS[i % len(KINDS)])
            U = random_directions(rng, 1000, d)
            r = radial_at(CenteredBody(S), U)
            recip = radial_at(CenteredBody(polar(S)), U) * support_at(S, U)
            inv = radial_at(CenteredBody(polar(polar(S))), U)
            worst_recip = max(worst_recip, float(np.max(np.abs(recip - 1))))
            worst_inv = max(worst_inv, float(np.max(np.abs(inv / r - 1))))
        return worst_recip, worst_inv

    (recip, inv), dt = timed(run)
    assert recip <= 1e-10
    assert inv <= 1e-10
    assert dt < 10.0


@pytest.mark.acceptance(3, "covering sandwich")
def test_sandwich():
    rng = np.random.default_rng(3)
    for i in range(20):
        d = 2 + i % 4
        a = random_axes(rng, d, 1e3)
        assert sandwich_check(a, samples=1000, seed=i).max_violation <= 1e-12


@pytest.mark.acceptance(4, "classical inequality and its equality case")
def test_classical_inequality():
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    for n in (1, 2, 3):
        values = []
        for _ in range(10):
            E = Ellipsoid(random_axes(rng, n + 1, 5.0))
            values.append(bs_product(E, None, ExponentPair(n + 1, n + 1, n), gauss_product_rule(n, 32, "octant")))
        values = np.array(values)
        assert np.ptp(values) / values.mean() <= 1e-8
        assert np.max(np.abs(values / bs_ball_value(n) - 1)) <= 1e-8
    worst = 0.0
    for i in range(100):
        d = 2 + i % 3
        n = d - 1
        P = random_symmetric_polytope(d, int(rng.integers(d, 3 * d + 4)), rng)
        pair = ExponentPair(n + 1, n + 1, n)
        _, rule_J = cone_rules(P, None, 6)
        z = santalo_point(P, pair, rule_J, mode="polar-only").z
        rule_I, _ = cone_rules(P, z, 6)
        worst = max(worst, bs_product(P, z, pair, rule_I, rule_J) / bs_ball_value(n))
    assert worst <= 1 + 1e-6
    assert time.perf_counter() - t0 < 60.0


@pytest.mark.acceptance(5, "s-integral closed form and homogeneity")
def test_s_integral_closed_form():
    rule = gauss_product_rule(1, 32, "octant")
    assert abs(s_integral(2, (1, 1), rule).value - 1) <= 1e-10
    rng = np.random.default_rng(5)
    for n in (1, 2, 3):
        r = gauss_product_rule(n, 12, "octant")
        for _ in range(5):
            a = np.array(random_axes(rng, n + 1))
            beta, t = float(rng.uniform(0.3, 4)), float(rng.uniform(0.1, 10))
            lhs = s_integral(beta, t * a, r).value
            rhs = t ** -beta * s_integral(beta, a, r).value
            assert abs(lhs / rhs - 1) <= 1e-13


def _n1_values(beta, gammas):
    out = []
    for g in gammas:
        rule = gauss_product_rule(1, 16, "octant", grading=int(math.ceil(math.log(100 * g, 4))))
        out.append(s_integral(beta, (g, 1.0), rule).value)
    return np.array(out)


@pytest.mark.acceptance(6, "n=1 slope suite")
def test_n1_slopes():
    t0 = time.perf_counter()
    g = np.geomspace(1e2, 1e5, 10)
    for beta, expected in ((0.5, -0.5), (2.0, -1.0)):
        fit = fit_slope(np.log(g), np.log(_n1_values(beta, g)))
        assert abs(fit.slope - expected) <= 0.03, (beta, fit.slope)
    ratio = _n1_values(1.0, g) * g / np.log(g)
    assert ratio.min() > 0.5 and ratio.max() < 2.0
    assert time.perf_counter() - t0 < 30.0


@pytest.mark.acceptance(7, "qest and pest exponents, n=2")
@pytest.mark.parametrize("beta", [0.5, 1.5, 2.5])
@pytest.mark.parametrize("reciprocal", [False, True], ids=["qest", "pest"])
def test_qest_exponents(beta, reciprocal):
    grid = np.geomspace(math.sqrt(2), 1e3, 8)
    report = verify_qest(beta, 2, grid, reciprocal=reciprocal, raise_on_violation=False)
    assert report.excess <= 0.05, report


def _scan_slope(alpha, beta, n):
    pair = ExponentPair(alpha, beta, n)
    return gamma_scan(pair, SCAN_GAMMAS, strict=False).fit.slope


@pytest.mark.acceptance(8, "counterexample divergence and boundary boundedness")
def test_divergent_slope():
    slope, dt = timed(lambda: _scan_slope(10, Fraction(5, 2), 2))
    assert abs(slope - predicted_product_slope(ExponentPair(10, Fraction(5, 2), 2))) <= 0.05
    assert abs(slope - 0.4) <= 0.05
    assert dt < 60


@pytest.mark.acceptance(8, "counterexample divergence and boundary boundedness")
def test_sharp_boundary_bounded():
    slope = _scan_slope(10, Fraction(10, 8), 2)
    assert slope <= 0.02, f"fitted slope {slope:.4f} at the sharp boundary"


@pytest.mark.acceptance(8, "counterexample divergence and boundary boundedness")
def test_planar_conjugate_pair_flat():
    slope = _scan_slope(4, Fraction(4, 3), 1)
    assert abs(slope) <= 0.02


@pytest.mark.acceptance(9, "admissibility equivalence and sign condition")
def test_admissibility_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    for n in (1, 2, 3, 4):
        for a, b in random_rationals(rng, 10_000, n):
            adm = admissible(ExponentPair(a, b, n))
            assert adm.main_holds == adm.star_holds
    for n in (1, 2, 3, 4):
        for k in range(1, 300):
            alpha = Fraction(n + 1) + Fraction(k, 11)
            beta = alpha / (alpha - n)
            assert admissible(ExponentPair(alpha, beta, n)).main_holds
            assert all(t <= 0 for t in sign_condition_terms(alpha, n))
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.acceptance(10, "Hölder monotonicity of power means")
def test_holder_monotonicity():
    rng = np.random.default_rng(10)
    for i in range(50):
        d = 2 + i % 3
        n = d - 1
        body = CenteredBody(random_body(rng, d, KINDS[i % len(KINDS)]))
        rule = gauss_product_rule(n, 8, "full")
        means = [mean_power(body, a, rule) for a in (0.5, 1, 2, n + 1)]
        for m0, m1 in zip(means, means[1:]):
            assert m1 >= m0 * (1 - 1e-10)


@pytest.mark.acceptance(11, "Löwner ellipsoid and John sandwich")
def test_loewner():
    rng = np.random.default_rng(11)
    for n in (1, 2, 3):
        for _ in range(3):
            a = np.array(random_axes(rng, n + 1, 20.0))
            L = loewner_ellipsoid(Rhombus(tuple(a)).vertex_array(), eps=1e-6)
            assert np.allclose(L.A, np.diag(1 / a ** 2), rtol=1e-4, atol=1e-4 * np.max(1 / a ** 2))
    for i in range(20):
        d = 2 + i % 3
        P = random_symmetric_polytope(d, int(rng.integers(d, 41)), rng)
        V = P.vertex_array()
        L = loewner_ellipsoid(V, eps=1e-3)
        assert np.max(np.einsum("ij,jk,ik->i", V, L.A, V)) <= 1 + 1e-3
        inner = L.as_body(L.john_factor())
        U = random_directions(rng, 200, d)
        assert all(contains(P, x) for x in U * radial_at(CenteredBody(inner), U)[:, None])


@pytest.mark.acceptance(12, "deterministic scan output")
def test_scan_determinism(tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"scan{k}.csv"
        subprocess.run(
            [sys.executable, "-m", "bslab", "scan-gamma", "--alpha", "10", "--beta", "5/2", "--n", "2",
             "--gammas", "10:1e4:8", "--seed", "42", "--out", str(path)],
            check=True,
        )
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]
    assert outs[0].startswith(b"gamma,I_alpha,J_beta,product,log10_gamma,log10_product\n")
