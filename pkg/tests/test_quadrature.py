import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from bslab.bodies import CenteredBody, Ellipsoid, Rhombus, radial_at, random_symmetric_polytope
from bslab.errors import NonFiniteIntegrand, SymmetryMismatch
from bslab.quadrature import (
    RuleConfig,
    ball_volume,
    cone_rule,
    gauss_product_rule,
    grading_for,
    integrate,
    monte_carlo_rule,
    unit_sphere_measure,
)


def ones(U):
    return np.ones(U.shape[0])


def test_sphere_measure_values():
    assert unit_sphere_measure(1) == pytest.approx(2 * math.pi, rel=1e-15)
    assert unit_sphere_measure(2) == pytest.approx(4 * math.pi, rel=1e-15)
    assert unit_sphere_measure(3) == pytest.approx(2 * math.pi ** 2, rel=1e-15)
    assert ball_volume(3) == pytest.approx(4 * math.pi / 3, rel=1e-15)


def test_weight_sum_examples():
    assert gauss_product_rule(1, 32, "octant").weights.sum() == pytest.approx(math.pi / 2, rel=1e-12)
    assert gauss_product_rule(2, 24, "full").weights.sum() == pytest.approx(4 * math.pi, rel=1e-10)


def test_two_point_rule_error():
    rule = gauss_product_rule(1, 2, "octant")
    est = float(np.sum(rule.weights * rule.directions[:, 0]))
    assert abs(est - 1.0) <= 3e-3


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("region", ["octant", "full"])
@pytest.mark.parametrize("grading", [0, 2])
def test_rule_invariants(n, region, grading):
    rule = gauss_product_rule(n, 6 if n < 4 else 3, region, grading)
    total = rule.weights.sum() * rule.octant_scale
    assert total == pytest.approx(unit_sphere_measure(n), rel=1e-10)
    np.testing.assert_allclose(np.linalg.norm(rule.directions, axis=1), 1.0, atol=1e-12)
    assert np.all(rule.weights > 0)
    if region == "octant":
        assert np.all(rule.directions >= 0)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_full_rule_is_antipodally_symmetric(n):
    U = gauss_product_rule(n, 5, "full").directions
    key = lambda X: np.lexsort(np.round(X, 12).T)  # noqa: E731
    np.testing.assert_allclose(U[key(U)], (-U)[key(-U)], atol=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_moments(n):
    # int x_1^2 = sigma/(n+1), int x_1^4 = 3 sigma/((n+1)(n+3))
    d, sigma = n + 1, unit_sphere_measure(n)
    rule = gauss_product_rule(n, 12, "full")
    assert integrate(rule, lambda U: U[:, 0] ** 2).value == pytest.approx(sigma / d, rel=1e-12)
    assert integrate(rule, lambda U: U[:, -1] ** 4).value == pytest.approx(3 * sigma / (d * (d + 2)), rel=1e-12)
    oct_ = gauss_product_rule(n, 12, "octant")
    assert integrate(oct_, lambda U: U[:, 1] ** 4, "unconditional").value == pytest.approx(
        3 * sigma / (d * (d + 2)), rel=1e-12)


def test_rhombus_square_integral():
    body = CenteredBody(Rhombus((1, 1)))
    est = integrate(gauss_product_rule(1, 16, "octant"), lambda U: radial_at(body, U) ** 2, "unconditional")
    assert est.value == pytest.approx(4.0, rel=1e-13)


def test_ball_radial_power_is_sphere_measure():
    body = CenteredBody(Ellipsoid((1, 1, 1)))
    for alpha in (-3, 0.5, 7):
        est = integrate(gauss_product_rule(2, 8, "full"), lambda U: radial_at(body, U) ** alpha)
        assert est.value == pytest.approx(4 * math.pi, rel=1e-12)


def test_mc_determinism_and_prefix():
    a = monte_carlo_rule(3, 1000, seed=7)
    b = monte_carlo_rule(3, 1000, seed=7)
    assert np.array_equal(a.directions, b.directions)
    longer = monte_carlo_rule(3, 70_000, seed=7)
    assert np.array_equal(longer.directions[:1000], a.directions)
    assert not np.array_equal(monte_carlo_rule(3, 1000, seed=8).directions, a.directions)


def test_mc_second_moment():
    rule = monte_carlo_rule(2, 100_000, seed=1)
    vals = rule.directions[:, 0] ** 2
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 1 / 3) <= 4 * se


def test_mc_uniformity_chi2():
    # octant occupancy of 80k directions in R^3 is uniform
    U = monte_carlo_rule(2, 80_000, seed=3).directions
    idx = ((U > 0) * np.array([1, 2, 4])).sum(axis=1)
    counts = np.bincount(idx, minlength=8)
    chi2 = np.sum((counts - 1e4) ** 2 / 1e4)
    assert chi2 < 24.3  # 99.9% quantile, 7 dof


def test_mc_sample_floor():
    with pytest.raises(ValueError):
        monte_carlo_rule(2, 50, 0)


def test_symmetry_mismatch():
    with pytest.raises(SymmetryMismatch):
        integrate(gauss_product_rule(2, 4, "octant"), ones)


def test_non_finite_reports_direction():
    rule = gauss_product_rule(1, 4, "full")
    target = rule.directions[5]

    def f(U):
        out = np.ones(U.shape[0])
        out[np.all(U == target, axis=1)] = np.inf
        return out

    with pytest.raises(NonFiniteIntegrand) as info:
        integrate(rule, f)
    np.testing.assert_array_equal(info.value.direction, target)


def test_threads_do_not_change_results(monkeypatch):
    rule = monte_carlo_rule(3, 200_000, seed=5)
    f = lambda U: np.exp(U[:, 0])  # noqa: E731
    monkeypatch.setenv("BSL_THREADS", "1")
    a = integrate(rule, f).value
    monkeypatch.setenv("BSL_THREADS", "4")
    b = integrate(rule, f).value
    assert a == b


def test_error_indicators():
    body = CenteredBody(Ellipsoid((3, 1)))
    f = lambda U: radial_at(body, U) ** 2  # noqa: E731
    coarse = integrate(gauss_product_rule(1, 4, "octant"), f, "unconditional")
    fine = integrate(gauss_product_rule(1, 32, "octant"), f, "unconditional")
    assert fine.error_indicator < coarse.error_indicator
    exact = 2 * math.pi * 3  # 2 * area of the ellipse
    assert abs(coarse.value - exact) <= 10 * coarse.error_indicator


def test_graded_rule_resolves_thin_rhombus():
    body = CenteredBody(Rhombus((1e4, 1)))
    f = lambda U: radial_at(body, U) ** 2  # noqa: E731
    exact = 4 * 1e4  # twice the area 2 a1 a2
    plain = integrate(gauss_product_rule(1, 16, "octant"), f, "unconditional").value
    graded = integrate(gauss_product_rule(1, 16, "octant", grading_for(1e4)), f, "unconditional").value
    assert abs(graded / exact - 1) < 1e-8
    assert abs(plain / exact - 1) > 1e-3


def test_rule_size_guard():
    with pytest.raises(ValueError):
        gauss_product_rule(4, 12, "full", 6)


def test_rule_config_selection():
    assert RuleConfig().build(2, True).engine == "gauss-octant"
    assert RuleConfig().build(2, False).engine == "gauss-full"
    assert RuleConfig().build(6, True).engine == "monte-carlo"
    assert RuleConfig(region="full").build(2, True).engine == "gauss-full"
    with pytest.raises(ValueError):
        RuleConfig(engine="simpson")
    with pytest.raises(ValueError):
        RuleConfig(nodes=1)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_cone_rule_integrates_volume_exactly(d, rng):
    P = random_symmetric_polytope(d, 3 * d, rng)
    V = np.vstack([P.vertex_array(), -P.vertex_array()])
    rule = cone_rule(V, 4)
    body = CenteredBody(P)
    I = integrate(rule, lambda U: radial_at(body, U) ** d).value
    assert I / d == pytest.approx(ConvexHull(V).volume, rel=1e-10)
    # |x|^-d is smooth on each simplex: the weight sum converges to |S^n|
    errs = [abs(cone_rule(V, k).weights.sum() / unit_sphere_measure(d - 1) - 1) for k in (4, 8, 16)]
    assert errs[2] < errs[0] and errs[2] < 1e-3


def test_cone_rule_needs_interior_origin():
    with pytest.raises(ValueError):
        cone_rule([[1, 0], [0, 1], [1, 1]])
