import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bslab.bounds import (
    ScanResult,
    admissible,
    alpha_star,
    classify_slope,
    divergent_family,
    family_axes,
    fit_slope,
    gamma_scan,
    integer_exponents,
    log_damping,
    main_condition,
    pest_exponents,
    predicted_product_slope,
    qest_exponents,
    region_scan,
    sign_condition_terms,
    verify_qest,
)
from bslab.errors import DegenerateFit, IntegerBetaCase, NonPositiveAlpha, UnresolvedAsymptotics
from bslab.functionals import ExponentPair
from bslab.quadrature import RuleConfig

rationals = st.fractions(min_value=Fraction(1, 50), max_value=50, max_denominator=60)


# -- admissibility ------------------------------------------------------------

def test_alpha_star_examples():
    assert alpha_star(3, 2) == 3
    assert alpha_star(2, 2) == 4
    assert alpha_star(0.5, 2) == math.inf
    assert alpha_star(10, 2) == Fraction(10, 8)
    with pytest.raises(NonPositiveAlpha):
        alpha_star(0, 2)


def test_admissible_examples():
    assert admissible(ExponentPair(3, 3, 2)).main_holds
    assert not admissible(ExponentPair(10, 2, 2)).main_holds
    adm = admissible(ExponentPair(10, Fraction(10, 8), 2))
    assert adm.main_holds and adm.alpha_star == Fraction(10, 8)


@settings(max_examples=300, deadline=None)
@given(rationals, rationals, st.integers(1, 5))
def test_equivalence_property(a, b, n):
    adm = admissible(ExponentPair(a, b, n))
    assert adm.main_holds == adm.star_holds == main_condition(a, b, n)


@settings(max_examples=100, deadline=None)
@given(rationals, st.integers(1, 4))
def test_region_is_symmetric_under_swap(a, n):
    # the predicate is symmetric in (alpha, beta)
    for b in (Fraction(1, 3), Fraction(2), a + 1):
        assert main_condition(a, b, n) == main_condition(b, a, n)


def test_sign_condition_on_boundary():
    for n in (1, 2, 3):
        for alpha in (Fraction(n + 1) + Fraction(1, 7), Fraction(7 * n), Fraction(101, 3) + n):
            assert all(t <= 0 for t in sign_condition_terms(alpha, n))
    with pytest.raises(ValueError):
        sign_condition_terms(2, 2)


def test_log_damping_bounded():
    g = np.geomspace(1, 1e8, 2001)
    v = log_damping(6.0, 2.0, g)
    assert np.all(np.isfinite(v))
    assert 0 < np.argmax(v) < g.size - 1


# -- exponents ----------------------------------------------------------------

def test_predicted_slope_examples():
    assert predicted_product_slope(ExponentPair(10, 2.5, 2)) == pytest.approx(0.4)
    assert predicted_product_slope(ExponentPair(3, 3, 2)) == 0.0
    assert predicted_product_slope(ExponentPair(4, Fraction(4, 3), 1)) == 0.0


def test_divergent_family_swaps_for_small_alpha():
    fam, slope = divergent_family(ExponentPair(2, 10, 2))
    assert fam == (0.0, 1.0) and slope == pytest.approx(1 - 2 / 10 - 1 / 2)
    fam, slope = divergent_family(ExponentPair(10, 2, 2))
    assert fam == (1.0, 0.0) and slope == pytest.approx(0.3)


def test_qest_examples():
    assert qest_exponents(2.5, 2) == [-1, -1, -0.5]
    assert qest_exponents(1.5, 2) == [-1, -0.5, 0]
    assert qest_exponents(0.5, 1) == [-0.5, 0]
    assert pest_exponents(1.5, 2) == [0, 0.5, 1]
    assert integer_exponents(2, 3) == [-1, -1, 0, 0]
    with pytest.raises(IntegerBetaCase) as info:
        qest_exponents(2, 3)
    assert info.value.k == 2


def test_family_axes():
    np.testing.assert_allclose(family_axes((1, 0), 10.0), [10, 1, 1])
    np.testing.assert_allclose(family_axes((1, 1), 10.0), [100, 10, 1])


# -- fits ---------------------------------------------------------------------

def test_fit_examples():
    x = np.linspace(0, 5, 12)
    fit = fit_slope(x, 2 * x + 1)
    assert fit.slope == pytest.approx(2) and fit.r_squared == pytest.approx(1)
    assert fit_slope(x, np.full_like(x, 3.0)).slope == pytest.approx(0, abs=1e-15)


def test_fit_noise_regression():
    rng = np.random.default_rng(0)
    x = np.log(np.geomspace(1, 100, 30))
    fit = fit_slope(x, x + rng.normal(0, 0.01, x.size))
    assert abs(fit.slope - 1) <= 0.03


def test_fit_degenerate():
    with pytest.raises(DegenerateFit):
        fit_slope(np.log([1.0, 1.5, 2.0]), [0, 1, 2])
    with pytest.raises(DegenerateFit):
        fit_slope([0, 1], [0, 1])


# -- scans --------------------------------------------------------------------

def test_scan_divergent_example():
    res = gamma_scan(ExponentPair(10, 2.5, 2), [10, 1e2, 1e3, 1e4])
    assert abs(res.fit.slope - 0.4) <= 0.05
    assert isinstance(res, ScanResult) and len(res.rows) == 4


def test_scan_rejects_bad_gammas():
    pair = ExponentPair(3, 3, 2)
    with pytest.raises(ValueError):
        gamma_scan(pair, [1, 1, 1, 1])
    with pytest.raises(ValueError):
        gamma_scan(pair, [10, 100, 1000])


def test_scan_unresolved_is_raised_with_result():
    # a 2-node rule is far too coarse; the half-range fits disagree
    rule = RuleConfig(engine="gauss", nodes=2, grading=0)
    with pytest.raises(UnresolvedAsymptotics) as info:
        gamma_scan(ExponentPair(10, 2.5, 2), np.geomspace(1, 1e6, 8), rule=rule)
    assert info.value.result is not None and not info.value.result.resolved


def test_scan_santalo_mode_on_symmetric_family():
    res = gamma_scan(ExponentPair(3, 3, 1), np.geomspace(1, 100, 4),
                     rule=RuleConfig(engine="gauss", nodes=8, region="full", grading=None), center_mode="santalo")
    assert max(np.linalg.norm(z) for z in res.centers) <= 1e-4


def test_classify():
    assert classify_slope(0.01, 0.0) == "bounded"
    assert classify_slope(0.39, 0.4) == "divergent"
    assert classify_slope(0.1, 0.4) == "indeterminate"


def test_region_scan_examples():
    rows = {(r.alpha, r.beta): r for r in region_scan(2, [3, 5, 10], [0.8, 1.25, 2, 3])}
    assert rows[(10, 1.25)].admissible and rows[(10, 1.25)].classification == "bounded"
    assert not rows[(10, 2)].admissible and rows[(10, 2)].classification == "divergent"
    assert rows[(10, 2)].slope == pytest.approx(0.3, abs=0.05)
    assert rows[(3, 0.8)].admissible and rows[(3, 0.8)].slope <= 0.02
    assert all(r.agrees for r in rows.values())


# -- qest ---------------------------------------------------------------------

@pytest.mark.parametrize("beta, expected", [(2.0, -1.0), (0.5, -0.5)])
def test_verify_qest_n1(beta, expected):
    report = verify_qest(beta, 1, np.geomspace(math.sqrt(2), 1e3, 8))
    assert report.empirical_slopes[0] == pytest.approx(expected, abs=0.03)


@pytest.mark.parametrize("beta, n", [(1, 1), (1, 2), (2, 2)])
def test_verify_qest_integer_case(beta, n):
    report = verify_qest(beta, n, np.geomspace(math.sqrt(2), 1e3, 8))
    assert report.integer_case and report.ok


def test_verify_qest_grid_bounds():
    with pytest.raises(ValueError):
        verify_qest(1.5, 2, [1.0, 10.0, 100.0])
