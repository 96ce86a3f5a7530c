"""Admissible exponent region, predicted growth exponents and gamma-scans.

The constants in the asymptotic bounds are never computed. Everything here is
checked at the level of exponents, through least-squares slopes of log-log
data over increasingly eccentric rhombi.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .bodies import CenteredBody, Rhombus
from .errors import (
    BoundViolation,
    DegenerateFit,
    EquivalenceViolation,
    IntegerBetaCase,
    NonPositiveAlpha,
    UnresolvedAsymptotics,
)
from .functionals import (
    ExponentPair,
    polar_radial_power_integral,
    radial_power_integral,
    s_integral,
    santalo_point,
)
from .quadrature import RuleConfig, SphereRule, gauss_product_rule, grading_for, worker_count

Real = Union[float, int, Fraction]

BOUNDED_SLOPE = 0.02
SLOPE_TOL = 0.05
HALF_RANGE_TOL = 0.1

# Scans default to graded octant Gauss rules; 12 points per panel keeps the
# quadrature error far below the slope tolerances up to gamma = 1e6.
SCAN_RULE = RuleConfig(engine="gauss", nodes=12, region="auto", grading=None)


def _exact(x: Real) -> Union[Fraction, int]:
    return x if isinstance(x, (int, Fraction)) else Fraction(x)


def alpha_star(alpha: Real, n: int) -> Union[Fraction, float]:
    """Largest admissible beta for a given alpha (``inf`` when ``alpha <= 1``)."""
    if not alpha > 0:
        raise NonPositiveAlpha("alpha must be positive")
    a = _exact(alpha)
    if a > n + 1:
        return Fraction(a) / (a - n)
    if a == n + 1:
        return Fraction(n + 1)
    if a > 1:
        return Fraction(n * a) / (a - 1)
    return math.inf


@dataclass(frozen=True)
class Admissibility:
    pair: ExponentPair
    main_holds: bool
    alpha_star: Union[Fraction, float]
    star_holds: bool


def main_condition(alpha: Real, beta: Real, n: int) -> bool:
    a, b = _exact(alpha), _exact(beta)
    return Fraction(n) / a + Fraction(1) / b >= 1 and Fraction(1) / a + Fraction(n) / b >= 1


def admissible(pair: ExponentPair) -> Admissibility:
    """Evaluate both characterisations of the admissible region exactly and cross-check them."""
    main = main_condition(pair.alpha, pair.beta, pair.n)
    star = alpha_star(pair.alpha, pair.n)
    b = _exact(pair.beta)
    star_ok = math.isfinite(b) and (star == math.inf or b <= star)
    if main != star_ok:
        raise EquivalenceViolation(f"characterisations disagree at {pair}")
    return Admissibility(pair, main, star, star_ok)


def predicted_product_slope(pair: ExponentPair) -> float:
    """Growth exponent ``1 - n/alpha - 1/beta`` of the product along ``D(gamma, 1, ..., 1)``."""
    return float(1 - Fraction(pair.n) / _exact(pair.alpha) - Fraction(1) / _exact(pair.beta))


def divergent_family(pair: ExponentPair) -> tuple[tuple[float, ...], float]:
    """Family exponents and predicted slope of the rhombus family that exposes divergence.

    For ``alpha >= beta`` this is ``D(gamma, 1, ..., 1)``. Otherwise the roles of
    the body and its polar swap and the flat family ``D(1, gamma, ..., gamma)``
    is used, with slope ``1 - n/beta - 1/alpha``.
    """
    n = pair.n
    if _exact(pair.alpha) >= _exact(pair.beta):
        return (1.0,) + (0.0,) * (n - 1), predicted_product_slope(pair)
    swapped = ExponentPair(pair.beta, pair.alpha, n)
    return (0.0,) * (n - 1) + (1.0,), predicted_product_slope(swapped)


def sign_condition_terms(alpha: Real, n: int) -> list[Fraction]:
    """``1 - k/beta - (n+1-k)/alpha`` for ``k = 1 .. ceil(beta) - 1`` at ``beta = alpha/(alpha-n)``."""
    a = _exact(alpha)
    if not a > n + 1:
        raise ValueError("the sign condition concerns alpha > n + 1")
    beta = Fraction(a) / (a - n)
    m = math.ceil(beta) - 1
    return [1 - Fraction(k) / beta - Fraction(n + 1 - k) / a for k in range(1, m + 1)]


def log_damping(alpha: float, beta: float, gammas) -> np.ndarray:
    """``gamma^(-1/alpha) * (ln gamma)^(1/beta)``; bounded on ``[1, inf)``."""
    g = np.asarray(gammas, dtype=float)
    return g ** (-1.0 / alpha) * np.log(g) ** (1.0 / beta)


def qest_exponents(beta: Real, n: int) -> list[float]:
    """Exponents ``e`` of the monomial bound ``S(beta, a) <= C * prod a_k^e_k``.

    Assumes ``a_1 >= ... >= a_{n+1}``. Integer ``beta`` in ``[1, n]`` carries a
    logarithmic factor instead and raises :class:`IntegerBetaCase`.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    b = _exact(beta)
    if b > n:
        return [-1.0] * n + [float(-b + n)]
    if b == int(b):
        raise IntegerBetaCase(int(b))
    k = math.ceil(b)
    return [-1.0] * (k - 1) + [float(-b + k - 1)] + [0.0] * (n + 1 - k)


def integer_exponents(beta: int, n: int) -> list[float]:
    """Exponents of ``a_1^-1 ... a_beta^-1`` in the log-corrected integer bound."""
    return [-1.0] * beta + [0.0] * (n + 1 - beta)


def pest_exponents(alpha: Real, n: int) -> list[float]:
    """Exponents of ``S(alpha, 1/a_{n+1}, ..., 1/a_1) <= C * prod a_k^p_k``."""
    return [-e for e in reversed(qest_exponents(alpha, n))]


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    max_residual: float


def fit_slope(xs, ys) -> SlopeFit:
    """Ordinary least squares ``y = slope * x + intercept`` for natural-log data."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 3 or x.shape != y.shape:
        raise DegenerateFit("need at least 3 matching points")
    if np.any(np.diff(x) <= 0):
        raise DegenerateFit("xs must be strictly increasing")
    if (x[-1] - x[0]) / math.log(10) < 0.5:
        raise DegenerateFit("xs span less than half a decade")
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    slope = float(np.sum((x - xm) * (y - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (slope * x + intercept)
    syy = np.sum((y - ym) ** 2)
    r2 = 1.0 if syy == 0 else float(max(0.0, 1.0 - np.sum(resid ** 2) / syy))
    return SlopeFit(slope, intercept, min(r2, 1.0), float(np.max(np.abs(resid))))


def _half_ranges(m: int) -> tuple[slice, slice]:
    k = max(3, math.ceil(m / 2))
    return slice(0, k), slice(m - k, m)


def family_axes(family: Sequence[float], gamma: float) -> np.ndarray:
    """Half-axes ``a_i = prod_{j >= i} gamma^c_j`` (so ``a_{n+1} = 1``)."""
    c = np.asarray(family, dtype=float)
    logs = np.concatenate([np.cumsum(c[::-1])[::-1], [0.0]]) * math.log(gamma)
    return np.exp(logs)


@dataclass(frozen=True)
class ScanRow:
    gamma: float
    I: float
    J: float
    product: float


@dataclass
class ScanResult:
    family: tuple[float, ...]
    pair: ExponentPair
    gammas: np.ndarray
    rows: list
    fit: SlopeFit
    lower_fit: SlopeFit
    center_mode: str = "origin"
    centers: list = field(default_factory=list)

    @property
    def resolved(self) -> bool:
        return abs(self.fit.slope - self.lower_fit.slope) <= HALF_RANGE_TOL


def _scan_point(pair, family, gamma, rule_cfg, center_mode):
    a = family_axes(family, gamma)
    spec = Rhombus(tuple(a))
    aniso = float(a.max() / a.min())
    if center_mode == "origin":
        rule = rule_cfg.build(pair.n, unconditional=True, anisotropy=aniso)
        z = np.zeros(pair.n + 1)
    else:
        rule = rule_cfg.build(pair.n, unconditional=False, anisotropy=aniso)
        if rule.is_octant:
            raise ValueError("santalo center mode needs a full-sphere rule")
        z = santalo_point(spec, pair, rule, mode="product").z
    I = radial_power_integral(CenteredBody(spec, z), pair.alpha, rule).value
    J = polar_radial_power_integral(spec, z, pair.beta, rule).value
    prod = I ** (1.0 / float(pair.alpha)) * J ** (1.0 / float(pair.beta))
    return ScanRow(float(gamma), I, J, prod), z


def gamma_scan(
    pair: ExponentPair,
    gammas: Sequence[float],
    family: Optional[Sequence[float]] = None,
    rule: RuleConfig = SCAN_RULE,
    center_mode: str = "origin",
    strict: bool = True,
) -> ScanResult:
    """Product ``I^(1/alpha) J^(1/beta)`` along a rhombus family, with a log-log slope fit.

    Parameters
    ----------
    pair : ExponentPair
    gammas : sequence of float
        Strictly increasing values in ``[1, 1e6]``, at least 4 of them.
    family : sequence of float, optional
        Exponents ``c`` giving half-axes ``a_i = prod_{j>=i} gamma^c_j``. The
        default ``(1, 0, ..., 0)`` is ``D(gamma, 1, ..., 1)``.
    rule : RuleConfig
        Sphere rule recipe; ``grading=None`` grades to the body's anisotropy.
    center_mode : {"origin", "santalo"}
    strict : bool
        Raise :class:`UnresolvedAsymptotics` (carrying the result) when the
        lower- and upper-range slope fits differ by more than 0.1.

    The reported ``fit`` covers the upper half of the gamma points (at least 3).
    """
    g = np.asarray(gammas, dtype=float)
    if g.ndim != 1 or g.size < 4:
        raise ValueError("need at least 4 gamma values")
    if np.any(np.diff(g) <= 0):
        raise ValueError("gammas must be strictly increasing")
    if g[0] < 1 or g[-1] > 1e6:
        raise ValueError("gammas must lie in [1, 1e6]")
    if center_mode not in ("origin", "santalo"):
        raise ValueError("center_mode must be 'origin' or 'santalo'")
    fam = tuple(float(c) for c in family) if family is not None else (1.0,) + (0.0,) * (pair.n - 1)
    if len(fam) != pair.n:
        raise ValueError(f"family needs {pair.n} exponents")

    def work(gamma):
        return _scan_point(pair, fam, gamma, rule, center_mode)

    workers = worker_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(work, g))
    else:
        out = [work(x) for x in g]
    rows = [r for r, _ in out]
    lx = np.log(g)
    ly = np.log([r.product for r in rows])
    lo, hi = _half_ranges(g.size)
    result = ScanResult(
        family=fam, pair=pair, gammas=g, rows=rows,
        fit=fit_slope(lx[hi], ly[hi]), lower_fit=fit_slope(lx[lo], ly[lo]),
        center_mode=center_mode, centers=[z for _, z in out],
    )
    if strict and not result.resolved:
        raise UnresolvedAsymptotics(
            f"half-range slopes {result.lower_fit.slope:.4f} and {result.fit.slope:.4f} differ by more than {HALF_RANGE_TOL}",
            result,
        )
    return result


def classify_slope(slope: float, predicted: float) -> str:
    if slope <= BOUNDED_SLOPE:
        return "bounded"
    if predicted > SLOPE_TOL and slope >= predicted - SLOPE_TOL:
        return "divergent"
    return "indeterminate"


@dataclass
class QestReport:
    beta: float
    n: int
    reciprocal: bool
    exponents: list
    predicted_slopes: list
    empirical_slopes: list
    constant: float
    integer_case: bool
    worst_gammas: tuple
    log_allowance: float = 0.0

    @property
    def excess(self) -> float:
        return max(e - p for e, p in zip(self.empirical_slopes, self.predicted_slopes)) - self.log_allowance

    @property
    def ok(self) -> bool:
        return self.excess <= SLOPE_TOL and math.isfinite(self.constant)


def qest_rule(n: int, gamma_grid: Sequence[float], nodes: int = 10) -> SphereRule:
    """Graded octant rule resolving the whole lattice built from ``gamma_grid``."""
    aniso = float(max(gamma_grid)) ** n
    return gauss_product_rule(n, nodes, "octant", grading_for(aniso))


def verify_qest(
    beta: Real,
    n: int,
    gamma_grid: Sequence[float],
    rule: Optional[SphereRule] = None,
    reciprocal: bool = False,
    raise_on_violation: bool = True,
) -> QestReport:
    """Compare ``S(beta, a)`` on a gamma-lattice against the predicted monomial exponents.

    Each lattice point is a gamma-vector with ``a_i = gamma_i a_{i+1}``,
    ``a_{n+1} = 1``. For every axis ``k`` and every setting of the other
    ratios, the slope of ``log S`` against ``log gamma_k`` is fitted over the
    upper half of the grid, and the largest slope per axis is compared with the
    bound's exponent. ``reciprocal=True`` checks ``S(beta, 1/a_{n+1}, ..., 1/a_1)``
    against the reversed-reciprocal bound.

    For integer ``beta`` in ``[1, n]`` the bound carries ``max{1, ln gamma_r}``;
    its log-derivative is at most ``1/ln gamma`` at the start of the fit
    window, which is added to the slope allowance. The reported ``constant`` is
    the largest ``log S - log(bound)`` over the lattice, log factor included.
    """
    grid = np.asarray(sorted(gamma_grid), dtype=float)
    if grid.size < 3:
        raise ValueError("gamma_grid needs at least 3 values")
    if grid[0] < math.sqrt(2) * (1 - 1e-12) or grid[-1] > 1e3 * (1 + 1e-12):
        raise ValueError("gamma values must lie in [sqrt(2), 1e3]")
    b = _exact(beta)
    integer_case = (not reciprocal) and b == int(b) and 1 <= b <= n
    if integer_case:
        e = np.array(integer_exponents(int(b), n))
    elif reciprocal:
        e = np.array(pest_exponents(beta, n))
    else:
        e = np.array(qest_exponents(beta, n))
    if rule is None:
        rule = qest_rule(n, grid)
    lg = np.log(grid)
    m = grid.size
    shape = (m,) * n
    disc = np.empty(shape)
    logfac = np.zeros(shape)
    for idx in itertools.product(range(m), repeat=n):
        gam = grid[list(idx)]
        a = np.concatenate([np.cumprod(gam[::-1])[::-1], [1.0]])
        coeffs = (1.0 / a)[::-1] if reciprocal else a
        S = s_integral(beta, coeffs, rule).value
        disc[idx] = math.log(S) - float(e @ np.log(a))
        if integer_case:
            logfac[idx] = math.log(max([1.0] + [math.log(gam[r - 1]) for r in range(int(b), n + 1)]))
    # d log(bound) / d log gamma_k = sum_{i <= k} e_i, since log a_i = sum_{j >= i} log gamma_j
    _, hi = _half_ranges(m)
    allowance = 1.0 / max(1.0, lg[hi][0]) if integer_case else 0.0
    others = list(itertools.product(range(m), repeat=n - 1))
    empirical, worst = [], ()
    best_excess = -math.inf
    for k in range(n):
        moved = np.moveaxis(disc, k, -1).reshape(-1, m)
        slopes = [fit_slope(lg[hi], line[hi]).slope for line in moved]
        j = int(np.argmax(slopes))
        empirical.append(float(slopes[j]) + float(np.sum(e[: k + 1])))
        if slopes[j] > best_excess:
            best_excess = slopes[j]
            idx = list(others[j])
            idx.insert(k, m - 1)
            worst = tuple(float(grid[i]) for i in idx)
    predicted = [float(np.sum(e[: k + 1])) for k in range(n)]
    report = QestReport(
        beta=float(beta), n=n, reciprocal=reciprocal, exponents=e.tolist(),
        predicted_slopes=predicted, empirical_slopes=empirical,
        constant=float(np.max(disc - logfac)), integer_case=integer_case,
        worst_gammas=worst, log_allowance=allowance,
    )
    if raise_on_violation and not report.ok:
        raise BoundViolation(
            f"empirical slopes {empirical} exceed predicted {predicted} by more than {SLOPE_TOL}",
            gammas=worst, report=report,
        )
    return report


def induction_ratio(beta: float, a: Sequence[float], rule_n, rule_lower) -> float:
    """``S(beta, a) / max{a_1^-1 a_2^(1-beta), a_1^-1 S(beta-1, a_2, ...)}``; bounded over lattices."""
    a = np.asarray(a, dtype=float)
    top = s_integral(beta, a, rule_n).value
    tail = s_integral(beta - 1.0, a[1:], rule_lower).value
    return top / max(a[1] ** (1.0 - beta) / a[0], tail / a[0])


@dataclass(frozen=True)
class RegionRow:
    alpha: float
    beta: float
    admissible: bool
    predicted_slope: float
    slope: float
    classification: str
    agrees: bool
    error: str = ""


def region_scan(
    n: int,
    alpha_grid: Sequence[Real],
    beta_grid: Sequence[Real],
    gamma_max: float = 1e5,
    rule: RuleConfig = SCAN_RULE,
    points: int = 8,
) -> list[RegionRow]:
    """Classify each (alpha, beta) empirically and compare with the admissibility predicate.

    Each pair is scanned along its divergent rhombus family over
    ``gamma in [10, gamma_max]`` (log-spaced). Errors are recorded per row.
    """
    if gamma_max > 1e5 or gamma_max <= 10:
        raise ValueError("gamma_max must lie in (10, 1e5]")
    gammas = np.geomspace(10.0, gamma_max, points)
    rows = []
    for alpha, beta in itertools.product(alpha_grid, beta_grid):
        pair = ExponentPair(alpha, beta, n)
        adm = admissible(pair).main_holds
        family, predicted = divergent_family(pair)
        try:
            scan = gamma_scan(pair, gammas, family=family, rule=rule, strict=False)
            slope = scan.fit.slope
            cls = classify_slope(slope, predicted)
            agrees = (adm and cls == "bounded") or (not adm and cls == "divergent")
            rows.append(RegionRow(float(alpha), float(beta), adm, predicted, slope, cls, agrees))
        except Exception as exc:  # noqa: BLE001 - recorded per row, scan continues
            rows.append(RegionRow(float(alpha), float(beta), adm, predicted, math.nan, "error", False, str(exc)))
    return rows
