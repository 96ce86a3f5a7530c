"""Radial-power integrals, dual quermassintegrals and the Blaschke-Santaló product.

All integrals are taken against the un-normalised surface measure of S^n, so
``radial_power_integral(body, n + 1) == (n + 1) * volume``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np

from .bodies import BodySpec, CenteredBody, radial_at
from .errors import CenterNotInterior, SymmetryMismatch, ZeroExponent
from .quadrature import IntegralEstimate, SphereRule, cone_rule, integrate, unit_sphere_measure, weighted_sum

log = logging.getLogger(__name__)

Real = Union[float, int, Fraction]


@dataclass(frozen=True)
class ExponentPair:
    alpha: Real
    beta: Real
    n: int

    def __post_init__(self):
        if not self.alpha > 0 or not self.beta > 0:
            raise ValueError("alpha and beta must be positive")
        if self.n < 1:
            raise ValueError("n must be >= 1")


def _check_dim(rule: SphereRule, d: int) -> None:
    if rule.n + 1 != d:
        raise ValueError(f"rule is for S^{rule.n} but the body lives in R^{d}")


def radial_power_integral(body: CenteredBody, alpha: float, rule: SphereRule) -> IntegralEstimate:
    """``I = int_{S^n} r_z(u)^alpha du`` for any real ``alpha``."""
    _check_dim(rule, body.dim)
    alpha = float(alpha)
    sym = "unconditional" if body.is_unconditional() else "none"
    if alpha == 0.0:
        return integrate(rule, lambda U: np.ones(U.shape[0]), sym)
    return integrate(rule, lambda U: radial_at(body, U) ** alpha, sym)


def dual_quermassintegral(body: CenteredBody, q: float, rule: SphereRule) -> float:
    """``W_q = 1/(n+1) * int r^(n+1-q)``; ``W_0`` is the volume."""
    n = rule.n
    return radial_power_integral(body, n + 1 - float(q), rule).value / (n + 1)


def _margins(spec: BodySpec, z: np.ndarray, U: np.ndarray) -> np.ndarray:
    return spec.support(U) - U @ z


def polar_radial_power_integral(spec: BodySpec, z, beta: float, rule: SphereRule) -> IntegralEstimate:
    """``J = int (h(u) - z.u)^(-beta) du``, the radial-power integral of the polar about ``z``."""
    _check_dim(rule, spec.dim)
    z = np.zeros(spec.dim) if z is None else np.asarray(z, dtype=float)
    beta = float(beta)
    # some margin h(u) - z.u is <= 0 exactly when z is not interior
    if float(spec.gauge(z[None, :])[0]) >= 1.0:
        raise CenterNotInterior("center is not in the interior of the body")
    unconditional = spec.is_coordinate and not np.any(z)

    def f(U):
        m = _margins(spec, z, U)
        if np.any(m <= 0):
            raise CenterNotInterior("support margin h(u) - z.u is not positive")
        return m ** (-beta)

    return integrate(rule, f, "unconditional" if unconditional else "none")


def bs_product(
    spec: BodySpec, z, pair: ExponentPair, rule: SphereRule, polar_rule: Optional[SphereRule] = None
) -> float:
    """``I^(1/alpha) * J^(1/beta)``; ``J`` uses ``polar_rule`` when given, else ``rule``."""
    I = radial_power_integral(CenteredBody(spec, z), pair.alpha, rule).value
    J = polar_radial_power_integral(spec, z, pair.beta, polar_rule or rule).value
    return I ** (1.0 / float(pair.alpha)) * J ** (1.0 / float(pair.beta))


def s_integral(beta: float, a, rule: SphereRule) -> IntegralEstimate:
    """Octant integral of ``(a . x)^(-beta)`` in hyperspherical angles.

    With ``x_1 = cos t_1, ..., x_{n+1} = sin t_1 ... sin t_n`` this is

        int_{[0, pi/2]^n} sin^(n-1) t_1 ... sin t_(n-1) / (a . x)^beta  dt.

    The rule must be an octant Gauss rule on S^n with ``n = len(a) - 1``.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or np.any(a <= 0):
        raise ValueError("a must be a vector of positive reals")
    if not rule.is_octant:
        raise SymmetryMismatch("s_integral needs an octant rule")
    _check_dim(rule, a.size)
    beta = float(beta)
    return weighted_sum(rule, lambda U: (U @ a) ** (-beta))


def cone_rules(spec: BodySpec, z=None, nodes: int = 8) -> tuple[SphereRule, SphereRule]:
    """Polytope-adapted rules ``(rule_I, rule_J)`` for a body with a vertex list.

    ``rule_I`` follows the boundary facets seen from ``z``, where ``r_z`` is
    smooth; ``rule_J`` follows the facets of the polar, i.e. the normal fan on
    which ``h(u) - z.u`` has its kinks. ``rule_J`` does not depend on ``z``.
    """
    z = np.zeros(spec.dim) if z is None else np.asarray(z, dtype=float)
    V = spec.vertex_array()
    Q = spec.polar().vertex_array()
    rule_I = cone_rule(np.vstack([V, -V]) - z, nodes)
    rule_J = cone_rule(np.vstack([Q, -Q]), nodes)
    return rule_I, rule_J


def mean_power(body: CenteredBody, alpha: float, rule: SphereRule) -> float:
    """Normalised power mean ``(I / |S^n|)^(1/alpha)``."""
    if alpha == 0:
        raise ZeroExponent("mean_power needs a nonzero exponent")
    I = radial_power_integral(body, alpha, rule).value
    return (I / unit_sphere_measure(rule.n)) ** (1.0 / float(alpha))


@dataclass
class SantaloResult:
    """Outcome of the center search.

    ``product_at_z`` and ``product_at_origin`` hold the minimised objective:
    the full product in ``product`` mode, ``J`` alone in ``polar-only`` mode.
    ``history`` is the best objective after each iteration.
    """

    z: np.ndarray
    product_at_z: float
    product_at_origin: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def nelder_mead(
    func: Callable[[np.ndarray], float],
    x0: np.ndarray,
    steps: np.ndarray,
    xtol: float,
    max_iter: int,
) -> tuple[np.ndarray, float, int, bool, list]:
    """Minimise ``func`` by the Nelder-Mead simplex method.

    Standard coefficients (reflection 1, expansion 2, contraction 1/2,
    shrink 1/2). Stops when the simplex diameter drops below ``xtol``.
    Returns ``(x_best, f_best, iterations, converged, history)``.
    """
    d = x0.size
    simplex = np.vstack([x0, x0 + np.diag(steps)])
    values = np.array([func(x) for x in simplex])
    history = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        order = np.argsort(values, kind="stable")
        simplex, values = simplex[order], values[order]
        diam = max(np.linalg.norm(simplex[i] - simplex[j]) for i in range(d + 1) for j in range(i))
        if diam < xtol:
            converged = True
            it -= 1
            break
        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        xr = centroid + (centroid - worst)
        fr = func(xr)
        if fr < values[0]:
            xe = centroid + 2.0 * (centroid - worst)
            fe = func(xe)
            simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        else:
            if fr < values[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = func(xc)
                accept = fc <= fr
            else:
                xc = centroid + 0.5 * (worst - centroid)
                fc = func(xc)
                accept = fc < values[-1]
            if accept:
                simplex[-1], values[-1] = xc, fc
            else:
                simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
                values[1:] = [func(x) for x in simplex[1:]]
        history.append(float(np.min(values)))
    k = int(np.argmin(values))
    return simplex[k].copy(), float(values[k]), it, converged, history


def santalo_point(
    spec: BodySpec,
    pair: ExponentPair,
    rule: SphereRule,
    mode: str = "product",
    z0=None,
    max_iter: int = 2000,
    margin_floor: float = 1e-9,
    polar_rule: Optional[SphereRule] = None,
) -> SantaloResult:
    """Local minimiser over interior centers of the product (or of ``J`` alone).

    Trial centers whose support margin ``h(u) - z.u`` drops to ``margin_floor``
    at any node count as infeasible (objective +inf). The search starts at the
    origin unless ``z0`` is given, and stops once the simplex diameter is below
    ``1e-8 * diam(body)`` or after ``max_iter`` iterations. ``polar_rule``
    (for example the ``rule_J`` of :func:`cone_rules`) replaces ``rule`` for
    the polar-side integral.
    """
    if mode not in ("product", "polar-only"):
        raise ValueError("mode must be 'product' or 'polar-only'")
    if rule.is_octant:
        raise SymmetryMismatch("off-origin centers need a full-sphere rule")
    _check_dim(rule, spec.dim)
    prule = polar_rule or rule
    if prule.is_octant:
        raise SymmetryMismatch("off-origin centers need a full-sphere rule")
    U = prule.directions
    h = spec.support(U)

    w = prule.weights
    beta = float(pair.beta)

    def objective(z: np.ndarray) -> float:
        m = h - U @ z
        if np.min(m) <= margin_floor:
            return np.inf
        if mode == "polar-only":
            # same sum as polar_radial_power_integral, with h evaluated once
            return float(np.sum(w * m ** -beta))
        try:
            return bs_product(spec, z, pair, rule, prule)
        except CenterNotInterior:
            return np.inf

    d = spec.dim
    origin = np.zeros(d)
    start = origin if z0 is None else np.asarray(z0, dtype=float)
    f_origin = objective(origin)
    eye = np.eye(d)
    steps = 0.1 * np.array([radial_at(CenteredBody(spec, start), eye[i]) for i in range(d)])
    diam = spec.diameter()
    z, fz, iters, converged, history = nelder_mead(objective, start, steps, 1e-8 * diam, max_iter)
    if f_origin < fz:
        log.debug("search ended above the origin value; returning the origin")
        z, fz = origin, f_origin
    return SantaloResult(z=z, product_at_z=fz, product_at_origin=f_origin,
                         iterations=iters, converged=converged, history=history)
