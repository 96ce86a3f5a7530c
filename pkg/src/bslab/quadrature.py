"""Quadrature rules on the unit sphere S^n and integration of direction functionals.

Gauss rules are tensor products of Gauss-Legendre panels in the hyperspherical
angles ``x_1 = cos t_1, x_2 = sin t_1 cos t_2, ..., x_{n+1} = sin t_1 ... sin t_n``.
Every angle range is split at multiples of pi/2, so the full-sphere rule is the
octant rule reflected into all 2^(n+1) orthants. Optional geometric grading
clusters panels toward the ends of each quarter interval, which is where the
integrands of very eccentric coordinate bodies concentrate.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NonFiniteIntegrand, SymmetryMismatch

ENGINES = ("gauss-octant", "gauss-full", "monte-carlo", "polytope-cone")
GRADING_RATIO = 0.25
_CHUNK = 1 << 16
MAX_NODES = 1 << 24


def ball_volume(d: int) -> float:
    """Volume of the unit ball in R^d."""
    return math.exp(0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1.0))


def unit_sphere_measure(n: int) -> float:
    """Surface measure of S^n, i.e. ``(n + 1) * ball_volume(n + 1)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return (n + 1) * ball_volume(n + 1)


@dataclass(frozen=True)
class IntegralEstimate:
    value: float
    error_indicator: float
    evaluations: int


@dataclass(frozen=True, eq=False)
class SphereRule:
    """Weighted unit directions on S^n.

    For ``gauss-octant`` rules the nodes cover the closed positive orthant only
    and integrals are scaled by ``2^(n+1)``. ``coarse`` is the nested rule with
    half the nodes per panel, used for the Gauss error indicator.
    """

    n: int
    directions: np.ndarray
    weights: np.ndarray
    engine: str
    meta: dict = field(default_factory=dict)
    coarse: Optional["SphereRule"] = None

    @property
    def size(self) -> int:
        return int(self.weights.size)

    @property
    def is_octant(self) -> bool:
        return self.engine == "gauss-octant"

    @property
    def octant_scale(self) -> float:
        return float(2 ** (self.n + 1)) if self.is_octant else 1.0


def _quarter_panels(grading: int, ratio: float) -> np.ndarray:
    """Breakpoints in [0, 1] for one quarter interval, graded toward both ends."""
    if grading <= 0:
        return np.array([0.0, 1.0])
    left = [0.5 * ratio ** k for k in range(grading, 0, -1)]
    return np.array([0.0, *left, 0.5, *(1.0 - x for x in reversed(left)), 1.0])


def _axis_rule(m: int, quarters: int, grading: int, ratio: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(m)
    bps = _quarter_panels(grading, ratio)
    t, wt = [], []
    for q in range(quarters):
        for lo, hi in zip(bps[:-1], bps[1:]):
            half = 0.5 * (hi - lo) * (math.pi / 2)
            t.append((q + lo) * math.pi / 2 + half * (x + 1.0))
            wt.append(half * w)
    return np.concatenate(t), np.concatenate(wt)


def _sin_moment(p: int) -> float:
    """``int_0^{pi/2} sin^p t dt``."""
    return 0.5 * math.sqrt(math.pi) * math.exp(math.lgamma(0.5 * (p + 1)) - math.lgamma(0.5 * p + 1))


def _angles_to_rule(n: int, axes: list[tuple[np.ndarray, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    # fold the Jacobian sin^(n-1-k) into each axis and rescale so the axis
    # integrates it exactly; Gauss-Legendre is only asymptotically exact for it
    folded = []
    for k, (th, w) in enumerate(axes):
        p = n - 1 - k
        wj = w * np.sin(th) ** p
        quarters = round(float(np.sum(w)) / (math.pi / 2))
        folded.append(wj * (quarters * _sin_moment(p) / np.sum(wj)))
    thetas = [t.ravel() for t in np.meshgrid(*[a[0] for a in axes], indexing="ij")]
    W = np.ones(thetas[0].size)
    for w in np.meshgrid(*folded, indexing="ij"):
        W = W * w.ravel()
    X = np.empty((W.size, n + 1))
    s = np.ones_like(W)
    for k, th in enumerate(thetas):
        X[:, k] = s * np.cos(th)
        s = s * np.sin(th)
    X[:, n] = s
    return X, W


@lru_cache(maxsize=64)
def _gauss_rule(n: int, m: int, region: str, grading: int, ratio: float, nested: bool) -> SphereRule:
    if region == "octant":
        axes = [_axis_rule(m, 1, grading, ratio) for _ in range(n)]
    else:
        axes = [_axis_rule(m, 2, grading, ratio) for _ in range(n - 1)] + [_axis_rule(m, 4, grading, ratio)]
    X, W = _angles_to_rule(n, axes)
    if region == "octant":
        # nodes on the orthant boundary may pick up -0.0 or 1e-17 noise
        X = np.abs(X)
    X.setflags(write=False)
    W.setflags(write=False)
    coarse = _gauss_rule(n, max(1, m // 2), region, grading, ratio, False) if nested else None
    return SphereRule(
        n=n,
        directions=X,
        weights=W,
        engine=f"gauss-{region}",
        meta={"nodes_per_axis": m, "grading": grading, "ratio": ratio},
        coarse=coarse,
    )


def gauss_product_rule(n: int, nodes_per_axis: int, region: str = "octant", grading: int = 0) -> SphereRule:
    """Tensor Gauss-Legendre rule in hyperspherical angles.

    Parameters
    ----------
    n : int
        Sphere dimension, ``1 <= n <= 8``.
    nodes_per_axis : int
        Gauss points per panel; with ``grading=0`` there is one panel per
        quarter interval of each angle.
    region : {"octant", "full"}
        ``octant`` covers ``[0, pi/2]^n``; ``full`` covers the whole sphere.
    grading : int
        Number of geometric refinement levels (ratio 1/4) toward each end of
        every quarter interval. Resolves features down to about
        ``(pi/4) * 4**-grading`` radians.
    """
    if n < 1 or n > 8:
        raise ValueError("n must lie in [1, 8]")
    if nodes_per_axis < 2:
        raise ValueError("nodes_per_axis must be >= 2")
    if region not in ("octant", "full"):
        raise ValueError("region must be 'octant' or 'full'")
    if grading < 0:
        raise ValueError("grading must be >= 0")
    per_quarter = nodes_per_axis * (len(_quarter_panels(grading, GRADING_RATIO)) - 1)
    size = per_quarter ** n * (1 if region == "octant" else 2 ** (n - 1) * 4)
    if size > MAX_NODES:
        raise ValueError(f"rule would have {size} nodes (limit {MAX_NODES}); lower nodes_per_axis or grading")
    return _gauss_rule(int(n), int(nodes_per_axis), region, int(grading), GRADING_RATIO, True)


@lru_cache(maxsize=16)
def _simplex_rule(m: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss-Legendre rule on the unit m-simplex: barycentric nodes and weights.

    Weights sum to 1 (the rule integrates the uniform probability measure).
    """
    x, w = leggauss(k)
    t, wt = 0.5 * (x + 1.0), 0.5 * w
    grids = np.meshgrid(*[t] * m, indexing="ij")
    T = np.stack([g.ravel() for g in grids], axis=1)
    Wt = np.prod(np.stack(np.meshgrid(*[wt] * m, indexing="ij"), axis=0).reshape(m, -1), axis=0)
    lam = np.empty((T.shape[0], m + 1))
    rest = np.ones(T.shape[0])
    jac = np.ones(T.shape[0])
    for i in range(m):
        lam[:, i + 1] = rest * T[:, i]
        jac *= rest
        rest = rest * (1.0 - T[:, i])
    lam[:, 0] = rest
    W = Wt * jac * math.factorial(m)
    return lam, W


def cone_rule(points, nodes_per_axis: int = 8) -> SphereRule:
    """Sphere rule adapted to the polytope ``conv(points)``, which must contain the origin.

    The boundary is triangulated into simplices; each simplex ``F`` at distance
    ``h`` from the origin carries a collapsed Gauss rule, and the change of
    variables ``u = x/|x|``, ``du = h |x|^-(n+1) dA`` moves it onto the cone of
    directions through ``F``. Integrands that are smooth inside every such
    cone (radial powers of the polytope itself, or of any body whose kinks lie
    on those cones) converge spectrally instead of at the slow rate of a
    global angular rule.
    """
    from scipy.spatial import ConvexHull

    P = np.atleast_2d(np.asarray(points, dtype=float))
    d = P.shape[1]
    if d < 2:
        raise ValueError("points must live in R^d with d >= 2")
    if nodes_per_axis < 2:
        raise ValueError("nodes_per_axis must be >= 2")
    return _cone_rule(P, d, int(nodes_per_axis), True, ConvexHull)


def _cone_rule(P, d, k, nested, hull_cls) -> SphereRule:
    hull = hull_cls(P)
    h = -hull.equations[:, -1]
    if np.any(h <= 1e-12 * np.max(np.abs(P))):
        raise ValueError("the origin must lie in the interior of conv(points)")
    lam, w = _simplex_rule(d - 1, k)
    S = P[hull.simplices]  # (facets, d, d)
    E = S[:, 1:, :] - S[:, :1, :]
    gram = np.einsum("fij,fkj->fik", E, E)
    area = np.sqrt(np.abs(np.linalg.det(gram))) / math.factorial(d - 1)
    X = np.einsum("qi,fij->fqj", lam, S).reshape(-1, d)
    r = np.linalg.norm(X, axis=1)
    W = (np.repeat(h * area, w.size) * np.tile(w, h.size)) * r ** -d
    U = X / r[:, None]
    U.setflags(write=False)
    W.setflags(write=False)
    coarse = _cone_rule(P, d, max(1, k // 2), False, hull_cls) if nested else None
    return SphereRule(n=d - 1, directions=U, weights=W, engine="polytope-cone",
                      meta={"nodes_per_axis": k, "simplices": int(h.size)}, coarse=coarse)


def _philox_normals(n: int, start: int, count: int, seed: int) -> np.ndarray:
    """Standard normals for samples ``start .. start+count-1``; sample i owns Philox blocks ``i*B .. i*B+B-1``."""
    d = n + 1
    pairs = (d + 1) // 2
    blocks = (2 * pairs + 3) // 4
    bitgen = np.random.Philox(key=seed % (1 << 64), counter=[start * blocks, 0, 0, 0])
    raw = bitgen.random_raw(count * blocks * 4).reshape(count, blocks * 4)[:, : 2 * pairs]
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    r = np.sqrt(-2.0 * np.log(u[:, 0::2]))
    phi = 2.0 * math.pi * u[:, 1::2]
    z = np.empty((count, 2 * pairs))
    z[:, 0::2] = r * np.cos(phi)
    z[:, 1::2] = r * np.sin(phi)
    return z[:, :d]


def monte_carlo_rule(n: int, samples: int, seed: int) -> SphereRule:
    """Uniform random directions from a counter-based generator keyed by ``(seed, index)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if samples < 100:
        raise ValueError("samples must be >= 100")
    parts = [
        _philox_normals(n, start, min(_CHUNK, samples - start), seed)
        for start in range(0, samples, _CHUNK)
    ]
    X = np.vstack(parts)
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    W = np.full(samples, unit_sphere_measure(n) / samples)
    X.setflags(write=False)
    W.setflags(write=False)
    return SphereRule(n=n, directions=X, weights=W, engine="monte-carlo",
                      meta={"samples": samples, "seed": seed})


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("BSL_THREADS", "1")))
    except ValueError:
        return 1


def evaluate_nodes(f: Callable[[np.ndarray], np.ndarray], U: np.ndarray) -> np.ndarray:
    """Evaluate ``f`` on node chunks (concurrently when BSL_THREADS > 1), in node order."""
    chunks = [U[i:i + _CHUNK] for i in range(0, U.shape[0], _CHUNK)]
    workers = worker_count()
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(f, chunks))
    else:
        parts = [f(c) for c in chunks]
    vals = np.concatenate([np.broadcast_to(np.asarray(p, dtype=float), (c.shape[0],)) for p, c in zip(parts, chunks)])
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise NonFiniteIntegrand(f"integrand is {vals[k]} at direction {U[k].tolist()}", U[k].copy())
    return vals


def weighted_sum(rule: SphereRule, f: Callable[[np.ndarray], np.ndarray]) -> IntegralEstimate:
    """Raw ``sum w_i f(u_i)`` over the rule's own nodes (no orthant scaling)."""
    vals = evaluate_nodes(f, rule.directions)
    value = float(np.sum(rule.weights * vals))
    if rule.engine == "monte-carlo":
        err = float(unit_sphere_measure(rule.n) * np.std(vals, ddof=1) / math.sqrt(vals.size))
    elif rule.coarse is not None:
        coarse = float(np.sum(rule.coarse.weights * evaluate_nodes(f, rule.coarse.directions)))
        err = abs(value - coarse)
    else:
        err = 0.0
    return IntegralEstimate(value=value, error_indicator=err, evaluations=rule.size)


def integrate(rule: SphereRule, f: Callable[[np.ndarray], np.ndarray], symmetry: str = "none") -> IntegralEstimate:
    """Integrate a vectorised direction functional ``f((N, n+1)) -> (N,)`` over S^n.

    ``symmetry="unconditional"`` declares ``f`` invariant under coordinate sign
    flips; octant rules require it.
    """
    if symmetry not in ("unconditional", "none"):
        raise ValueError("symmetry must be 'unconditional' or 'none'")
    if rule.is_octant and symmetry != "unconditional":
        raise SymmetryMismatch("octant rules need an unconditional integrand")
    est = weighted_sum(rule, f)
    s = rule.octant_scale
    return IntegralEstimate(est.value * s, est.error_indicator * s, est.evaluations)


@dataclass(frozen=True)
class RuleConfig:
    """How to build a sphere rule for a given problem.

    ``engine`` is ``auto``, ``gauss`` or ``mc``; ``region`` is ``auto``,
    ``octant`` or ``full``. ``grading=None`` lets callers pick the grading from
    the anisotropy of the body being integrated.
    """

    engine: str = "auto"
    nodes: int = 32
    samples: int = 100_000
    seed: int = 0
    region: str = "auto"
    grading: Optional[int] = 0

    def __post_init__(self):
        if self.engine not in ("auto", "gauss", "mc"):
            raise ValueError("engine must be auto, gauss or mc")
        if self.region not in ("auto", "octant", "full"):
            raise ValueError("region must be auto, octant or full")
        if self.nodes < 2 or self.samples < 100:
            raise ValueError("nodes must be >= 2 and samples >= 100")
        if self.grading is not None and self.grading < 0:
            raise ValueError("grading must be >= 0")

    def build(self, n: int, unconditional: bool, anisotropy: float = 1.0) -> SphereRule:
        engine = self.engine
        if engine == "auto":
            engine = "mc" if n > 5 else "gauss"
        if engine == "mc":
            return monte_carlo_rule(n, self.samples, self.seed)
        region = self.region
        if region == "auto":
            region = "octant" if unconditional else "full"
        grading = self.grading if self.grading is not None else grading_for(anisotropy)
        return gauss_product_rule(n, self.nodes, region, grading)


def grading_for(anisotropy: float) -> int:
    """Grading levels that resolve angular features of width ~ 1/anisotropy."""
    if anisotropy <= 2.0:
        return 0
    return int(min(20, math.ceil(math.log(100.0 * anisotropy) / math.log(1.0 / GRADING_RATIO))))
