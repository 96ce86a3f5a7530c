"""Origin-symmetric convex bodies with closed-form radial, support and polar maps.

Every body lives in R^d with d = n + 1 and is symmetric about the origin by
construction. Directions are passed as arrays of shape ``(d,)`` or ``(N, d)``;
all evaluations are vectorised over the leading axis.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional, Sequence, Union

import numpy as np

from .errors import (
    BodyParseError,
    CenterNotInterior,
    DegenerateInput,
    InvalidBody,
    NoConvergence,
    PolarUnavailable,
    SupportUnavailable,
)

# Cap on the (directions x facets) block evaluated at once.
_BLOCK = 1 << 22


def _as_positive_tuple(values, name: str) -> tuple[float, ...]:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size < 2:
        raise InvalidBody(f"{name} must be a list of at least 2 numbers")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise InvalidBody(f"{name} entries must be finite and positive")
    return tuple(float(v) for v in arr)


def _as_matrix(rows, name: str, cols: Optional[int] = None) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise InvalidBody(f"{name} must be a non-empty list of vectors")
    if cols is not None and arr.shape[1] != cols:
        raise InvalidBody(f"{name} vectors must have length {cols}")
    if not np.all(np.isfinite(arr)):
        raise InvalidBody(f"{name} entries must be finite")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def _directions(u) -> tuple[np.ndarray, bool]:
    arr = np.asarray(u, dtype=float)
    single = arr.ndim == 1
    return np.atleast_2d(arr), single


def _sign_vectors(d: int) -> np.ndarray:
    """One representative of each +-pair of sign vectors in {-1, 1}^d."""
    tails = np.array(list(itertools.product((1.0, -1.0), repeat=d - 1))).reshape(-1, d - 1)
    return np.hstack([np.ones((tails.shape[0], 1)), tails])


def _facet_radial(normals: np.ndarray, offsets: np.ndarray, U: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Radial function of ``{x : |nu_j . x| <= h_j}`` seen from ``z``."""
    c = normals @ z
    if np.any(offsets - np.abs(c) <= 0):
        raise CenterNotInterior("center lies on or outside a facet")
    out = np.empty(U.shape[0])
    step = max(1, _BLOCK // max(1, normals.shape[0]))
    for start in range(0, U.shape[0], step):
        P = U[start:start + step] @ normals.T
        absP = np.abs(P)
        num = offsets - np.sign(P) * c
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(absP > 0, num / absP, np.inf)
        out[start:start + step] = ratio.min(axis=1)
    return out


class _Body:
    """Shared evaluation surface; subclasses provide gauge/support/polar."""

    kind: str = ""

    @property
    def dim(self) -> int:
        raise NotImplementedError

    @property
    def n(self) -> int:
        return self.dim - 1

    is_coordinate = False

    def gauge(self, X) -> np.ndarray:
        raise NotImplementedError

    def support(self, U) -> np.ndarray:
        raise NotImplementedError

    def polar(self) -> "BodySpec":
        raise NotImplementedError

    def _radial_off_center(self, U: np.ndarray, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def radial(self, U, z=None) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if z is None or not np.any(z):
            with np.errstate(divide="ignore"):
                return 1.0 / self.gauge(U)
        return self._radial_off_center(U, np.asarray(z, dtype=float))

    def contains(self, x, tol: float = 1e-9) -> bool:
        X = np.atleast_2d(np.asarray(x, dtype=float))
        return bool(np.all(self.gauge(X) <= 1.0 + tol))

    def circumradius_under(self, T: np.ndarray) -> float:
        raise NotImplementedError

    def circumradius(self) -> float:
        return self.circumradius_under(np.eye(self.dim))

    def diameter(self) -> float:
        return 2.0 * self.circumradius()

    def vertex_array(self) -> np.ndarray:
        raise SupportUnavailable(f"{self.kind} has no finite vertex set")

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True, eq=True)
class Rhombus(_Body):
    """Cross-polytope with vertices ``+-a_i e_i``."""

    a: tuple[float, ...]
    kind = "rhombus"
    is_coordinate = True

    def __post_init__(self):
        object.__setattr__(self, "a", _as_positive_tuple(self.a, "a"))

    @property
    def dim(self) -> int:
        return len(self.a)

    @cached_property
    def _a(self) -> np.ndarray:
        return _frozen(self.a)

    @cached_property
    def _facets(self) -> tuple[np.ndarray, np.ndarray]:
        S = _sign_vectors(self.dim)
        return S / self._a, np.ones(S.shape[0])

    def gauge(self, X) -> np.ndarray:
        return np.abs(np.atleast_2d(X)) @ (1.0 / self._a)

    def _radial_off_center(self, U, z):
        return _facet_radial(*self._facets, U, z)

    def support(self, U) -> np.ndarray:
        return np.max(np.abs(np.atleast_2d(U)) * self._a, axis=1)

    def polar(self) -> "Box":
        return Box(tuple(1.0 / v for v in self.a))

    def circumradius_under(self, T):
        return float(np.max(np.linalg.norm(T * self._a, axis=0)))

    def vertex_array(self) -> np.ndarray:
        return np.diag(self._a)

    def to_dict(self):
        return {"kind": self.kind, "a": list(self.a)}


@dataclass(frozen=True, eq=True)
class Box(_Body):
    """Rectangle with vertices ``(+-a_1, ..., +-a_d)``."""

    a: tuple[float, ...]
    kind = "box"
    is_coordinate = True

    def __post_init__(self):
        object.__setattr__(self, "a", _as_positive_tuple(self.a, "a"))

    @property
    def dim(self) -> int:
        return len(self.a)

    @cached_property
    def _a(self) -> np.ndarray:
        return _frozen(self.a)

    def gauge(self, X) -> np.ndarray:
        return np.max(np.abs(np.atleast_2d(X)) / self._a, axis=1)

    def _radial_off_center(self, U, z):
        return _facet_radial(np.eye(self.dim), self._a, U, z)

    def support(self, U) -> np.ndarray:
        return np.abs(np.atleast_2d(U)) @ self._a

    def polar(self) -> Rhombus:
        return Rhombus(tuple(1.0 / v for v in self.a))

    def circumradius_under(self, T):
        corners = _sign_vectors(self.dim) * self._a
        return float(np.max(np.linalg.norm(corners @ T.T, axis=1)))

    def vertex_array(self) -> np.ndarray:
        return _sign_vectors(self.dim) * self._a

    def to_dict(self):
        return {"kind": self.kind, "a": list(self.a)}


@dataclass(frozen=True, eq=True)
class Ellipsoid(_Body):
    """``{x : sum x_i^2 / a_i^2 <= 1}``."""

    a: tuple[float, ...]
    kind = "ellipsoid"
    is_coordinate = True

    def __post_init__(self):
        object.__setattr__(self, "a", _as_positive_tuple(self.a, "a"))

    @property
    def dim(self) -> int:
        return len(self.a)

    @cached_property
    def _a(self) -> np.ndarray:
        return _frozen(self.a)

    def gauge(self, X) -> np.ndarray:
        return np.sqrt(np.sum((np.atleast_2d(X) / self._a) ** 2, axis=1))

    def _radial_off_center(self, U, z):
        inv2 = 1.0 / self._a ** 2
        c = 1.0 - float(np.sum(z * z * inv2))
        if c <= 0:
            raise CenterNotInterior("center lies on or outside the ellipsoid")
        q = (U * U) @ inv2
        b = U @ (z * inv2)
        disc = np.sqrt(b * b + q * c)
        # positive root of q*l^2 + 2*b*l - c = 0, cancellation-free branch per sign of b
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(b > 0, c / (b + disc), (disc - b) / q)

    def support(self, U) -> np.ndarray:
        return np.sqrt(np.sum((np.atleast_2d(U) * self._a) ** 2, axis=1))

    def polar(self) -> "Ellipsoid":
        return Ellipsoid(tuple(1.0 / v for v in self.a))

    def circumradius_under(self, T):
        return float(np.linalg.norm(T * self._a, ord=2))

    def to_dict(self):
        return {"kind": self.kind, "a": list(self.a)}


@dataclass(frozen=True, eq=False)
class HPolytopeSym(_Body):
    """Symmetric polytope ``{x : |nu_j . x| <= h_j for all j}``.

    One normal is stored per +- facet pair. ``vertices`` is optional, but the
    support function and the polar map need it.
    """

    normals: Any
    offsets: Any
    vertices: Any = None
    kind = "hpolytope"

    def __post_init__(self):
        N = _as_matrix(self.normals, "normals")
        d = N.shape[1]
        if d < 2:
            raise InvalidBody("normals must have length >= 2")
        h = np.asarray(self.offsets, dtype=float)
        if h.shape != (N.shape[0],):
            raise InvalidBody("offsets must have one entry per normal")
        if not np.all(np.isfinite(h)) or np.any(h <= 0):
            raise InvalidBody("offsets must be finite and positive")
        if np.any(np.linalg.norm(N, axis=1) == 0):
            raise InvalidBody("normals must be nonzero")
        if np.linalg.matrix_rank(N) < d:
            raise InvalidBody("normals do not span R^d; the polytope is unbounded")
        object.__setattr__(self, "normals", _frozen(N))
        object.__setattr__(self, "offsets", _frozen(h))
        if self.vertices is not None:
            V = _as_matrix(self.vertices, "vertices", cols=d)
            A = np.abs(V @ N.T)
            if np.any(A > h * (1 + 1e-9)):
                raise InvalidBody("a vertex violates a facet inequality")
            if np.any(A.max(axis=0) < h * (1 - 1e-6)):
                raise InvalidBody("a facet is not touched by any vertex")
            object.__setattr__(self, "vertices", _frozen(V))

    def __eq__(self, other):
        if not isinstance(other, HPolytopeSym):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.normals.tobytes(), self.offsets.tobytes()))

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def gauge(self, X) -> np.ndarray:
        return np.max(np.abs(np.atleast_2d(X) @ self.normals.T) / self.offsets, axis=1)

    def _radial_off_center(self, U, z):
        return _facet_radial(self.normals, self.offsets, U, z)

    def support(self, U) -> np.ndarray:
        if self.vertices is None:
            raise SupportUnavailable("hpolytope support needs a vertex list")
        return np.max(np.abs(np.atleast_2d(U) @ self.vertices.T), axis=1)

    def polar(self) -> "HPolytopeSym":
        if self.vertices is None:
            raise PolarUnavailable("hpolytope polar needs a vertex list")
        return HPolytopeSym(
            normals=self.vertices,
            offsets=np.ones(self.vertices.shape[0]),
            vertices=self.normals / self.offsets[:, None],
        )

    def circumradius_under(self, T):
        return float(np.max(np.linalg.norm(self.vertex_array() @ T.T, axis=1)))

    def vertex_array(self) -> np.ndarray:
        if self.vertices is None:
            raise SupportUnavailable("hpolytope has no vertex list")
        return np.array(self.vertices)

    def to_dict(self):
        out = {
            "kind": self.kind,
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
        }
        if self.vertices is not None:
            out["vertices"] = self.vertices.tolist()
        return out


@dataclass(frozen=True, eq=False)
class LinearImage(_Body):
    """``T(base)`` for an invertible matrix ``T``."""

    base: "BodySpec"
    T: Any
    kind = "linear_image"

    def __post_init__(self):
        d = self.base.dim
        T = _as_matrix(self.T, "matrix", cols=d)
        if T.shape != (d, d):
            raise InvalidBody(f"matrix must be {d}x{d}")
        if abs(np.linalg.det(T)) <= 1e-12 * np.linalg.norm(T, 2) ** d:
            raise InvalidBody("matrix is singular")
        object.__setattr__(self, "T", _frozen(T))

    def __eq__(self, other):
        if not isinstance(other, LinearImage):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.T.tobytes(), hash(self.base)))

    @property
    def dim(self) -> int:
        return self.base.dim

    @cached_property
    def _Tinv(self) -> np.ndarray:
        return _frozen(np.linalg.inv(self.T))

    def gauge(self, X) -> np.ndarray:
        return self.base.gauge(np.atleast_2d(X) @ self._Tinv.T)

    def radial(self, U, z=None) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        W = U @ self._Tinv.T
        norms = np.linalg.norm(W, axis=1)
        zb = None if z is None else self._Tinv @ np.asarray(z, dtype=float)
        return self.base.radial(W / norms[:, None], zb) / norms

    def support(self, U) -> np.ndarray:
        return self.base.support(np.atleast_2d(U) @ self.T)

    def polar(self) -> "LinearImage":
        return LinearImage(polar(self.base), self._Tinv.T)

    def circumradius_under(self, T):
        return self.base.circumradius_under(T @ self.T)

    def vertex_array(self) -> np.ndarray:
        return self.base.vertex_array() @ self.T.T

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "matrix": self.T.tolist()}


BodySpec = Union[Rhombus, Box, Ellipsoid, HPolytopeSym, LinearImage]


@dataclass(frozen=True)
class CenteredBody:
    """A body together with the interior point radial functions are taken from."""

    spec: BodySpec
    z: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        z = np.zeros(self.spec.dim) if self.z is None else np.asarray(self.z, dtype=float)
        if z.shape != (self.spec.dim,):
            raise InvalidBody(f"center must have length {self.spec.dim}")
        object.__setattr__(self, "z", _frozen(z))

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def at_origin(self) -> bool:
        return not np.any(self.z)

    def is_unconditional(self) -> bool:
        """True when the radial function is invariant under coordinate sign flips."""
        return self.at_origin and self.spec.is_coordinate

    def radial(self, U) -> np.ndarray:
        return radial_at(self, U)


def radial_at(body: CenteredBody, u):
    """Exact radial function ``r_z(u) = sup{l > 0 : z + l u in body}``.

    Returns a float for a single direction and an array for a stack of them.
    Raises :class:`CenterNotInterior` if the center is not strictly inside.
    """
    U, single = _directions(u)
    r = body.spec.radial(U, None if body.at_origin else body.z)
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise CenterNotInterior("radial function is not finite and positive")
    return float(r[0]) if single else r


def support_at(spec: BodySpec, u):
    U, single = _directions(u)
    h = spec.support(U)
    return float(h[0]) if single else h


def polar(spec: BodySpec) -> BodySpec:
    """Polar body with respect to the origin."""
    return spec.polar()


def contains(spec: BodySpec, x, tol: float = 1e-9) -> bool:
    return spec.contains(x, tol)


@dataclass(frozen=True)
class SandwichReport:
    max_violation: float
    samples: int
    worst_direction: np.ndarray

    @property
    def ok(self) -> bool:
        return self.max_violation <= 1e-12


def sandwich_check(a: Sequence[float], samples: int = 1000, seed: int = 0) -> SandwichReport:
    """Check ``r_D <= r_E <= r_R <= d * r_D`` on random directions.

    The relative violation of each inequality is measured pointwise for the
    rhombus, ellipsoid and box sharing the half-axes ``a``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    a = np.asarray(_as_positive_tuple(a, "a"))
    d = a.size
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((samples, d))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    rD = 1.0 / (np.abs(U) @ (1.0 / a))
    rE = 1.0 / np.sqrt(np.sum((U / a) ** 2, axis=1))
    rR = 1.0 / np.max(np.abs(U) / a, axis=1)
    viol = np.maximum.reduce([
        (rD - rE) / rE,
        (rE - rR) / rR,
        (rR - d * rD) / (d * rD),
        np.zeros(samples),
    ])
    k = int(np.argmax(viol))
    return SandwichReport(float(viol[k]), samples, U[k].copy())


@dataclass(frozen=True)
class Loewner:
    """Minimum-volume enclosing ellipsoid ``{x : x^T A x <= 1}``."""

    A: np.ndarray
    eps: float
    iterations: int

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    def as_body(self, scale: float = 1.0) -> LinearImage:
        L = np.linalg.cholesky(np.linalg.inv(self.A))
        return LinearImage(Ellipsoid((1.0,) * self.dim), scale * L)

    def john_factor(self) -> float:
        """Shrink factor whose image of the ellipsoid is guaranteed inside the hull."""
        return 1.0 / math.sqrt(self.dim * (1.0 + self.eps))


def loewner_ellipsoid(vertices, eps: float = 1e-3, max_iter: int = 100_000) -> Loewner:
    """Löwner ellipsoid of the symmetric hull ``conv(+-v_j)``.

    Khachiyan's multiplicative-weights ascent on ``log det sum w_j v_j v_j^T``,
    with Todd-Yildirim away steps. Stops once every ``v_j^T A v_j <= 1 + eps``.

    Parameters
    ----------
    vertices : (m, d) array_like
        One representative of each +- vertex pair.
    eps : float
        Target relative optimality gap, in ``(0, 0.1]``.
    max_iter : int
        Iteration cap; :class:`NoConvergence` is raised past it.
    """
    if not 0 < eps <= 0.1:
        raise ValueError("eps must lie in (0, 0.1]")
    V = np.atleast_2d(np.asarray(vertices, dtype=float))
    m, d = V.shape
    G = V.T @ V / m
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 1e-12 * max(ev[-1], np.finfo(float).tiny):
        raise DegenerateInput("vertices do not span R^d")
    w = np.full(m, 1.0 / m)
    M = G.copy()
    gap = math.inf
    for it in range(max_iter + 1):
        Minv = np.linalg.inv(M)
        k = np.einsum("ij,jk,ik->i", V, Minv, V)
        j = int(np.argmax(k))
        gap = k[j] / d - 1.0
        if gap <= eps:
            A = np.linalg.inv(d * M)
            A = 0.5 * (A + A.T)
            return Loewner(A=A, eps=eps, iterations=it)
        active = np.flatnonzero(w > 0)
        i = active[int(np.argmin(k[active]))]
        if k[j] - d >= d - k[i] or w[i] >= 1.0:
            step = (k[j] - d) / (d * (k[j] - 1.0))
            idx = j
        else:
            floor = -w[i] / (1.0 - w[i])
            step = floor if k[i] <= 1.0 else max((k[i] - d) / (d * (k[i] - 1.0)), floor)
            idx = i
        w *= 1.0 - step
        w[idx] += step
        if w[idx] < 1e-15:
            w[idx] = 0.0
        v = V[idx]
        M = (1.0 - step) * M + step * np.outer(v, v)
        if it % 64 == 63:
            M = (V.T * w) @ V
    raise NoConvergence("Löwner ascent hit the iteration cap", iterations=max_iter, gap=gap)


def symmetric_hull(points) -> HPolytopeSym:
    """H-polytope (with vertex list) of ``conv(+-p_j)`` via Qhull."""
    from scipy.spatial import ConvexHull

    P = np.atleast_2d(np.asarray(points, dtype=float))
    cloud = np.vstack([P, -P])
    hull = ConvexHull(cloud)
    normals = hull.equations[:, :-1]
    offsets = -hull.equations[:, -1]
    scaled = normals / offsets[:, None]
    # canonical sign per +- pair, then merge duplicate (coplanar) facets
    sgn = np.sign(scaled[np.arange(len(scaled)), np.argmax(np.abs(scaled) > 1e-12, axis=1)])
    scaled = scaled * sgn[:, None]
    _, keep = np.unique(np.round(scaled, 9), axis=0, return_index=True)
    F = scaled[np.sort(keep)]
    verts = cloud[hull.vertices]
    sv = np.sign(verts[np.arange(len(verts)), np.argmax(np.abs(verts) > 1e-12, axis=1)])
    _, vkeep = np.unique(np.round(verts * sv[:, None], 12), axis=0, return_index=True)
    return HPolytopeSym(normals=F, offsets=np.ones(F.shape[0]), vertices=verts[np.sort(vkeep)])


def random_symmetric_polytope(d: int, pairs: int, rng: np.random.Generator) -> HPolytopeSym:
    """Hull of ``pairs`` random Gaussian points and their negatives, randomly stretched."""
    P = rng.standard_normal((max(pairs, d), d))
    P = P @ np.diag(np.exp(rng.uniform(-0.7, 0.7, d)))
    return symmetric_hull(P)


def body_from_dict(doc: Any, path: str = "") -> BodySpec:
    """Parse the JSON body schema; errors name the offending key."""

    def key(name: str) -> str:
        return f"{path}.{name}" if path else name

    if not isinstance(doc, dict):
        raise BodyParseError("body must be a JSON object", path)
    kind = doc.get("kind")
    if kind is None:
        raise BodyParseError("missing required key", key("kind"))
    try:
        if kind in ("rhombus", "box", "ellipsoid"):
            if "a" not in doc:
                raise BodyParseError("missing required key", key("a"))
            cls = {"rhombus": Rhombus, "box": Box, "ellipsoid": Ellipsoid}[kind]
            try:
                return cls(tuple(_number_list(doc["a"], key("a"))))
            except InvalidBody as exc:
                raise BodyParseError(str(exc), key("a")) from exc
        if kind == "hpolytope":
            for name in ("normals", "offsets"):
                if name not in doc:
                    raise BodyParseError("missing required key", key(name))
            normals = [_number_list(r, key("normals")) for r in _as_list(doc["normals"], key("normals"))]
            offsets = _number_list(doc["offsets"], key("offsets"))
            vertices = None
            if doc.get("vertices") is not None:
                vertices = [_number_list(r, key("vertices")) for r in _as_list(doc["vertices"], key("vertices"))]
            _check_lengths(normals, key("normals"))
            if vertices is not None:
                _check_lengths(vertices, key("vertices"), len(normals[0]) if normals else None)
            return HPolytopeSym(normals, offsets, vertices)
        if kind == "linear_image":
            for name in ("base", "matrix"):
                if name not in doc:
                    raise BodyParseError("missing required key", key(name))
            base = body_from_dict(doc["base"], key("base"))
            rows = [_number_list(r, key("matrix")) for r in _as_list(doc["matrix"], key("matrix"))]
            _check_lengths(rows, key("matrix"), base.dim)
            try:
                return LinearImage(base, rows)
            except InvalidBody as exc:
                raise BodyParseError(str(exc), key("matrix")) from exc
    except BodyParseError:
        raise
    except InvalidBody as exc:
        raise BodyParseError(str(exc), path or "body") from exc
    raise BodyParseError(f"unknown kind {kind!r}", key("kind"))


def _as_list(value, key: str) -> list:
    if not isinstance(value, list):
        raise BodyParseError("expected a list", key)
    return value


def _number_list(value, key: str) -> list[float]:
    items = _as_list(value, key)
    out = []
    for v in items:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise BodyParseError("expected finite numbers", key)
        out.append(float(v))
    return out


def _check_lengths(rows: list[list[float]], key: str, expected: Optional[int] = None) -> None:
    lengths = {len(r) for r in rows}
    if expected is not None:
        lengths.add(expected)
    if len(lengths) > 1:
        raise BodyParseError("inconsistent vector lengths", key)
