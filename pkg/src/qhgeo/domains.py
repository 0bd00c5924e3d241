"""Open domains as boundary-distance oracles, and the quasihyperbolic weight.

Every domain carries a :class:`~qhgeo.norms.NormSpec`; boundary distances are
measured in that norm.  A point ``x`` counts as interior only when its
boundary distance exceeds ``1e-9 * max(1, |x|)``; closer points are rejected
because the weight ``1/dist`` blows up and quadrature against it becomes
meaningless.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ExteriorPointError
from .norms import NormSpec, dual_evaluate, evaluate

INTERIOR_RTOL = 1e-9


class DomainSpec(ABC):
    """Base class: an open domain with a boundary-distance oracle."""

    norm: NormSpec

    @abstractmethod
    def raw_distance(self, x) -> np.ndarray:
        """Distance to the boundary, broadcast over leading axes.

        May be negative or zero for exterior/boundary points where the
        geometry gives a signed value; never raises.
        """

    def interior_cutoff(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        scale = np.maximum(1.0, evaluate(self.norm, x))
        return INTERIOR_RTOL * scale

    def is_interior(self, x) -> np.ndarray:
        return self.raw_distance(x) > self.interior_cutoff(x)

    def to_json(self) -> dict:
        raise NotImplementedError


def boundary_distance(domain: DomainSpec, x) -> np.ndarray:
    """Distance from interior point(s) ``x`` to the domain boundary.

    Raises :class:`ExteriorPointError` if any queried point is on or outside
    the boundary (within the interiority tolerance).
    """
    x = np.asarray(x, dtype=float)
    d = domain.raw_distance(x)
    if np.any(d <= domain.interior_cutoff(x)):
        raise ExteriorPointError(
            "point is on or outside the domain boundary "
            f"(min distance {np.min(d):.3e})")
    return d


def qh_weight(domain: DomainSpec, x) -> np.ndarray:
    """Quasihyperbolic weight ``1 / dist(x, boundary)``."""
    return 1.0 / boundary_distance(domain, x)


@dataclass(frozen=True)
class HalfSpace(DomainSpec):
    """The open half-space ``{x : f.x > c}``.

    The boundary distance is ``(f.x - c) / |f|*`` with the dual norm taken
    from the domain's norm.
    """

    norm: NormSpec
    f: Tuple[float, ...]
    c: float = 0.0
    _dual_f: float = field(init=False, repr=False, compare=False, default=0.0)

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.shape != (self.norm.dim,):
            raise ValueError("functional dimension mismatch")
        if not np.any(f):
            raise ValueError("half-space functional must be nonzero")
        object.__setattr__(self, "f", tuple(float(v) for v in f))
        object.__setattr__(self, "_dual_f", float(dual_evaluate(self.norm, f)))

    def raw_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (x @ np.asarray(self.f) - self.c) / self._dual_f

    def to_json(self) -> dict:
        return {"kind": "halfspace", "f": list(self.f), "c": self.c}


@dataclass(frozen=True)
class Ball(DomainSpec):
    """Open norm ball ``{x : |x - center| < radius}``."""

    norm: NormSpec
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        if center.shape != (self.norm.dim,):
            raise ValueError("center dimension mismatch")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in center))

    def raw_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.radius - evaluate(self.norm, x - np.asarray(self.center))

    def to_json(self) -> dict:
        return {"kind": "ball", "center": list(self.center),
                "radius": self.radius}


@dataclass(frozen=True)
class Punctured(DomainSpec):
    """The whole space with one point removed; boundary = that point.

    Non-convex, with non-unique geodesics for endpoint pairs straddling the
    puncture; serves as the negative control in uniqueness tests.
    """

    norm: NormSpec
    point: Tuple[float, ...]

    def __post_init__(self):
        point = np.asarray(self.point, dtype=float)
        if point.shape != (self.norm.dim,):
            raise ValueError("puncture dimension mismatch")
        object.__setattr__(self, "point", tuple(float(v) for v in point))

    def raw_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return evaluate(self.norm, x - np.asarray(self.point))

    def to_json(self) -> dict:
        return {"kind": "punctured", "point": list(self.point)}


@dataclass(frozen=True)
class PolytopeIntersection(DomainSpec):
    """Intersection of finitely many open half-spaces.

    The boundary distance is the minimum of the per-face distances, which is
    valid for intersections (each face's hyperplane is the nearest boundary
    candidate) but not for unions.
    """

    norm: NormSpec
    faces: Tuple[Tuple[Tuple[float, ...], float], ...]
    _duals: Tuple[float, ...] = field(init=False, repr=False, compare=False,
                                      default=())

    def __post_init__(self):
        if not self.faces:
            raise ValueError("polytope needs at least one face")
        faces = []
        duals = []
        for f, c in self.faces:
            f = np.asarray(f, dtype=float)
            if f.shape != (self.norm.dim,):
                raise ValueError("face functional dimension mismatch")
            if not np.any(f):
                raise ValueError("face functional must be nonzero")
            faces.append((tuple(float(v) for v in f), float(c)))
            duals.append(float(dual_evaluate(self.norm, f)))
        object.__setattr__(self, "faces", tuple(faces))
        object.__setattr__(self, "_duals", tuple(duals))

    def raw_distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        dists = [(x @ np.asarray(f) - c) / dual
                 for (f, c), dual in zip(self.faces, self._duals)]
        return np.min(np.stack(dists, axis=-1), axis=-1)

    def to_json(self) -> dict:
        return {"kind": "polytope",
                "faces": [{"f": list(f), "c": c} for f, c in self.faces]}


def domain_from_json(obj: dict, norm: Optional[NormSpec] = None) -> DomainSpec:
    """Build a domain from its JSON declaration.

    The norm may be supplied separately or nested under a ``"norm"`` key.
    """
    obj = dict(obj)
    if "norm" in obj:
        if norm is not None:
            raise ValueError("norm given both inline and separately")
        norm = NormSpec.from_json(obj.pop("norm"))
    if norm is None:
        raise ValueError("domain config requires a norm")
    kind = obj.pop("kind", None)
    if kind == "halfspace":
        _expect_keys(obj, {"f", "c"})
        return HalfSpace(norm=norm, f=tuple(obj["f"]), c=float(obj.get("c", 0.0)))
    if kind == "ball":
        _expect_keys(obj, {"center", "radius"})
        return Ball(norm=norm, center=tuple(obj["center"]),
                    radius=float(obj["radius"]))
    if kind == "punctured":
        _expect_keys(obj, {"point"})
        return Punctured(norm=norm, point=tuple(obj["point"]))
    if kind == "polytope":
        _expect_keys(obj, {"faces"})
        faces = tuple((tuple(face["f"]), float(face.get("c", 0.0)))
                      for face in obj["faces"])
        return PolytopeIntersection(norm=norm, faces=faces)
    raise ValueError(f"unknown domain kind {kind!r}")


def _expect_keys(obj: dict, allowed: set) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError(f"unknown domain config keys: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# quasihyperbolic ball sampling
# ---------------------------------------------------------------------------

@dataclass
class QHBallSample:
    """Boundary-band samples of a quasihyperbolic ball.

    ``statuses[i]`` is ``"ok"`` when the ray was bisected to the target
    radius within tolerance, ``"truncated"`` when the band was not reached
    inside the domain along that ray, and ``"failed"`` when the distance
    solver errored out.
    """

    center: np.ndarray
    radius: float
    directions: np.ndarray
    points: np.ndarray
    qh_dists: np.ndarray
    statuses: list
    tol: float

    def ok_points(self) -> np.ndarray:
        mask = [s == "ok" for s in self.statuses]
        return self.points[np.asarray(mask, dtype=bool)]

    def write_csv(self, fh) -> None:
        dim = self.points.shape[1]
        cols = ",".join(f"x{i}" for i in range(dim))
        fh.write(f"direction_index,{cols},qh_dist,status\n")
        for i in range(len(self.statuses)):
            coords = ",".join(repr(float(v)) for v in self.points[i])
            fh.write(f"{i},{coords},{self.qh_dists[i]!r},{self.statuses[i]}\n")


def _default_distance_fn():
    from . import solver as solver_mod

    cfg = solver_mod.SolverConfig(initial_vertices=9, max_refinements=2,
                                  max_iterations=120)

    def dist(domain, x, y):
        return solver_mod.solve_geodesic(domain, x, y, cfg).qh_length

    return dist


def ray_directions(dim: int, count: int, seed: int = 0,
                   norm: Optional[NormSpec] = None) -> np.ndarray:
    """Unit ray directions: evenly spaced in 2D, seeded Gaussian otherwise."""
    if count < 1:
        raise ValueError("need at least one direction")
    if dim == 2:
        ang = 2 * np.pi * np.arange(count) / count
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    else:
        rng = np.random.default_rng(seed)
        dirs = rng.normal(size=(count, dim))
    if norm is not None:
        dirs = dirs / evaluate(norm, dirs)[:, None]
    else:
        dirs = dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs


def sample_qh_ball(domain: DomainSpec, center, radius: float,
                   directions: int, solver=None, seed: int = 0,
                   tol: float = 1e-3, max_expansions: int = 60) -> QHBallSample:
    """Bisect along rays from ``center`` to the band of QH distance ``radius``.

    Parameters
    ----------
    solver : callable, optional
        ``solver(domain, x, y) -> float`` computing the quasihyperbolic
        distance.  Defaults to the variational geodesic solver with a light
        configuration.
    """
    center = np.asarray(center, dtype=float)
    d0 = float(boundary_distance(domain, center))
    if radius <= 0:
        raise ValueError("radius must be positive")
    if solver is None:
        solver = _default_distance_fn()
    dirs = ray_directions(domain.norm.dim, directions, seed=seed,
                          norm=domain.norm)
    points = np.empty_like(dirs)
    dists = np.full(len(dirs), np.nan)
    statuses = []
    for i, u in enumerate(dirs):
        try:
            pt, kd, status = _bisect_ray(domain, center, u, radius, d0,
                                         solver, tol, max_expansions)
        except Exception:
            pt, kd, status = center, np.nan, "failed"
        points[i] = pt
        dists[i] = kd
        statuses.append(status)
    return QHBallSample(center=center, radius=radius, directions=dirs,
                        points=points, qh_dists=dists, statuses=statuses,
                        tol=tol)


def _bisect_ray(domain, center, u, radius, d0, solver, tol, max_expansions):
    def k_at(t):
        return solver(domain, center, center + t * u)

    # expand until the radius band is bracketed or the ray leaves the domain
    t_lo, k_lo = 0.0, 0.0
    t_hi = radius * d0  # local weight scaling makes this the natural unit
    k_hi = None
    for _ in range(max_expansions):
        if not bool(domain.is_interior(center + t_hi * u)):
            k_hi = np.inf
            break
        k_hi = k_at(t_hi)
        if k_hi >= radius:
            break
        t_lo, k_lo = t_hi, k_hi
        t_hi *= 2.0
    else:
        return center + t_lo * u, k_lo, "truncated"

    # bisection: predicate "exterior or k >= radius"
    for _ in range(200):
        t_mid = 0.5 * (t_lo + t_hi)
        if bool(domain.is_interior(center + t_mid * u)):
            k_mid = k_at(t_mid)
        else:
            k_mid = np.inf
        if k_mid >= radius:
            t_hi, k_hi = t_mid, k_mid
        else:
            t_lo, k_lo = t_mid, k_mid
        if np.isfinite(k_hi) and abs(k_hi - radius) <= tol:
            return center + t_hi * u, k_hi, "ok"
        if np.isfinite(k_lo) and abs(k_lo - radius) <= tol:
            return center + t_lo * u, k_lo, "ok"
    return center + t_lo * u, k_lo, "failed"
