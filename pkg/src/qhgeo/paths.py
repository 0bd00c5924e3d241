"""Polyline paths, arclength parameterization, and quasihyperbolic length.

Paths are polylines: all constructions here (averages, tents, solver
iterates) are piecewise linear, and smoothness of computed geodesics is
measured downstream rather than imposed.  Quasihyperbolic length integrates
``weight * speed`` per segment with composite Gauss-Legendre panels; a
segment whose two-panel refinement moves its value by more than ``rel_tol``
relative is split recursively.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .domains import DomainSpec
from .errors import ExteriorPointError, QuadratureDepthError
from .norms import NormSpec, evaluate

#: vertices closer than this (Euclidean) are considered coincident
_MIN_VERTEX_SEP = 1e-12


@dataclass(frozen=True)
class Polyline:
    """An ordered list of vertices, shape (n, dim) with n >= 2."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 2:
            raise ValueError("polyline needs a (n >= 2, dim) vertex array")
        gaps = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(gaps <= _MIN_VERTEX_SEP):
            raise ValueError("consecutive polyline vertices must be distinct")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "vertices", v)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def segment_vectors(self) -> np.ndarray:
        return np.diff(self.vertices, axis=0)

    def reversed(self) -> "Polyline":
        return Polyline(self.vertices[::-1])

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Polyline":
        return cls(np.asarray(obj["vertices"], dtype=float))


def norm_length(path: Polyline, norm: NormSpec) -> float:
    """Total length of the polyline under the ambient norm."""
    return float(np.sum(evaluate(norm, path.segment_vectors())))


def cumulative_norm_length(path: Polyline, norm: NormSpec) -> np.ndarray:
    segs = evaluate(norm, path.segment_vectors())
    return np.concatenate([[0.0], np.cumsum(segs)])


def point_at_arclength(path: Polyline, norm: NormSpec, s) -> np.ndarray:
    """Point(s) of the polyline at norm-arclength parameter(s) ``s``."""
    cum = cumulative_norm_length(path, norm)
    s = np.asarray(s, dtype=float)
    out = np.stack([np.interp(s, cum, path.vertices[:, j])
                    for j in range(path.dim)], axis=-1)
    return out


@lru_cache(maxsize=16)
def _gl_nodes(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def _segment_weight_integral(domain: DomainSpec, a: np.ndarray,
                             b: np.ndarray, t0: float, t1: float,
                             order: int, seg_index: int) -> float:
    """Gauss-Legendre panel of the weight over parameter window [t0, t1]."""
    nodes, wts = _gl_nodes(order)
    t = t0 + (t1 - t0) * nodes
    pts = a + t[:, None] * (b - a)
    d = domain.raw_distance(pts)
    if np.any(d <= domain.interior_cutoff(pts)):
        raise ExteriorPointError(
            f"quadrature node exterior on segment {seg_index} "
            f"(window [{t0:.6g}, {t1:.6g}])")
    return (t1 - t0) * float(np.sum(wts / d))


def _segment_qh_adaptive(domain: DomainSpec, a: np.ndarray, b: np.ndarray,
                         order: int, rel_tol: float, max_depth: int,
                         seg_index: int) -> float:
    speed = float(evaluate(domain.norm, b - a))

    def recurse(t0, t1, whole, depth):
        tm = 0.5 * (t0 + t1)
        left = _segment_weight_integral(domain, a, b, t0, tm, order, seg_index)
        right = _segment_weight_integral(domain, a, b, tm, t1, order, seg_index)
        two = left + right
        if abs(two - whole) <= rel_tol * max(abs(two), 1e-300):
            return two
        if depth >= max_depth:
            raise QuadratureDepthError(
                f"adaptive quadrature exceeded depth {max_depth} on "
                f"segment {seg_index}")
        return (recurse(t0, tm, left, depth + 1)
                + recurse(tm, t1, right, depth + 1))

    whole = _segment_weight_integral(domain, a, b, 0.0, 1.0, order, seg_index)
    return speed * recurse(0.0, 1.0, whole, 0)


def qh_length(path: Polyline, domain: DomainSpec,
              points_per_segment: int = 8, rel_tol: float = 1e-9,
              max_depth: int = 20) -> float:
    """Quasihyperbolic length of a polyline.

    Raises :class:`ExteriorPointError` naming the segment if any quadrature
    node leaves the domain, and :class:`QuadratureDepthError` if adaptive
    splitting fails to converge within ``max_depth`` levels.
    """
    if points_per_segment < 2:
        raise ValueError("need at least 2 quadrature points per segment")
    total = 0.0
    v = path.vertices
    for i in range(path.n_vertices - 1):
        total += _segment_qh_adaptive(domain, v[i], v[i + 1],
                                      points_per_segment, rel_tol, max_depth, i)
    return total


def cumulative_qh_length(path: Polyline, domain: DomainSpec,
                         points_per_segment: int = 8, rel_tol: float = 1e-9,
                         max_depth: int = 20) -> np.ndarray:
    v = path.vertices
    out = np.zeros(path.n_vertices)
    for i in range(path.n_vertices - 1):
        out[i + 1] = out[i] + _segment_qh_adaptive(
            domain, v[i], v[i + 1], points_per_segment, rel_tol, max_depth, i)
    return out


def segment_qh_batch(domain: DomainSpec, a: np.ndarray, b: np.ndarray,
                     order: int = 8) -> np.ndarray:
    """Fixed-order quasihyperbolic lengths of segments ``a[i] -> b[i]``.

    Rows with any non-interior quadrature node come back ``inf`` instead of
    raising, which lets line searches reject such trial configurations.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    nodes, wts = _gl_nodes(order)
    pts = a[:, None, :] + nodes[None, :, None] * (b - a)[:, None, :]
    d = domain.raw_distance(pts)
    bad = d <= domain.interior_cutoff(pts)
    d = np.where(bad, 1.0, d)
    integral = (wts[None, :] / d).sum(axis=1)
    speed = evaluate(domain.norm, b - a)
    out = speed * integral
    out[np.any(bad, axis=1)] = np.inf
    return out


def reparameterize_arclength(path: Polyline, norm: NormSpec,
                             samples: int) -> Polyline:
    """Resample to ``samples`` vertices at equal norm-arclength spacing.

    New vertices lie exactly on the original polyline; corners not hit by
    the new spacing are cut, so the image deviates by at most the original
    maximum segment length divided by ``samples``.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    cum = cumulative_norm_length(path, norm)
    total = cum[-1]
    if total <= 0:
        raise ValueError("cannot reparameterize a zero-length path")
    targets = np.linspace(0.0, total, samples)
    verts = np.stack([np.interp(targets, cum, path.vertices[:, j])
                      for j in range(path.dim)], axis=1)
    verts[0] = path.vertices[0]
    verts[-1] = path.vertices[-1]
    return Polyline(_dedupe(verts))


def _dedupe(verts: np.ndarray) -> np.ndarray:
    keep = [0]
    for i in range(1, len(verts)):
        if np.linalg.norm(verts[i] - verts[keep[-1]]) > _MIN_VERTEX_SEP:
            keep.append(i)
    if len(keep) < 2:
        raise ValueError("degenerate path after deduplication")
    out = verts[keep]
    # endpoints must survive
    out[-1] = verts[-1]
    return out


def reparameterize_qh_proportional(path: Polyline, domain: DomainSpec,
                                   samples: int, rel_tol: float = 1e-6,
                                   order: int = 32) -> Polyline:
    """Resample so vertex ``i`` sits at QH-length fraction ``i/(samples-1)``.

    This realizes, for polylines, the normalization in which the cumulative
    quasihyperbolic length grows linearly in the parameter.  Placement is by
    bisection on partial segment quadrature and is accurate to ``rel_tol``
    of the total length.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    v = path.vertices
    seg_qh = np.array([
        _segment_qh_adaptive(domain, v[i], v[i + 1], 8, 1e-10, 20, i)
        for i in range(path.n_vertices - 1)])
    cum = np.concatenate([[0.0], np.cumsum(seg_qh)])
    total = cum[-1]
    targets = np.linspace(0.0, total, samples)

    nodes, wts = _gl_nodes(order)

    def partial(i, t):
        # fixed high-order panel over [0, t] of segment i
        if t <= 0:
            return 0.0
        tt = t * nodes
        pts = v[i] + tt[:, None] * (v[i + 1] - v[i])
        d = domain.raw_distance(pts)
        speed = float(evaluate(domain.norm, v[i + 1] - v[i]))
        return speed * t * float(np.sum(wts / d))

    out = [v[0]]
    tol = rel_tol * total
    for target in targets[1:-1]:
        i = int(np.searchsorted(cum, target, side="right") - 1)
        i = min(max(i, 0), path.n_vertices - 2)
        lo, hi = 0.0, 1.0
        want = target - cum[i]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            got = partial(i, mid)
            if abs(got - want) <= tol:
                lo = hi = mid
                break
            if got < want:
                lo = mid
            else:
                hi = mid
        t = 0.5 * (lo + hi)
        out.append(v[i] + t * (v[i + 1] - v[i]))
    out.append(v[-1])
    return Polyline(_dedupe(np.asarray(out)))


def average_paths(p1: Polyline, p2: Polyline, s: float) -> Polyline:
    """Vertex-wise convex combination ``s * p2 + (1 - s) * p1``.

    The inputs must be aligned (equal vertex counts, produced by a common
    proportional resampling); ``s=0`` returns ``p1`` and ``s=1`` returns
    ``p2``.
    """
    if not (0.0 <= s <= 1.0):
        raise ValueError("s must lie in [0, 1]")
    if p1.n_vertices != p2.n_vertices:
        raise ValueError("paths must have equal vertex counts to average")
    return Polyline(s * p2.vertices + (1.0 - s) * p1.vertices)


def write_path_csv(path: Polyline, fh, norm: NormSpec,
                   domain: Optional[DomainSpec] = None) -> None:
    """CSV rows: index, coordinates, cumulative norm and QH lengths."""
    cum_norm = cumulative_norm_length(path, norm)
    cum_qh = (cumulative_qh_length(path, domain)
              if domain is not None else np.full(path.n_vertices, np.nan))
    cols = ",".join(f"x{i}" for i in range(path.dim))
    fh.write(f"index,{cols},cum_norm_len,cum_qh_len\n")
    for i in range(path.n_vertices):
        coords = ",".join(repr(float(v)) for v in path.vertices[i])
        fh.write(f"{i},{coords},{cum_norm[i]!r},{cum_qh[i]!r}\n")
