"""Norms on R^n: evaluation, dual norms, and modulus-of-convexity estimation.

Supported norm kinds:

* ``"p"``        -- the p-norm for p in [1, inf] (``p=inf`` equals ``"sup"``)
* ``"sup"``      -- the max-of-absolute-values norm
* ``"c0renorm"`` -- the strictly convex renorming of the sup-norm given by
  ``|x|^2 = max_n(x_n)^2 + sum_n 2^(-n) x_n^2`` (coordinates counted from 1),
  truncated to ``dim`` coordinates
* ``"table"``    -- a diagonally weighted p-norm, intended for tests; it must
  either carry its own dual weight table or mark the dual as unsupported
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import UnsupportedDualError

#: relative tolerance to which sphere/chord constraints are restored when
#: searching for modulus-of-convexity witnesses
PROJECTION_RTOL = 1e-8


class ApproximateDualWarning(UserWarning):
    """The dual-norm value is a numerical estimate, not a closed form."""


@dataclass(frozen=True)
class NormSpec:
    """A norm on R^dim, declared by kind.

    Parameters
    ----------
    dim : int
        Ambient dimension, at least 1.
    kind : str
        One of ``"p"``, ``"sup"``, ``"c0renorm"``, ``"table"``.
    p : float, optional
        Exponent for ``"p"`` and ``"table"`` kinds; ``math.inf`` is allowed.
    weights : tuple of float, optional
        Positive diagonal weights for ``"table"``; the norm is then
        ``(sum (w_i |x_i|)^p)^(1/p)``.
    dual_weights : tuple of float, optional
        Dual weight table for ``"table"``.  ``None`` marks the dual as
        unsupported.
    """

    dim: int
    kind: str
    p: Optional[float] = None
    weights: Optional[Tuple[float, ...]] = None
    dual_weights: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dimension must be positive, got {self.dim}")
        if self.kind not in ("p", "sup", "c0renorm", "table"):
            raise ValueError(f"unknown norm kind {self.kind!r}")
        if self.kind in ("p", "table"):
            if self.p is None or not (1.0 <= self.p):
                raise ValueError("p-norm requires an exponent p >= 1")
        if self.kind == "table":
            if self.weights is None or len(self.weights) != self.dim:
                raise ValueError("table norm requires one weight per coordinate")
            if any(w <= 0 for w in self.weights):
                raise ValueError("table norm weights must be positive")
            if self.dual_weights is not None and len(self.dual_weights) != self.dim:
                raise ValueError("dual weight table has wrong length")

    @property
    def strictly_convex(self) -> bool:
        """True when the unit sphere contains no line segment."""
        if self.kind == "c0renorm":
            return True
        if self.kind in ("p", "table"):
            return bool(np.isfinite(self.p) and self.p > 1.0)
        return False

    @property
    def uniformly_convex(self) -> bool:
        """True when the modulus of convexity is positive for all eps > 0.

        The ``c0renorm`` kind reports False: it models the sequence-space
        renorming, which is strictly but not uniformly convex, even though
        any finite truncation is trivially uniformly convex.
        """
        if self.kind in ("p", "table"):
            return bool(np.isfinite(self.p) and self.p > 1.0)
        return False

    def to_json(self) -> dict:
        obj = {"kind": self.kind, "dim": self.dim}
        if self.kind in ("p", "table"):
            obj["p"] = self.p
        if self.kind == "table":
            obj["weights"] = list(self.weights)
            if self.dual_weights is not None:
                obj["dual_weights"] = list(self.dual_weights)
        return obj

    @classmethod
    def from_json(cls, obj: dict) -> "NormSpec":
        allowed = {"kind", "dim", "p", "weights", "dual_weights"}
        unknown = set(obj) - allowed
        if unknown:
            raise ValueError(f"unknown norm config keys: {sorted(unknown)}")
        kind = obj.get("kind")
        dim = obj.get("dim")
        if kind is None or dim is None:
            raise ValueError("norm config requires 'kind' and 'dim'")
        p = obj.get("p")
        if isinstance(p, str):
            if p not in ("inf", "Infinity"):
                raise ValueError(f"bad exponent {p!r}")
            p = math.inf
        weights = tuple(obj["weights"]) if "weights" in obj else None
        dual_weights = tuple(obj["dual_weights"]) if "dual_weights" in obj else None
        return cls(dim=int(dim), kind=kind, p=p, weights=weights,
                   dual_weights=dual_weights)


def _c0_weights(dim: int) -> np.ndarray:
    return 2.0 ** (-np.arange(1, dim + 1))


def evaluate(norm: NormSpec, x) -> np.ndarray:
    """Evaluate ``norm`` at ``x``; broadcasts over leading axes of ``x``.

    ``x`` must have shape ``(..., dim)``.  Returns an array of shape
    ``(...)`` (a scalar for a single vector).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != norm.dim:
        raise ValueError(
            f"vector has {x.shape[-1]} coordinates, norm expects {norm.dim}")
    ax = np.abs(x)
    if norm.kind == "sup" or (norm.kind == "p" and np.isinf(norm.p)):
        return ax.max(axis=-1)
    if norm.kind == "p":
        return _pnorm(ax, norm.p)
    if norm.kind == "c0renorm":
        quad = np.sum(_c0_weights(norm.dim) * x * x, axis=-1)
        return np.sqrt(ax.max(axis=-1) ** 2 + quad)
    # table: diagonally weighted p-norm
    w = np.asarray(norm.weights)
    if np.isinf(norm.p):
        return (w * ax).max(axis=-1)
    return _pnorm(w * ax, norm.p)


def _pnorm(ax: np.ndarray, p: float) -> np.ndarray:
    if p == 1.0:
        return ax.sum(axis=-1)
    if p == 2.0:
        return np.sqrt(np.sum(ax * ax, axis=-1))
    # scale out the max for overflow safety at large p
    m = ax.max(axis=-1, keepdims=True)
    safe = np.where(m > 0, m, 1.0)
    val = np.sum((ax / safe) ** p, axis=-1) ** (1.0 / p)
    return np.where(m[..., 0] > 0, safe[..., 0] * val, 0.0)


def conjugate_exponent(p: float) -> float:
    if np.isinf(p):
        return 1.0
    if p == 1.0:
        return math.inf
    return p / (p - 1.0)


def dual_evaluate(norm: NormSpec, f) -> float:
    """Dual norm ``sup { f.x : norm(x) <= 1 }`` of a covector ``f``.

    Closed forms: the dual of the p-norm is the q-norm with 1/p + 1/q = 1
    (so sup <-> 1), and a weighted p-norm dualizes to the conjugate-weighted
    q-norm.  The ``c0renorm`` kind has no closed-form dual; its value is
    estimated by constrained maximization over the unit ball (the ball is an
    intersection of ellipsoids, so any local maximum of the linear objective
    is global) and an :class:`ApproximateDualWarning` is emitted.
    """
    f = np.asarray(f, dtype=float)
    if f.ndim != 1 or f.shape[0] != norm.dim:
        raise ValueError(f"covector must have shape ({norm.dim},)")
    if norm.kind == "sup" or (norm.kind == "p" and np.isinf(norm.p)):
        return float(np.abs(f).sum())
    if norm.kind == "p":
        return float(_pnorm(np.abs(f), conjugate_exponent(norm.p)))
    if norm.kind == "table":
        if norm.dual_weights is None:
            raise UnsupportedDualError(
                "table norm carries no dual weight table")
        q = conjugate_exponent(norm.p)
        dw = np.asarray(norm.dual_weights)
        if np.isinf(q):
            return float((dw * np.abs(f)).max())
        return float(_pnorm(dw * np.abs(f), q))
    return _c0renorm_dual(norm, f)


def _c0renorm_dual(norm: NormSpec, f: np.ndarray) -> float:
    if not np.any(f):
        return 0.0
    from scipy.optimize import minimize

    w = _c0_weights(norm.dim)
    dim = norm.dim

    # unit ball = intersection over m of {x : x_m^2 + sum_n w_n x_n^2 <= 1};
    # each constraint is a smooth ellipsoid, so SLSQP applies cleanly.
    def make_con(m):
        def val(x):
            return 1.0 - (x[m] ** 2 + np.sum(w * x * x))

        def jac(x):
            g = -2.0 * w * x
            g[m] -= 2.0 * x[m]
            return g

        return {"type": "ineq", "fun": val, "jac": jac}

    cons = [make_con(m) for m in range(dim)]
    x0 = np.sign(f)
    x0 = x0 / evaluate(norm, x0)
    res = minimize(lambda x: -f @ x, x0, jac=lambda x: -f,
                   constraints=cons, method="SLSQP",
                   options={"maxiter": 300, "ftol": 1e-14})
    value = float(f @ res.x)
    warnings.warn(
        "c0renorm dual norm is a numerical estimate "
        f"(optimizer success={res.success})", ApproximateDualWarning,
        stacklevel=2)
    return value


# ---------------------------------------------------------------------------
# modulus of convexity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseLinear:
    """A piecewise-linear function given by breakpoints, evaluable in range."""

    x: np.ndarray
    y: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.x[0] - 1e-12) or np.any(t > self.x[-1] + 1e-12):
            raise ValueError("evaluation point outside the sampled range")
        return np.interp(t, self.x, self.y)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.y) / np.diff(self.x)


def convex_minorant(samples) -> PiecewiseLinear:
    """Greatest convex minorant (lower convex hull) of sample points.

    Parameters
    ----------
    samples : iterable of (x, value) pairs with at least 2 distinct x.
    """
    pts = np.asarray(list(samples), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least 2 (x, value) samples")
    order = np.argsort(pts[:, 0])
    pts = pts[order]
    if np.any(np.diff(pts[:, 0]) <= 0):
        raise ValueError("sample abscissae must be distinct")
    hull = []
    for px, py in pts:
        # pop while the middle point sits on or above the new chord
        while len(hull) >= 2:
            (ax, ay), (bx, by) = hull[-2], hull[-1]
            if (by - ay) * (px - bx) >= (py - by) * (bx - ax):
                hull.pop()
            else:
                break
        hull.append((px, py))
    hull = np.asarray(hull)
    return PiecewiseLinear(hull[:, 0], hull[:, 1])


@dataclass(frozen=True)
class ModulusProfile:
    """Sampled modulus-of-convexity estimates with their convex minorant.

    ``power_fit`` is ``(K, p)`` with ``K * eps**p <= minorant(eps)`` at every
    sample, or ``None`` when no such fit is available.
    """

    eps: np.ndarray
    delta_hat: np.ndarray
    minorant: PiecewiseLinear
    power_fit: Optional[Tuple[float, float]] = None

    @classmethod
    def from_samples(cls, eps, delta_hat) -> "ModulusProfile":
        eps = np.asarray(eps, dtype=float)
        delta_hat = np.asarray(delta_hat, dtype=float)
        minorant = convex_minorant(np.column_stack([eps, delta_hat]))
        prof = cls(eps=eps, delta_hat=delta_hat, minorant=minorant)
        return replace(prof, power_fit=fit_power_type(prof))

    def power_bound(self, eps) -> Optional[np.ndarray]:
        if self.power_fit is None:
            return None
        K, p = self.power_fit
        return K * np.asarray(eps, dtype=float) ** p

    def write_csv(self, fh) -> None:
        fh.write("eps,delta_hat,minorant,power_bound\n")
        mv = self.minorant(self.eps)
        pb = self.power_bound(self.eps)
        for i in range(len(self.eps)):
            tail = "" if pb is None else repr(float(pb[i]))
            fh.write(f"{self.eps[i]!r},{self.delta_hat[i]!r},{mv[i]!r},{tail}\n")


def fit_power_type(profile: ModulusProfile) -> Optional[Tuple[float, float]]:
    """Fit ``K * eps**p`` below the profile minorant; ``None`` when absent.

    Least squares of log minorant against log eps, with p clamped to >= 2,
    then K lowered until the bound holds at every sample.  Absent whenever a
    minorant sample is zero (or negative) or fewer than 4 samples remain.
    """
    m = profile.minorant(profile.eps)
    if len(profile.eps) < 4 or np.any(m <= 0):
        return None
    slope, intercept = np.polyfit(np.log(profile.eps), np.log(m), 1)
    p = max(float(slope), 2.0)
    K = min(float(np.exp(intercept)), float(np.min(m / profile.eps ** p)))
    return (K, p)


def default_eps_grid(n: int = 20, lo: float = 0.05, hi: float = 2.0) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n)


def estimate_modulus(norm: NormSpec, eps_grid=None, trials: int = 64,
                     seed: int = 0, iterations: int = 200) -> ModulusProfile:
    """Estimate the modulus of convexity on a grid of chord lengths.

    For each ``eps`` the minimum of ``1 - |x+y|/2`` is searched over pairs
    with ``|x| = |y| = 1`` and ``|x-y| = eps`` by a multi-start projected
    local search: random sphere pairs, constraints restored by rescaling the
    chord and renormalizing, moves along a finite-difference ascent direction
    of ``|x+y|`` with per-start adaptive steps.  The returned values are
    upper bounds of the true modulus restricted to the searched dimension.

    Parameters
    ----------
    norm : NormSpec
        Norm with ``dim >= 2``.
    eps_grid : array-like, optional
        Chord lengths in (0, 2]; defaults to 20 log-spaced points in
        [0.05, 2].
    trials : int
        Number of random starts per grid point.
    seed : int
        Master seed; per-grid-point streams are spawned from it, so results
        do not depend on evaluation order.
    iterations : int
        Local-search iterations per start.
    """
    if norm.dim < 2:
        raise ValueError("modulus estimation requires dimension >= 2")
    if eps_grid is None:
        eps_grid = default_eps_grid()
    eps_grid = np.asarray(eps_grid, dtype=float)
    if eps_grid.size == 0:
        raise ValueError("empty eps grid")
    if np.any(eps_grid <= 0) or np.any(eps_grid > 2):
        raise ValueError("eps values must lie in (0, 2]")
    if trials < 1:
        raise ValueError("trials must be positive")

    children = np.random.SeedSequence(seed).spawn(eps_grid.size)
    delta = np.empty_like(eps_grid)
    for i, eps in enumerate(eps_grid):
        delta[i] = _search_modulus(norm, float(eps), trials, iterations,
                                   children[i])
    # 1 - |x+y|/2 >= 0 for feasible pairs; anything below is projection slack
    if np.any(delta < -1e-6):
        raise AssertionError("modulus search produced an infeasible value")
    delta = np.maximum(delta, 0.0)
    return ModulusProfile.from_samples(eps_grid, delta)


def _project_pair(norm: NormSpec, x: np.ndarray, y: np.ndarray, eps: float,
                  rounds: int = 80):
    """Restore |x|=|y|=1 and |x-y|=eps by alternating chord rescale and
    sphere renormalization.  Returns (x, y, ok_mask)."""
    for _ in range(rounds):
        d = y - x
        nd = evaluate(norm, d)
        nd = np.where(nd > 0, nd, 1.0)
        d = d * (eps / nd)[..., None]
        m = (x + y) / 2.0
        x = m - d / 2.0
        y = m + d / 2.0
        nx = evaluate(norm, x)
        ny = evaluate(norm, y)
        bad = (nx <= 0) | (ny <= 0)
        nx = np.where(bad, 1.0, nx)
        ny = np.where(bad, 1.0, ny)
        x = x / nx[..., None]
        y = y / ny[..., None]
        err = np.maximum(np.abs(evaluate(norm, x) - 1.0),
                         np.abs(evaluate(norm, y) - 1.0))
        err = np.maximum(err, np.abs(evaluate(norm, y - x) - eps) / eps)
        if np.all(err <= PROJECTION_RTOL):
            break
    ok = err <= PROJECTION_RTOL
    return x, y, ok


def _fd_norm_grad(norm: NormSpec, z: np.ndarray) -> np.ndarray:
    """Central finite-difference gradient of the norm, batched over rows."""
    g = np.empty_like(z)
    h = 1e-7 * (1.0 + np.abs(z))
    for j in range(z.shape[-1]):
        zp = z.copy()
        zm = z.copy()
        zp[..., j] += h[..., j]
        zm[..., j] -= h[..., j]
        g[..., j] = (evaluate(norm, zp) - evaluate(norm, zm)) / (2 * h[..., j])
    return g


def _search_modulus(norm: NormSpec, eps: float, trials: int, iterations: int,
                    seedseq) -> float:
    rng = np.random.default_rng(seedseq)
    dim = norm.dim
    x = rng.normal(size=(trials, dim))
    y = rng.normal(size=(trials, dim))
    x /= evaluate(norm, x)[:, None]
    y /= evaluate(norm, y)[:, None]
    x, y, ok = _project_pair(norm, x, y, eps)
    val = np.where(ok, evaluate(norm, x + y), -np.inf)
    step = np.full(trials, 0.25)
    for _ in range(iterations):
        g = _fd_norm_grad(norm, x + y)
        xt = x + step[:, None] * g
        yt = y + step[:, None] * g
        xt, yt, ok = _project_pair(norm, xt, yt, eps)
        vt = np.where(ok, evaluate(norm, xt + yt), -np.inf)
        better = vt > val
        x[better] = xt[better]
        y[better] = yt[better]
        val[better] = vt[better]
        step = np.where(better, step * 1.6, step * 0.5)
        step = np.clip(step, 1e-10, 2.0)
        if np.all(step <= 1e-10):
            break
    best = float(np.max(val))
    if not np.isfinite(best):
        raise AssertionError(
            f"no feasible unit pair found for eps={eps}; "
            "constraint projection failed on all starts")
    return 1.0 - best / 2.0
