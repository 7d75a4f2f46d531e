"""CAT(0) target spaces: Euclidean R^k and the k-legged spider tree.

Points are plain float arrays so grid-sized collections stay vectorized:
Euclidean points have shape (k,); spider points have shape (2,) holding
(leg, radius) with the hub stored canonically as (0, 0).  Spaces expose both
scalar operations and stacked-array variants (``*_many``) for the solver's
hot path.

The module-level quadrilateral comparison predicates return slacks of the
two CAT(0) comparison inequalities used downstream: for a quadruple
(P, Q, R, S) with P_t on the geodesic P -> S and Q_t on Q -> R,

    slack41: (1-t) d_PQ^2 + t d_RS^2
             - t(1-t) [s (d_SP - d_QR)^2 + (1-s)(d_RS - d_PQ)^2]
             - d(P_t, Q_t)^2
    slack42: d_PQ^2 + d_RS^2 + t (d_SP^2 - d_QR^2) + 2 t^2 d_QR^2
             - t [s (d_SP - d_QR)^2 + (1-s)(d_RS - d_PQ)^2]
             - d(P, Q_t)^2 - d(S, Q_{1-t})^2

both nonnegative in any CAT(0) space for t, s in [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Euclidean",
    "Spider",
    "QuadResiduals",
    "distance",
    "geodesic_interpolate",
    "frechet_mean",
    "quad_comparison_check",
    "quad_comparison_slacks",
]


class Euclidean:
    """R^k with the usual metric; geodesics are segments."""

    kind = "euclidean"

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be at least 1")
        self.dim = int(dim)

    def __repr__(self):
        return f"Euclidean({self.dim})"

    def point(self, *coords) -> np.ndarray:
        if len(coords) == 1 and np.ndim(coords[0]) == 1:
            coords = tuple(coords[0])
        if len(coords) != self.dim:
            raise ValueError(f"expected {self.dim} coordinates")
        return np.asarray(coords, dtype=float)

    def check_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.dim:
            raise ValueError(f"point of shape {p.shape} does not live in {self!r}")
        return p

    def distance(self, p, q) -> float:
        return float(np.linalg.norm(self.check_point(p) - self.check_point(q)))

    def distance_many(self, p, q) -> np.ndarray:
        return np.linalg.norm(np.asarray(p, float) - np.asarray(q, float), axis=-1)

    def interpolate(self, p, q, t: float) -> np.ndarray:
        if not 0.0 <= t <= 1.0:
            raise ValueError("interpolation parameter must lie in [0, 1]")
        return (1.0 - t) * self.check_point(p) + t * self.check_point(q)

    def interpolate_many(self, p, q, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)[..., None]
        return (1.0 - t) * np.asarray(p, float) + t * np.asarray(q, float)

    def frechet_mean(self, points, weights=None) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("need a nonempty stack of points")
        w = _norm_weights(weights, pts.shape[0])
        return w @ pts

    def mean_many(self, stacks: np.ndarray, weights=None) -> np.ndarray:
        """Fréchet mean over axis 0 of a (m, ..., dim) stack of points."""
        stacks = np.asarray(stacks, dtype=float)
        w = _norm_weights(weights, stacks.shape[0])
        return np.tensordot(w, stacks, axes=(0, 0))


class Spider:
    """k half-lines glued at a hub, k >= 3; the minimal branching tree.

    A point is (leg, radius): radius 0 forces leg 0 (the hub), radius > 0
    requires a leg index in 1..k.  Distance is |r - r'| when one point is
    the hub or both share a leg, and r + r' across legs (path through the
    hub).
    """

    kind = "spider"

    def __init__(self, legs: int):
        if legs < 3:
            raise ValueError("a spider needs at least 3 legs")
        self.legs = int(legs)

    def __repr__(self):
        return f"Spider({self.legs})"

    def point(self, leg: int, radius: float) -> np.ndarray:
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        if radius == 0:
            return np.array([0.0, 0.0])
        if not 1 <= leg <= self.legs:
            raise ValueError(f"leg must be in 1..{self.legs} for radius > 0")
        return np.array([float(leg), float(radius)])

    def hub(self) -> np.ndarray:
        return np.array([0.0, 0.0])

    def check_point(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != 2:
            raise ValueError("spider points have shape (..., 2)")
        leg, r = p[..., 0], p[..., 1]
        if np.any(r < 0) or np.any((r == 0) & (leg != 0)) or np.any((r > 0) & (leg < 1)):
            raise ValueError("non-canonical spider point")
        if np.any(leg > self.legs) or np.any(leg != np.round(leg)):
            raise ValueError(f"leg index out of range for {self!r}")
        return p

    def distance(self, p, q) -> float:
        return float(self.distance_many(self.check_point(p), self.check_point(q)))

    def distance_many(self, p, q) -> np.ndarray:
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        shared = (p[..., 0] == q[..., 0]) | (p[..., 0] == 0) | (q[..., 0] == 0)
        return np.where(shared, np.abs(p[..., 1] - q[..., 1]), p[..., 1] + q[..., 1])

    def interpolate(self, p, q, t: float) -> np.ndarray:
        if not 0.0 <= t <= 1.0:
            raise ValueError("interpolation parameter must lie in [0, 1]")
        return self.interpolate_many(self.check_point(p), self.check_point(q), t)

    def interpolate_many(self, p, q, t) -> np.ndarray:
        """Constant-speed geodesic point, vectorized over stacked points.

        On a shared leg (or from the hub) the radius moves linearly; across
        legs the path walks through the hub at the radius split.
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        t = np.asarray(t, dtype=float)
        shared = (p[..., 0] == q[..., 0]) | (p[..., 0] == 0) | (q[..., 0] == 0)
        leg_shared = np.where(p[..., 0] != 0, p[..., 0], q[..., 0])
        r_shared = (1.0 - t) * p[..., 1] + t * q[..., 1]
        travelled = t * (p[..., 1] + q[..., 1])
        on_first = travelled < p[..., 1]
        leg_cross = np.where(on_first, p[..., 0], q[..., 0])
        r_cross = np.where(on_first, p[..., 1] - travelled, travelled - p[..., 1])
        leg = np.where(shared, leg_shared, leg_cross)
        r = np.where(shared, r_shared, r_cross)
        out = np.empty(np.broadcast_shapes(p.shape, q.shape))
        out[..., 0] = np.where(r > 0, leg, 0.0)
        out[..., 1] = np.where(r > 0, r, 0.0)
        return out

    def frechet_mean(self, points, weights=None) -> np.ndarray:
        pts = self.check_point(np.asarray(points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValueError("need a nonempty stack of points")
        w = _norm_weights(weights, pts.shape[0])
        out = self.mean_many(pts[:, None, :], w)[0]
        return out

    def mean_many(self, stacks: np.ndarray, weights=None) -> np.ndarray:
        """Fréchet mean over axis 0 of a (m, ..., 2) stack of spider points.

        For each leg j the signed per-leg mean is
        m_j = (sum of weighted radii on j minus the rest) / total weight;
        at most one m_j can be positive (m_j + m_k <= 0 for j != k), and the
        minimizer is (j, m_j) for that leg, the hub otherwise.  This is the
        exact closed form of the 1-d quadratic minimization on each leg.
        """
        stacks = np.asarray(stacks, dtype=float)
        w = _norm_weights(weights, stacks.shape[0])
        legs = stacks[..., 0]
        radii = stacks[..., 1]
        total = np.tensordot(w, radii, axes=(0, 0))
        best_val = np.full(total.shape, -np.inf)
        best_leg = np.zeros(total.shape)
        for j in range(1, self.legs + 1):
            on_leg = np.tensordot(w, radii * (legs == j), axes=(0, 0))
            m_j = 2.0 * on_leg - total
            take = m_j > best_val
            best_val = np.where(take, m_j, best_val)
            best_leg = np.where(take, float(j), best_leg)
        pos = best_val > 0
        out = np.zeros(total.shape + (2,))
        out[..., 0] = np.where(pos, best_leg, 0.0)
        out[..., 1] = np.where(pos, best_val, 0.0)
        return out


def _norm_weights(weights, count: int) -> np.ndarray:
    if weights is None:
        return np.full(count, 1.0 / count)
    w = np.asarray(weights, dtype=float)
    if w.shape != (count,) or np.any(w < 0):
        raise ValueError("weights must be a nonnegative vector matching the points")
    s = float(np.sum(w))
    if s <= 0:
        raise ValueError("weights must have positive sum")
    return w / s


# --- module-level operations over any space -----------------------------

def distance(space, p, q) -> float:
    return space.distance(p, q)


def geodesic_interpolate(space, p, q, t: float):
    return space.interpolate(p, q, t)


def frechet_mean(space, points, weights=None):
    return space.frechet_mean(points, weights)


@dataclass(frozen=True)
class QuadResiduals:
    """Slacks (RHS - LHS) of the two comparison inequalities; both >= 0
    up to rounding in a genuine CAT(0) space."""

    slack41: float
    slack42: float


def quad_comparison_slacks(space, P, Q, R, S, t, s) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized comparison slacks for stacked quadruples.

    P_t walks the geodesic P -> S and Q_t the geodesic Q -> R; s is the
    free averaging parameter of the correction term.  t and s broadcast
    against the stacked point arrays.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    dm = space.distance_many
    d_pq = dm(P, Q)
    d_rs = dm(R, S)
    d_sp = dm(S, P)
    d_qr = dm(Q, R)
    correction = s * (d_sp - d_qr) ** 2 + (1.0 - s) * (d_rs - d_pq) ** 2

    p_t = space.interpolate_many(P, S, t)
    q_t = space.interpolate_many(Q, R, t)
    slack41 = (
        (1.0 - t) * d_pq**2
        + t * d_rs**2
        - t * (1.0 - t) * correction
        - dm(p_t, q_t) ** 2
    )
    q_1mt = space.interpolate_many(Q, R, 1.0 - t)
    slack42 = (
        d_pq**2
        + d_rs**2
        + t * (d_sp**2 - d_qr**2)
        + 2.0 * t**2 * d_qr**2
        - t * correction
        - dm(P, q_t) ** 2
        - dm(S, q_1mt) ** 2
    )
    return slack41, slack42


def quad_comparison_check(space, P, Q, R, S, t: float, s: float) -> QuadResiduals:
    """Both quadrilateral comparison slacks for one quadruple."""
    if not (0.0 <= t <= 1.0 and 0.0 <= s <= 1.0):
        raise ValueError("t and s must lie in [0, 1]")
    s41, s42 = quad_comparison_slacks(
        space,
        space.check_point(P),
        space.check_point(Q),
        space.check_point(R),
        space.check_point(S),
        t,
        s,
    )
    return QuadResiduals(float(s41), float(s42))
