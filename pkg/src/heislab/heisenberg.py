"""Group operations on the Heisenberg group H^n.

Points are written in exponential coordinates (x, y, t) with x, y in R^n and
t in R.  The group law carries the 1/2-factor symplectic correction in the
central slot, so the horizontal frame is X_i = d/dx_i - (y_i/2) d/dt,
Y_i = d/dy_i + (x_i/2) d/dt and [X_i, Y_i] = d/dt.

Stacked-array kernels (``*_vec``) operate on float arrays of shape
(..., 2n+1) laid out as [x_1..x_n, y_1..y_n, t]; the dataclass wrappers are
thin views over the same arithmetic.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GroupPoint",
    "HorizontalVector",
    "Box",
    "identity",
    "multiply",
    "inverse",
    "dilate",
    "flow_step",
    "pansu_quotient",
    "commutator_loop",
    "mul_vec",
    "inv_vec",
    "dilate_vec",
    "flow_vec",
]


def _split(w: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = (w.shape[-1] - 1) // 2
    return w[..., :n], w[..., n : 2 * n], w[..., 2 * n]


def mul_vec(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Group product on stacked coordinate arrays (broadcasting)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    px, py, pt = _split(p)
    qx, qy, qt = _split(q)
    out = np.empty(np.broadcast_shapes(p.shape, q.shape))
    n = (out.shape[-1] - 1) // 2
    out[..., :n] = px + qx
    out[..., n : 2 * n] = py + qy
    out[..., 2 * n] = pt + qt + 0.5 * (np.sum(px * qy, axis=-1) - np.sum(py * qx, axis=-1))
    return out


def inv_vec(p: np.ndarray) -> np.ndarray:
    """Group inverse: coordinatewise negation."""
    return -np.asarray(p, dtype=float)


def dilate_vec(eps: float, p: np.ndarray) -> np.ndarray:
    """Anisotropic dilation: horizontal slots scale by eps, central by eps^2."""
    p = np.asarray(p, dtype=float)
    out = p * eps
    out[..., -1] = p[..., -1] * eps * eps
    return out


def flow_vec(p: np.ndarray, generator: int, h: float) -> np.ndarray:
    """Advance time h along one horizontal generator (1..2n), vectorized.

    Right multiplication by (h e_i, 0, 0) for generator i <= n and by
    (0, h e_{i-n}, 0) for i > n; this is the unit-time-h flow of the
    corresponding left-invariant horizontal field.
    """
    p = np.asarray(p, dtype=float)
    n = (p.shape[-1] - 1) // 2
    if not 1 <= generator <= 2 * n:
        raise ValueError(f"generator must be in 1..{2*n}, got {generator}")
    out = p.copy()
    if generator <= n:
        i = generator - 1
        out[..., i] += h
        out[..., 2 * n] -= 0.5 * h * p[..., n + i]
    else:
        i = generator - n - 1
        out[..., n + i] += h
        out[..., 2 * n] += 0.5 * h * p[..., i]
    return out


@dataclass(frozen=True)
class GroupPoint:
    """A point of H^n in exponential coordinates."""

    x: np.ndarray
    y: np.ndarray
    t: float

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError("x and y must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.isfinite(self.t)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", float(self.t))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def vec(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, [self.t]])

    @staticmethod
    def from_vec(w: np.ndarray) -> "GroupPoint":
        w = np.asarray(w, dtype=float)
        n = (w.shape[0] - 1) // 2
        return GroupPoint(w[:n], w[n : 2 * n], w[2 * n])

    def __repr__(self) -> str:  # compact, round-trippable enough for logs
        return f"GroupPoint(x={self.x.tolist()}, y={self.y.tolist()}, t={self.t!r})"


@dataclass(frozen=True)
class HorizontalVector:
    """Coefficients (a, b) in the left-invariant horizontal frame at a point."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if a.shape != b.shape or a.ndim != 1:
            raise ValueError("a and b must be 1-d arrays of equal length")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.a**2) + np.sum(self.b**2)))


def identity(n: int = 1) -> GroupPoint:
    return GroupPoint(np.zeros(n), np.zeros(n), 0.0)


def multiply(p: GroupPoint, q: GroupPoint) -> GroupPoint:
    if p.n != q.n:
        raise ValueError("points live in different groups")
    return GroupPoint.from_vec(mul_vec(p.vec(), q.vec()))


def inverse(p: GroupPoint) -> GroupPoint:
    return GroupPoint(-p.x, -p.y, -p.t)


def dilate(eps: float, p: GroupPoint) -> GroupPoint:
    if not eps > 0:
        raise ValueError("dilation factor must be positive")
    return GroupPoint(eps * p.x, eps * p.y, eps * eps * p.t)


def flow_step(p: GroupPoint, generator: int, h: float) -> GroupPoint:
    """One step of size h along horizontal generator 1..2n (X_i then Y_i)."""
    return GroupPoint.from_vec(flow_vec(p.vec(), generator, h))


def pansu_quotient(f, p: GroupPoint, w: GroupPoint, eps: float) -> float:
    """Scaled difference quotient (f(p * dilate(eps, w)) - f(p)) / eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    moved = multiply(p, dilate(eps, w))
    return (float(f(moved)) - float(f(p))) / eps


def commutator_loop(n: int, pair: int, h: float) -> GroupPoint:
    """Traverse X_i(h), Y_i(h), X_i(-h), Y_i(-h) from the identity.

    The loop closes only up to the central direction: the result is
    (0, 0, h^2), which is how the bracket [X_i, Y_i] = d/dt shows up at
    group level.
    """
    p = identity(n)
    for gen, step in ((pair, h), (n + pair, h), (pair, -h), (n + pair, -h)):
        p = flow_step(p, gen, step)
    return p


@dataclass(frozen=True)
class Box:
    """Axis-aligned coordinate box in H^n, the working domain of experiments.

    ``lo`` and ``hi`` each hold 2n+1 entries in the [x, y, t] layout.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1 or lo.shape[0] % 2 == 0:
            raise ValueError("bounds must be 1-d arrays of odd equal length")
        if not np.all(hi > lo):
            raise ValueError("upper bounds must exceed lower bounds")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def n(self) -> int:
        return (self.lo.shape[0] - 1) // 2

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, w: np.ndarray, slack: float = 0.0) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return np.all((w >= self.lo - slack) & (w <= self.hi + slack), axis=-1)

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        u = rng.uniform(size=(count, self.lo.shape[0]))
        return self.lo + u * (self.hi - self.lo)

    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def inradius(self) -> float:
        """Carnot-Caratheodory distance from the center to the boundary, below.

        Planar faces are reached at the planar half-extent; the central faces
        at distance 2*sqrt(pi * t-half-extent) along the central axis, which a
        ball of radius rho touches once rho^2/(4 pi) reaches the half-extent.
        The minimum over faces lower-bounds the true inradius and is exact for
        boxes whose planar extent is the binding constraint.
        """
        half = 0.5 * (self.hi - self.lo)
        planar = float(np.min(half[:-1]))
        central = float(2.0 * np.sqrt(np.pi * half[-1]))
        return min(planar, central)


def unit_box(n: int = 1) -> Box:
    """The box [0,1]^{2n} x [0,1]."""
    return Box(np.zeros(2 * n + 1), np.ones(2 * n + 1))
