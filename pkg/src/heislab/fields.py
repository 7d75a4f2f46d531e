"""Smooth scalar test fields on H^n with analytic horizontal gradients.

A ScalarField bundles the coordinate evaluation with the 2n horizontal
derivatives (X_1 f, ..., X_n f, Y_1 f, ..., Y_n f) in the left-invariant
frame X_i = d/dx_i - (y_i/2) d/dt, Y_i = d/dy_i + (x_i/2) d/dt.  The named
registry is what CLI configs refer to; the factories below compose new
fields with correct chain rules.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ScalarField",
    "coordinate",
    "constant",
    "combine",
    "apply_smooth",
    "product",
    "cos_window",
    "pansu_differential",
    "named_field",
    "FIELD_NAMES",
]


@dataclass(frozen=True)
class ScalarField:
    """A scalar function of (..., 2n+1) coordinate arrays.

    grad_h returns the horizontal frame derivatives with shape (..., 2n);
    it may be None for fields only used through their values (bump windows
    in the discrete pairings).  support, when set, is the (lo, hi)
    coordinate box outside which the field vanishes; samplers restrict to
    it so compactly supported weights integrate without waste.
    """

    name: str
    value: Callable[[np.ndarray], np.ndarray]
    grad_h: Optional[Callable[[np.ndarray], np.ndarray]] = None
    grad_t: Optional[Callable[[np.ndarray], np.ndarray]] = None
    support: Optional[tuple] = None

    def __call__(self, w: np.ndarray) -> np.ndarray:
        return self.value(np.asarray(w, dtype=float))

    def horizontal_gradient(self, w: np.ndarray) -> np.ndarray:
        if self.grad_h is None:
            raise ValueError(f"field {self.name!r} carries no horizontal gradient")
        return self.grad_h(np.asarray(w, dtype=float))

    def vertical_derivative(self, w: np.ndarray) -> np.ndarray:
        """Flat partial along the central coordinate."""
        if self.grad_t is None:
            raise ValueError(f"field {self.name!r} carries no vertical derivative")
        return self.grad_t(np.asarray(w, dtype=float))

    def planar_partials(self, w: np.ndarray) -> np.ndarray:
        """Flat partials d/dx_i, d/dy_i recovered from the frame derivatives.

        X_i = d/dx_i - (y_i/2) d/dt and Y_i = d/dy_i + (x_i/2) d/dt, so the
        flat partials add back the central correction.
        """
        w = np.asarray(w, dtype=float)
        n = _nn(w)
        g = np.array(self.horizontal_gradient(w), dtype=float, copy=True)
        dt = np.asarray(self.vertical_derivative(w), dtype=float)
        g[..., :n] += 0.5 * w[..., n : 2 * n] * dt[..., None]
        g[..., n:] -= 0.5 * w[..., :n] * dt[..., None]
        return g


def _nn(w: np.ndarray) -> int:
    return (w.shape[-1] - 1) // 2


def coordinate(name: str) -> ScalarField:
    """Coordinate field by name: x<i>, y<i>, or t.

    The horizontal gradient of t is position-dependent:
    X_i t = -y_i/2, Y_i t = x_i/2.
    """
    if name == "t":

        def val(w):
            return w[..., -1]

        def grad(w):
            n = _nn(w)
            g = np.empty(w.shape[:-1] + (2 * n,))
            g[..., :n] = -0.5 * w[..., n : 2 * n]
            g[..., n:] = 0.5 * w[..., :n]
            return g

        return ScalarField("t", val, grad, lambda w: np.ones(w.shape[:-1]))
    kind, idx = name[0], int(name[1:])
    if kind not in "xy" or idx < 1:
        raise ValueError(f"unknown coordinate {name!r}")

    def val(w, kind=kind, idx=idx):
        n = _nn(w)
        j = idx - 1 if kind == "x" else n + idx - 1
        return w[..., j]

    def grad(w, kind=kind, idx=idx):
        n = _nn(w)
        j = idx - 1 if kind == "x" else n + idx - 1
        g = np.zeros(w.shape[:-1] + (2 * n,))
        g[..., j] = 1.0
        return g

    return ScalarField(name, val, grad, lambda w: np.zeros(w.shape[:-1]))


def constant(c: float) -> ScalarField:
    return ScalarField(
        f"const({c})",
        lambda w: np.full(w.shape[:-1], float(c)),
        lambda w: np.zeros(w.shape[:-1] + (w.shape[-1] - 1,)),
        lambda w: np.zeros(w.shape[:-1]),
    )


def combine(terms: list[tuple[float, ScalarField]], name: str | None = None) -> ScalarField:
    """Linear combination sum of coeff * field."""
    label = name or "+".join(f"{c}*{f.name}" for c, f in terms)

    def val(w):
        return sum(c * f.value(w) for c, f in terms)

    def grad(w):
        return sum(c * f.grad_h(w) for c, f in terms)

    def gradt(w):
        return sum(c * f.grad_t(w) for c, f in terms)

    has_grad = all(f.grad_h is not None for _, f in terms)
    has_gt = all(f.grad_t is not None for _, f in terms)
    return ScalarField(label, val, grad if has_grad else None, gradt if has_gt else None)


def apply_smooth(
    f: ScalarField, fn: Callable, dfn: Callable, name: str | None = None
) -> ScalarField:
    """Composition fn(f) with chain rule through dfn."""
    label = name or f"{getattr(fn, '__name__', 'fn')}({f.name})"

    def val(w):
        return fn(f.value(w))

    def grad(w):
        return dfn(f.value(w))[..., None] * f.grad_h(w)

    def gradt(w):
        return dfn(f.value(w)) * f.grad_t(w)

    return ScalarField(
        label,
        val,
        grad if f.grad_h is not None else None,
        gradt if f.grad_t is not None else None,
    )


def product(f: ScalarField, g: ScalarField, name: str | None = None) -> ScalarField:
    label = name or f"{f.name}*{g.name}"

    def val(w):
        return f.value(w) * g.value(w)

    def grad(w):
        return f.value(w)[..., None] * g.grad_h(w) + g.value(w)[..., None] * f.grad_h(w)

    def gradt(w):
        return f.value(w) * g.grad_t(w) + g.value(w) * f.grad_t(w)

    has_grad = f.grad_h is not None and g.grad_h is not None
    has_gt = f.grad_t is not None and g.grad_t is not None
    return ScalarField(label, val, grad if has_grad else None, gradt if has_gt else None)


def cos_window(center: np.ndarray, half_widths: np.ndarray, amplitude: float = 1.0) -> ScalarField:
    """Nonnegative compactly supported bump: product of cos^2 windows.

    Equal to amplitude at the center, identically zero outside the
    coordinate box center +- half_widths, C^1 across the edge.  Values
    only (no horizontal gradient); meant for the discrete pairings and as
    a generic nonnegative test weight.
    """
    c = np.asarray(center, dtype=float)
    a = np.asarray(half_widths, dtype=float)
    if np.any(a <= 0):
        raise ValueError("half widths must be positive")

    def val(w):
        u = (np.asarray(w, float) - c) / a
        inside = np.all(np.abs(u) < 1.0, axis=-1)
        prof = np.prod(np.cos(0.5 * np.pi * np.clip(u, -1.0, 1.0)) ** 2, axis=-1)
        return amplitude * np.where(inside, prof, 0.0)

    return ScalarField(f"window@{c.tolist()}", val, None, support=(c - a, c + a))


def pansu_differential(f: ScalarField, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Intrinsic first-order term: sum_j of grad_h f(p)_j times w_j.

    Linear in the horizontal slots of w and independent of w's central
    slot, which enters difference quotients only at higher order.
    """
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    n = _nn(w)
    return np.sum(f.horizontal_gradient(p) * w[..., : 2 * n], axis=-1)


# --- named registry for configs -----------------------------------------

def _build_named() -> dict[str, Callable[[], ScalarField]]:
    sin_x1 = lambda: apply_smooth(coordinate("x1"), np.sin, np.cos, "sin(x1)")
    return {
        "x1": lambda: coordinate("x1"),
        "y1": lambda: coordinate("y1"),
        "t": lambda: coordinate("t"),
        "zero": lambda: constant(0.0),
        "one": lambda: constant(1.0),
        "x1^2": lambda: product(coordinate("x1"), coordinate("x1"), "x1^2"),
        "x1+2y1": lambda: combine(
            [(1.0, coordinate("x1")), (2.0, coordinate("y1"))], "x1+2y1"
        ),
        "sin(x1)+t": lambda: combine(
            [(1.0, sin_x1()), (1.0, coordinate("t"))], "sin(x1)+t"
        ),
    }


_NAMED = _build_named()
FIELD_NAMES = tuple(sorted(_NAMED))


def named_field(name: str) -> ScalarField:
    """Look up a registry field; coordinate names fall through directly."""
    if name in _NAMED:
        return _NAMED[name]()
    try:
        return coordinate(name)
    except (ValueError, IndexError):
        raise ValueError(f"unknown field {name!r}; known: {', '.join(FIELD_NAMES)}") from None
