"""Approximate energies of maps into CAT(0) targets.

The basic object is the ball-averaged squared difference quotient

    e_eps(x) = mean over y uniform in B_eps(x) of d^2(u(x), u(y)) / eps^2,

its directional cousin along single generator flows, and the weighted
functional E_eps(f) = integral of f e_eps.  Estimators are Monte Carlo with
common random numbers: one batch of unit-ball offsets is drawn per seed and
reused across every scale by dilating, so ladder comparisons see the same
sample noise and scaling identities hold exactly at the estimator level.

Maps are closed-form test maps or tabulated values; resampling estimators
need the closed form (the evaluator) and refuse maps without one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .ccmetric import metric_ball_inside, sample_ball_uniform
from .fields import ScalarField
from .heisenberg import Box, dilate_vec, flow_vec, mul_vec

__all__ = [
    "DiscreteMap",
    "EnergyEstimate",
    "smooth_map",
    "approx_energy_density",
    "directional_energy_density",
    "directional_pointwise_limit",
    "interpolation_inequality_check",
    "subpartition_diagnostic",
    "energy_functional",
    "default_ladder",
]


@dataclass
class DiscreteMap:
    """A target-valued map known at sample points, with optional closed form.

    domain_points and values are parallel arrays ((N, 2n+1) and (N, k));
    evaluator, when present, computes values at arbitrary coordinates and
    is what the resampling estimators use.  domain bounds the region the
    map is defined on.
    """

    domain_points: np.ndarray
    values: np.ndarray
    space: object
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    domain: Optional[Box] = None

    def __post_init__(self):
        self.domain_points = np.asarray(self.domain_points, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.domain_points.shape[0] != self.values.shape[0]:
            raise ValueError("domain_points and values must have equal length")

    def evaluate(self, w: np.ndarray) -> np.ndarray:
        if self.evaluator is None:
            raise ValueError("map has no closed-form evaluator to resample")
        return self.evaluator(np.asarray(w, dtype=float))


def smooth_map(space, fn: Callable, domain: Box) -> DiscreteMap:
    """Wrap a closed-form target-valued function as a DiscreteMap."""
    dim = domain.lo.shape[0]
    return DiscreteMap(
        np.empty((0, dim)), np.empty((0, np.shape(fn(domain.center))[-1])),
        space, evaluator=fn, domain=domain,
    )


@dataclass(frozen=True)
class EnergyEstimate:
    epsilon: float
    value: float
    standard_error: float
    sample_count: int

    def __post_init__(self):
        if self.value < 0 or self.standard_error < 0:
            raise ValueError("energy estimates are nonnegative")


def _require_domain(u: DiscreteMap) -> Box:
    if u.domain is None:
        raise ValueError("operation needs a map with domain bounds")
    return u.domain


_ball_inside = metric_ball_inside


def _unit_offsets(seed: int, count: int, n: int) -> np.ndarray:
    return sample_ball_uniform(None, 1.0, seed, count, n)


def _ball_points(x: np.ndarray, offsets: np.ndarray, eps: float) -> np.ndarray:
    """x . dilate(eps, w) for stacked centers (m, dim) and offsets (k, dim)."""
    scaled = dilate_vec(eps, offsets)
    return mul_vec(x[:, None, :], scaled[None, :, :])


def approx_energy_density(
    u: DiscreteMap, x, eps: float, samples: int, seed: int
) -> EnergyEstimate:
    """Monte Carlo ball-averaged squared quotient at one center."""
    box = _require_domain(u)
    x = np.asarray(x, dtype=float)
    if not _ball_inside(box, x, eps):
        raise ValueError(f"ball of radius {eps} around {x.tolist()} leaves the domain")
    n = (x.shape[0] - 1) // 2
    offs = _unit_offsets(seed, samples, n)
    ys = _ball_points(x[None, :], offs, eps)[0]
    ux = np.asarray(u.evaluate(x))
    d = u.space.distance_many(np.broadcast_to(ux, (samples,) + ux.shape), u.evaluate(ys))
    vals = (d / eps) ** 2
    return EnergyEstimate(
        epsilon=float(eps),
        value=float(np.mean(vals)),
        standard_error=float(np.std(vals, ddof=1) / math.sqrt(samples)),
        sample_count=samples,
    )


def directional_energy_density(u: DiscreteMap, x, generator: int, eps: float) -> float:
    """Squared quotient along one generator flow step of size eps."""
    box = _require_domain(u)
    x = np.asarray(x, dtype=float)
    y = flow_vec(x, generator, eps)
    if not (box.contains(x) and box.contains(y)):
        raise ValueError("flow step leaves the domain")
    d = float(u.space.distance_many(u.evaluate(x), u.evaluate(y)))
    return (d / eps) ** 2


def directional_pointwise_limit(
    u: DiscreteMap, x, generator: int, eps_ladder: Sequence[float]
) -> dict[str, np.ndarray]:
    """Root directional densities along a decreasing ladder, with increments.

    For smooth maps the sequence is Cauchy with quadratically shrinking
    increments; the table carries sqrt(density) per rung and the absolute
    increment to the previous rung (nan on the first).
    """
    ladder = np.asarray(list(eps_ladder), dtype=float)
    if np.any(np.diff(ladder) >= 0):
        raise ValueError("ladder must be strictly decreasing")
    roots = np.array(
        [math.sqrt(directional_energy_density(u, x, generator, e)) for e in ladder]
    )
    incs = np.concatenate([[np.nan], np.abs(np.diff(roots))])
    return {"epsilon": ladder, "root_density": roots, "increment": incs}


def interpolation_inequality_check(
    u0: DiscreteMap,
    u1: DiscreteMap,
    eta: ScalarField,
    eps: float,
    samples: int,
    seed: int,
) -> dict[str, float]:
    """Residuals of the interpolated-map comparison along flow-step pairs.

    For pairs (x, y) one generator step eps apart, with the labels chosen
    so eta(y) <= eta(x) (the quadrilateral folds at the smaller weight and
    the fold parameter (eta(x) - eta(y)) / (1 - 2 eta(y)) must land in
    [0, 1]), the inequality

        d^2(u_eta(x), u_eta(y)) + d^2(u_{1-eta}(x), u_{1-eta}(y))
          <= d^2(u0(x), u0(y)) + d^2(u1(x), u1(y))
             - (eta(y) - eta(x)) (1 - 2 eta(y)) (f(y) - f(x))
             + 2 (f(x) + f(y)) ((eta(x) - eta(y)) / (1 - 2 eta(y)))^2

    holds in any CAT(0) target, where u_c(x) interpolates u0(x) -> u1(x) at
    parameter c and f = d^2(u0, u1).  The final quadratic term is part of
    what the quadrilateral comparison yields and cannot be dropped: without
    it random instances produce genuine violations of the size of that
    term.  Returns the worst residual (lhs - rhs, nonpositive up to
    rounding) and the violation count at the 1e-10 slack.
    """
    box = _require_domain(u0)
    if u1.domain is not None and u1.domain is not box and not (
        np.array_equal(u1.domain.lo, box.lo) and np.array_equal(u1.domain.hi, box.hi)
    ):
        raise ValueError("maps must share their domain")
    space = u0.space
    rng = np.random.default_rng(seed)
    n = box.n
    xs = box.sample(rng, samples)
    gens = rng.integers(1, 2 * n + 1, size=samples)
    ys = xs.copy()
    for g in range(1, 2 * n + 1):
        m = gens == g
        ys[m] = flow_vec(xs[m], g, eps)
    keep = box.contains(ys)
    xs, ys = xs[keep], ys[keep]

    ex = np.asarray(eta(xs), dtype=float)
    ey = np.asarray(eta(ys), dtype=float)
    if np.any(ex < 0) or np.any(ey < 0) or np.any(ex >= 0.5) or np.any(ey >= 0.5):
        raise ValueError("the weight field must take values in [0, 1/2)")
    # relabel so the y-slot carries the smaller weight
    swap = ey > ex
    xs2 = np.where(swap[:, None], ys, xs)
    ys2 = np.where(swap[:, None], xs, ys)
    ex, ey = np.where(swap, ey, ex), np.where(swap, ex, ey)
    # reject non-canonical target points up front: the distance shortcuts
    # are only a metric on canonical data, so garbage here would read as
    # fake violations instead of the evaluator bug it is
    v0x, v0y = space.check_point(u0.evaluate(xs2)), space.check_point(u0.evaluate(ys2))
    v1x, v1y = space.check_point(u1.evaluate(xs2)), space.check_point(u1.evaluate(ys2))

    ux_lo = space.interpolate_many(v0x, v1x, ex)
    uy_lo = space.interpolate_many(v0y, v1y, ey)
    ux_hi = space.interpolate_many(v0x, v1x, 1.0 - ex)
    uy_hi = space.interpolate_many(v0y, v1y, 1.0 - ey)
    lhs = space.distance_many(ux_lo, uy_lo) ** 2 + space.distance_many(ux_hi, uy_hi) ** 2
    fx = space.distance_many(v0x, v1x) ** 2
    fy = space.distance_many(v0y, v1y) ** 2
    fold = (ex - ey) / (1.0 - 2.0 * ey)
    rhs = (
        space.distance_many(v0x, v0y) ** 2
        + space.distance_many(v1x, v1y) ** 2
        - (ey - ex) * (1.0 - 2.0 * ey) * (fy - fx)
        + 2.0 * (fx + fy) * fold**2
    )
    residuals = lhs - rhs
    return {
        "samples": float(xs2.shape[0]),
        "max_residual": float(np.max(residuals)) if residuals.size else 0.0,
        "violations": float(np.sum(residuals > 1e-10)),
    }


def _functional_on_shared_samples(
    u: DiscreteMap,
    weight_values: np.ndarray,
    xs: np.ndarray,
    offsets: np.ndarray,
    eps: float,
    region_volume: float,
) -> tuple[float, float]:
    """E_eps(weight) from fixed centers and shared unit offsets."""
    ys = _ball_points(xs, offsets, eps)
    ux = u.evaluate(xs)
    uy = u.evaluate(ys)
    d = u.space.distance_many(ux[:, None, :], uy)
    dens = np.mean((d / eps) ** 2, axis=1)
    contrib = weight_values * dens
    value = region_volume * float(np.mean(contrib))
    se = region_volume * float(np.std(contrib, ddof=1) / math.sqrt(xs.shape[0]))
    return value, se


def _support_box(f: ScalarField, fallback: Box) -> Box:
    if f.support is not None:
        return Box(np.asarray(f.support[0], float), np.asarray(f.support[1], float))
    return fallback


def subpartition_diagnostic(
    u: DiscreteMap,
    f: ScalarField,
    eps: float,
    lambdas: Sequence[float],
    samples: int = 4000,
    inner_samples: int = 220,
    seed: int = 20260401,
) -> dict[str, float]:
    """Smallest C making the scale-splitting bound hold on shared samples.

    Compares A = E_eps(f) against D = sum of lambda_i E_{lambda_i eps}(g)
    with g = f + osc(f, 2 eps), where osc is the sampled oscillation of f
    over B_2eps; the bound A <= (1 + C eps) D then pins
    C = max(0, (A - D) / (eps D)).  All functionals reuse one batch of
    centers and one batch of unit offsets, dilated per scale.
    """
    lam = np.asarray(list(lambdas), dtype=float)
    if np.any(lam <= 0) or abs(float(np.sum(lam)) - 1.0) > 1e-12:
        raise ValueError("scale weights must be positive and sum to 1")
    box = _require_domain(u)
    region = _support_box(f, box)
    rng = np.random.default_rng(seed)
    xs = region.sample(rng, samples)
    if not np.all(_ball_inside(box, xs, 2.0 * eps)):
        raise ValueError("support is too close to the boundary for this scale")
    n = box.n
    offs = _unit_offsets(seed + 1, inner_samples, n)
    vol = region.volume()
    fx = np.asarray(f(xs), dtype=float)

    lhs, _ = _functional_on_shared_samples(u, fx, xs, offs, eps, vol)
    osc_pts = _ball_points(xs, offs, 2.0 * eps)
    fvals = np.asarray(f(osc_pts), dtype=float)
    osc = np.max(fvals, axis=1) - np.min(fvals, axis=1)
    rhs = 0.0
    for li in lam:
        val, _ = _functional_on_shared_samples(u, fx + osc, xs, offs, li * eps, vol)
        rhs += li * val
    if rhs <= 0.0:
        c_min = 0.0
    else:
        c_min = max(0.0, (lhs - rhs) / (eps * rhs))
    return {"C": float(c_min), "lhs": float(lhs), "rhs": float(rhs), "epsilon": float(eps)}


def energy_functional(
    u: DiscreteMap,
    psi: ScalarField,
    eps_ladder: Sequence[float],
    samples: int = 4000,
    inner_samples: int = 220,
    seed: int = 20260402,
) -> list[EnergyEstimate]:
    """E_eps(psi) along a decreasing ladder with shared sample noise."""
    ladder = list(eps_ladder)
    if any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("ladder must be strictly decreasing")
    box = _require_domain(u)
    region = _support_box(psi, box)
    rng = np.random.default_rng(seed)
    xs = region.sample(rng, samples)
    psix = np.asarray(psi(xs), dtype=float)
    if np.any(psix < 0) or np.any(psix > 1.0 + 1e-12):
        raise ValueError("the test weight must take values in [0, 1]")
    n = box.n
    offs = _unit_offsets(seed + 1, inner_samples, n)
    vol = region.volume()
    out = []
    for eps in ladder:
        if not np.all(_ball_inside(box, xs, eps)):
            raise ValueError(f"support too close to the boundary at scale {eps}")
        val, se = _functional_on_shared_samples(u, psix, xs, offs, eps, vol)
        out.append(EnergyEstimate(float(eps), val, se, samples * inner_samples))
    return out


def default_ladder(domain: Box, rungs: int = 6, top: float | None = None) -> list[float]:
    """Geometric ladder with ratio 1/2; top defaults to inradius / 8."""
    if top is None:
        top = domain.inradius() / 8.0
    return [top * 0.5**k for k in range(rungs)]
