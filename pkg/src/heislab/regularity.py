"""Experiment drivers: difference-quotient limits and regularity profiles.

Three families of measurements live here.

Product-quotient limits: the ball average of [eta(p w_eps) - eta(p)] x
[f(p w_eps) - f(p)] / eps^2 converges to the horizontal gradient pairing
sum_j (X_j eta X_j f + Y_j eta Y_j f)(p).  The estimators exploit the ball's
exact symmetries: every sample is expanded into its orbit under the
quarter-turn rotations of each planar pair and the flip
(x, y, t) -> (x, -y, -t), all measure-preserving group automorphisms.
Orbit averaging kills the cross and odd moments exactly (not just in
expectation), so the measured error tracks the Taylor remainder instead of
Monte Carlo noise, and one offset batch is shared across every scale.
Both sides are reported relative to the planar second moment of the same
batch, which frees the comparison from the ball-volume normalization.

Mean-value constants: max over centers of f(center) / (lattice ball
average of f) for nonnegative lattice fields, the empirical constant of
the pointwise-subsolution bound.

Lipschitz profiles: sup of d_N(u(p), u(q)) / d_cc(p, q) over node pairs in
a distance annulus [sigma, 2 sigma], per scale, away from a boundary
collar, with a log-log exponent fit and the energy-over-ball-volume bound
for context.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ccmetric import (
    KAPPA_CENTRAL,
    ball_volume,
    cc_distance_vec,
    metric_ball_inside,
    sample_ball_uniform,
)
from .fields import ScalarField, cos_window, pansu_differential
from .heisenberg import Box, GroupPoint, dilate_vec, inv_vec, mul_vec
from .solver import GridMap, discrete_energy, subsolution_residual, translate_map

__all__ = [
    "lemma53_experiment",
    "taylor_product_terms",
    "pansu_l2_convergence",
    "moser_mean_value_check",
    "pick_moser_centers",
    "lipschitz_profile",
    "RegularityReport",
    "tripod_boundary",
    "bump_suite",
    "translation_quadratic",
]


def _as_vec(p) -> np.ndarray:
    if isinstance(p, GroupPoint):
        return p.vec()
    return np.asarray(p, dtype=float)


def _orbit(w: np.ndarray, n: int) -> np.ndarray:
    """Expand samples (m, 2n+1) to their symmetry orbits (m, 4^n * 2, 2n+1).

    Generators: the quarter turn (x_j, y_j) -> (-y_j, x_j) in each planar
    pair (t fixed) and the flip (x, y, t) -> (x, -y, -t).  All are ball
    isometries, so orbit averaging leaves every ball expectation unchanged
    while cancelling odd and cross monomials exactly.
    """
    outs = [w]
    for j in range(n):
        for a in list(outs):
            b = a
            for _ in range(3):
                b = b.copy()
                xj = b[..., j].copy()
                b[..., j] = -b[..., n + j]
                b[..., n + j] = xj
                outs.append(b)
    for a in list(outs):
        b = a.copy()
        b[..., n : 2 * n] *= -1.0
        b[..., -1] *= -1.0
        outs.append(b)
    return np.stack(outs, axis=-2)


def _orbit_batch(seed: int, samples: int, n: int) -> tuple[np.ndarray, float]:
    w = sample_ball_uniform(None, 1.0, seed, samples, n)
    orb = _orbit(w, n)
    # planar second moment of the same batch; exactly orbit-invariant
    m_hat = float(np.mean(orb[..., : 2 * n] ** 2))
    return orb, m_hat


def lemma53_experiment(
    eta: ScalarField,
    f: ScalarField,
    p,
    eps_ladder: Sequence[float],
    samples: int,
    seed: int,
) -> dict[str, np.ndarray]:
    """Product-quotient ball averages against the gradient pairing.

    Returns a column table with one row per ladder rung: epsilon, lhs (the
    symmetrized Monte Carlo average over B_eps(p) of the product of
    difference quotients, divided by the batch planar second moment), rhs
    (the horizontal gradient pairing at p, scale-free), the absolute error,
    and the standard error of lhs.
    """
    pv = _as_vec(p)
    n = (pv.shape[0] - 1) // 2
    ladder = np.asarray(list(eps_ladder), dtype=float)
    if ladder.size == 0 or np.any(ladder <= 0):
        raise ValueError("the scale ladder must be positive")
    orb, m_hat = _orbit_batch(seed, samples, n)
    eta_p = float(eta(pv))
    f_p = float(f(pv))
    rhs = float(np.sum(eta.horizontal_gradient(pv) * f.horizontal_gradient(pv)))

    lhs = np.empty(ladder.size)
    lhs_se = np.empty(ladder.size)
    for k, eps in enumerate(ladder):
        q = mul_vec(pv[None, None, :], dilate_vec(eps, orb))
        prod = (eta(q) - eta_p) * (f(q) - f_p) / eps**2
        per_sample = prod.mean(axis=1)
        lhs[k] = per_sample.mean() / m_hat
        lhs_se[k] = per_sample.std(ddof=1) / math.sqrt(per_sample.shape[0]) / m_hat
    return {
        "epsilon": ladder,
        "lhs": lhs,
        "rhs": np.full(ladder.size, rhs),
        "error": np.abs(lhs - rhs),
        "lhs_se": lhs_se,
    }


def taylor_product_terms(
    eta: ScalarField,
    f: ScalarField,
    p,
    eps: float,
    samples: int,
    seed: int,
) -> dict[str, float]:
    """Per-group breakdown of the product quotient at one scale.

    The first-order expansion of a difference quotient splits into a planar
    part sum_i d_i f w_i and a central part d_t f C_eps(w) with

        C_eps(w) = eps w_t + (1/2) sum_j (p_j w_{y_j} - p_{y_j} w_{x_j}),

    so the product of two quotients splits into five groups: planar
    diagonal, planar cross, central x central, and the two mixed
    planar x central groups.  Each group's symmetrized ball average is
    reported with its standard error, normalized by the batch planar second
    moment like the limit experiment, together with the exact product
    quotient and the leftover (the Taylor remainder).  The cross and mixed
    averages vanish by the orbit symmetry; the diagonal group matches the
    limit experiment's lhs.
    """
    pv = _as_vec(p)
    n = (pv.shape[0] - 1) // 2
    if eps <= 0:
        raise ValueError("eps must be positive")
    orb, m_hat = _orbit_batch(seed, samples, n)
    w_pl = orb[..., : 2 * n]
    pf = f.planar_partials(pv)
    pe = eta.planar_partials(pv)
    dtf = float(f.vertical_derivative(pv))
    dte = float(eta.vertical_derivative(pv))

    lin_f = w_pl @ pf
    lin_e = w_pl @ pe
    central = eps * orb[..., -1] + 0.5 * (
        np.sum(orb[..., n : 2 * n] * pv[:n], axis=-1)
        - np.sum(orb[..., :n] * pv[n : 2 * n], axis=-1)
    )
    diagonal = w_pl**2 @ (pf * pe)
    cross = lin_f * lin_e - diagonal
    cc = dtf * dte * central**2
    mixed_weight = dte * lin_f * central
    mixed_map = dtf * lin_e * central

    q = mul_vec(pv[None, None, :], dilate_vec(eps, orb))
    quotient = (eta(q) - float(eta(pv))) * (f(q) - float(f(pv))) / eps**2
    remainder = quotient - (diagonal + cross + cc + mixed_weight + mixed_map)

    out: dict[str, float] = {"epsilon": float(eps), "moment": m_hat}
    groups = {
        "diagonal": diagonal,
        "cross": cross,
        "central_central": cc,
        "mixed_weight_central": mixed_weight,
        "mixed_map_central": mixed_map,
        "quotient": quotient,
        "remainder": remainder,
    }
    for name, arr in groups.items():
        per = arr.mean(axis=1)
        out[name] = float(per.mean() / m_hat)
        out[name + "_se"] = float(per.std(ddof=1) / math.sqrt(per.shape[0]) / m_hat)
    return out


def pansu_l2_convergence(
    f: ScalarField,
    eps_ladder: Sequence[float],
    samples: int,
    seed: int,
    p=None,
) -> dict[str, np.ndarray]:
    """Squared gap between dilation quotients and the intrinsic differential.

    Per rung: the Monte Carlo average over the unit ball of
    |Pf_p(w) - (f(p delta_eps(w)) - f(p)) / eps|^2, with one offset batch
    shared across the ladder.  The base point defaults to the origin.
    """
    ladder = np.asarray(list(eps_ladder), dtype=float)
    if ladder.size == 0 or np.any(ladder <= 0):
        raise ValueError("the scale ladder must be positive")
    pv = _as_vec(p) if p is not None else np.zeros(3)
    n = (pv.shape[0] - 1) // 2
    w = sample_ball_uniform(None, 1.0, seed, samples, n)
    pf = pansu_differential(f, pv, w)
    f_p = float(f(pv))

    err = np.empty(ladder.size)
    se = np.empty(ladder.size)
    for k, eps in enumerate(ladder):
        q = mul_vec(pv[None, :], dilate_vec(eps, w))
        gap = (pf - (f(q) - f_p) / eps) ** 2
        err[k] = gap.mean()
        se[k] = gap.std(ddof=1) / math.sqrt(samples)
    return {"epsilon": ladder, "l2_error": err, "standard_error": se}


def translation_quadratic(u: GridMap, generator: int, steps: int = 1) -> GridMap:
    """Squared distance between u and its generator translate, over h^2.

    The scalar lattice field f(p) = d^2(u(p), u(p g^s)) / (s h)^2, defined
    where both maps are; off the valid set the values are zero.  This is
    the nonnegative field the mean-value and subsolution diagnostics run on.
    """
    shifted = translate_map(u, generator, steps)
    both = u.valid & shifted.valid
    vals = np.zeros((u.lattice.node_count, 1))
    d = u.space.distance_many(u.values[both], shifted.values[both])
    vals[both, 0] = (d / (abs(steps) * u.lattice.h)) ** 2
    return GridMap(u.lattice, None, vals, valid=both)


def moser_mean_value_check(
    f: GridMap, centers: np.ndarray, radii: Sequence[float]
) -> dict[str, object]:
    """Center value over metric-ball average for a nonnegative lattice field.

    centers are coordinates, snapped to the nearest lattice node; each
    (center, radius) cell of the table is f(center) / mean of f over the
    nodes within cc-distance r.  Every requested ball must stay inside the
    lattice box and inside the field's valid set.  The max ratio is the
    empirical mean-value constant.
    """
    lat = f.lattice
    vals = f.values[:, 0] if f.values.ndim == 2 else f.values
    if np.any(vals[f.valid] < -1e-12):
        raise ValueError("the field must be nonnegative")
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii):
        raise ValueError("radii must be positive")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    steps = np.concatenate([np.full(2 * lat.n, lat.h), [lat.t_step]])
    idx = np.round(centers / steps).astype(np.int64)
    ids = lat._lookup(idx)
    if np.any(ids < 0):
        raise ValueError("a center snapped outside the lattice")
    if np.any(~f.valid[ids]):
        raise ValueError("a center lies outside the field's valid set")

    snapped = lat.points[ids]
    ratios = np.empty((centers.shape[0], len(radii)))
    rmax = max(radii)
    for i, cid in enumerate(ids):
        c = lat.points[cid]
        if not metric_ball_inside(lat.bounds, c, rmax):
            raise ValueError(f"ball of radius {rmax} around {c.tolist()} exits the box")
        d = cc_distance_vec(mul_vec(inv_vec(c)[None, :], lat.points))
        for j, r in enumerate(radii):
            mask = d <= r
            if np.any(~f.valid[mask]):
                raise ValueError("ball reaches outside the field's valid set")
            avg = float(np.mean(vals[mask]))
            center_val = float(vals[cid])
            if avg <= 0.0:
                ratios[i, j] = 1.0 if center_val <= 0.0 else math.inf
            else:
                ratios[i, j] = center_val / avg
    return {
        "centers": snapped,
        "center_ids": ids,
        "radii": np.asarray(radii),
        "ratios": ratios,
        "max_ratio": float(np.max(ratios)),
    }


@dataclass
class RegularityReport:
    """Scale-by-scale Lipschitz quotients with the context that bounds them.

    sup_quotients[k] is the sup of d_N(u(p), u(q)) / d_cc(p, q) over core
    node pairs with d_cc in [scales[k], 2 scales[k]].  exponent is the
    least-squares slope of log(quotient x scale) against log(scale).  The
    two headline bounds multiply the empirical mean-value constant by the
    energy, with and without the collar-ball volume normalization; both
    are published since they differ by that volume factor.
    """

    scales: np.ndarray
    sup_quotients: np.ndarray
    pair_counts: np.ndarray
    exponent: float
    collar: float
    energy: float
    ball_volume_collar: float
    moser_constant: float
    mean_value_table: dict
    subsolution_residuals: np.ndarray
    bound_plain: float
    bound_with_volume: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.scales = np.asarray(self.scales, dtype=float)
        self.sup_quotients = np.asarray(self.sup_quotients, dtype=float)
        if np.any(np.diff(self.scales) >= 0):
            raise ValueError("scales must be strictly decreasing")
        if np.any(self.sup_quotients < 0):
            raise ValueError("quotients are nonnegative")
        if not math.isfinite(self.exponent):
            raise ValueError("exponent must be finite")

    @property
    def top_quotient(self) -> float:
        return float(self.sup_quotients[0])


def _core_mask(u: GridMap, collar: float) -> np.ndarray:
    lat = u.lattice
    inside = metric_ball_inside(lat.bounds, lat.points, collar)
    return inside & ~lat.boundary_mask & u.valid


def _annulus_sup(
    u: GridMap, core_mask: np.ndarray, center_ids: np.ndarray, sigma: float
) -> tuple[float, int]:
    """Sup quotient over annulus pairs [sigma, 2 sigma] anchored at centers."""
    lat = u.lattice
    n, h = lat.n, lat.h
    reach = int(math.floor(2.0 * sigma / h + 1e-9))
    axes = [np.arange(-reach, reach + 1)] * (2 * n)
    mesh = np.meshgrid(*axes, indexing="ij")
    offs = np.stack([m.ravel() for m in mesh], axis=-1)
    offs = offs[np.sum((offs * h) ** 2, axis=1) <= (2.0 * sigma) ** 2 * (1 + 1e-12)]
    t_reach = int(math.floor(KAPPA_CENTRAL * (2.0 * sigma) ** 2 / lat.t_step + 1e-9)) + 1
    dits = np.arange(-t_reach, t_reach + 1)

    sup = 0.0
    count = 0
    for lo in range(0, center_ids.shape[0], 48):
        cids = center_ids[lo : lo + 48]
        cidx = lat.indices[cids]
        cpts = lat.points[cids]
        # group difference from center to a candidate: planar part is the
        # index offset, central part picks up the left-translation twist
        twist = 0.5 * (
            cpts[:, None, :n] @ (offs[:, n : 2 * n] * h).T
            - cpts[:, None, n : 2 * n] @ (offs[:, :n] * h).T
        )[:, 0, :]
        base_it = cidx[:, 2 * n][:, None] + np.round(twist / lat.t_step).astype(np.int64)
        it = base_it[:, :, None] + dits[None, None, :]
        planar = cidx[:, None, None, : 2 * n] + offs[None, :, None, :]
        planar = np.broadcast_to(planar, it.shape + (2 * n,))
        cand = np.concatenate([planar, it[..., None]], axis=-1)
        ids = lat._lookup(cand.reshape(-1, 2 * n + 1)).reshape(it.shape)
        ok = (ids >= 0) & core_mask[np.clip(ids, 0, None)]
        b, pi, ti = np.nonzero(ok)
        if b.size == 0:
            continue
        qids = ids[b, pi, ti]
        gt = (it[b, pi, ti] - cidx[b, 2 * n]) * lat.t_step - twist[b, pi]
        w = np.concatenate([offs[pi] * h, gt[:, None]], axis=1)
        d = cc_distance_vec(w)
        ann = (d >= sigma * (1 - 1e-12)) & (d <= 2.0 * sigma * (1 + 1e-12))
        if not np.any(ann):
            continue
        dn = u.space.distance_many(u.values[cids[b[ann]]], u.values[qids[ann]])
        sup = max(sup, float(np.max(dn / d[ann])))
        count += int(np.sum(ann))
    return sup, count


def lipschitz_profile(
    u: GridMap,
    scales: Sequence[float],
    collar: Optional[float] = None,
    center_target: int = 1000,
    moser_constant: Optional[float] = None,
    eta_suite_size: int = 5,
    seed: int = 20260515,
) -> RegularityReport:
    """Scale ladder of sup Lipschitz quotients with exponent fit and bounds.

    Pairs are anchored at a deterministic stride subsample of the core
    (valid interior nodes a collar width away from the box walls), the
    same centers at every scale, against every core node within reach, so
    the per-scale sups are comparable along the ladder.  When no
    mean-value constant is supplied, one is measured from the translation
    quadratics of u at radii collar/2 and collar/4.
    """
    lat = u.lattice
    n = lat.n
    scales = [float(s) for s in scales]
    if any(b >= a for a, b in zip(scales, scales[1:])) or not scales:
        raise ValueError("scales must be strictly decreasing")
    if scales[-1] < lat.h * (1 - 1e-9):
        raise ValueError("scales below the lattice spacing resolve no pairs")
    if collar is None:
        collar = lat.bounds.inradius() / 4.0
    core = _core_mask(u, collar)
    core_ids = np.nonzero(core)[0]
    if core_ids.size == 0:
        raise ValueError("no core nodes inside the collar")
    stride = max(1, core_ids.size // center_target)
    centers = core_ids[::stride]

    sups = np.empty(len(scales))
    counts = np.empty(len(scales), dtype=np.int64)
    for k, s in enumerate(scales):
        sups[k], counts[k] = _annulus_sup(u, core, centers, s)
        if counts[k] == 0:
            raise ValueError(f"no node pairs in the annulus at scale {s}")

    pos = sups > 0
    if np.sum(pos) >= 2:
        slope = np.polyfit(
            np.log(np.asarray(scales)[pos]), np.log(sups[pos] * np.asarray(scales)[pos]), 1
        )[0]
    else:
        slope = 1.0  # degenerate (constant map): vacuous fit
    exponent = float(slope)

    energy = discrete_energy(u)
    vol = ball_volume(collar, n)

    eta_suite = bump_suite(lat.bounds, eta_suite_size, seed, margin=collar)
    residuals = np.array(
        [subsolution_residual(u, g, 1, eta_suite) for g in range(1, 2 * n + 1)]
    )

    if moser_constant is None:
        radii = (collar / 2.0, collar / 4.0)
        mv_centers = _default_moser_centers(u, core_ids, radii)
        tables = []
        for g in range(1, 2 * n + 1):
            fg = translation_quadratic(u, g, 1)
            tables.append(moser_mean_value_check(fg, mv_centers, radii))
        moser_constant = max(t["max_ratio"] for t in tables)
        mean_value_table = tables[int(np.argmax([t["max_ratio"] for t in tables]))]
    else:
        mean_value_table = {}

    return RegularityReport(
        scales=np.asarray(scales),
        sup_quotients=sups,
        pair_counts=counts,
        exponent=exponent,
        collar=float(collar),
        energy=energy,
        ball_volume_collar=vol,
        moser_constant=float(moser_constant),
        mean_value_table=mean_value_table,
        subsolution_residuals=residuals,
        bound_plain=float(moser_constant) * energy,
        bound_with_volume=float(moser_constant) * energy / vol,
        metadata={"h": lat.h, "nodes": lat.node_count, "centers": int(centers.size)},
    )


def _default_moser_centers(
    u: GridMap, core_ids: np.ndarray, radii: Sequence[float], want: int = 12
) -> np.ndarray:
    """Core nodes whose balls at max radius stay in every translate's domain."""
    lat = u.lattice
    rmax = max(radii)
    pts = lat.points[core_ids]
    ok = metric_ball_inside(lat.bounds, pts, rmax)
    cand = core_ids[ok]
    picked = []
    shifted_valid = np.ones(lat.node_count, dtype=bool)
    for g in range(1, 2 * lat.n + 1):
        sid = lat.step_ids(g, 1)
        shifted_valid &= (sid >= 0) & u.valid[np.clip(sid, 0, None)]
    shifted_valid &= u.valid
    stride = max(1, cand.size // (4 * want))
    for cid in cand[::stride]:
        c = lat.points[cid]
        d = cc_distance_vec(mul_vec(inv_vec(c)[None, :], lat.points))
        if np.all(shifted_valid[d <= rmax]):
            picked.append(c)
        if len(picked) >= want:
            break
    if not picked:
        raise ValueError("no admissible mean-value centers; shrink the radii")
    return np.asarray(picked)


def pick_moser_centers(
    u: GridMap, radii: Sequence[float], collar: Optional[float] = None, want: int = 12
) -> np.ndarray:
    """Admissible mean-value centers for a solved map, as coordinates.

    Centers come from the collar-deep core and their max-radius balls stay
    inside the box and inside every one-step translate's domain, so the
    translation quadratics are defined on the whole ball.
    """
    if collar is None:
        collar = u.lattice.bounds.inradius() / 4.0
    core_ids = np.nonzero(_core_mask(u, collar))[0]
    if core_ids.size == 0:
        raise ValueError("the collar leaves no core nodes")
    return _default_moser_centers(u, core_ids, radii, want=want)


def tripod_boundary(lattice, space, amplitude: float = 0.25) -> np.ndarray:
    """Boundary data sending three box faces to the three spider legs.

    The faces x = lo, x = hi, y = hi map to legs 1, 2, 3 with a product
    sine profile in the transverse coordinates that vanishes on the face
    edges; all remaining boundary nodes sit at the hub, so the data is
    continuous around the box.
    """
    if lattice.n != 1:
        raise ValueError("the three-face assignment needs a planar lattice (n = 1)")
    if getattr(space, "legs", 0) < 3:
        raise ValueError("target must be a spider with at least 3 legs")
    bids = lattice.boundary_ids
    idx = lattice.indices[bids]
    pts = lattice.points[bids]
    lo, hi = lattice.bounds.lo, lattice.bounds.hi
    span = hi - lo

    def profile(a, a_lo, a_span, b, b_lo, b_span):
        sa = np.sin(np.pi * (a - a_lo) / a_span)
        sb = np.sin(np.pi * (b - b_lo) / b_span)
        return np.clip(sa, 0.0, None) * np.clip(sb, 0.0, None)

    ix_lo = lattice.index_lo[0]
    ix_hi = ix_lo + lattice.dims[0] - 1
    iy_hi = lattice.index_lo[1] + lattice.dims[1] - 1
    on_x_lo = idx[:, 0] == ix_lo
    on_x_hi = idx[:, 0] == ix_hi
    on_y_hi = idx[:, 1] == iy_hi

    values = np.zeros((bids.shape[0], 2))
    prof_x = profile(pts[:, 1], lo[1], span[1], pts[:, 2], lo[2], span[2])
    prof_y = profile(pts[:, 0], lo[0], span[0], pts[:, 2], lo[2], span[2])
    for face, leg, prof in (
        (on_x_lo, 1, prof_x),
        (on_x_hi & ~on_x_lo, 2, prof_x),
        (on_y_hi & ~on_x_lo & ~on_x_hi, 3, prof_y),
    ):
        r = amplitude * prof[face]
        sel = np.nonzero(face)[0]
        keep = r > 1e-12
        values[sel[keep], 0] = leg
        values[sel[keep], 1] = r[keep]
    return values


def bump_suite(
    box: Box, count: int, seed: int, margin: float
) -> list[ScalarField]:
    """Random nonnegative window fields supported margin-deep inside box."""
    span = box.hi - box.lo
    if np.any(span <= 2 * margin):
        raise ValueError("margin leaves no room for a support box")
    rng = np.random.default_rng(seed)
    fields = []
    for _ in range(count):
        frac = rng.uniform(0.35, 0.95, size=span.shape)
        half = 0.5 * (span - 2 * margin) * frac
        c_lo = box.lo + margin + half
        c_hi = box.hi - margin - half
        center = rng.uniform(c_lo, c_hi)
        fields.append(cos_window(center, half, amplitude=float(rng.uniform(0.5, 2.0))))
    return fields
