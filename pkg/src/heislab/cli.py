"""Command-line entry point.

A run takes one YAML config (sole positional argument), executes the named
experiment, and drops artifacts in the output directory: a CSV with one row
per measurement, a JSON summary (config echo, headline results, versions),
and where the data has a natural picture, a PNG next to them.

Exit codes: 0 success, 2 invalid config or parameters, 3 the iteration did
not converge, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

import numpy as np

from . import figures
from .ccmetric import (
    ball_moments,
    ball_volume,
    ball_volume_mc,
    mcp_check,
    solve_endpoint,
)
from .config import ConfigError, ExperimentConfig, load_config
from .fields import named_field
from .heisenberg import inv_vec, mul_vec
from .regularity import (
    bump_suite,
    lemma53_experiment,
    lipschitz_profile,
    moser_mean_value_check,
    pansu_l2_convergence,
    pick_moser_centers,
    translation_quadratic,
    tripod_boundary,
)
from .reporting import (
    artifact_base,
    gridmap_table,
    load_gridmap_values,
    run_meta,
    write_csv,
    write_json,
)
from .solver import SolverConfig, build_lattice, solve_dirichlet, subsolution_residual

__all__ = ["main", "run"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NO_CONVERGENCE = 3
EXIT_IO = 4


def _coord_names(n: int) -> list[str]:
    if n == 1:
        return ["x", "y", "t"]
    return [f"x{j}" for j in range(1, n + 1)] + [f"y{j}" for j in range(1, n + 1)] + ["t"]


def _write_summary(outdir: str, base: str, cfg: ExperimentConfig, results: dict) -> str:
    path = os.path.join(outdir, base + ".json")
    write_json(path, {"config": cfg.to_dict(), "results": results, "meta": run_meta()})
    return path


# --- boundary data ------------------------------------------------------

def _boundary_values(cfg: ExperimentConfig, lattice, space) -> np.ndarray:
    bdata = cfg.boundary
    ids = lattice.boundary_ids
    if "table" in bdata:
        values, valid = load_gridmap_values(bdata["table"], lattice)
        if not np.all(valid[ids]):
            raise ValueError("boundary table is not valid on every boundary node")
        return values[ids]
    preset = bdata["preset"]
    if preset == "tripod":
        return tripod_boundary(lattice, space, amplitude=bdata["amplitude"])
    pts = lattice.points[ids]
    n = lattice.n
    if preset in ("x1", "t"):
        if space.kind != "euclidean" or space.dim != 1:
            raise ValueError(f"boundary preset {preset!r} needs a 1-d euclidean target")
        col = 0 if preset == "x1" else 2 * n
        return bdata["scale"] * pts[:, [col]]
    # zero: the target's base point on every face
    if space.kind == "euclidean":
        return np.zeros((ids.shape[0], space.dim))
    return np.zeros((ids.shape[0], 2))


def _solve_pieces(cfg: ExperimentConfig):
    lattice = build_lattice(cfg.box(), cfg.geometry["h"])
    space = cfg.space()
    bvals = _boundary_values(cfg, lattice, space)
    nm = cfg.numerics
    sconf = SolverConfig(
        tol=nm["tol"],
        max_sweeps=nm["max_sweeps"],
        sweep_order=nm["sweep_order"],
        seed=nm["seed"],
    )
    result = solve_dirichlet(lattice, bvals, space, sconf)
    return lattice, space, result


def _solve_results(result, lattice) -> dict:
    return {
        "energy": float(result.energy_trace[-1]),
        "sweeps": int(result.sweeps),
        "converged": bool(result.converged),
        "final_movement": float(result.final_movement),
        "nodes": int(lattice.node_count),
        "boundary_nodes": int(lattice.boundary_ids.shape[0]),
    }


# --- per-command runners ------------------------------------------------

def _run_dist(cfg, outdir, base, want_figures):
    n = cfg.n
    p = np.asarray(cfg.points[0])
    q = np.asarray(cfg.points[1])
    w = mul_vec(inv_vec(p), q)
    if not np.any(w):
        d, phase, direction = 0.0, 0.0, [0.0] * (2 * n)
    else:
        params = solve_endpoint(w)
        d, phase, direction = params.length, params.phase, list(params.direction)
    coords = _coord_names(n)
    header = [f"a_{c}" for c in coords] + [f"b_{c}" for c in coords] + ["distance", "phase"] + [
        f"dir{j}" for j in range(1, 2 * n + 1)
    ]
    write_csv(os.path.join(outdir, base + ".csv"), header, [list(p) + list(q) + [d, phase] + direction])
    results = {"distance": d, "phase": phase, "direction": direction}
    return EXIT_OK, results, [f"d_cc = {d:.12g}  (phase {phase:.6g}, arc length {d:.12g})"]


def _run_volume(cfg, outdir, base, want_figures):
    nm = cfg.numerics
    r, n = nm["radius"], cfg.n
    quad = ball_volume(r, n)
    mc, se = ball_volume_mc(r, nm["samples"], nm["seed"], n)
    write_csv(
        os.path.join(outdir, base + ".csv"),
        ["method", "radius", "value", "standard_error"],
        [["quadrature", r, quad, 0.0], ["monte-carlo", r, mc, se]],
    )
    results = {"quadrature": quad, "monte_carlo": mc, "standard_error": se}
    return EXIT_OK, results, [f"|B_{r:g}| = {quad:.12g}  (MC {mc:.12g} +- {se:.2g})"]


def _run_moments(cfg, outdir, base, want_figures):
    nm = cfg.numerics
    r, n = nm["radius"], cfg.n
    m, se = ball_moments(r, nm["samples"], nm["seed"], n)
    rows = [[i, j, m[i, j], se[i, j]] for i in range(m.shape[0]) for j in range(m.shape[1])]
    write_csv(os.path.join(outdir, base + ".csv"), ["i", "j", "moment", "standard_error"], rows)
    if want_figures:
        figures.table_figure(os.path.join(outdir, base + ".png"), m, "second moments")
    planar = float(np.mean(np.diag(m)[: 2 * n]))
    results = {
        "planar_diagonal_mean": planar,
        "central_moment": float(m[2 * n, 2 * n]),
        "max_offdiagonal": float(np.max(np.abs(m - np.diag(np.diag(m))))),
    }
    return EXIT_OK, results, [f"planar second moment = {planar:.9g}"]


def _run_mcp(cfg, outdir, base, want_figures):
    nm = cfg.numerics
    res = mcp_check(
        np.asarray(cfg.point),
        nm["radius"],
        nm["tau"],
        nm["samples"],
        seed=nm["seed"],
        metric=nm["metric"],
    )
    keys = ["tau", "theta", "exponent", "det_min", "det_max", "samples_used"]
    write_csv(os.path.join(outdir, base + ".csv"), keys, [[res[k] for k in keys]])
    return EXIT_OK, res, [f"theta = {res['theta']:.9g} at tau = {res['tau']:g}"]


def _run_solve(cfg, outdir, base, want_figures):
    lattice, space, result = _solve_pieces(cfg)
    header, rows = gridmap_table(result.grid)
    write_csv(os.path.join(outdir, base + "-grid.csv"), header, rows)
    write_csv(
        os.path.join(outdir, base + "-trace.csv"),
        ["sweep", "energy"],
        [[k, e] for k, e in enumerate(result.energy_trace)],
    )
    if want_figures:
        figures.trace_figure(os.path.join(outdir, base + "-trace.png"), result.energy_trace)
    results = _solve_results(result, lattice)
    code = EXIT_OK if result.converged else EXIT_NO_CONVERGENCE
    lines = [
        f"energy = {results['energy']:.12g} after {results['sweeps']} sweeps"
        + ("" if result.converged else "  [did not converge]")
    ]
    return code, results, lines


def _run_subsolution(cfg, outdir, base, want_figures):
    lattice, space, result = _solve_pieces(cfg)
    nm = cfg.numerics
    box = cfg.box()
    margin = nm["eta_margin"] if nm["eta_margin"] is not None else box.inradius() / 4.0
    suite = bump_suite(box, nm["eta_count"], nm["seed"], margin)
    gens = nm["generators"] or list(range(1, 2 * lattice.n + 1))
    rows = []
    worst = -np.inf
    for g in gens:
        pairing = subsolution_residual(result.grid, g, nm["steps"], suite)
        rows.append([g, nm["steps"], pairing])
        worst = max(worst, pairing)
    write_csv(os.path.join(outdir, base + ".csv"), ["generator", "steps", "max_pairing"], rows)
    if want_figures:
        figures.trace_figure(os.path.join(outdir, base + "-trace.png"), result.energy_trace)
    results = {**_solve_results(result, lattice), "max_pairing": float(worst), "eta_count": nm["eta_count"]}
    code = EXIT_OK if result.converged else EXIT_NO_CONVERGENCE
    return code, results, [f"max pairing over {len(gens)} generators, {nm['eta_count']} fields: {worst:.6g}"]


def _run_moser(cfg, outdir, base, want_figures):
    lattice, space, result = _solve_pieces(cfg)
    nm = cfg.numerics
    radii = nm["radii"]
    if nm["centers"] is not None:
        centers = np.asarray(nm["centers"], dtype=float)
    else:
        centers = pick_moser_centers(result.grid, radii)
    gens = nm["generators"] or list(range(1, 2 * lattice.n + 1))
    coords = _coord_names(lattice.n)
    rows = []
    per_gen = {}
    worst_tab = None
    for g in gens:
        f = translation_quadratic(result.grid, g)
        tab = moser_mean_value_check(f, centers, radii)
        per_gen[str(g)] = tab["max_ratio"]
        if worst_tab is None or tab["max_ratio"] >= max(per_gen.values()):
            worst_tab = tab
        for i in range(tab["centers"].shape[0]):
            for j, r in enumerate(radii):
                rows.append([g] + list(tab["centers"][i]) + [r, tab["ratios"][i, j]])
    write_csv(
        os.path.join(outdir, base + ".csv"),
        ["generator"] + [f"center_{c}" for c in coords] + ["radius", "ratio"],
        rows,
    )
    if want_figures and worst_tab is not None:
        figures.table_figure(os.path.join(outdir, base + ".png"), worst_tab["ratios"], "mean-value ratios")
    constant = max(per_gen.values())
    results = {
        **_solve_results(result, lattice),
        "max_ratio": float(constant),
        "per_generator": per_gen,
        "radii": list(radii),
        "center_count": int(centers.shape[0]),
    }
    code = EXIT_OK if result.converged else EXIT_NO_CONVERGENCE
    return code, results, [f"empirical mean-value constant = {constant:.6g}"]


def _run_lipschitz(cfg, outdir, base, want_figures):
    lattice, space, result = _solve_pieces(cfg)
    nm = cfg.numerics
    collar = nm["collar"]
    scales = nm["scales"]
    if scales is None:
        top = collar if collar is not None else cfg.box().inradius() / 4.0
        scales = []
        s = top
        while s >= lattice.h * (1 - 1e-9) and len(scales) < 6:
            scales.append(s)
            s /= 2.0
        if len(scales) < 2:
            raise ValueError("geometry leaves no usable scale ladder; give numerics.scales")
    report = lipschitz_profile(
        result.grid,
        scales,
        collar=collar,
        center_target=nm["center_target"],
        eta_suite_size=nm["eta_count"],
        seed=nm["seed"],
    )
    write_csv(
        os.path.join(outdir, base + ".csv"),
        ["scale", "sup_quotient", "pair_count"],
        [
            [report.scales[k], report.sup_quotients[k], int(report.pair_counts[k])]
            for k in range(report.scales.shape[0])
        ],
    )
    if want_figures:
        figures.profile_figure(
            os.path.join(outdir, base + ".png"), report.scales, report.sup_quotients, report.exponent
        )
    results = {
        **_solve_results(result, lattice),
        "exponent": report.exponent,
        "top_quotient": report.top_quotient,
        "collar": report.collar,
        "moser_constant": report.moser_constant,
        "ball_volume_collar": report.ball_volume_collar,
        "bound_plain": report.bound_plain,
        "bound_with_volume": report.bound_with_volume,
        "subsolution_residuals": [float(v) for v in report.subsolution_residuals],
    }
    code = EXIT_OK if result.converged else EXIT_NO_CONVERGENCE
    lines = [
        f"exponent = {report.exponent:.4g}, top quotient = {report.top_quotient:.6g}",
        f"bounds: {report.bound_plain:.6g} (plain), {report.bound_with_volume:.6g} (per volume)",
    ]
    return code, results, lines


def _run_lemma53(cfg, outdir, base, want_figures):
    nm = cfg.numerics
    eta = named_field(cfg.fields["eta"])
    f = named_field(cfg.fields["f"])
    tab = lemma53_experiment(eta, f, np.asarray(cfg.point), cfg.eps_ladder(), nm["samples"], nm["seed"])
    write_csv(
        os.path.join(outdir, base + ".csv"),
        ["epsilon", "lhs", "rhs", "error", "lhs_se"],
        [
            [tab["epsilon"][k], tab["lhs"][k], tab["rhs"][k], tab["error"][k], tab["lhs_se"][k]]
            for k in range(tab["epsilon"].shape[0])
        ],
    )
    if want_figures:
        figures.ladder_figure(
            os.path.join(outdir, base + ".png"),
            tab["epsilon"],
            {"|lhs - rhs|": tab["error"], "lhs standard error": tab["lhs_se"]},
            "error",
        )
    results = {
        "rhs": float(tab["rhs"][0]),
        "final_lhs": float(tab["lhs"][-1]),
        "final_error": float(tab["error"][-1]),
    }
    return EXIT_OK, results, [f"rhs = {results['rhs']:.9g}, error at last rung = {results['final_error']:.4g}"]


def _run_pansu(cfg, outdir, base, want_figures):
    nm = cfg.numerics
    f = named_field(cfg.fields["f"])
    tab = pansu_l2_convergence(f, cfg.eps_ladder(), nm["samples"], nm["seed"], p=np.asarray(cfg.point))
    write_csv(
        os.path.join(outdir, base + ".csv"),
        ["epsilon", "l2_error", "standard_error"],
        [
            [tab["epsilon"][k], tab["l2_error"][k], tab["standard_error"][k]]
            for k in range(tab["epsilon"].shape[0])
        ],
    )
    if want_figures:
        figures.ladder_figure(
            os.path.join(outdir, base + ".png"),
            tab["epsilon"],
            {"squared-quotient error": tab["l2_error"]},
            "L2 error",
        )
    results = {"final_l2_error": float(tab["l2_error"][-1])}
    return EXIT_OK, results, [f"L2 error at last rung = {results['final_l2_error']:.6g}"]


_RUNNERS = {
    "dist": _run_dist,
    "volume": _run_volume,
    "moments": _run_moments,
    "mcp": _run_mcp,
    "solve": _run_solve,
    "subsolution": _run_subsolution,
    "moser": _run_moser,
    "lipschitz": _run_lipschitz,
    "lemma53": _run_lemma53,
    "pansu": _run_pansu,
}


def run(cfg: ExperimentConfig, quiet: bool = False, want_figures: bool = True) -> int:
    """Execute one experiment config; artifacts land in cfg.output."""
    try:
        os.makedirs(cfg.output, exist_ok=True)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    base = artifact_base(cfg.command, cfg.seed)
    try:
        code, results, lines = _RUNNERS[cfg.command](cfg, cfg.output, base, want_figures)
    except (ConfigError, ValueError) as exc:
        print(f"invalid experiment: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        _write_summary(cfg.output, base, cfg, results)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    if not quiet:
        for line in lines:
            print(line)
        print(f"artifacts: {os.path.join(cfg.output, base)}.*")
    return code


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="heislab",
        description="Numerical experiments for sub-elliptic energy minimizers.",
    )
    parser.add_argument("config", help="path to a YAML experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override numerics.seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--quiet", action="store_true", help="suppress the stdout summary")
    parser.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.out is not None:
        cfg = cfg.with_output(args.out)
    return run(cfg, quiet=args.quiet, want_figures=not args.no_figures)


if __name__ == "__main__":
    sys.exit(main())
