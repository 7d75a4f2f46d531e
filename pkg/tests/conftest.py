"""Shared fixtures: the expensive lattice solves are computed once per session."""
import numpy as np
import pytest

from heislab.heisenberg import unit_box
from heislab.regularity import (
    moser_mean_value_check,
    pick_moser_centers,
    translation_quadratic,
    tripod_boundary,
)
from heislab.solver import SolverConfig, build_lattice, solve_dirichlet
from heislab.targets import Euclidean, Spider


def solve_tripod(h):
    lattice = build_lattice(unit_box(1), h)
    space = Spider(3)
    boundary = tripod_boundary(lattice, space)
    result = solve_dirichlet(lattice, boundary, space, SolverConfig())
    assert result.converged
    return result


def solve_coordinate(h, column, tol=None):
    """Dirichlet problem with one coordinate of the node as scalar data."""
    lattice = build_lattice(unit_box(1), h)
    space = Euclidean(1)
    boundary = lattice.points[lattice.boundary_ids][:, column][:, None]
    result = solve_dirichlet(lattice, boundary, space, SolverConfig(tol=tol))
    assert result.converged
    return result


@pytest.fixture(scope="session")
def tripod8():
    return solve_tripod(1.0 / 8.0)


@pytest.fixture(scope="session")
def tripod16():
    return solve_tripod(1.0 / 16.0)


@pytest.fixture(scope="session")
def scalar16():
    """Solved x1 and t coordinate problems on the h = 1/16 unit box."""
    return {
        "x1": solve_coordinate(1.0 / 16.0, 0),
        "t": solve_coordinate(1.0 / 16.0, 2),
    }


@pytest.fixture(scope="session")
def moser_pair(tripod8, tripod16):
    """Mean-value constants of the tripod at both spacings, shared centers.

    The centers come from the coarse solve and lie on both lattices, so the
    two constants are measured with an identical protocol.
    """
    radii = [0.25, 0.125]
    centers = pick_moser_centers(tripod8.grid, radii)

    def c_max(result):
        ratios = []
        for g in (1, 2):
            field = translation_quadratic(result.grid, g)
            ratios.append(moser_mean_value_check(field, centers, radii)["max_ratio"])
        return max(ratios)

    return {
        "radii": radii,
        "centers": centers,
        "C8": c_max(tripod8),
        "C16": c_max(tripod16),
    }
