"""Numerical laboratory for sub-elliptic energy minimizers on Heisenberg domains.

The library splits into geometry (group operations, the control metric and
its balls), targets (CAT(0) model spaces), test fields, a lattice Dirichlet
solver, ball-averaged energy functionals, and the regularity experiments
that tie them together; the `heislab` console script drives everything from
YAML configs.
"""

__version__ = "0.1.0"

from .ccmetric import (
    GeodesicParams,
    ball_moments,
    ball_volume,
    ball_volume_mc,
    cc_distance,
    cc_distance_vec,
    geodesic_point,
    jacobian_profile,
    mcp_check,
    metric_ball_inside,
    sample_ball_uniform,
    solve_endpoint,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config, serialize_config
from .energy import (
    DiscreteMap,
    approx_energy_density,
    energy_functional,
    interpolation_inequality_check,
    smooth_map,
    subpartition_diagnostic,
)
from .fields import ScalarField, cos_window, named_field
from .heisenberg import (
    Box,
    GroupPoint,
    HorizontalVector,
    dilate,
    flow_step,
    identity,
    inverse,
    multiply,
    pansu_quotient,
    unit_box,
)
from .regularity import (
    RegularityReport,
    bump_suite,
    lemma53_experiment,
    lipschitz_profile,
    moser_mean_value_check,
    pansu_l2_convergence,
    taylor_product_terms,
    tripod_boundary,
)
from .solver import (
    GridMap,
    Lattice,
    SolveResult,
    SolverConfig,
    build_lattice,
    discrete_energy,
    solve_dirichlet,
    subsolution_residual,
    translate_map,
)
from .targets import Euclidean, Spider, quad_comparison_check, quad_comparison_slacks
