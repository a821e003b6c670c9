"""Pseudo-spectral simulation and energy analysis of a quasilinear thermoelastic plate."""

from .energy import (
    BarrierConfig,
    BarrierReport,
    DecayFit,
    EnergyReport,
    apriori_constants,
    barrier_eval,
    barrier_roots,
    boost_ratio,
    energy_levels,
    fit_decay,
    identity_residual,
)
from .errors import (
    CoercivityError,
    ConfigError,
    HyperbolicityError,
    NonContractionError,
    PlatesimError,
    SolverConvergenceError,
)
from .linear_solvers import HeatProblem, KatoConfig, WaveProblem, kato_fixed_point, rho_metric, solve_heat, solve_wave
from .model import (
    CompatibilityJet,
    ModelParams,
    PlateState,
    StiffnessLaw,
    compatibility_data,
    hyperbolicity_min,
    nonlinearity_F,
    nonlinearity_F_spectral,
    nonlinearity_G,
    reduce_order,
    rhs,
)
from .spectral import (
    Basis,
    BoxDomain,
    GridField,
    SpectralField,
    apply_B,
    apply_K,
    apply_power_of_A,
    build_basis,
    gradient,
    inner_product,
    to_grid,
    to_spectral,
)
from .timestepper import RunControl, SchemeSpec, Trajectory, linear_block, run, step

__version__ = "0.1.0"
