"""Charged-scalar gauge-field dynamics on a periodic box.

A pseudospectral solver for a wave system coupling a complex scalar to a
divergence-free vector potential, plus a laboratory for frequency-smoothing
multipliers: modified energies, commutators, drift experiments, parameter
scheduling, and empirical constants for the supporting inequalities.
"""

from .dynamics import (
    StateDot,
    StepConfig,
    Trajectory,
    evolve,
    first_variation,
    hamiltonian,
    nonlinearities,
    null_form_q,
    rhs,
    step,
)
from .elliptic import (
    EllipticConfig,
    EllipticError,
    a0_functional,
    compatibility_residuals,
    init_compatible,
    solve_a0,
    solve_a0_t,
)
from .estimates import (
    EstimateReport,
    FrequencyTriple,
    NoSmoothingResult,
    commutator_l2_ratio,
    diamagnetic_gap,
    i_loss_ratio,
    nosmoothing_integral,
    product_norm_ratio,
    sample_commutator,
    sample_i_loss,
    sample_product_norm,
    sample_symbol_bound,
    symbol_bound_ratio,
)
from .grid import (
    Grid,
    ScalarField,
    VectorField,
    dealiased_product,
    fine_to_coarse,
    make_grid,
    pad_to_fine,
    transform,
)
from .imethod import (
    DriftReport,
    IContext,
    ScheduleResult,
    apply_i_state,
    choose_parameters,
    commutators,
    drift_experiment,
    drift_terms,
    make_icontext,
    modified_hamiltonian,
    small_data_rescale,
)
from .cli import ConfigError, RunConfig, make_initial_state
from .norms import bracket_norm, sobolev_norm
from .snapshot import read_snapshot, write_snapshot
from .state import GaugeState
from .symbols import (
    Symbol,
    apply_symbol,
    curl,
    divergence,
    gradient,
    i_symbol_values,
    laplacian,
    leray_project,
    make_symbol,
)

__version__ = "0.1.0"
