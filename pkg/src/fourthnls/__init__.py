"""Spectral simulation, stabilization and control of the fourth-order NLS on the torus."""

from .bourgain import (BourgainSpec, SpaceTimeField, lp_norm, strichartz_ratio, trilinear_ratio,
                       xbs_norm)
from .dynamics import (EvolutionParams, Trajectory, evolve, free_propagate, mass_balance_residual,
                       step_strang)
from .errors import (AccuracyError, BlowUpError, FourthNLSError, InvalidArgument, NoControlError,
                     NonConvergenceError, NonlinearFailure, NotFoundError, StabilizationTimeout,
                     UsageError)
from .harness import ExperimentConfig, RunRecord, emit_plot_data, run_experiment
from .hum import (AdjointControl, ControlOperator, assemble_control_operator,
                  check_linear_observability, solve_linear_control, spillover_residual,
                  verify_isomorphism)
from .nonlinear import apply_K, picard_iterate, steer_to_state
from .profiles import CutoffProfile, DampingProfile
from .stabilization import fit_decay_rate, observability_constant, run_damped
from .torus import (SpectralField, TorusGrid, dispersion_symbol, fractional_derivative, make_grid,
                    mass, resample, sobolev_norm)

__version__ = "0.1.0"
