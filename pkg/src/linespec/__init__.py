"""Gridless line-spectrum estimation with learnable frequency atoms.

Recovers sparse mixtures of complex sinusoids from partial observations by
jointly refining a parametric dictionary of complex-exponential atoms and a
reweighted sparse coefficient vector, plus fixed-grid and oracle baselines
and a reproducible Monte Carlo benchmark harness.
"""

from .baseline import fixed_grid_irls, oracle_ls
from .dictionary import (
    Dictionary,
    FreqGrid,
    atom,
    atom_deriv,
    build,
    gram_deriv,
    uniform_grid,
    weighted_gram,
)
from .harness import (
    AggregateRow,
    ExperimentConfig,
    aggregate_records,
    emit_report,
    run_experiment,
    run_trial,
    trial_rng,
)
from .metrics import TrialResult, detect, reconstruct_full, rsnr, success
from .model import (
    FullSignal,
    LineSpectrum,
    Measurement,
    SampleSet,
    circular_distance,
    draw_sample_set,
    draw_spectrum,
    draw_spectrum_spaced,
    subsample,
    synthesize,
    wrap_angle,
)
from .solver import (
    IllConditionedError,
    SolverConfig,
    SolverState,
    Weights,
    anneal,
    f_theta,
    grad_f,
    logsum_objective,
    make_weights,
    prune_and_merge,
    run,
    surrogate_Q,
    theta_descent,
    z_update,
)

__version__ = "0.1.0"

__all__ = [
    "AggregateRow",
    "Dictionary",
    "ExperimentConfig",
    "FreqGrid",
    "FullSignal",
    "IllConditionedError",
    "LineSpectrum",
    "Measurement",
    "SampleSet",
    "SolverConfig",
    "SolverState",
    "TrialResult",
    "Weights",
    "aggregate_records",
    "anneal",
    "atom",
    "atom_deriv",
    "build",
    "circular_distance",
    "detect",
    "draw_sample_set",
    "draw_spectrum",
    "draw_spectrum_spaced",
    "emit_report",
    "f_theta",
    "fixed_grid_irls",
    "grad_f",
    "gram_deriv",
    "logsum_objective",
    "make_weights",
    "oracle_ls",
    "prune_and_merge",
    "reconstruct_full",
    "rsnr",
    "run",
    "run_experiment",
    "run_trial",
    "subsample",
    "success",
    "surrogate_Q",
    "synthesize",
    "theta_descent",
    "trial_rng",
    "uniform_grid",
    "weighted_gram",
    "wrap_angle",
    "z_update",
]
