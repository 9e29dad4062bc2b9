"""Reference methods: a grid-locked reweighted solver and an oracle fit.

The fixed-grid solver runs the exact same reweighted loop as the main
solver but never moves the atom frequencies, so it exhibits the mismatch
error of purely discretized recovery.  The oracle least-squares fit knows
the true frequencies and bounds what any method could achieve.
"""

from __future__ import annotations

import numpy as np

from .dictionary import atoms_matrix
from .model import FullSignal, LineSpectrum, SampleSet, circular_distance, synthesize
from .solver import SolverConfig, SolverState, _run_loop


def fixed_grid_irls(y: np.ndarray, s: SampleSet,
                    cfg: SolverConfig | None = None,
                    trace_fn=None) -> SolverState:
    """Reweighted recovery on a frozen uniform frequency grid.

    Identical loop, weights, annealing and pruning as :func:`solver.run`,
    with the frequency search disabled.
    """
    if s.M < 1:
        raise ValueError("need at least one measurement")
    cfg = cfg or SolverConfig()
    return _run_loop(y, s, cfg, update_theta=False, trace_fn=trace_fn)


def oracle_ls(y: np.ndarray, s: SampleSet,
              true_spectrum: LineSpectrum) -> tuple[np.ndarray, FullSignal]:
    """Least-squares amplitudes on the true frequencies, plus reconstruction.

    Parameters
    ----------
    y : array-like of complex, length M
        Observed samples.
    s : SampleSet
        Indices of the observations; requires K <= M.
    true_spectrum : LineSpectrum
        The ground-truth frequencies (amplitudes are ignored).

    Returns
    -------
    (amps, full)
        Fitted complex amplitudes and the reconstructed length-L signal.

    Raises
    ------
    ValueError
        If K > M or the design is rank deficient (duplicated frequencies).
    """
    y = np.asarray(y, dtype=complex)
    K = true_spectrum.K
    if K > s.M:
        raise ValueError("oracle fit requires K <= M")
    freqs = true_spectrum.freqs
    if K > 1:
        gaps = circular_distance(freqs[:, None], freqs[None, :])
        gaps[np.diag_indices(K)] = np.inf
        if gaps.min() == 0.0:
            raise ValueError("duplicated frequency makes the design singular")
    A = atoms_matrix(freqs, s.indices)
    # Generous rank cutoff: effectively duplicated frequencies must be
    # rejected rather than fitted through a singular design.
    amps, _, rank, _ = np.linalg.lstsq(A, y, rcond=1e-10)
    if rank < K:
        raise ValueError("rank-deficient design: frequencies too close to resolve")
    return amps, synthesize(LineSpectrum(freqs, amps), s.L)
