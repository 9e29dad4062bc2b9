"""Gridless sparse recovery by iteratively reweighted frequency refinement.

The solver alternates three ingredients until the coefficient vector settles:

* a reweighted quadratic surrogate of the log-sum sparsity objective, whose
  exact minimizer under the interpolation constraint is a weighted
  minimum-norm solve;
* a monotone backtracking search on the atom frequencies that never accepts
  a candidate unless the surrogate value decreases, so the log-sum objective
  is non-increasing at every iteration;
* an annealed smoothing parameter that starts at 1 and decays to 1e-8,
  sharpening the sparsity pressure as the fit stabilizes.

Small coefficients are pruned (and near-duplicate atoms merged) once the
smoothing parameter is small; every removal is followed by a re-solve and is
rolled back if the reduced atom set can no longer interpolate the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dictionary import FreqGrid, atoms_matrix, uniform_grid
from .model import SampleSet, circular_distance, wrap_angle

# Pruning and merging stay disabled until the smoothing parameter drops
# below this value; earlier the weights are too soft to trust coefficient
# magnitudes.
PRUNE_EPS_THRESHOLD = 1e-4

# A rejected coordinate pass still shrinks the warm-started step sizes, so
# the next pass explores a finer scale; the run only stops once this many
# consecutive passes made no move, by which point the search window has
# collapsed below float resolution.
_IDLE_PASSES_TO_STOP = 6

# Mutually coupled atoms can keep exchanging sub-stop_tol coefficient mass
# for hundreds of coordinate passes; after this many consecutive quiet
# passes (floor epsilon, no prune, coefficient change below stop_tol) the
# run is declared converged even though micro-moves are still accepted.
# Generous enough for the geometric endgame walk of a lone atom to finish.
_MAX_QUIET_PASSES = 80

# Iterative-refinement controls for the Hermitian solve.  Many passes are
# allowed because each costs only O(M^2) and the contraction rate degrades
# to ~1/2 when the smallest eigenvalue approaches the ridge.
_MAX_REFINE_PASSES = 40
_REFINE_REL_FLOOR = 1e-16

# Above this relative residual the Cholesky path has hit its accuracy floor
# (eps times the squared condition number) and the solve falls back to a
# rank-revealing factorization of the weighted atoms themselves.  Residuals
# much larger than float level would otherwise leak into the objective
# monotonicity chain, amplified by the inverse of the smallest eigenvalue.
_SVD_FALLBACK_REL = 1e-12


class IllConditionedError(RuntimeError):
    """Raised when the weighted solve cannot reach interpolation accuracy.

    When raised from :func:`run`, the partially solved state is attached as
    the ``state`` attribute for diagnosis.
    """

    def __init__(self, message: str, state: "SolverState | None" = None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class Weights:
    """Reweighting diagonal d_n = 1 / (|z_n|^2 + epsilon)."""

    d: np.ndarray
    epsilon: float

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if d.ndim != 1 or np.any(d <= 0.0):
            raise ValueError("weights must be strictly positive")
        if np.any(d > 1.0 / self.epsilon * (1.0 + 1e-12)):
            raise ValueError("weights exceed the 1/epsilon bound")
        object.__setattr__(self, "d", d)

    @property
    def dinv(self) -> np.ndarray:
        """Inverse weights |z_n|^2 + epsilon (entries of D^-1)."""
        return 1.0 / self.d


@dataclass
class SolverConfig:
    """Tuning knobs of the solver loop.

    The defaults reproduce the benchmark configuration: a 64-atom initial
    grid, smoothing annealed from 1 down to 1e-8 by factors of 10 whenever
    the relative coefficient change falls below 1 percent, and a short
    backtracking frequency search per outer iteration.
    """

    n_atoms: int = 64
    eps0: float = 1.0
    eps_floor: float = 1e-8
    eps_factor: float = 0.1
    eps_trigger: float = 1e-2
    stop_tol: float = 1e-6
    max_outer: int = 500
    gd_max_steps: int = 5
    gd_backtracks: int = 10
    gd_init_step: float | None = None  # None: 1 / (M * L)
    armijo_c: float = 1e-4
    active_frac: float = 0.05
    prune_rel: float = 1e-6
    merge_rad: float = 1e-4
    feas_tol: float = 1e-8
    ridge_rel: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.eps_floor <= self.eps0:
            raise ValueError("need 0 < eps_floor <= eps0")
        if not 0.0 < self.eps_factor < 1.0:
            raise ValueError("eps_factor must lie in (0, 1)")
        for name in ("eps_trigger", "stop_tol", "armijo_c", "active_frac",
                     "prune_rel", "merge_rad", "feas_tol", "ridge_rel"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.n_atoms < 1 or self.max_outer < 1:
            raise ValueError("n_atoms and max_outer must be at least 1")

    def init_step(self, s: SampleSet) -> float:
        if self.gd_init_step is not None:
            return self.gd_init_step
        return 1.0 / (s.M * s.L)


@dataclass
class IterationRecord:
    """One outer iteration of the solve, as recorded in the run history."""

    iteration: int
    epsilon: float
    n_atoms: int
    n_active: int
    objective_start: float
    objective: float
    weighted_norm: float
    f_value: float
    residual_anchor: float
    residual: float
    moved: bool
    pruned: bool = False
    n_pruned: int = 0
    n_merged: int = 0
    residual_after_prune: float | None = None

    def trace_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "epsilon": self.epsilon,
            "objective": self.objective,
            "residual": self.residual,
            "n_active": self.n_active,
        }


@dataclass
class SolverState:
    """Current frequency estimates and coefficients of a solve."""

    theta_hat: FreqGrid
    z_hat: np.ndarray
    epsilon: float
    iteration: int
    objective: float
    residual: float
    history: list = field(default_factory=list, repr=False)
    step_sizes: np.ndarray | None = field(default=None, repr=False)


def logsum_objective(z: np.ndarray, epsilon: float) -> float:
    """Log-sum sparsity objective: sum_i log(|z_i|^2 + epsilon)."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    z = np.asarray(z)
    return float(np.sum(np.log(np.abs(z) ** 2 + epsilon)))


def surrogate_Q(z: np.ndarray, z_ref: np.ndarray, epsilon: float) -> float:
    """Quadratic upper bound of the log-sum objective anchored at ``z_ref``.

    Touches the objective exactly at ``z == z_ref`` and dominates it
    everywhere else.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    z = np.asarray(z)
    z_ref = np.asarray(z_ref)
    if z.shape != z_ref.shape:
        raise ValueError("z and z_ref must have matching shapes")
    ref = np.abs(z_ref) ** 2 + epsilon
    return float(np.sum((np.abs(z) ** 2 + epsilon) / ref + np.log(ref) - 1.0))


def make_weights(z_hat: np.ndarray, epsilon: float) -> Weights:
    """Weights of the quadratic surrogate at the current coefficients."""
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    return Weights(1.0 / (np.abs(np.asarray(z_hat)) ** 2 + epsilon), epsilon)


@dataclass
class _SolveOut:
    u: np.ndarray       # solution of X u = y
    z: np.ndarray       # dinv * A^H u, the weighted minimum-norm coefficients
    f: float            # u^H X u = z^H D z, the reduced objective value
    resid: float        # || y - A z ||_2


def _solve_system(A: np.ndarray, dinv: np.ndarray, y: np.ndarray,
                  cfg: SolverConfig) -> _SolveOut:
    """Solve (A diag(dinv) A^H) u = y and return the induced coefficients.

    The system is factorized with a small relative ridge for stability, but
    iterative refinement against the unmodified matrix removes the ridge
    bias, so the result is an accurate solution of the original system
    whenever the right-hand side is in its range.
    """
    M = A.shape[0]
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        zeros_m = np.zeros(M, dtype=complex)
        return _SolveOut(zeros_m, np.zeros(A.shape[1], dtype=complex), 0.0, 0.0)

    X = (A * dinv) @ A.conj().T
    scale = float(np.real(np.trace(X))) / M
    factor = None
    for bump in (1.0, 1e3, 1e6):
        Xr = X.copy()
        Xr.flat[:: M + 1] += cfg.ridge_rel * bump * scale
        try:
            factor = cho_factor(Xr, lower=False, check_finite=False)
            break
        except np.linalg.LinAlgError:
            continue
    if factor is None:
        raise IllConditionedError("weighted system is numerically indefinite")

    u = cho_solve(factor, y, check_finite=False)
    r = y - X @ u
    rnorm = float(np.linalg.norm(r))
    floor = _REFINE_REL_FLOOR * ynorm
    for _ in range(_MAX_REFINE_PASSES):
        if rnorm <= floor:
            break
        u_new = u + cho_solve(factor, r, check_finite=False)
        r_new = y - X @ u_new
        rnorm_new = float(np.linalg.norm(r_new))
        if rnorm_new >= rnorm:
            break
        u, r, rnorm = u_new, r_new, rnorm_new

    p = A.conj().T @ u
    z = dinv * p
    f = float(np.real(np.vdot(z, p)))
    resid = float(np.linalg.norm(y - A @ z))

    if resid > _SVD_FALLBACK_REL * ynorm:
        out = _solve_weighted_svd(A, dinv, y, ynorm)
        if out is not None and out.resid < resid:
            u, z, f, resid = out.u, out.z, out.f, out.resid

    if resid > cfg.feas_tol * ynorm:
        raise IllConditionedError(
            f"interpolation residual {resid:.3e} exceeds "
            f"{cfg.feas_tol:.1e} * ||y|| = {cfg.feas_tol * ynorm:.3e}"
        )
    return _SolveOut(u, z, f, resid)


def _solve_weighted_svd(A, dinv, y, ynorm):
    """Weighted minimum-norm solve via an SVD of the weighted atoms.

    Factorizing B = A * sqrt(dinv) directly sees directions whose squared
    singular values would drown below the ridge of the assembled Hermitian
    system; refinement passes then push the interpolation residual to the
    float level whenever y lies in the numerical range.
    """
    root = np.sqrt(dinv)
    B = A * root
    try:
        U, sv, Vh = np.linalg.svd(B, full_matrices=False)
    except np.linalg.LinAlgError:
        return None
    cutoff = np.finfo(float).eps * max(B.shape) * (sv[0] if sv.size else 0.0)
    keep = sv > cutoff
    if not np.any(keep):
        return None
    inv_sv = np.zeros_like(sv)
    inv_sv[keep] = 1.0 / sv[keep]

    def apply_pinv(rhs):
        return Vh.conj().T @ (inv_sv * (U.conj().T @ rhs))

    v = apply_pinv(y)
    r = y - B @ v
    rnorm = float(np.linalg.norm(r))
    for _ in range(3):
        if rnorm <= _REFINE_REL_FLOOR * ynorm:
            break
        v_new = v + apply_pinv(r)
        r_new = y - B @ v_new
        rnorm_new = float(np.linalg.norm(r_new))
        if rnorm_new >= rnorm:
            break
        v, r, rnorm = v_new, r_new, rnorm_new

    z = root * v
    resid = float(np.linalg.norm(y - A @ z))
    f = float(np.real(np.vdot(v, v)))
    u = U @ (inv_sv ** 2 * (U.conj().T @ y))
    return _SolveOut(u, z, f, resid)


def _try_solve(A, dinv, y, cfg):
    try:
        return _solve_system(A, dinv, y, cfg)
    except IllConditionedError:
        return None


def z_update(grid: FreqGrid, s: SampleSet, w: Weights, y: np.ndarray,
             cfg: SolverConfig | None = None) -> np.ndarray:
    """Minimize z^H D z subject to exact interpolation A(theta) z = y.

    Returns the closed-form weighted minimum-norm coefficients
    D^-1 A^H (A D^-1 A^H)^-1 y, computed via a refined Hermitian solve.

    Raises
    ------
    IllConditionedError
        If the atoms cannot interpolate ``y`` to the feasibility tolerance.
    """
    cfg = cfg or SolverConfig()
    A = atoms_matrix(grid.thetas, s.indices)
    return _solve_system(A, w.dinv, np.asarray(y, dtype=complex), cfg).z


def f_theta(grid: FreqGrid, s: SampleSet, w: Weights, y: np.ndarray,
            cfg: SolverConfig | None = None) -> float:
    """Reduced objective y^H (A D^-1 A^H)^-1 y as a function of the grid."""
    cfg = cfg or SolverConfig()
    A = atoms_matrix(grid.thetas, s.indices)
    return _solve_system(A, w.dinv, np.asarray(y, dtype=complex), cfg).f


def _grad_from_solution(A, dinv, u, m, active):
    """Gradient of the reduced objective for the given atoms.

    With u = X^-1 y the derivative in theta_i is -u^H (dX/dtheta_i) u,
    which collapses to -2 * dinv_i * Re(conj(q_i) p_i) for p = A^H u and
    q = A^H (1j * m * u).
    """
    p = A[:, active].conj().T @ u
    q = A[:, active].conj().T @ (1j * m * u)
    return -2.0 * dinv[active] * np.real(np.conj(q) * p)


def _misfit(A_act, y):
    """Norm of the component of y outside the span of the given atoms.

    Computed via an explicit QR projection, so its absolute error stays at
    the float level of ||y|| regardless of conditioning; this separates
    sub-ulp frequency offsets that quadratic-form scores cannot resolve.
    """
    q, _ = np.linalg.qr(A_act)
    return float(np.linalg.norm(y - q @ (q.conj().T @ y)))


def _ridge_score(A_act, dinv_act, y, ridge_rel):
    """Search score: ridged quadratic form of the active-atom subsystem.

    One unrefined solve of (A_act diag(dinv_act) A_act^H + ridge) u = y.
    When the active atoms alone are rank deficient, any misfit between y
    and their span is amplified by 1/ridge, so the score stays sensitive to
    frequency errors all the way down to machine precision.  Returns
    ``(score, u)``, or None if the factorization fails.
    """
    M = A_act.shape[0]
    X = (A_act * dinv_act) @ A_act.conj().T
    scale = float(np.real(np.trace(X))) / M
    if not np.isfinite(scale) or scale <= 0.0:
        return None
    X.flat[:: M + 1] += ridge_rel * scale
    try:
        factor = cho_factor(X, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        return None
    u = cho_solve(factor, y, check_finite=False)
    return float(np.real(np.vdot(y, u))), u


def grad_f(grid: FreqGrid, s: SampleSet, w: Weights, y: np.ndarray,
           active: np.ndarray | None = None,
           cfg: SolverConfig | None = None) -> np.ndarray:
    """Analytic gradient of :func:`f_theta` over the active atom indices."""
    cfg = cfg or SolverConfig()
    if active is None:
        active = np.arange(grid.N)
    active = np.asarray(active, dtype=np.intp)
    if active.size and (active.min() < 0 or active.max() >= grid.N):
        raise ValueError("active indices out of range")
    m = s.indices.astype(float)
    A = atoms_matrix(grid.thetas, s.indices)
    out = _solve_system(A, w.dinv, np.asarray(y, dtype=complex), cfg)
    return _grad_from_solution(A, w.dinv, out.u, m, active)


# Accepted frequency moves may exceed the anchoring weighted norm by at most
# this relative slack (float noise allowance; an order of magnitude tighter
# than the documented acceptance margin).
_ACCEPT_REL_SLACK = 1e-13

# Line-search acceptances must beat the current score by this relative
# margin on top of the Armijo decrease.  Score differences below it are
# evaluation noise; sub-ulp placement is owned by the misfit snap instead,
# so without this band converged runs would dither on noise accepts.
_SCORE_DECREASE_BAND = 1e-14

# States with a genuine gap between y and the atom span make the objective
# bookkeeping noisy: the gap, amplified through the smallest weighted
# eigenvalues, perturbs every weighted-norm comparison.  Pruning therefore
# only fires when the reduced atom set interpolates essentially at float
# precision, and accepted frequency moves may not degrade the current
# interpolation residual by more than a small factor.
_PRUNE_FEAS_FRACTION = 1e-6
_MOVE_RESID_GROWTH = 4.0


def _descend(thetas, A, dinv, m, y, cfg, anchor, active, sequential, step_sizes, t0):
    """Backtracking frequency search that never increases the reduced objective.

    Candidate moves are scored by the sharp active-subset ridge score and
    additionally gated on the full-system reduced objective staying at or
    below its anchoring value, so every accepted move preserves the descent
    inequality.  Mutates ``A`` (and ``step_sizes`` in sequential mode) to
    match the returned frequencies.  Returns ``(thetas_new, out)`` where
    ``out`` is the full solve at the accepted frequencies, or ``None`` when
    nothing moved.
    """
    cur = thetas.copy()
    guard = anchor.f * (1.0 + _ACCEPT_REL_SLACK)
    resid_cap = max(_MOVE_RESID_GROWTH * anchor.resid,
                    _SVD_FALLBACK_REL * float(np.linalg.norm(y)))
    out_cur = None

    # Active atoms may not be approached closer than the merge radius: a
    # near-duplicate pair of strongly weighted atoms makes the
    # interpolation system ill-conditioned enough that the small
    # coefficients (and with them the objective) lose determinism.  Only
    # active atoms block: atoms move only while active, so converging
    # pairs are always caught, while a decayed parked atom must not pin
    # its better-placed neighbor.
    zabs = np.abs(anchor.z)
    is_blocker = zabs >= cfg.active_frac * zabs.max()

    def too_close(positions, moved_idx):
        blockers = is_blocker.copy()
        blockers[moved_idx] = False
        others = cur[blockers]
        if others.size and circular_distance(
                positions[:, None], others[None, :]).min() < cfg.merge_rad:
            return True
        if positions.size > 1:
            gaps = circular_distance(positions[:, None], positions[None, :])
            gaps[np.diag_indices(positions.size)] = np.inf
            return bool(gaps.min() < cfg.merge_rad)
        return False

    scored = _ridge_score(A[:, active], dinv[active], y, cfg.ridge_rel)
    if scored is None:
        return cur, None
    score_cur, u_act = scored

    def consider(score_limit):
        """Score the candidate columns already written into A."""
        cand = _ridge_score(A[:, active], dinv[active], y, cfg.ridge_rel)
        if cand is None or cand[0] > score_limit:
            return None
        out = _try_solve(A, dinv, y, cfg)
        if out is None or out.f > guard or out.resid > resid_cap:
            return None
        return cand, out

    def halve_while_better(t, theta_of, write_cols, blocked, hit):
        """After a step is accepted, keep halving while the score improves.

        Backtracking alone takes the first acceptable step, which can hop
        over the minimizer; harvesting the halvings settles on the best
        candidate along the ray.  Leaves the best candidate's columns
        written in A and returns ``(t, theta, hit)`` for it.
        """
        best_t, best_theta, best_hit = t, theta_of(t), hit
        while True:
            t_next = best_t * 0.5
            theta_next = theta_of(t_next)
            if np.all(theta_next == best_theta) or blocked(theta_next):
                break
            write_cols(theta_next)
            cand = consider(best_hit[0][0])
            if cand is None or cand[0][0] >= best_hit[0][0]:
                write_cols(best_theta)
                break
            best_t, best_theta, best_hit = t_next, theta_next, cand
        return best_t, best_theta, best_hit

    if not sequential:
        t_start = t0
        for _ in range(cfg.gd_max_steps):
            g = _grad_from_solution(A, dinv, u_act, m, active)
            if not np.any(g):
                break
            dirs = -np.sign(g)
            slope = float(np.dot(g, dirs))  # = -sum |g| < 0
            theta_of = lambda t: wrap_angle(cur[active] + t * dirs)
            write_cols = lambda th: A.__setitem__(
                (slice(None), active), atoms_matrix(th, m))
            blocked = lambda th: too_close(th, active)
            t = t_start
            accepted = False
            for _ in range(cfg.gd_backtracks + 1):
                theta_try = theta_of(t)
                if np.array_equal(theta_try, cur[active]):
                    break
                if not blocked(theta_try):
                    backup = A[:, active].copy()
                    write_cols(theta_try)
                    hit = consider(score_cur + cfg.armijo_c * t * slope
                                   - _SCORE_DECREASE_BAND * abs(score_cur))
                    if hit is not None:
                        t, theta_try, hit = halve_while_better(
                            t, theta_of, write_cols, blocked, hit)
                        cur[active] = theta_try
                        (score_cur, u_act), out_cur = hit
                        t_start = min(t0, 4.0 * t)
                        accepted = True
                        break
                    A[:, active] = backup
                t *= 0.5
            if not accepted:
                break
        return cur, out_cur

    # Sequential refinement: one coordinate pass over the active atoms, with
    # per-atom warm-started step sizes so the search can keep shrinking
    # across outer iterations.
    for i in active:
        v = 1j * m * u_act
        p_i = np.vdot(A[:, i], u_act)
        q_i = np.vdot(A[:, i], v)
        g_i = -2.0 * dinv[i] * float(np.real(np.conj(q_i) * p_i))
        if g_i == 0.0:
            continue
        direction = -1.0 if g_i > 0.0 else 1.0
        theta_of = lambda t: float(wrap_angle(cur[i] + t * direction))
        write_cols = lambda th: A.__setitem__(
            (slice(None), i), np.exp(-1j * th * m))
        blocked = lambda th: too_close(np.atleast_1d(th), [i])
        t = min(t0, 4.0 * step_sizes[i])
        for _ in range(cfg.gd_backtracks + 1):
            theta_try = theta_of(t)
            if theta_try == cur[i]:
                break
            if not blocked(theta_try):
                backup = A[:, i].copy()
                write_cols(theta_try)
                hit = consider(score_cur - cfg.armijo_c * t * abs(g_i)
                               - _SCORE_DECREASE_BAND * abs(score_cur))
                if hit is not None:
                    t, theta_try, hit = halve_while_better(
                        t, theta_of, write_cols, blocked, hit)
                    cur[i] = theta_try
                    (score_cur, u_act), out_cur = hit
                    step_sizes[i] = t
                    break
                A[:, i] = backup
            t *= 0.5
        else:
            # Keep the next search window anchored no finer than one float
            # spacing, so a collapsed memory can still propose ulp hops.
            step_sizes[i] = max(t, 0.25 * np.spacing(cur[i]))

        if active.size < m.size:
            settled = _snap_to_fit(A, cur, i, active, m, y, consider, blocked)
            if settled is not None:
                (score_cur, u_act), out_cur = settled
    return cur, out_cur


_SNAP_MAX_HOPS = 64


def _snap_to_fit(A, cur, i, active, m, y, consider, blocked):
    """Settle atom i on the float-lattice minimizer of the projection misfit.

    The ridge score cannot separate frequency offsets below about one float
    spacing, so the last ulp is decided by the directly computed misfit,
    which can.  Only strict misfit decreases are taken (the misfit is a
    fixed function of the active frequencies, so the walk terminates), and
    every hop still passes the full-system acceptance guard.  Returns the
    last accepted ``(scored, out)`` pair, or None if the atom did not move.
    """
    mis_cur = _misfit(A[:, active], y)
    settled = None
    for _ in range(_SNAP_MAX_HOPS):
        moved = False
        spacing = np.spacing(cur[i])
        for t_snap in (4.0 * spacing, 2.0 * spacing, spacing):
            for d_snap in (1.0, -1.0):
                theta_c = float(wrap_angle(cur[i] + t_snap * d_snap))
                if theta_c == cur[i] or blocked(theta_c):
                    continue
                backup = A[:, i].copy()
                A[:, i] = np.exp(-1j * theta_c * m)
                mis_c = _misfit(A[:, active], y)
                hit = consider(math.inf) if mis_c < mis_cur else None
                if hit is not None:
                    cur[i] = theta_c
                    mis_cur = mis_c
                    settled = hit
                    moved = True
                    break
                A[:, i] = backup
            if moved:
                break
        if not moved:
            break
    return settled


def theta_descent(state: SolverState, s: SampleSet, w: Weights, y: np.ndarray,
                  cfg: SolverConfig) -> FreqGrid:
    """Search for frequencies that do not increase the reduced objective.

    Runs up to ``gd_max_steps`` simultaneous gradient steps on the active
    atoms while the smoothing parameter is above its floor, and a single
    coordinate-wise pass once it has reached the floor.  Every candidate is
    accepted only if the reduced objective strictly decreases (Armijo rule),
    so the returned grid always satisfies
    f(theta_new) <= z^H D z for the anchoring coefficients; if no step
    improves, the input grid is returned unchanged.
    """
    y = np.asarray(y, dtype=complex)
    m = s.indices.astype(float)
    dinv = w.dinv
    A = atoms_matrix(state.theta_hat.thetas, s.indices)
    anchor = _solve_system(A, dinv, y, cfg)
    zmax = np.abs(anchor.z).max() if anchor.z.size else 0.0
    if zmax == 0.0:
        return state.theta_hat
    active = np.flatnonzero(np.abs(anchor.z) >= cfg.active_frac * zmax)
    t0 = cfg.init_step(s)
    if state.step_sizes is None:
        state.step_sizes = np.full(state.theta_hat.N, t0)
    sequential = w.epsilon <= cfg.eps_floor
    thetas_new, _ = _descend(
        state.theta_hat.thetas, A, dinv, m, y, cfg,
        anchor, active, sequential, state.step_sizes, t0,
    )
    return FreqGrid(thetas_new)


def anneal(epsilon: float, z_change_rel: float, cfg: SolverConfig) -> float:
    """Shrink the smoothing parameter once the coefficients have settled.

    When the relative coefficient change drops below ``eps_trigger`` the
    parameter is multiplied by ``eps_factor``, never going below
    ``eps_floor``; otherwise it is returned unchanged, so the sequence is
    non-increasing over a run.
    """
    if epsilon < cfg.eps_floor:
        raise ValueError("epsilon is already below the floor")
    if z_change_rel < cfg.eps_trigger:
        return max(epsilon * cfg.eps_factor, cfg.eps_floor)
    return epsilon


def _prune_merge_arrays(thetas, z, epsilon, m, y, cfg):
    """Select surviving atoms and re-solve; None when nothing changes.

    Returns ``(keep_indices, z_new, resid, n_pruned, n_merged)``.  When
    removing every negligible atom would leave a set that can no longer
    interpolate the data, the strongest of the prune candidates are kept so
    that at least M atoms survive (M generic atoms always span the
    measurement space); the remaining candidates go in a later round once
    the frequency estimates have sharpened.  The caller must roll the
    operation back if this returns None.
    """
    zabs = np.abs(z)
    zmax = zabs.max()
    if zmax == 0.0:
        return None
    keep = np.flatnonzero(zabs >= cfg.prune_rel * zmax)

    # Greedy merge of the closest pair until all survivors are separated.
    merge_dropped = []
    while keep.size > 1:
        th = thetas[keep]
        gaps = circular_distance(th[:, None], th[None, :])
        gaps[np.diag_indices(keep.size)] = np.inf
        j, k = np.unravel_index(np.argmin(gaps), gaps.shape)
        if gaps[j, k] >= cfg.merge_rad:
            break
        # Keep the larger coefficient; on a tie, the lower original index.
        drop = j if (zabs[keep[j]], -keep[j]) < (zabs[keep[k]], -keep[k]) else k
        merge_dropped.append(keep[drop])
        keep = np.delete(keep, drop)

    n_merged = len(merge_dropped)
    if thetas.size - keep.size == 0:
        return None

    ynorm = float(np.linalg.norm(y))

    def attempt(kept):
        # Survivor sets made purely of strong atoms keep every weighted
        # eigenvalue healthy, so a residual anywhere below the feasibility
        # tolerance cannot contaminate later objective comparisons and the
        # frequency search will keep polishing it down.  Sets that retain
        # near-epsilon-weight atoms amplify any leftover misfit through
        # their smallest eigenvalues, so they must interpolate at float
        # precision before the removal is allowed to stand.
        all_strong = bool(np.all(zabs[kept] >= cfg.active_frac * zmax))
        fraction = 1.0 if all_strong else _PRUNE_FEAS_FRACTION
        w_kept = make_weights(z[kept], epsilon)
        out = _try_solve(atoms_matrix(thetas[kept], m), w_kept.dinv, y, cfg)
        if out is not None and out.resid > fraction * cfg.feas_tol * ynorm:
            return None
        return out

    out = attempt(keep)
    if out is None and keep.size < m.size:
        # Back-fill with the strongest pruned (not merged-away) atoms up to
        # M total, so the survivors still interpolate exactly.  Fillers are
        # required to stay apart from every selected atom: near-duplicate
        # fillers carry only the epsilon-level weight and would push the
        # weighted system's smallest eigenvalue down to the ridge.
        candidates = np.ones(thetas.size, dtype=bool)
        candidates[keep] = False
        candidates[merge_dropped] = False
        pool = np.flatnonzero(candidates)
        pool = pool[np.argsort(zabs[pool])[::-1]]
        min_gap = 100.0 * cfg.merge_rad
        need = m.size - keep.size
        fillers: list[int] = []
        for relax in (False, True):
            for cand in pool:
                if len(fillers) >= need:
                    break
                if cand in fillers:
                    continue
                others = np.concatenate([thetas[keep], thetas[fillers]]) \
                    if fillers else thetas[keep]
                if relax or np.all(circular_distance(thetas[cand], others) >= min_gap):
                    fillers.append(int(cand))
            if len(fillers) >= need:
                break
        if fillers:
            keep = np.sort(np.concatenate([keep, np.asarray(fillers, dtype=keep.dtype)]))
            if thetas.size - keep.size - n_merged == 0:
                return None
            out = attempt(keep)
    if out is None:
        return None
    n_pruned = thetas.size - keep.size - n_merged
    return keep, out.z, out.resid, n_pruned, n_merged


def prune_and_merge(state: SolverState, s: SampleSet, y: np.ndarray,
                    cfg: SolverConfig) -> SolverState:
    """Drop negligible atoms and collapse near-duplicates, then re-solve.

    Active only once the smoothing parameter is below 1e-4.  The last atom
    is never removed, and the whole operation is rolled back if the reduced
    atom set cannot interpolate ``y`` to the feasibility tolerance.
    """
    if state.epsilon >= PRUNE_EPS_THRESHOLD:
        return state
    y = np.asarray(y, dtype=complex)
    m = s.indices.astype(float)
    result = _prune_merge_arrays(state.theta_hat.thetas, state.z_hat,
                                 state.epsilon, m, y, cfg)
    if result is None:
        return state
    keep, z_new, resid, _, _ = result
    steps = None if state.step_sizes is None else state.step_sizes[keep]
    return replace(
        state,
        theta_hat=FreqGrid(state.theta_hat.thetas[keep]),
        z_hat=z_new,
        objective=logsum_objective(z_new, state.epsilon),
        residual=resid,
        step_sizes=steps,
    )


def _run_loop(y, s, cfg, update_theta, trace_fn=None):
    y = np.asarray(y, dtype=complex)
    m = s.indices.astype(float)
    grid0 = uniform_grid(cfg.n_atoms)
    thetas = grid0.thetas.copy()
    A = atoms_matrix(thetas, s.indices)
    t0 = cfg.init_step(s)
    step_sizes = np.full(cfg.n_atoms, t0)
    eps = cfg.eps0
    history: list[IterationRecord] = []

    def snapshot(z, it, resid):
        return SolverState(FreqGrid(thetas), z, eps, it,
                           logsum_objective(z, eps) if z.size else 0.0,
                           resid, history, step_sizes)

    try:
        init = _solve_system(A, np.ones(cfg.n_atoms), y, cfg)
    except IllConditionedError as err:
        err.state = snapshot(np.zeros(cfg.n_atoms, dtype=complex), 0, math.inf)
        raise
    z = init.z
    resid = init.resid

    idle_passes = 0
    quiet_passes = 0
    for it in range(1, cfg.max_outer + 1):
        w = make_weights(z, eps)
        dinv = w.dinv
        try:
            anchor = _solve_system(A, dinv, y, cfg)
        except IllConditionedError as err:
            err.state = snapshot(z, it, math.inf)
            raise
        # Monotone re-anchoring: close to convergence the fresh solve can
        # land a cond-limited hair above the carried coefficients' weighted
        # norm; keeping the better of the two pins the descent chain down.
        zdz_prev = float(np.real(np.vdot(z, w.d * z)))
        if zdz_prev < anchor.f:
            anchor = _SolveOut(anchor.u, z, zdz_prev, resid)

        zmax = np.abs(anchor.z).max() if anchor.z.size else 0.0
        active = (np.flatnonzero(np.abs(anchor.z) >= cfg.active_frac * zmax)
                  if zmax > 0.0 else np.empty(0, dtype=np.intp))
        out = None
        if update_theta and active.size:
            thetas, out = _descend(thetas, A, dinv, m, y, cfg, anchor,
                                   active, eps <= cfg.eps_floor, step_sizes, t0)
        moved = out is not None
        cur = out if moved else anchor

        obj_start = logsum_objective(z, eps)
        obj_new = logsum_objective(cur.z, eps)
        dz = float(np.linalg.norm(cur.z - z))
        znorm = float(np.linalg.norm(z))
        z_rel = dz / znorm if znorm > 0.0 else (0.0 if dz == 0.0 else math.inf)
        record = IterationRecord(
            iteration=it, epsilon=eps, n_atoms=thetas.size,
            n_active=int(active.size), objective_start=obj_start,
            objective=obj_new, weighted_norm=anchor.f, f_value=cur.f,
            residual_anchor=anchor.resid, residual=cur.resid, moved=moved,
        )
        z = cur.z
        resid = cur.resid

        if eps < PRUNE_EPS_THRESHOLD:
            pruned = _prune_merge_arrays(thetas, z, eps, m, y, cfg)
            if pruned is not None:
                keep, z, prune_resid, n_pruned, n_merged = pruned
                thetas = thetas[keep]
                A = A[:, keep]
                step_sizes = step_sizes[keep]
                resid = prune_resid
                record.pruned = True
                record.n_pruned = n_pruned
                record.n_merged = n_merged
                record.residual_after_prune = prune_resid

        history.append(record)
        if trace_fn is not None:
            trace_fn(record.trace_dict())

        quiet = (not record.pruned and dz <= cfg.stop_tol
                 and eps <= cfg.eps_floor)
        idle_passes = idle_passes + 1 if quiet and not moved else 0
        quiet_passes = quiet_passes + 1 if quiet else 0
        if quiet:
            if (not update_theta
                    or idle_passes >= _IDLE_PASSES_TO_STOP
                    or quiet_passes >= _MAX_QUIET_PASSES):
                break
        eps = anneal(eps, z_rel, cfg)

    return SolverState(FreqGrid(thetas), z, eps, it,
                       logsum_objective(z, eps), resid, history, step_sizes)


def run(y: np.ndarray, s: SampleSet, cfg: SolverConfig | None = None,
        rng: np.random.Generator | None = None, trace_fn=None) -> SolverState:
    """Run the full gridless solve on a measurement vector.

    Starts from a uniform frequency grid and the plain minimum-norm fit,
    then iterates reweighting, frequency refinement, coefficient updates,
    pruning and annealing until the coefficients settle with the smoothing
    parameter at its floor (or ``max_outer`` is reached).

    Parameters
    ----------
    y : array-like of complex, length M
        Observed samples.
    s : SampleSet
        The 1-based indices at which ``y`` was observed.
    cfg : SolverConfig, optional
        Tuning knobs; defaults reproduce the benchmark configuration.
    rng : numpy.random.Generator, optional
        Accepted for interface uniformity with the randomized baselines;
        the solve itself is deterministic and never draws from it.
    trace_fn : callable, optional
        Called once per outer iteration with a small dict (iteration,
        epsilon, objective, residual, active-atom count).

    Returns
    -------
    SolverState
        Final estimates; ``state.history`` holds one record per iteration.

    Raises
    ------
    IllConditionedError
        If a coefficient update cannot reach the feasibility tolerance; the
        partial state is attached to the exception.
    """
    del rng  # deterministic algorithm; parameter kept for API uniformity
    if s.M < 1:
        raise ValueError("need at least one measurement")
    cfg = cfg or SolverConfig()
    return _run_loop(y, s, cfg, update_theta=True, trace_fn=trace_fn)
