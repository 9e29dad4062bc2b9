"""End-to-end solver runs: recovery quality and per-iteration invariants."""

import numpy as np
import pytest

from linespec import (
    SolverConfig,
    circular_distance,
    detect,
    draw_sample_set,
    draw_spectrum,
    run,
    subsample,
    success,
    synthesize,
)
from linespec.model import TWO_PI, LineSpectrum
from linespec.solver import IllConditionedError

from conftest import random_instance


def on_grid_instance(seed, L=64, M=16):
    gen = np.random.default_rng(seed)
    theta_star = TWO_PI * int(gen.integers(1, L - 1)) / L
    spec = LineSpectrum([theta_star], [np.exp(1j * gen.uniform(0, TWO_PI))])
    u = synthesize(spec, L)
    s = draw_sample_set(L, M, gen)
    return spec, u, s, subsample(u, s)


class TestRunRecovery:
    def test_on_grid_single_component_is_exact(self):
        spec, _, s, meas = on_grid_instance(seed=2)
        state = run(meas.y, s, SolverConfig())
        k = int(np.argmax(np.abs(state.z_hat)))
        assert circular_distance(state.theta_hat.thetas[k], spec.freqs[0]) <= 1e-6
        assert abs(state.z_hat[k] - spec.amps[0]) <= 1e-6

    def test_well_separated_triples_mostly_recovered(self):
        hits = 0
        for seed in range(10):
            spec, _, s, meas = random_instance(
                3000 + seed, L=64, M=40, K=3, min_spacing=4 * TWO_PI / 64)
            state = run(meas.y, s, SolverConfig())
            detected = detect(state.z_hat, state.theta_hat.thetas)
            ok, _ = success(spec.freqs, detected, 3)
            hits += ok
        assert hits >= 9

    def test_deterministic_given_inputs(self):
        _, _, s, meas = random_instance(11, L=32, M=14, K=2)
        cfg = SolverConfig(n_atoms=32)
        a = run(meas.y, s, cfg)
        b = run(meas.y, s, cfg)
        np.testing.assert_array_equal(a.theta_hat.thetas, b.theta_hat.thetas)
        np.testing.assert_array_equal(a.z_hat, b.z_hat)
        assert a.iteration == b.iteration


@pytest.fixture(scope="module")
def runs():
    out = []
    for seed in range(8):
        _, _, s, meas = random_instance(4000 + seed, L=64, M=25, K=3)
        state = run(meas.y, s, SolverConfig())
        out.append((np.linalg.norm(meas.y), state))
    return out


class TestRunInvariants:
    def test_objective_non_increasing_each_iteration(self, runs):
        for _, state in runs:
            for row in state.history:
                slack = 1e-9 * abs(row.objective_start) + 1e-12
                assert row.objective <= row.objective_start + slack

    def test_acceptance_inequality_each_iteration(self, runs):
        for _, state in runs:
            for row in state.history:
                assert row.f_value <= row.weighted_norm * (1 + 1e-12)

    def test_feasible_after_every_coefficient_update(self, runs):
        for ynorm, state in runs:
            for row in state.history:
                assert row.residual_anchor <= 1e-8 * ynorm
                assert row.residual <= 1e-8 * ynorm
                if row.residual_after_prune is not None:
                    assert row.residual_after_prune <= 1e-8 * ynorm

    def test_epsilon_non_increasing_and_floored(self, runs):
        for _, state in runs:
            eps_seq = [row.epsilon for row in state.history]
            assert all(a >= b for a, b in zip(eps_seq, eps_seq[1:]))
            assert all(e >= SolverConfig().eps_floor for e in eps_seq)

    def test_state_shape_consistency(self, runs):
        for _, state in runs:
            assert state.theta_hat.N == state.z_hat.size
            assert state.history[-1].iteration == state.iteration


class TestRunInterface:
    def test_trace_emission_fields(self):
        _, _, s, meas = random_instance(5, L=32, M=12, K=1)
        lines = []
        run(meas.y, s, SolverConfig(n_atoms=32), trace_fn=lines.append)
        assert lines
        assert set(lines[0]) == {"iteration", "epsilon", "objective",
                                 "residual", "n_active"}
        assert [rec["iteration"] for rec in lines] == list(range(1, len(lines) + 1))

    def test_failure_attaches_diagnostic_state(self):
        _, _, s, meas = random_instance(6, L=32, M=12, K=2)
        cfg = SolverConfig(n_atoms=32, feas_tol=1e-300)
        with pytest.raises(IllConditionedError) as excinfo:
            run(meas.y, s, cfg)
        assert excinfo.value.state is not None
        assert excinfo.value.state.theta_hat.N == 32

    def test_history_attached_to_state(self):
        _, _, s, meas = random_instance(7, L=32, M=10, K=1)
        state = run(meas.y, s, SolverConfig(n_atoms=32))
        assert len(state.history) == state.iteration
