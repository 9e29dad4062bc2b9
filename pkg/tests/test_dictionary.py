"""Unit tests for the parametric dictionary and its derivatives."""

import cmath

import numpy as np
import pytest

from linespec import (
    FreqGrid,
    SampleSet,
    atom,
    atom_deriv,
    build,
    gram_deriv,
    uniform_grid,
    weighted_gram,
)
from linespec.model import TWO_PI


def full_sampling(M):
    return SampleSet(np.arange(1, M + 1), M)


class TestAtom:
    def test_zero_frequency_is_all_ones(self):
        s = SampleSet([2, 5, 9], 16)
        np.testing.assert_array_equal(atom(0.0, s), np.ones(3, dtype=complex))

    def test_pi_on_first_two_indices(self):
        s = SampleSet([1, 2], 4)
        np.testing.assert_allclose(atom(np.pi, s), [-1, 1], atol=1e-12)

    def test_matches_direct_evaluation(self):
        s = SampleSet([1, 2, 3, 4], 8)
        expected = [cmath.exp(-0.3j * m) for m in (1, 2, 3, 4)]
        np.testing.assert_allclose(atom(0.3, s), expected, rtol=1e-12)

    def test_entries_have_unit_modulus(self, rng):
        s = SampleSet(np.sort(rng.choice(64, 20, replace=False)) + 1, 64)
        a = atom(rng.uniform(0, TWO_PI), s)
        np.testing.assert_allclose(np.abs(a), 1.0, atol=1e-14)


class TestBuild:
    def test_single_atom_column(self):
        s = SampleSet([1, 3], 4)
        grid = FreqGrid([0.7])
        d = build(grid, s)
        assert d.matrix.shape == (2, 1)
        np.testing.assert_array_equal(d.matrix[:, 0], atom(0.7, s))

    def test_dft_grid_columns_are_orthogonal(self):
        M = 8
        d = build(uniform_grid(M), full_sampling(M))
        gram = d.matrix.conj().T @ d.matrix
        np.testing.assert_allclose(gram, M * np.eye(M), atol=1e-10)

    def test_gram_diagonal_equals_m(self, rng):
        s = SampleSet(np.sort(rng.choice(32, 10, replace=False)) + 1, 32)
        d = build(FreqGrid(np.sort(rng.uniform(0, TWO_PI, 7))), s)
        gram = d.matrix.conj().T @ d.matrix
        np.testing.assert_allclose(np.diag(gram).real, 10.0, rtol=1e-14)


class TestAtomDeriv:
    def test_zero_frequency_value(self):
        s = SampleSet([1, 2], 4)
        np.testing.assert_array_equal(atom_deriv(0.0, s), [-1j, -2j])

    def test_matches_central_difference(self, rng):
        s = SampleSet(np.sort(rng.choice(48, 12, replace=False)) + 1, 48)
        h = 1e-6
        for theta in rng.uniform(0, TWO_PI, size=5):
            fd = (atom(theta + h, s) - atom(theta - h, s)) / (2 * h)
            np.testing.assert_allclose(atom_deriv(theta, s), fd, atol=1e-6)

    def test_orthogonal_to_atom_in_real_part(self, rng):
        # |a_j| = 1 for every entry, so d/dtheta ||a||^2 = 0 and the real
        # part of <a, a'> vanishes identically.
        s = SampleSet(np.sort(rng.choice(32, 9, replace=False)) + 1, 32)
        theta = rng.uniform(0, TWO_PI)
        inner = np.vdot(atom(theta, s), atom_deriv(theta, s))
        assert abs(inner.real) < 1e-12 * s.M


class TestWeightedGram:
    def test_unit_weights_dft_case(self):
        M = 8
        d = build(uniform_grid(M), full_sampling(M))
        X = weighted_gram(d, np.ones(M))
        np.testing.assert_allclose(X, M * np.eye(M), atol=1e-10)

    def test_single_atom_rank_one(self):
        s = SampleSet([1, 2, 4], 8)
        d = build(FreqGrid([1.1]), s)
        X = weighted_gram(d, np.array([0.7]))
        a = atom(1.1, s)
        np.testing.assert_allclose(X, 0.7 * np.outer(a, a.conj()), rtol=1e-14)

    def test_matches_brute_force_triple_product(self, rng):
        s = SampleSet(np.sort(rng.choice(40, 9, replace=False)) + 1, 40)
        d = build(FreqGrid(np.sort(rng.uniform(0, TWO_PI, 14))), s)
        dinv = rng.uniform(0.5, 2.0, size=14)
        X = weighted_gram(d, dinv)
        brute = d.matrix @ np.diag(dinv) @ d.matrix.conj().T
        np.testing.assert_allclose(X, brute, atol=1e-12 * np.abs(brute).max())

    def test_positive_semidefinite(self, rng):
        s = SampleSet(np.sort(rng.choice(40, 10, replace=False)) + 1, 40)
        d = build(FreqGrid(np.sort(rng.uniform(0, TWO_PI, 18))), s)
        X = weighted_gram(d, rng.uniform(0.1, 3.0, size=18))
        scale = np.abs(X).max()
        for _ in range(100):
            v = rng.normal(size=10) + 1j * rng.normal(size=10)
            quad = np.vdot(v, X @ v).real
            assert quad >= -1e-10 * scale * np.vdot(v, v).real

    def test_rejects_nonpositive_weights(self):
        d = build(FreqGrid([0.5]), SampleSet([1, 2], 4))
        with pytest.raises(ValueError):
            weighted_gram(d, np.array([0.0]))


class TestGramDeriv:
    def test_exactly_hermitian(self, rng):
        s = SampleSet(np.sort(rng.choice(32, 8, replace=False)) + 1, 32)
        d = build(FreqGrid(np.sort(rng.uniform(0, TWO_PI, 6))), s)
        G = gram_deriv(d, rng.uniform(0.5, 2.0, 6), 3)
        np.testing.assert_array_equal(G, G.conj().T)

    def test_matches_finite_difference_over_random_instances(self):
        h = 1e-6
        for trial in range(20):
            gen = np.random.default_rng(100 + trial)
            M, N = 8, 5
            s = SampleSet(np.sort(gen.choice(40, M, replace=False)) + 1, 40)
            thetas = np.sort(gen.uniform(0, TWO_PI, N))
            dinv = gen.uniform(0.5, 2.0, N)
            n = int(gen.integers(N))
            d = build(FreqGrid(thetas), s)
            G = gram_deriv(d, dinv, n)

            def gram_at(offset):
                shifted = thetas.copy()
                shifted[n] += offset
                return weighted_gram(build(FreqGrid(np.mod(shifted, TWO_PI)), s), dinv)

            fd = (gram_at(h) - gram_at(-h)) / (2 * h)
            err = np.abs(G - fd).max() / np.abs(fd).max()
            assert err <= 1e-5

    def test_depends_only_on_its_own_atom(self, rng):
        s = SampleSet(np.sort(rng.choice(32, 7, replace=False)) + 1, 32)
        thetas = np.sort(rng.uniform(0, TWO_PI, 5))
        dinv = rng.uniform(0.5, 2.0, 5)
        G = gram_deriv(build(FreqGrid(thetas), s), dinv, 2)
        moved = thetas.copy()
        moved[4] = np.mod(moved[4] + 0.3, TWO_PI)
        G_moved = gram_deriv(build(FreqGrid(moved), s), dinv, 2)
        np.testing.assert_array_equal(G, G_moved)

    def test_rejects_bad_index(self):
        d = build(FreqGrid([0.5]), SampleSet([1, 2], 4))
        with pytest.raises(ValueError):
            gram_deriv(d, np.array([1.0]), 1)
