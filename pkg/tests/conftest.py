"""Shared builders for solver-level tests."""

import numpy as np
import pytest

from linespec import (
    FreqGrid,
    SampleSet,
    draw_sample_set,
    draw_spectrum,
    make_weights,
    subsample,
    synthesize,
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_instance(seed, L=32, M=12, K=2, min_spacing=None):
    """A random noiseless measurement with its generating spectrum."""
    gen = np.random.default_rng(seed)
    spectrum = draw_spectrum(K, min_spacing, gen)
    u = synthesize(spectrum, L)
    s = draw_sample_set(L, M, gen)
    return spectrum, u, s, subsample(u, s)


def random_weighted_system(seed, M=8, N=16, eps=0.1):
    """Random grid, sample set, weights and target for solver-op tests.

    The coefficient magnitudes behind the weights are O(1), so the weighted
    system is comfortably conditioned.
    """
    gen = np.random.default_rng(seed)
    L = 4 * N
    s = SampleSet(np.sort(gen.choice(L, size=M, replace=False)) + 1, L)
    grid = FreqGrid(np.sort(gen.uniform(0.0, 2.0 * np.pi, size=N)))
    z_ref = gen.normal(0.4, 0.3, size=N) + 1j * gen.normal(0.0, 0.3, size=N)
    w = make_weights(z_ref, eps)
    y = gen.normal(size=M) + 1j * gen.normal(size=M)
    return grid, s, w, y
