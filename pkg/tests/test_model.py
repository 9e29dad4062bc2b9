"""Unit tests for the signal model and instance generation."""

import cmath

import numpy as np
import pytest

from linespec import (
    FullSignal,
    LineSpectrum,
    SampleSet,
    circular_distance,
    draw_sample_set,
    draw_spectrum,
    draw_spectrum_spaced,
    subsample,
    synthesize,
    wrap_angle,
)
from linespec.model import TWO_PI, instance_record, parse_instance


class TestSynthesize:
    def test_zero_frequency_gives_constant(self):
        spec = LineSpectrum([0.0], [1.0 + 0j])
        u = synthesize(spec, 4)
        np.testing.assert_array_equal(u.values, np.ones(4, dtype=complex))

    def test_pi_frequency_alternates_from_first_index(self):
        # Time index starts at l = 1, so exp(-1j*pi*l) = -1, 1, -1, 1.
        spec = LineSpectrum([np.pi], [1.0 + 0j])
        u = synthesize(spec, 4)
        np.testing.assert_allclose(u.values, [-1, 1, -1, 1], atol=1e-12)

    def test_two_component_mixture_matches_direct_evaluation(self):
        spec = LineSpectrum([0.3, 1.7], [1.0 + 0j, 1j])
        u = synthesize(spec, 8)
        expected = [
            sum(a * cmath.exp(-1j * w * l) for w, a in zip(spec.freqs, spec.amps))
            for l in range(1, 9)
        ]
        np.testing.assert_allclose(u.values, expected, rtol=1e-12)

    def test_linear_in_amplitudes(self, rng):
        freqs = rng.uniform(0, TWO_PI, size=3)
        a = rng.normal(size=3) + 1j * rng.normal(size=3)
        b = rng.normal(size=3) + 1j * rng.normal(size=3)
        u_sum = synthesize(LineSpectrum(freqs, a + b), 16).values
        u_parts = (synthesize(LineSpectrum(freqs, a), 16).values
                   + synthesize(LineSpectrum(freqs, b), 16).values)
        np.testing.assert_allclose(u_sum, u_parts, rtol=1e-12)

    def test_frequency_shift_by_two_pi_is_invisible(self):
        # Wrapped and unwrapped frequencies produce the same samples; the
        # type invariant forbids storing unwrapped values, so compare the
        # raw evaluations.
        w = 1.234
        ell = np.arange(1, 17)
        np.testing.assert_allclose(
            np.exp(-1j * w * ell), np.exp(-1j * (w + TWO_PI) * ell), atol=1e-11
        )

    def test_rejects_nonpositive_length(self):
        with pytest.raises(ValueError):
            synthesize(LineSpectrum([0.1], [1.0]), 0)


class TestLineSpectrum:
    def test_rejects_out_of_range_frequency(self):
        with pytest.raises(ValueError):
            LineSpectrum([TWO_PI], [1.0])

    def test_rejects_duplicate_frequencies(self):
        with pytest.raises(ValueError):
            LineSpectrum([0.5, 0.5], [1.0, 1.0])

    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            LineSpectrum([0.5, 0.6], [1.0])


class TestDrawSpectrum:
    def test_amplitudes_on_unit_circle(self):
        spec = draw_spectrum(3, None, np.random.default_rng(7))
        assert spec.K == 3
        assert np.all(spec.freqs >= 0) and np.all(spec.freqs < TWO_PI)
        np.testing.assert_allclose(np.abs(spec.amps), 1.0, rtol=1e-14)

    def test_single_component_never_rejects(self):
        spec = draw_spectrum(1, np.pi, np.random.default_rng(0))
        assert spec.K == 1

    def test_min_spacing_respected_over_many_draws(self):
        # Near the feasibility boundary (2 * 3.0 < 2*pi just barely), so
        # most raw draws are rejected and the constraint is load-bearing.
        gen = np.random.default_rng(42)
        for _ in range(200):
            spec = draw_spectrum(2, 3.0, gen)
            assert circular_distance(spec.freqs[0], spec.freqs[1]) >= 3.0

    def test_infeasible_spacing_raises(self):
        with pytest.raises(ValueError):
            draw_spectrum(4, np.pi, np.random.default_rng(0))

    def test_boundary_spacing_rejected_as_infeasible(self):
        # K * min_spacing must stay strictly below the circle length; at
        # equality only the measure-zero equispaced configuration works.
        with pytest.raises(ValueError):
            draw_spectrum(2, np.pi, np.random.default_rng(0))

    def test_fixed_seed_is_bit_reproducible(self):
        a = draw_spectrum(3, 0.1, np.random.default_rng(99))
        b = draw_spectrum(3, 0.1, np.random.default_rng(99))
        np.testing.assert_array_equal(a.freqs, b.freqs)
        np.testing.assert_array_equal(a.amps, b.amps)


class TestDrawSpectrumSpaced:
    @pytest.mark.parametrize("mu", [0.1, 2.0])
    def test_spacing_in_cycles(self, mu):
        spec = draw_spectrum_spaced(mu, 64, np.random.default_rng(3))
        gap = circular_distance(spec.freqs[0], spec.freqs[1])
        np.testing.assert_allclose(gap / TWO_PI, mu / 64, rtol=1e-12)

    def test_pair_synthesis_is_sum_of_components(self):
        spec = draw_spectrum_spaced(1.5, 64, np.random.default_rng(5))
        u = synthesize(spec, 32).values
        parts = sum(
            synthesize(LineSpectrum([w], [a]), 32).values
            for w, a in zip(spec.freqs, spec.amps)
        )
        np.testing.assert_allclose(u, parts, rtol=1e-12)

    def test_rejects_nonpositive_mu(self):
        with pytest.raises(ValueError):
            draw_spectrum_spaced(0.0, 64, np.random.default_rng(0))


class TestSampling:
    def test_full_sampling_reproduces_signal(self, rng):
        u = FullSignal(rng.normal(size=6) + 1j * rng.normal(size=6))
        s = SampleSet(np.arange(1, 7), 6)
        np.testing.assert_array_equal(subsample(u, s).y, u.values)

    def test_single_index_picks_that_sample(self):
        u = FullSignal(np.array([1.0, 2.0, 3.0], dtype=complex))
        meas = subsample(u, SampleSet([2], 3))
        np.testing.assert_array_equal(meas.y, [2.0])

    def test_draw_sample_set_reproducible(self):
        a = draw_sample_set(64, 20, np.random.default_rng(11))
        b = draw_sample_set(64, 20, np.random.default_rng(11))
        np.testing.assert_array_equal(a.indices, b.indices)
        assert a.M == 20
        assert np.all(np.diff(a.indices) > 0)

    def test_sample_set_validation(self):
        with pytest.raises(ValueError):
            SampleSet([0, 1], 4)
        with pytest.raises(ValueError):
            SampleSet([1, 1], 4)
        with pytest.raises(ValueError):
            SampleSet([1, 5], 4)
        with pytest.raises(ValueError):
            draw_sample_set(4, 5, np.random.default_rng(0))

    def test_subsample_rejects_foreign_sample_set(self):
        u = FullSignal(np.ones(4, dtype=complex))
        with pytest.raises(ValueError):
            subsample(u, SampleSet([1, 2], 8))


class TestAngleHelpers:
    def test_wrap_angle_range(self):
        np.testing.assert_allclose(wrap_angle(-0.5), TWO_PI - 0.5)
        assert wrap_angle(3.0) == 3.0

    def test_circular_distance_wraps(self):
        np.testing.assert_allclose(circular_distance(0.1, TWO_PI - 0.1), 0.2,
                                   atol=1e-12)
        assert circular_distance(1.0, 1.0) == 0.0


class TestInstanceSerialization:
    def test_round_trip(self):
        gen = np.random.default_rng(21)
        spec = draw_spectrum(3, None, gen)
        s = draw_sample_set(64, 20, gen)
        record = instance_record(spec, s, seed=17)
        assert set(record) == {"L", "K", "freqs", "amps_re", "amps_im",
                               "sample_indices", "seed"}
        spec2, s2 = parse_instance(record)
        np.testing.assert_allclose(spec2.freqs, spec.freqs, rtol=1e-15)
        np.testing.assert_allclose(spec2.amps, spec.amps, rtol=1e-15)
        np.testing.assert_array_equal(s2.indices, s.indices)
        assert s2.L == s.L
