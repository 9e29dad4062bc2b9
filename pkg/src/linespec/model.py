"""Ground-truth signal model: sparse mixtures of complex sinusoids.

A signal of length L is a sum of K complex exponentials with angular
frequencies in [0, 2*pi) and complex amplitudes.  Measurements are obtained
by sampling the signal at a random subset of the time indices 1..L.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

# Bound on rejection-sampling rounds when a minimum frequency spacing is
# requested; exceeding it signals an infeasible spacing.
MAX_REJECTION_ROUNDS = 1000


def wrap_angle(theta):
    """Wrap angles into the canonical interval [0, 2*pi)."""
    return np.mod(theta, TWO_PI)


def circular_distance(a, b):
    """Distance between angles on the circle, in [0, pi].

    Works elementwise on arrays.
    """
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


@dataclass(frozen=True)
class LineSpectrum:
    """K angular frequencies in [0, 2*pi) with complex amplitudes."""

    freqs: np.ndarray
    amps: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs, dtype=float)
        amps = np.asarray(self.amps, dtype=complex)
        if freqs.ndim != 1 or amps.ndim != 1 or freqs.size != amps.size:
            raise ValueError("freqs and amps must be 1-D with equal length")
        if freqs.size == 0:
            raise ValueError("at least one component required")
        if np.any(freqs < 0.0) or np.any(freqs >= TWO_PI):
            raise ValueError("frequencies must lie in [0, 2*pi)")
        if len(np.unique(freqs)) != freqs.size:
            raise ValueError("frequencies must be pairwise distinct")
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "amps", amps)

    @property
    def K(self) -> int:
        return self.freqs.size


@dataclass(frozen=True)
class FullSignal:
    """A complex signal observed on the time indices 1..L."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("values must be a nonempty 1-D sequence")
        object.__setattr__(self, "values", values)

    @property
    def L(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SampleSet:
    """Strictly increasing 1-based sample indices drawn from {1, ..., L}."""

    indices: np.ndarray
    L: int

    def __post_init__(self):
        indices = np.asarray(self.indices, dtype=np.int64)
        if indices.ndim != 1 or indices.size == 0:
            raise ValueError("indices must be a nonempty 1-D sequence")
        if np.any(np.diff(indices) <= 0):
            raise ValueError("indices must be strictly increasing")
        if indices[0] < 1 or indices[-1] > self.L:
            raise ValueError("indices must lie within [1, L]")
        object.__setattr__(self, "indices", indices)

    @property
    def M(self) -> int:
        return self.indices.size


@dataclass(frozen=True)
class Measurement:
    """Observed values of a signal at the indices of a SampleSet."""

    y: np.ndarray
    sample_set: SampleSet

    def __post_init__(self):
        y = np.asarray(self.y, dtype=complex)
        if y.shape != (self.sample_set.M,):
            raise ValueError("y must have one entry per sample index")
        object.__setattr__(self, "y", y)


def synthesize(spectrum: LineSpectrum, L: int) -> FullSignal:
    """Evaluate the sinusoid mixture on the time indices l = 1..L.

    Parameters
    ----------
    spectrum : LineSpectrum
        Frequencies and complex amplitudes of the components.
    L : int
        Signal length, at least 1.

    Returns
    -------
    FullSignal
        values[l-1] = sum_k amps[k] * exp(-1j * freqs[k] * l).
    """
    if L < 1:
        raise ValueError("L must be at least 1")
    ell = np.arange(1, L + 1, dtype=float)
    values = np.exp(-1j * np.outer(ell, spectrum.freqs)) @ spectrum.amps
    return FullSignal(values)


def draw_spectrum(K: int, min_spacing: float | None, rng: np.random.Generator) -> LineSpectrum:
    """Draw K frequencies uniformly on [0, 2*pi) with unit-circle amplitudes.

    When ``min_spacing`` is given, the whole frequency set is redrawn until
    all pairwise circular distances are at least ``min_spacing``.

    Parameters
    ----------
    K : int
        Number of components, at least 1.
    min_spacing : float or None
        Minimum pairwise circular distance in radians, or None for no
        constraint.
    rng : numpy.random.Generator
        Source of randomness; fixing its seed makes the draw reproducible.

    Raises
    ------
    ValueError
        If the spacing constraint is infeasible or no admissible draw is
        found within the rejection-round budget.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if min_spacing is not None and K * min_spacing >= TWO_PI:
        raise ValueError("K * min_spacing must be smaller than 2*pi")

    for _ in range(MAX_REJECTION_ROUNDS):
        freqs = rng.uniform(0.0, TWO_PI, size=K)
        if len(np.unique(freqs)) != K:
            continue
        if min_spacing is not None and K > 1:
            gaps = circular_distance(freqs[:, None], freqs[None, :])
            gaps[np.diag_indices(K)] = np.inf
            if gaps.min() < min_spacing:
                continue
        phases = rng.uniform(0.0, TWO_PI, size=K)
        return LineSpectrum(freqs, np.exp(1j * phases))
    raise ValueError(
        f"no admissible frequency set after {MAX_REJECTION_ROUNDS} rejection rounds"
    )


def draw_spectrum_spaced(mu: float, L: int, rng: np.random.Generator) -> LineSpectrum:
    """Draw a two-component spectrum with spacing mu/L cycles.

    The first frequency is uniform on [0, 2*pi); the second sits at a
    circular offset of 2*pi*mu/L below it.  Amplitudes are unit-modulus
    with uniform phases.
    """
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    w1 = rng.uniform(0.0, TWO_PI)
    w2 = wrap_angle(w1 - TWO_PI * mu / L)
    phases = rng.uniform(0.0, TWO_PI, size=2)
    return LineSpectrum(np.array([w1, w2]), np.exp(1j * phases))


def draw_sample_set(L: int, M: int, rng: np.random.Generator) -> SampleSet:
    """Select M distinct indices uniformly from {1, ..., L}, sorted."""
    if not 1 <= M <= L:
        raise ValueError("M must satisfy 1 <= M <= L")
    indices = np.sort(rng.choice(L, size=M, replace=False)) + 1
    return SampleSet(indices, L)


def subsample(u: FullSignal, s: SampleSet) -> Measurement:
    """Read the signal at the sample indices: y[j] = u.values[s.indices[j]]."""
    if s.L != u.L:
        raise ValueError("sample set was drawn for a different signal length")
    return Measurement(u.values[s.indices - 1], s)


def instance_record(spectrum: LineSpectrum, s: SampleSet, seed: int) -> dict:
    """Serialize a trial instance to a plain JSON-compatible record."""
    return {
        "L": int(s.L),
        "K": int(spectrum.K),
        "freqs": [float(w) for w in spectrum.freqs],
        "amps_re": [float(a.real) for a in spectrum.amps],
        "amps_im": [float(a.imag) for a in spectrum.amps],
        "sample_indices": [int(i) for i in s.indices],
        "seed": int(seed),
    }


def parse_instance(record: dict) -> tuple[LineSpectrum, SampleSet]:
    """Rebuild (LineSpectrum, SampleSet) from an instance record."""
    amps = np.asarray(record["amps_re"], dtype=float) + 1j * np.asarray(
        record["amps_im"], dtype=float
    )
    spectrum = LineSpectrum(np.asarray(record["freqs"], dtype=float), amps)
    s = SampleSet(np.asarray(record["sample_indices"], dtype=np.int64), int(record["L"]))
    if spectrum.K != int(record["K"]):
        raise ValueError("inconsistent component count in instance record")
    return spectrum, s
