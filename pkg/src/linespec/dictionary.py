"""Parametric dictionary of sampled complex exponentials.

Each atom is a complex exponential at a learnable angular frequency,
evaluated on the 1-based indices of a SampleSet.  Atoms are intentionally
left unnormalized (every entry has unit modulus), so coefficient magnitudes
are directly comparable with the generating amplitudes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SampleSet, TWO_PI, wrap_angle


@dataclass(frozen=True)
class FreqGrid:
    """The N frequency parameters of the dictionary atoms."""

    thetas: np.ndarray

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        if thetas.ndim != 1 or thetas.size == 0:
            raise ValueError("thetas must be a nonempty 1-D sequence")
        if np.any(thetas < 0.0) or np.any(thetas >= TWO_PI):
            raise ValueError("thetas must lie in [0, 2*pi)")
        object.__setattr__(self, "thetas", thetas)

    @property
    def N(self) -> int:
        return self.thetas.size


@dataclass(frozen=True)
class Dictionary:
    """An M x N matrix whose columns are atoms in grid order."""

    matrix: np.ndarray
    sample_set: SampleSet
    grid: FreqGrid

    def __post_init__(self):
        if self.matrix.shape != (self.sample_set.M, self.grid.N):
            raise ValueError("matrix shape must be (M, N)")


def atoms_matrix(thetas: np.ndarray, indices: np.ndarray) -> np.ndarray:
    """Evaluate atoms for all frequencies at once: entry (j, n) = exp(-1j*thetas[n]*m_j)."""
    m = np.asarray(indices, dtype=float)
    return np.exp(-1j * np.outer(m, np.asarray(thetas, dtype=float)))


def atom(theta: float, s: SampleSet) -> np.ndarray:
    """One sampled complex exponential: entry j = exp(-1j * theta * m_j)."""
    return np.exp(-1j * theta * s.indices.astype(float))


def atom_deriv(theta: float, s: SampleSet) -> np.ndarray:
    """Elementwise derivative of ``atom`` with respect to theta.

    Entry j equals (-1j * m_j) * exp(-1j * theta * m_j).
    """
    m = s.indices.astype(float)
    return (-1j * m) * np.exp(-1j * theta * m)


def build(grid: FreqGrid, s: SampleSet) -> Dictionary:
    """Assemble the dictionary matrix with columns in grid order."""
    return Dictionary(atoms_matrix(grid.thetas, s.indices), s, grid)


def uniform_grid(n_atoms: int) -> FreqGrid:
    """N equispaced frequencies 2*pi*n/N for n = 0..N-1."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be at least 1")
    return FreqGrid(TWO_PI * np.arange(n_atoms) / n_atoms)


def weighted_gram(dictionary: Dictionary, dinv: np.ndarray) -> np.ndarray:
    """Weighted outer-product sum X = sum_n dinv[n] * a_n a_n^H.

    Parameters
    ----------
    dictionary : Dictionary
        The current atoms.
    dinv : np.ndarray
        Strictly positive weights, one per atom (the inverse of the
        reweighting diagonal).

    Returns
    -------
    np.ndarray
        Hermitian positive semidefinite M x M matrix.
    """
    dinv = np.asarray(dinv, dtype=float)
    if dinv.shape != (dictionary.grid.N,) or np.any(dinv <= 0.0):
        raise ValueError("dinv must be strictly positive with one entry per atom")
    A = dictionary.matrix
    return (A * dinv) @ A.conj().T


def gram_deriv(dictionary: Dictionary, dinv: np.ndarray, n: int) -> np.ndarray:
    """Derivative of ``weighted_gram`` with respect to the n-th frequency.

    Equals dinv[n] * (a'_n a_n^H + a_n a'_n^H), which is Hermitian by
    construction.
    """
    if not 0 <= n < dictionary.grid.N:
        raise ValueError("atom index out of range")
    a = dictionary.matrix[:, n]
    da = atom_deriv(dictionary.grid.thetas[n], dictionary.sample_set)
    P = np.outer(da, a.conj())
    return dinv[n] * (P + P.conj().T)


__all__ = [
    "FreqGrid",
    "Dictionary",
    "atom",
    "atom_deriv",
    "atoms_matrix",
    "build",
    "uniform_grid",
    "weighted_gram",
    "gram_deriv",
    "wrap_angle",
]
