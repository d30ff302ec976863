"""Recovery of sparse non-negative functions on the symmetric group from
partial Fourier information at the permutation representation M^lambda."""

__version__ = "0.1.0"
