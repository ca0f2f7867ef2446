"""Singular spectrum analysis: Hankel embedding, eigendecomposition of the
lagged covariance, and reconstruction by anti-diagonal averaging.

The decomposition eigendecomposes C = W W^T where W is the l x p trajectory
matrix of the series (p = m - l + 1). Reconstruction of a component subset
projects W onto the chosen eigenvectors and Hankelizes the result; both steps
are done with FFT correlations so the l x p matrix is never materialized for
long series.
"""

import logging
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import fftconvolve, find_peaks

from .validation import check_array

logger = logging.getLogger(__name__)

_BLOCK = 65536


@dataclass(frozen=True)
class TrajectoryMatrix:
    """Hankel matrix of lagged subsequences: W[i][j] = series[i + j]."""

    W: np.ndarray
    l: int
    m: int

    @property
    def p(self):
        return self.m - self.l + 1


@dataclass(frozen=True)
class SsaDecomposition:
    """Eigenpairs of the trajectory covariance, sorted by decreasing eigenvalue.

    ``eigenvectors`` columns are orthonormal; the source series is retained so
    components can be reconstructed later.
    """

    l: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    series: np.ndarray
    degenerate: bool = False

    def energy_share(self):
        total = self.eigenvalues.sum()
        if total <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / total


def _check_embedding(series, l):
    series = check_array(series, "series", ndim=1)
    m = series.shape[0]
    if not 1 <= l <= m:
        raise ValueError(f"embedding dimension l={l} out of range [1, {m}]")
    return series, m


def hankel_embed(series, l):
    """Build the l x (m - l + 1) trajectory matrix of a series."""
    series, m = _check_embedding(series, l)
    W = np.ascontiguousarray(sliding_window_view(series, m - l + 1))
    return TrajectoryMatrix(W=W, l=l, m=m)


def default_embedding_dim(sample_rate_hz, step_rate_hz=1.75):
    """Embedding dimension capturing roughly one gait cycle per column."""
    return max(2, int(round(1.2 * sample_rate_hz / step_rate_hz)))


def ssa_decompose(series, l):
    """Eigendecompose the trajectory covariance W W^T of a series.

    A constant-zero series is allowed; it yields all-zero eigenvalues and is
    flagged via ``degenerate``.
    """
    series, m = _check_embedding(series, l)
    p = m - l + 1
    lagged = sliding_window_view(series, l)  # p x l view, no copy
    C = np.zeros((l, l))
    for i in range(0, p, _BLOCK):
        block = np.ascontiguousarray(lagged[i : i + _BLOCK])
        C += block.T @ block
    eigvals, eigvecs = np.linalg.eigh(C)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    degenerate = eigvals[0] <= 0.0
    if degenerate:
        logger.warning("ssa_decompose: zero-energy series, all eigenvalues are 0")
    return SsaDecomposition(
        l=l,
        eigenvalues=eigvals,
        eigenvectors=eigvecs,
        series=series.copy(),
        degenerate=degenerate,
    )


def _antidiagonal_counts(l, p):
    # number of (i, j) pairs with i + j = t, 0 <= i < l, 0 <= j < p
    m = l + p - 1
    t = np.arange(m)
    return np.minimum.reduce([t + 1, np.full(m, l), np.full(m, p), m - t])


def ssa_reconstruct(decomp, component_indices):
    """Reconstruct the series from a subset of elementary components.

    Selected elementary matrices u_i (u_i^T W) are summed and Hankelized by
    anti-diagonal averaging. The empty set reconstructs the zero series (with
    a warning).
    """
    indices = sorted(set(int(i) for i in component_indices))
    l = decomp.l
    series = decomp.series
    m = series.shape[0]
    if not indices:
        logger.warning("ssa_reconstruct: empty component set, returning zero series")
        return np.zeros(m)
    if indices[0] < 0 or indices[-1] >= l:
        raise ValueError(f"component indices must lie in [0, {l}), got {indices}")
    total = np.zeros(m)
    for k in indices:
        u = decomp.eigenvectors[:, k]
        # y[j] = sum_i u[i] * series[i + j]  (projection of W's columns)
        y = fftconvolve(series, u[::-1], mode="valid")
        # anti-diagonal sums of the elementary matrix u y^T
        total += fftconvolve(u, y, mode="full")
    return total / _antidiagonal_counts(l, m - l + 1)


def leading_components(eigenvalues, energy_share=0.9):
    """Indices of the smallest leading eigenvalue set covering the share."""
    total = float(np.sum(eigenvalues))
    if total <= 0:
        return list(range(1))
    cumulative = np.cumsum(eigenvalues) / total
    last = int(np.searchsorted(cumulative, energy_share)) + 1
    return list(range(min(last, len(eigenvalues))))


def peak_indices(series, min_separation_samples, threshold_k=0.0):
    """Local maxima above mean + k*std, thinned so the taller of two close
    peaks wins and spacing >= min_separation_samples."""
    series = check_array(series, "series", ndim=1)
    if len(series) == 0:
        return np.array([], dtype=int)
    std = series.std()
    if std <= 1e-12 * max(1.0, abs(series.mean())):
        return np.array([], dtype=int)  # constant series: no peaks
    height = series.mean() + threshold_k * std
    idx, _ = find_peaks(series, height=height, distance=max(1.0, min_separation_samples))
    return idx


def detect_peaks(series, sample_rate_hz, min_separation_s, threshold_k=0.0):
    """Peak times (seconds relative to the first sample) at sample resolution."""
    if not min_separation_s > 0:
        raise ValueError(f"min_separation_s must be positive, got {min_separation_s}")
    idx = peak_indices(series, min_separation_s * sample_rate_hz, threshold_k)
    return idx / sample_rate_hz
