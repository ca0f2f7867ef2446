"""Class covariance pooling and shrinkage towards scaled identity.

Per-window covariances are trace-normalized before averaging so long or
high-amplitude windows do not dominate the class estimate. Shrinkage follows
C* = (1 - alpha) C + alpha * mu * I with mu = trace(C) / n. The intensity
alpha is the Ledoit-Wolf error statistic (variance of the pooled estimate)
normalized by the estimate's total energy, clipped to [0, 1]: it vanishes
when windows are plentiful and consistent, grows with noise and outliers, and
is 1 by convention when only a single observation is available.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .signals import WindowSet
from .validation import check_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassCovariance:
    """Pooled covariance of one class, optionally shrunk towards mu * I."""

    C: np.ndarray
    n_channels: int
    n_windows: int
    shrinkage_alpha: float
    target_scale: float  # mu = trace(C_raw) / n

    def __post_init__(self):
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError(f"covariance must be square, got shape {C.shape}")
        if not np.allclose(C, C.T, atol=1e-10):
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "C", C)


def window_covariances(windows):
    """Trace-normalized covariance of each window (mean-centred per channel)."""
    w = check_array(windows, "windows", ndim=3)
    centered = w - w.mean(axis=1, keepdims=True)
    covs = np.einsum("mwi,mwj->mij", centered, centered)
    traces = np.einsum("mii->m", covs)
    dead = traces <= 0
    if np.any(dead):
        logger.warning("window_covariances: %d zero-energy windows", int(dead.sum()))
        traces = np.where(dead, 1.0, traces)
    covs /= traces[:, None, None]
    return covs


def _select_class(windows, class_label):
    if isinstance(windows, WindowSet):
        if class_label is None:
            return windows.windows
        tensor = windows.class_windows(class_label)
        if tensor.shape[0] == 0:
            raise ValueError(f"no windows of class {class_label!r}")
        return tensor
    return check_array(windows, "windows", ndim=3)


def _pool(covs):
    C = covs.mean(axis=0)
    dead = np.flatnonzero(np.abs(np.diag(C)) <= 1e-15)
    if len(dead):
        logger.warning("class covariance has dead channels %s", dead.tolist())
    return C


def class_covariance(windows, class_label=None):
    """Unshrunk pooled class covariance from a WindowSet or window tensor."""
    tensor = _select_class(windows, class_label)
    if tensor.shape[0] < 2:
        raise ValueError(f"need >= 2 windows for a class covariance, got {tensor.shape[0]}")
    covs = window_covariances(tensor)
    C = _pool(covs)
    n = C.shape[0]
    return ClassCovariance(
        C=C,
        n_channels=n,
        n_windows=tensor.shape[0],
        shrinkage_alpha=0.0,
        target_scale=float(np.trace(C)) / n,
    )


def relative_error_alpha(obs_norms_sq, mean_cov, n_obs):
    """Shrinkage intensity = estimated variance of the pooled covariance over
    its squared Frobenius norm, clipped to [0, 1]; 1 when n_obs < 2."""
    if n_obs < 2:
        return 1.0
    energy = float(np.sum(mean_cov**2))
    if energy <= 0:
        return 1.0
    scatter = float(np.sum(obs_norms_sq)) - n_obs * energy
    b2 = max(scatter, 0.0) / (n_obs * (n_obs - 1))
    return float(np.clip(b2 / energy, 0.0, 1.0))


def shrink(C, alpha, mu=None):
    """Convex combination (1 - alpha) C + alpha mu I."""
    n = C.shape[0]
    if mu is None:
        mu = float(np.trace(C)) / n
    return (1.0 - alpha) * C + alpha * mu * np.eye(n)


def window_alpha(window):
    """Per-window shrinkage intensity from its time samples.

    The covariance of one window is estimated from w samples in n dimensions
    with w typically well below n^2, which is exactly the sample-starved
    regime shrinkage targets. The intensity is the estimated variance of the
    window's covariance over its squared Frobenius norm (clipped to [0, 1];
    1 by convention below 2 samples), so it vanishes as w grows and saturates
    for single-sample windows.
    """
    w = window.shape[0]
    if w < 2:
        return 1.0
    centered = window - window.mean(axis=0)
    m = centered.T @ centered / w
    energy = float(np.sum(m**2))
    if energy <= 0:
        return 1.0
    fourth = float(np.mean(np.sum(centered**2, axis=1) ** 2))
    b2 = max(fourth - energy, 0.0) / (w - 1)
    return float(np.clip(b2 / energy, 0.0, 1.0))


def ledoit_wolf_shrink(windows, class_label=None, force_alpha=None):
    """Shrunk pooled class covariance with automatically estimated intensity.

    The intensity is the mean per-window sample-level statistic (see
    :func:`window_alpha`); ``force_alpha`` pins it (0 reproduces the unshrunk
    estimate).
    """
    tensor = _select_class(windows, class_label)
    if tensor.shape[0] < 1:
        raise ValueError("need at least one window")
    covs = window_covariances(tensor)
    C = _pool(covs)
    n = C.shape[0]
    mu = float(np.trace(C)) / n
    if force_alpha is not None:
        alpha = float(np.clip(force_alpha, 0.0, 1.0))
    else:
        centered = tensor - tensor.mean(axis=1, keepdims=True)
        w = tensor.shape[1]
        if w < 2:
            alpha = 1.0
        else:
            moments = np.einsum("kwi,kwj->kij", centered, centered) / w
            energy = np.einsum("kij,kij->k", moments, moments)
            fourth = np.mean(np.einsum("kwi,kwi->kw", centered, centered) ** 2, axis=1)
            dead = energy <= 0
            energy = np.where(dead, 1.0, energy)
            b2 = np.maximum(fourth - energy, 0.0) / (w - 1)
            alphas = np.where(dead, 1.0, np.clip(b2 / energy, 0.0, 1.0))
            alpha = float(np.mean(alphas))
    return ClassCovariance(
        C=shrink(C, alpha, mu),
        n_channels=n,
        n_windows=tensor.shape[0],
        shrinkage_alpha=alpha,
        target_scale=mu,
    )


def ledoit_wolf_samples(X):
    """Shrunk covariance of sample vectors (rows), same intensity statistic.

    Used for LDA's pooled covariance; X must already be centred per class.
    Returns (covariance, alpha).
    """
    X = check_array(X, "X", ndim=2)
    n = X.shape[0]
    S = X.T @ X / max(n, 1)
    norms_sq = np.sum(X**2, axis=1) ** 2  # ||x x^T||_F^2 = ||x||^4
    alpha = relative_error_alpha(norms_sq, S, n)
    return shrink(S, alpha), alpha
