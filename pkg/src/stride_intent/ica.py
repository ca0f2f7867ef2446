"""PCA, natural-gradient infomax ICA and motion-component removal.

The ICA is the logistic-nonlinearity infomax rule on PCA-whitened data:
delta U ~ (I + (1 - 2 g(UX)) (UX)^T) U, full-batch, with the step size halved
whenever the entropy objective oscillates. Runs are deterministic given the
seed. Motion components are scored by the fraction of their spectral power
that sits on the gait-frequency harmonics.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .signals import MultichannelSignal
from .validation import check_array

logger = logging.getLogger(__name__)


def pca(data, n_components):
    """Principal components of a samples x channels array.

    Returns (components, scores, explained_variance): components is a
    channels x k orthonormal matrix of top covariance eigenvectors, scores the
    mean-centred projections, explained_variance the nonincreasing eigenvalue
    sequence (rank-deficient data simply trails zeros).
    """
    data = check_array(data, "data", ndim=2)
    n, c = data.shape
    if not 1 <= n_components <= c:
        raise ValueError(f"n_components must be in [1, {c}], got {n_components}")
    centered = data - data.mean(axis=0)
    cov = centered.T @ centered / max(n - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:n_components]
    components = eigvecs[:, order]
    explained = np.maximum(eigvals[order], 0.0)
    # deterministic sign: largest-magnitude loading is positive
    flips = np.sign(components[np.argmax(np.abs(components), axis=0), np.arange(components.shape[1])])
    flips[flips == 0] = 1.0
    components = components * flips
    scores = centered @ components
    return components, scores, explained


@dataclass(frozen=True)
class IcaModel:
    """Fitted ICA: whitener, learned rotation and their pseudo-inverse mixing."""

    mean: np.ndarray
    whitener: np.ndarray  # n_components x channels
    unmixing: np.ndarray  # n_components x n_components, on whitened data
    mixing: np.ndarray  # channels x n_components
    n_iter: int
    final_grad_norm: float
    converged: bool
    seed: int

    @property
    def n_components(self):
        return self.whitener.shape[0]

    @property
    def composite_unmixing(self):
        """Channels-to-components map: unmixing @ whitener."""
        return self.unmixing @ self.whitener

    def activations(self, data):
        data = _signal_data(data)
        return (data - self.mean) @ self.composite_unmixing.T


def _signal_data(signal_or_array):
    if isinstance(signal_or_array, MultichannelSignal):
        return signal_or_array.data
    return np.asarray(signal_or_array, dtype=float)


def _entropy_objective(y, logdet):
    # infomax objective: log|det U| + E[ log g'(y) ], g logistic
    # log g'(u) = -softplus(u) - softplus(-u) = -(|u| + 2 log1p(exp(-|u|)))
    a = np.abs(y)
    penalty = a + 2.0 * np.log1p(np.exp(-a))
    return logdet - float(np.mean(np.sum(penalty, axis=1)))


def ica_infomax(
    signal,
    n_components=None,
    max_iter=512,
    seed=0,
    tol=1e-6,
    lr0=1e-3,
    max_fit_samples=None,
):
    """Fit infomax ICA on a signal or samples x channels array.

    The data should already be bandpass-filtered (documented requirement, not
    enforced). Statistics can be fitted on a deterministic subsample
    (``max_fit_samples``) to bound runtime on long recordings; the model still
    transforms full-length data. Non-convergence within ``max_iter`` is
    flagged, not fatal.
    """
    data = _signal_data(signal)
    data = check_array(data, "signal", ndim=2)
    n, c = data.shape
    if n < 20 * c:
        raise ValueError(f"ica_infomax needs >= 20 x channels samples, got {n} for {c} channels")
    k = c if n_components is None else int(n_components)
    if not 1 <= k <= c:
        raise ValueError(f"n_components must be in [1, {c}], got {k}")
    mean = data.mean(axis=0)
    fit = data - mean
    if max_fit_samples is not None and n > max_fit_samples:
        stride = int(np.ceil(n / max_fit_samples))
        fit = fit[::stride]
    cov = fit.T @ fit / max(fit.shape[0] - 1, 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:k]
    top = eigvals[order]
    if top[-1] <= 1e-12 * max(top[0], 1e-300):
        raise ValueError(
            f"rank-deficient data: cannot whiten {k} components (reduce n_components)"
        )
    whitener = (eigvecs[:, order] / np.sqrt(top)).T  # k x c
    z = fit @ whitener.T

    rng = np.random.default_rng(seed)
    u, _ = np.linalg.qr(rng.standard_normal((k, k)))
    lr = lr0
    n_fit = z.shape[0]
    eye = np.eye(k)
    sign, logdet = np.linalg.slogdet(u)
    y = z @ u.T
    obj = _entropy_objective(y, logdet)
    grad_norm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        gy = 1.0 / (1.0 + np.exp(-y))
        g = eye + (1.0 - 2.0 * gy).T @ y / n_fit
        grad_norm = float(np.linalg.norm(g) / k)
        if grad_norm < tol:
            break
        u_next = u + lr * g @ u
        sign, logdet_next = np.linalg.slogdet(u_next)
        if sign == 0 or not np.isfinite(logdet_next):  # singular candidate
            lr = max(lr / 2.0, 1e-6)
            continue
        y_next = z @ u_next.T
        obj_next = _entropy_objective(y_next, logdet_next)
        if obj_next < obj:
            lr = max(lr / 2.0, 1e-6)  # oscillation: halve and retry from u
            continue
        u, y, obj, logdet = u_next, y_next, obj_next, logdet_next
        lr = min(lr * 1.25, 0.5)
    converged = grad_norm < tol
    if not converged:
        logger.warning(
            "ica_infomax did not converge: grad norm %.3g after %d iterations",
            grad_norm,
            it,
        )
    composite = u @ whitener
    mixing = np.linalg.pinv(composite)
    return IcaModel(
        mean=mean,
        whitener=whitener,
        unmixing=u,
        mixing=mixing,
        n_iter=it,
        final_grad_norm=grad_norm,
        converged=converged,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# motion-component scoring and removal


@dataclass(frozen=True)
class RejectionReport:
    component_scores: np.ndarray
    rejected: tuple
    rule: str


def score_motion_components(
    model,
    signal,
    step_freq_hz,
    n_harmonics=4,
    band_hz=0.3,
    threshold=0.5,
    manual_override=None,
):
    """Score components by spectral power on gait-frequency harmonics.

    Score = power in the union of [h*f - band, h*f + band] for h = 1..4 over
    the component's total power. Components scoring above the threshold are
    proposed for rejection; a manual override list is honored verbatim
    instead of the heuristic.
    """
    if not step_freq_hz > 0:
        raise ValueError(f"step_freq_hz must be positive, got {step_freq_hz}")
    acts = model.activations(signal)
    fs = signal.sample_rate_hz
    n = acts.shape[0]
    freqs = np.fft.rfftfreq(n, d=1.0 / fs)
    power = np.abs(np.fft.rfft(acts - acts.mean(axis=0), axis=0)) ** 2
    in_band = np.zeros(len(freqs), dtype=bool)
    for h in range(1, n_harmonics + 1):
        centre = h * step_freq_hz
        in_band |= np.abs(freqs - centre) <= band_hz
    total = power.sum(axis=0)
    total[total == 0] = 1.0
    scores = power[in_band].sum(axis=0) / total
    if manual_override is not None:
        rejected = tuple(sorted(set(int(i) for i in manual_override)))
        rule = f"manual override: components {list(rejected)}"
    else:
        rejected = tuple(int(i) for i in np.flatnonzero(scores > threshold))
        rule = (
            f"score > {threshold} with score = power fraction in "
            f"[h*{step_freq_hz:g} Hz +/- {band_hz:g} Hz], h = 1..{n_harmonics}"
        )
    for i in rejected:
        if not 0 <= i < model.n_components:
            raise ValueError(f"rejected component {i} out of range [0, {model.n_components})")
    return RejectionReport(component_scores=scores, rejected=rejected, rule=rule)


def remove_components(signal, model, rejected):
    """Reconstruct the signal without the rejected components.

    Removing nothing reproduces the projection onto the component subspace
    (the identity when n_components equals the channel count); removal is a
    linear projection and therefore idempotent.
    """
    rejected = sorted(set(int(i) for i in rejected))
    k = model.n_components
    for i in rejected:
        if not 0 <= i < k:
            raise ValueError(f"component index {i} out of range [0, {k})")
    if len(rejected) == k:
        raise ValueError("cannot reject all components")
    keep = [i for i in range(k) if i not in rejected]
    data = _signal_data(signal)
    acts = (data - model.mean) @ model.composite_unmixing.T
    clean = acts[:, keep] @ model.mixing[:, keep].T + model.mean
    if isinstance(signal, MultichannelSignal):
        return MultichannelSignal(
            sample_rate_hz=signal.sample_rate_hz,
            start_time_s=signal.start_time_s,
            channel_names=signal.channel_names,
            data=clean,
        )
    return clean


def save_ica_report(report, path):
    rejected = set(report.rejected)
    with open(path, "w", newline="") as fh:
        fh.write("component,score,rejected\n")
        for i, score in enumerate(report.component_scores):
            fh.write(f"{i},{score:.17g},{int(i in rejected)}\n")
