"""Common spatial patterns via the generalized eigenproblem, with normalized
log-variance features and one-vs-one banks for the three-class problem.

The generalized problem Ca s = lambda Cb s is solved by whitening the sum:
with P the inverse square root of (Ca + Cb), the eigenvectors V of P Ca P^T
give filters P^T V, which automatically satisfy s^T (Ca + Cb) s = 1. Kept
components are the k/2 largest- and k/2 smallest-lambda filters, reordered by
|log lambda| (both spectrum ends are discriminative). Patterns - what
topographic maps display - are the columns of the inverse-transpose filter
matrix, equal to (Ca + Cb) W.
"""

import logging
from dataclasses import dataclass

import numpy as np

from .covariance import class_covariance, ledoit_wolf_shrink
from .signals import SCHEME_LABELS, LabelScheme, WindowSet
from .validation import check_array

logger = logging.getLogger(__name__)

LOG_EPS = 1e-12

#: Class pairs for the one-vs-one three-class decomposition, in bank order.
THREE_CLASS_PAIRS = (
    ("slow_to_fast", "non_adapt"),
    ("fast_to_slow", "non_adapt"),
    ("slow_to_fast", "fast_to_slow"),
)


@dataclass(frozen=True)
class SpatialFilterBank:
    """CSP filters for one class pair, ordered by discriminability."""

    filters: np.ndarray  # n_channels x k
    eigenvalues: np.ndarray  # k, generalized eigenvalues lambda
    patterns: np.ndarray  # n_channels x k
    class_pair: tuple
    no_discrimination: bool = False

    @property
    def n_components(self):
        return self.filters.shape[1]

    @property
    def n_channels(self):
        return self.filters.shape[0]


def csp_solve(ca, cb, k, flag_tol=0.1):
    """Solve Ca s = lambda Cb s and keep the k most discriminative filters.

    ``k`` must be even: k/2 filters from each end of the eigenvalue spectrum,
    reordered by |log lambda| nonincreasing (ties to the larger lambda). A
    non-positive-definite sum (possible only unshrunk) raises an error
    advising shrinkage. A bank whose eigenvalues are all close to 1 is
    flagged as carrying no discrimination.
    """
    A, B = ca.C, cb.C
    if A.shape != B.shape:
        raise ValueError(f"covariance shapes differ: {A.shape} vs {B.shape}")
    n = A.shape[0]
    if k % 2 != 0 or not 2 <= k <= n:
        raise ValueError(f"k must be even and in [2, {n}], got {k}")
    S = A + B
    d, E = np.linalg.eigh(S)
    if d[0] <= 1e-12 * max(d[-1], 1e-300):
        raise ValueError(
            "Ca + Cb is not positive definite; use Ledoit-Wolf shrinkage "
            "(ledoit_wolf_shrink) before solving"
        )
    P = (E / np.sqrt(d)).T  # inverse square root: P S P^T = I
    M = P @ A @ P.T
    M = (M + M.T) / 2.0
    mu, V = np.linalg.eigh(M)  # ascending; mu = lambda / (1 + lambda) in [0, 1]
    W_full = P.T @ V
    mu_c = np.clip(mu, 1e-15, 1.0 - 1e-15)
    lam = mu_c / (1.0 - mu_c)
    candidates = list(range(k // 2)) + list(range(n - k // 2, n))
    # |log lambda| quantized so fp noise cannot flip genuine ties
    order = sorted(
        candidates,
        key=lambda i: (-round(abs(np.log(lam[i])), 9), -lam[i]),
    )
    filters = W_full[:, order]
    eigenvalues = lam[order]
    patterns_full = S @ W_full  # = inverse-transpose of W_full
    patterns = patterns_full[:, order]
    no_disc = bool(np.max(np.abs(np.log(lam[order]))) < flag_tol)
    if no_disc:
        logger.warning(
            "csp_solve: no discrimination between %s (max |log lambda| < %g)",
            getattr(ca, "class_pair", "classes"),
            flag_tol,
        )
    return SpatialFilterBank(
        filters=filters,
        eigenvalues=eigenvalues,
        patterns=patterns,
        class_pair=("a", "b"),
        no_discrimination=no_disc,
    )


def _bank_with_pair(bank, pair):
    return SpatialFilterBank(
        filters=bank.filters,
        eigenvalues=bank.eigenvalues,
        patterns=bank.patterns,
        class_pair=pair,
        no_discrimination=bank.no_discrimination,
    )


#: Eigenvalue floor for the unshrunk pipeline arm: ICA removal leaves the
#: cleaned data rank-deficient, so plain CSP needs a numerical floor to
#: whiten. Null directions land at lambda ~ 1 and are never selected.
UNSHRUNK_FLOOR = 1e-6


def fit_bank(windows, class_a, class_b, k, shrinkage=True, force_alpha=None, unshrunk_floor=UNSHRUNK_FLOOR):
    """Fit one CSP bank between two classes of a WindowSet.

    ``shrinkage=False`` is the plain-CSP arm; it applies only the numerical
    floor above (pass ``unshrunk_floor=0`` for the strict unshrunk estimate,
    which errors on rank-deficient data).
    """
    if shrinkage:
        ca = ledoit_wolf_shrink(windows, class_a, force_alpha=force_alpha)
        cb = ledoit_wolf_shrink(windows, class_b, force_alpha=force_alpha)
    elif unshrunk_floor:
        ca = ledoit_wolf_shrink(windows, class_a, force_alpha=unshrunk_floor)
        cb = ledoit_wolf_shrink(windows, class_b, force_alpha=unshrunk_floor)
    else:
        ca = class_covariance(windows, class_a)
        cb = class_covariance(windows, class_b)
    return _bank_with_pair(csp_solve(ca, cb, k), (class_a, class_b))


def apply_filters(window, bank, k=None):
    """Normalized log-variance features of one window (or a batch).

    f_i = log(var_i / sum_j var_j) over the k kept filters; scale-invariant
    by construction. Zero-variance projections map to log(1e-12).
    """
    k = bank.n_components if k is None else int(k)
    if not 1 <= k <= bank.n_components:
        raise ValueError(f"k must be in [1, {bank.n_components}], got {k}")
    arr = check_array(window, "window")
    single = arr.ndim == 2
    if single:
        arr = arr[None]
    if arr.shape[2] != bank.n_channels:
        raise ValueError(
            f"window has {arr.shape[2]} channels, bank expects {bank.n_channels}"
        )
    proj = np.einsum("mwn,nk->mwk", arr, bank.filters[:, :k])
    variances = proj.var(axis=1)
    totals = variances.sum(axis=1, keepdims=True)
    bad_total = totals[:, 0] <= 0
    if np.any(bad_total):
        logger.warning("apply_filters: %d zero-variance windows", int(bad_total.sum()))
        totals[bad_total] = 1.0
        variances[bad_total] = 1.0 / k
    ratios = np.maximum(variances / totals, LOG_EPS)
    feats = np.log(ratios)
    return feats[0] if single else feats


def multiclass_banks(windows, k, shrinkage=True, force_alpha=None):
    """One-vs-one banks for the three-class problem, in THREE_CLASS_PAIRS order."""
    present = set(windows.labels)
    required = set(SCHEME_LABELS[LabelScheme.THREE_CLASS])
    missing = required - present
    if missing:
        raise ValueError(f"missing classes for three-class banks: {sorted(missing)}")
    return [
        fit_bank(windows, a, b, k, shrinkage=shrinkage, force_alpha=force_alpha)
        for a, b in THREE_CLASS_PAIRS
    ]


@dataclass(frozen=True)
class FeatureMatrix:
    """Window features with labels and parent-epoch grouping."""

    features: np.ndarray  # windows x (k per bank, concatenated)
    labels: tuple
    parent_epoch_id: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.features, dtype=float)
        if not np.all(np.isfinite(f)):
            raise ValueError("features contain non-finite values")
        if f.shape[0] != len(self.labels) or f.shape[0] != len(self.parent_epoch_id):
            raise ValueError("features, labels and parent ids must agree in length")
        object.__setattr__(self, "features", f)


def extract_features(windows, banks, k=None):
    """Concatenate each bank's features across a WindowSet."""
    if isinstance(banks, SpatialFilterBank):
        banks = [banks]
    blocks = [apply_filters(windows.windows, bank, k) for bank in banks]
    return FeatureMatrix(
        features=np.hstack(blocks),
        labels=windows.labels,
        parent_epoch_id=windows.parent_epoch_id,
    )


class CspFeatureExtractor:
    """CSP/RCSP feature extraction with a fit/transform surface.

    Fits one bank for two-class window sets and the three one-vs-one banks
    for three-class sets; transform yields normalized log-variance features,
    concatenated across banks.
    """

    def __init__(self, n_components=6, shrinkage=True, force_alpha=None):
        self.n_components = n_components
        self.shrinkage = shrinkage
        self.force_alpha = force_alpha
        self.banks_ = None

    def get_params(self):
        return {
            "n_components": self.n_components,
            "shrinkage": self.shrinkage,
            "force_alpha": self.force_alpha,
        }

    def fit(self, windows):
        scheme = windows.label_scheme
        if scheme is LabelScheme.THREE_CLASS:
            self.banks_ = multiclass_banks(
                windows, self.n_components, self.shrinkage, self.force_alpha
            )
        else:
            a, b = SCHEME_LABELS[scheme]
            self.banks_ = [
                fit_bank(windows, a, b, self.n_components, self.shrinkage, self.force_alpha)
            ]
        return self

    def transform(self, windows, k=None):
        if self.banks_ is None:
            raise ValueError("CspFeatureExtractor is not fitted")
        return extract_features(windows, self.banks_, k=k)

    def fit_transform(self, windows):
        return self.fit(windows).transform(windows)


def topography_export(bank, channel_names):
    """Pattern columns (what topographic maps display) with channel names."""
    if len(channel_names) != bank.n_channels:
        raise ValueError("channel_names length must match bank channels")
    return bank.patterns.copy(), tuple(channel_names)


def save_topographies(banks, channel_names, path, which="patterns"):
    """Write filters.csv / patterns.csv: rows are channels, one column per
    kept component, headers tagged pair:component:eigenvalue."""
    if isinstance(banks, SpatialFilterBank):
        banks = [banks]
    columns = []
    headers = []
    for bank in banks:
        pair = f"{bank.class_pair[0]}|{bank.class_pair[1]}"
        mat = bank.patterns if which == "patterns" else bank.filters
        for j in range(bank.n_components):
            headers.append(f"{pair}:{j}:{bank.eigenvalues[j]:.8g}")
            columns.append(mat[:, j])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["channel", *headers]) + "\n")
        for i, name in enumerate(channel_names):
            row = [name] + [f"{col[i]:.17g}" for col in columns]
            fh.write(",".join(row) + "\n")


def save_features(feature_matrix, path):
    """features.csv: window_id, parent epoch, label and feature columns."""
    f = feature_matrix.features
    with open(path, "w", newline="") as fh:
        cols = ",".join(f"f{j + 1}" for j in range(f.shape[1]))
        fh.write(f"window_id,parent_epoch,label,{cols}\n")
        for i in range(f.shape[0]):
            vals = ",".join(f"{v:.17g}" for v in f[i])
            fh.write(
                f"{i},{feature_matrix.parent_epoch_id[i]},{feature_matrix.labels[i]},{vals}\n"
            )
