"""Grouped stratified cross-validation, hold-out evaluation, confusion
matrices and the window-size / component-count sweeps.

Folds partition parent epochs (stratified by label) so windows cut from one
epoch can never straddle a fold boundary; spatial filter banks are re-fitted
inside every training fold by default, which is the leak-free protocol.
Accuracies are reported at both window level and epoch level (majority vote
over an epoch's windows); epoch level is the headline metric.
"""

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .classifiers import ClassifierSpec, one_vs_one_predict
from .csp import CspFeatureExtractor, apply_filters, fit_bank
from .epoching import slide_windows
from .signals import SCHEME_LABELS, LabelScheme, WindowSet

logger = logging.getLogger(__name__)


def worker_count():
    """Worker cap from STRIDE_INTENT_THREADS (0 or unset = auto)."""
    raw = os.environ.get("STRIDE_INTENT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"STRIDE_INTENT_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise ValueError(f"STRIDE_INTENT_THREADS must be >= 0, got {n}")
    return n if n > 0 else (os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# confusion matrices


@dataclass(frozen=True)
class ConfusionMatrix:
    """Column-normalized percentages: entry [pred, true] is the share of
    true-class samples predicted as pred; each column sums to 100."""

    percentages: np.ndarray
    class_names: tuple
    counts: np.ndarray
    absent_classes: tuple = ()

    def sensitivity(self):
        """Per-class sensitivity (the diagonal), NaN for absent classes."""
        return {c: float(self.percentages[i, i]) for i, c in enumerate(self.class_names)}


def confusion_matrix(y_true, y_pred, class_names):
    names = list(class_names)
    index = {c: i for i, c in enumerate(names)}
    counts = np.zeros((len(names), len(names)))
    for t, p in zip(y_true, y_pred):
        counts[index[p], index[t]] += 1
    col_sums = counts.sum(axis=0)
    absent = tuple(names[j] for j in np.flatnonzero(col_sums == 0))
    if absent:
        logger.warning("confusion_matrix: classes absent from test set: %s", absent)
    percent = np.full_like(counts, np.nan)
    ok = col_sums > 0
    percent[:, ok] = 100.0 * counts[:, ok] / col_sums[ok]
    return ConfusionMatrix(
        percentages=percent, class_names=tuple(names), counts=counts, absent_classes=absent
    )


def save_confusion(matrix, path):
    with open(path, "w", newline="") as fh:
        fh.write("predicted," + ",".join(matrix.class_names) + "\n")
        for i, name in enumerate(matrix.class_names):
            row = ",".join(f"{v:.6f}" for v in matrix.percentages[i])
            fh.write(f"{name},{row}\n")


# ---------------------------------------------------------------------------
# grouping helpers


def epoch_labels_of(windows):
    """Label of each parent epoch (constant across its windows, verified)."""
    labels = {}
    for lbl, pid in zip(windows.labels, windows.parent_epoch_id):
        pid = int(pid)
        if pid in labels and labels[pid] != lbl:
            raise ValueError(f"windows of epoch {pid} disagree on the label")
        labels[pid] = lbl
    return labels


def grouped_stratified_folds(epoch_labels, n_folds, seed):
    """Fold id per epoch: epochs shuffled within class, dealt round-robin."""
    rng = np.random.default_rng(seed)
    folds = {}
    for label in sorted(set(epoch_labels.values())):
        ids = sorted(pid for pid, l in epoch_labels.items() if l == label)
        if len(ids) < n_folds:
            raise ValueError(
                f"insufficient groups: class {label!r} has {len(ids)} epochs, "
                f"need >= {n_folds}"
            )
        ids = list(rng.permutation(ids))
        for i, pid in enumerate(ids):
            folds[int(pid)] = i % n_folds
    return folds


def split_holdout_epochs(epoch_labels, test_fraction, seed):
    """Stratified epoch-level train/test split; returns (train_ids, test_ids)."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in sorted(set(epoch_labels.values())):
        ids = sorted(pid for pid, l in epoch_labels.items() if l == label)
        ids = list(rng.permutation(ids))
        n_test = max(1, int(round(test_fraction * len(ids))))
        test.extend(ids[:n_test])
        train.extend(ids[n_test:])
    return sorted(train), sorted(test)


def subset_windows(windows, epoch_ids):
    """Restrict a WindowSet to the given parent epochs (ids are preserved)."""
    wanted = set(int(i) for i in epoch_ids)
    mask = np.array([int(p) in wanted for p in windows.parent_epoch_id])
    return WindowSet(
        windows=windows.windows[mask],
        labels=tuple(l for l, m in zip(windows.labels, mask) if m),
        parent_epoch_id=windows.parent_epoch_id[mask],
        window_len_samples=windows.window_len_samples,
        n_parent_epochs=windows.n_parent_epochs,
        label_scheme=windows.label_scheme,
    )


def majority_vote(predictions, parents):
    """Per-epoch majority label; ties break towards the sorted-lower label."""
    by_parent = {}
    for pred, pid in zip(predictions, parents):
        by_parent.setdefault(int(pid), []).append(pred)
    out = {}
    for pid, preds in by_parent.items():
        values, counts = np.unique(np.asarray(preds), return_counts=True)
        out[pid] = sorted(zip(-counts, values))[0][1]
    return out


# ---------------------------------------------------------------------------
# fitting one (bank, classifier) stack


class _FittedStack:
    """Banks plus classifiers for one training set; predicts window labels."""

    def __init__(self, windows, spec, n_components, shrinkage, k_override=None):
        self.scheme = windows.label_scheme
        self.spec = spec
        if self.scheme is LabelScheme.THREE_CLASS:
            from .csp import THREE_CLASS_PAIRS

            self.banks = []
            self.classifiers = []
            for a, b in THREE_CLASS_PAIRS:
                bank = fit_bank(windows, a, b, n_components, shrinkage=shrinkage)
                feats_a = apply_filters(windows.class_windows(a), bank, k_override)
                feats_b = apply_filters(windows.class_windows(b), bank, k_override)
                X = np.vstack([feats_a, feats_b])
                y = np.array([a] * len(feats_a) + [b] * len(feats_b))
                clf = spec.build()
                clf.fit(X, y)
                self.banks.append(bank)
                self.classifiers.append(clf)
            self.k_override = k_override
        else:
            extractor = CspFeatureExtractor(n_components=n_components, shrinkage=shrinkage)
            extractor.fit(windows)
            self.extractor = extractor
            self.k_override = k_override
            fm = extractor.transform(windows, k=k_override)
            clf = spec.build()
            clf.fit(fm.features, np.asarray(fm.labels))
            self.classifiers = [clf]

    def predict(self, windows):
        if self.scheme is LabelScheme.THREE_CLASS:
            feats = [
                apply_filters(windows.windows, bank, self.k_override) for bank in self.banks
            ]
            return one_vs_one_predict(self.classifiers, feats)
        fm = self.extractor.transform(windows, k=self.k_override)
        return self.classifiers[0].predict(fm.features)


# ---------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class CvReport:
    fold_losses_window: np.ndarray
    fold_losses_epoch: np.ndarray

    @property
    def loss_window(self):
        return float(np.mean(self.fold_losses_window))

    @property
    def loss_epoch(self):
        return float(np.mean(self.fold_losses_epoch))


def grouped_kfold_cv(
    windows,
    classifier_spec,
    n_folds=10,
    seed=0,
    refit_csp=True,
    n_components=6,
    shrinkage=True,
    k_override=None,
):
    """Leak-free k-fold CV over parent epochs.

    With ``refit_csp`` (the default and the acceptance protocol) the filter
    banks are re-estimated on each training fold. Deterministic given seed.
    """
    epoch_labels = epoch_labels_of(windows)
    folds = grouped_stratified_folds(epoch_labels, n_folds, seed)
    losses_w, losses_e = [], []
    shared_stack = None
    if not refit_csp:
        shared_stack = _FittedStack(
            windows, classifier_spec, n_components, shrinkage, k_override
        )
    for fold in range(n_folds):
        train_ids = [pid for pid, f in folds.items() if f != fold]
        test_ids = [pid for pid, f in folds.items() if f == fold]
        train = subset_windows(windows, train_ids)
        test = subset_windows(windows, test_ids)
        if refit_csp:
            stack = _FittedStack(train, classifier_spec, n_components, shrinkage, k_override)
        else:
            stack = shared_stack
        pred = stack.predict(test)
        truth = np.asarray(test.labels)
        losses_w.append(float(np.mean(pred != truth)))
        votes = majority_vote(pred, test.parent_epoch_id)
        epoch_truth = {pid: epoch_labels[pid] for pid in votes}
        losses_e.append(
            float(np.mean([votes[pid] != epoch_truth[pid] for pid in votes]))
        )
    return CvReport(
        fold_losses_window=np.asarray(losses_w), fold_losses_epoch=np.asarray(losses_e)
    )


# ---------------------------------------------------------------------------
# hold-out evaluation


@dataclass(frozen=True)
class HoldoutResult:
    accuracy_window: float
    accuracy_epoch: float
    confusion_window: ConfusionMatrix
    confusion_epoch: ConfusionMatrix


def evaluate_holdout(train_xy, test_xy, classifier_spec):
    """Fit on train features, report accuracy and column-normalized confusion.

    ``train_xy`` / ``test_xy`` are (features, labels, parent_epoch_id)
    triples with disjoint parent epochs. Multiclass feature sets use
    one-vs-one voting for SVM specs and native discriminants for LDA.
    """
    X_tr, y_tr, g_tr = train_xy
    X_te, y_te, g_te = test_xy
    if set(np.asarray(g_tr).tolist()) & set(np.asarray(g_te).tolist()):
        raise ValueError("train and test share parent epochs")
    y_tr = np.asarray(y_tr)
    y_te = np.asarray(y_te)
    classes = sorted(set(y_tr.tolist()) | set(y_te.tolist()))
    if classifier_spec.kind == "svm" and len(classes) > 2:
        pairs = []
        feats = []
        train_classes = sorted(set(y_tr.tolist()))
        for i in range(len(train_classes)):
            for j in range(i + 1, len(train_classes)):
                a, b = train_classes[i], train_classes[j]
                mask = (y_tr == a) | (y_tr == b)
                clf = classifier_spec.build()
                clf.fit(X_tr[mask], y_tr[mask])
                pairs.append(clf)
                feats.append(X_te)
        pred = one_vs_one_predict(pairs, feats)
    else:
        clf = classifier_spec.build()
        clf.fit(X_tr, y_tr)
        pred = clf.predict(X_te)
    acc_w = float(np.mean(pred == y_te))
    conf_w = confusion_matrix(y_te, pred, classes)
    votes = majority_vote(pred, g_te)
    epoch_truth = majority_vote(y_te, g_te)  # constant per epoch
    epoch_ids = sorted(votes)
    acc_e = float(np.mean([votes[p] == epoch_truth[p] for p in epoch_ids]))
    conf_e = confusion_matrix(
        [epoch_truth[p] for p in epoch_ids], [votes[p] for p in epoch_ids], classes
    )
    return HoldoutResult(
        accuracy_window=acc_w,
        accuracy_epoch=acc_e,
        confusion_window=conf_w,
        confusion_epoch=conf_e,
    )


@dataclass(frozen=True)
class EvalResult:
    cv: CvReport
    holdout: HoldoutResult


def train_eval_windows(
    windows,
    classifier_spec,
    n_components=6,
    shrinkage=True,
    n_folds=10,
    holdout_fraction=0.2,
    seed=0,
    refit_csp=True,
):
    """Canonical protocol: epoch-stratified holdout split, leak-free CV on the
    training portion, final fit on all training epochs, metrics on the test
    epochs."""
    epoch_labels = epoch_labels_of(windows)
    train_ids, test_ids = split_holdout_epochs(epoch_labels, holdout_fraction, seed)
    train = subset_windows(windows, train_ids)
    test = subset_windows(windows, test_ids)
    cv = grouped_kfold_cv(
        train,
        classifier_spec,
        n_folds=n_folds,
        seed=seed,
        refit_csp=refit_csp,
        n_components=n_components,
        shrinkage=shrinkage,
    )
    stack = _FittedStack(train, classifier_spec, n_components, shrinkage)
    pred = stack.predict(test)
    truth = np.asarray(test.labels)
    classes = sorted(set(np.asarray(windows.labels).tolist()))
    acc_w = float(np.mean(pred == truth))
    conf_w = confusion_matrix(truth, pred, classes)
    votes = majority_vote(pred, test.parent_epoch_id)
    acc_e = float(np.mean([votes[p] == epoch_labels[p] for p in votes]))
    conf_e = confusion_matrix(
        [epoch_labels[p] for p in sorted(votes)],
        [votes[p] for p in sorted(votes)],
        classes,
    )
    return EvalResult(
        cv=cv,
        holdout=HoldoutResult(acc_w, acc_e, conf_w, conf_e),
    )


# ---------------------------------------------------------------------------
# sweeps


def component_sweep(
    windows,
    max_k=10,
    classifier_spec=None,
    n_folds=10,
    seed=0,
    shrinkage=True,
    include_zero=False,
):
    """CV loss as components are added one at a time in |log lambda| order.

    Binary schemes only. Per fold the bank is fitted once with the even
    component budget covering ``max_k``; feature prefixes of size 1..max_k
    reuse its ordering. Returns [(k, epoch_level_cv_loss)] of length max_k
    (plus a k=0 majority-baseline row when requested).
    """
    if windows.label_scheme is LabelScheme.THREE_CLASS:
        raise ValueError("component_sweep applies to two-class window sets")
    if classifier_spec is None:
        classifier_spec = ClassifierSpec(kind="lda")
    n_channels = windows.n_channels
    if not 1 <= max_k <= n_channels:
        raise ValueError(f"max_k must be in [1, {n_channels}], got {max_k}")
    fit_k = max_k + (max_k % 2)
    epoch_labels = epoch_labels_of(windows)
    folds = grouped_stratified_folds(epoch_labels, n_folds, seed)
    a, b = SCHEME_LABELS[windows.label_scheme]
    losses = np.zeros((n_folds, max_k))
    baseline = np.zeros(n_folds)
    for fold in range(n_folds):
        train_ids = [pid for pid, f in folds.items() if f != fold]
        test_ids = [pid for pid, f in folds.items() if f == fold]
        train = subset_windows(windows, train_ids)
        test = subset_windows(windows, test_ids)
        bank = fit_bank(train, a, b, fit_k, shrinkage=shrinkage)
        truth_epoch = {pid: epoch_labels[pid] for pid in test_ids}
        y_train = np.asarray(train.labels)
        values, counts = np.unique(y_train, return_counts=True)
        majority = sorted(zip(-counts, values))[0][1]
        baseline[fold] = float(
            np.mean([majority != truth_epoch[pid] for pid in test_ids])
        )
        for k in range(1, max_k + 1):
            X_tr = apply_filters(train.windows, bank, k)
            X_te = apply_filters(test.windows, bank, k)
            clf = classifier_spec.build()
            clf.fit(X_tr, y_train)
            pred = clf.predict(X_te)
            votes = majority_vote(pred, test.parent_epoch_id)
            losses[fold, k - 1] = float(
                np.mean([votes[pid] != truth_epoch[pid] for pid in votes])
            )
    curve = [(k, float(losses[:, k - 1].mean())) for k in range(1, max_k + 1)]
    if include_zero:
        curve.insert(0, (0, float(baseline.mean())))
    return curve


def save_component_curve(curve, path):
    with open(path, "w", newline="") as fh:
        fh.write("k,cv_loss\n")
        for k, loss in curve:
            fh.write(f"{k},{loss:.17g}\n")


@dataclass(frozen=True)
class SweepCell:
    w: int
    feature: str  # 'csp' | 'rcsp'
    classifier: str  # 'lda' | 'svm'
    acc_window: float
    acc_epoch: float
    cv_loss: float


def window_sweep(
    epochs,
    ws=(90, 80, 70, 60),
    features=("csp", "rcsp"),
    classifiers=("lda", "svm"),
    stride_samples=5,
    n_components=6,
    n_folds=10,
    holdout_fraction=0.2,
    seed=0,
    with_cv=True,
    svm_kernel="rbf",
):
    """Full factorial sweep over window sizes and {CSP, RCSP} x classifiers.

    Cells run independently (thread pool capped by STRIDE_INTENT_THREADS) and
    results are merged in deterministic cell order.
    """
    cells = [
        (w, feat, clf) for w in ws for feat in features for clf in classifiers
    ]

    def run_cell(cell):
        w, feat, clf_kind = cell
        windows = slide_windows(epochs, w, stride_samples)
        spec = ClassifierSpec(kind=clf_kind, kernel=svm_kernel, seed=seed)
        shrinkage = feat == "rcsp"
        result = train_eval_windows(
            windows,
            spec,
            n_components=n_components,
            shrinkage=shrinkage,
            n_folds=n_folds,
            holdout_fraction=holdout_fraction,
            seed=seed,
        ) if with_cv else None
        if result is None:
            epoch_labels = epoch_labels_of(windows)
            train_ids, test_ids = split_holdout_epochs(epoch_labels, holdout_fraction, seed)
            train = subset_windows(windows, train_ids)
            test = subset_windows(windows, test_ids)
            stack = _FittedStack(train, spec, n_components, shrinkage)
            pred = stack.predict(test)
            truth = np.asarray(test.labels)
            votes = majority_vote(pred, test.parent_epoch_id)
            acc_w = float(np.mean(pred == truth))
            acc_e = float(np.mean([votes[p] == epoch_labels[p] for p in votes]))
            return SweepCell(w, feat, clf_kind, acc_w, acc_e, float("nan"))
        return SweepCell(
            w,
            feat,
            clf_kind,
            result.holdout.accuracy_window,
            result.holdout.accuracy_epoch,
            result.cv.loss_epoch,
        )

    workers = min(worker_count(), len(cells))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run_cell, cells))
    else:
        rows = [run_cell(c) for c in cells]
    return rows


def save_sweep(rows, path):
    with open(path, "w", newline="") as fh:
        fh.write("w,feature,classifier,acc_window,acc_epoch,cv_loss\n")
        for r in rows:
            fh.write(
                f"{r.w},{r.feature},{r.classifier},{r.acc_window:.17g},"
                f"{r.acc_epoch:.17g},{r.cv_loss:.17g}\n"
            )


def save_metrics(metrics, path):
    with open(path, "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
