"""Linear discriminant analysis and a sequential-minimal-optimization SVM.

Both classifiers expose fit / predict / decision_function / get_params.
Classes are kept in sorted label order; prediction ties break towards the
lower class index. The SVM solves the dual with Platt-style SMO, deterministic
given the seed (the seed only permutes the scan order; pair selection ties
break by index).
"""

import logging
from dataclasses import dataclass

import numpy as np

from .covariance import ledoit_wolf_samples
from .validation import check_array

logger = logging.getLogger(__name__)

#: alphas this close to 0 or C count as bound (guards the working-set masks
#: against clip results that sit within rounding of a box corner)
_BOUND_EPS = 1e-9


@dataclass(frozen=True)
class ClassifierSpec:
    """Declarative classifier choice used by evaluation and the CLI."""

    kind: str = "lda"  # 'lda' | 'svm'
    kernel: str = "rbf"  # for svm: 'rbf' | 'linear'
    c_reg: float = 1.0
    gamma: float | str = "scale"
    shrinkage: bool = True  # for lda pooled covariance
    seed: int = 0

    def build(self):
        if self.kind == "lda":
            return LdaClassifier(shrinkage="ledoit_wolf" if self.shrinkage else None)
        if self.kind == "svm":
            return SmoSvm(kernel=self.kernel, c_reg=self.c_reg, gamma=self.gamma, seed=self.seed)
        raise ValueError(f"unknown classifier kind {self.kind!r}")


class LdaClassifier:
    """Gaussian equal-covariance discriminant with optional shrinkage.

    The pooled within-class covariance is Ledoit-Wolf shrunk by default
    (small-sample regime); pass shrinkage=None for the plain estimator, which
    raises on a singular pooled covariance.
    """

    def __init__(self, shrinkage="ledoit_wolf", priors=None):
        self.shrinkage = shrinkage
        self.priors = priors
        self.classes_ = None
        self.means_ = None
        self.covariance_ = None
        self.coef_ = None
        self.intercept_ = None

    def get_params(self):
        return {"shrinkage": self.shrinkage, "priors": self.priors}

    def fit(self, X, y):
        X = check_array(X, "X", ndim=2)
        y = np.asarray(y)
        self.classes_ = np.array(sorted(set(y.tolist())))
        if len(self.classes_) < 2:
            raise ValueError("lda_fit needs at least 2 classes")
        counts = np.array([np.sum(y == c) for c in self.classes_])
        if counts.min() < 2:
            raise ValueError("lda_fit needs at least 2 samples per class")
        n, d = X.shape
        self.means_ = np.stack([X[y == c].mean(axis=0) for c in self.classes_])
        residuals = X - self.means_[np.searchsorted(self.classes_, y)]
        if self.shrinkage == "ledoit_wolf":
            cov, alpha = ledoit_wolf_samples(residuals)
            if np.trace(cov) <= 0:  # zero-variance features: flat discriminant
                cov = np.eye(d)
            self.shrinkage_alpha_ = alpha
        else:
            cov = residuals.T @ residuals / n
            eigvals = np.linalg.eigvalsh(cov)
            if eigvals[0] <= 1e-12 * max(eigvals[-1], 1e-300):
                raise ValueError(
                    "singular pooled covariance; enable Ledoit-Wolf shrinkage"
                )
            self.shrinkage_alpha_ = 0.0
        self.covariance_ = cov
        priors = (
            counts / n if self.priors is None else np.asarray(self.priors, dtype=float)
        )
        self.coef_ = np.linalg.solve(cov, self.means_.T).T  # one row per class
        self.intercept_ = (
            -0.5 * np.einsum("cd,cd->c", self.means_, self.coef_) + np.log(priors)
        )
        return self

    def discriminants(self, X):
        X = check_array(X, "X", ndim=2)
        return X @ self.coef_.T + self.intercept_

    def decision_function(self, X):
        """Binary: margin of classes_[1] over classes_[0]; else discriminants."""
        scores = self.discriminants(X)
        if len(self.classes_) == 2:
            return scores[:, 1] - scores[:, 0]
        return scores

    def predict(self, X):
        scores = self.discriminants(X)
        return self.classes_[np.argmax(scores, axis=1)]  # first max = lower index


class SmoSvm:
    """Binary soft-margin SVM trained with sequential minimal optimization.

    kernel is 'linear' or 'rbf'; gamma='scale' means 1 / (n_features * var).
    Convergence leaves every example within ``tol`` of its KKT condition; if
    the pass budget runs out first the model is flagged, not rejected. With a
    vanishing penalty all dual coefficients collapse to zero and prediction
    falls back to the majority class.
    """

    def __init__(self, kernel="rbf", c_reg=1.0, gamma="scale", seed=0, tol=1e-3, max_passes=200):
        if kernel not in ("linear", "rbf"):
            raise ValueError(f"kernel must be 'linear' or 'rbf', got {kernel!r}")
        self.kernel = kernel
        self.c_reg = float(c_reg)
        self.gamma = gamma
        self.seed = seed
        self.tol = tol
        self.max_passes = max_passes
        self.classes_ = None
        self.converged_ = None

    def get_params(self):
        return {
            "kernel": self.kernel,
            "c_reg": self.c_reg,
            "gamma": self.gamma,
            "seed": self.seed,
            "tol": self.tol,
            "max_passes": self.max_passes,
        }

    # -- kernels ------------------------------------------------------------

    def _gamma_value(self, X):
        if self.gamma == "scale":
            var = X.var()
            return 1.0 / (X.shape[1] * var) if var > 0 else 1.0
        return float(self.gamma)

    def _kernel(self, A, B):
        if self.kernel == "linear":
            return A @ B.T
        sq = (
            np.sum(A**2, axis=1)[:, None]
            + np.sum(B**2, axis=1)[None, :]
            - 2.0 * A @ B.T
        )
        return np.exp(-self.gamma_ * np.maximum(sq, 0.0))

    # -- SMO ----------------------------------------------------------------

    def fit(self, X, y):
        X = check_array(X, "X", ndim=2)
        y = np.asarray(y)
        self.classes_ = np.array(sorted(set(y.tolist())))
        if len(self.classes_) != 2:
            raise ValueError(f"SmoSvm is binary, got {len(self.classes_)} classes")
        t = np.where(y == self.classes_[1], 1.0, -1.0)
        counts = [np.sum(y == c) for c in self.classes_]
        self.majority_ = self.classes_[int(np.argmax(counts))]
        self.gamma_ = self._gamma_value(X)
        n = X.shape[0]
        K = self._kernel(X, X)
        C = self.c_reg
        alpha = np.zeros(n)
        b = 0.0
        errors = -t.copy()  # f(x) - y with f = 0 initially
        rng = np.random.default_rng(self.seed)
        scan_order = rng.permutation(n)

        def take_step(i1, i2):
            nonlocal b
            if i1 == i2:
                return False
            a1, a2 = alpha[i1], alpha[i2]
            y1, y2 = t[i1], t[i2]
            e1, e2 = errors[i1], errors[i2]
            s = y1 * y2
            if s > 0:
                lo, hi = max(0.0, a1 + a2 - C), min(C, a1 + a2)
            else:
                lo, hi = max(0.0, a2 - a1), min(C, C + a2 - a1)
            if hi - lo < 1e-12:
                return False
            k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
            eta = k11 + k22 - 2.0 * k12
            if eta > 0:
                a2_new = a2 + y2 * (e1 - e2) / eta
                a2_new = min(max(a2_new, lo), hi)
            else:
                # objective at the clip ends (Platt's degenerate-eta branch)
                f1 = y1 * (e1 + b) - a1 * k11 - s * a2 * k12
                f2 = y2 * (e2 + b) - s * a1 * k12 - a2 * k22
                l1 = a1 + s * (a2 - lo)
                h1 = a1 + s * (a2 - hi)
                obj_lo = (
                    l1 * f1 + lo * f2 + 0.5 * l1**2 * k11 + 0.5 * lo**2 * k22 + s * lo * l1 * k12
                )
                obj_hi = (
                    h1 * f1 + hi * f2 + 0.5 * h1**2 * k11 + 0.5 * hi**2 * k22 + s * hi * h1 * k12
                )
                if obj_lo < obj_hi - 1e-12:
                    a2_new = lo
                elif obj_lo > obj_hi + 1e-12:
                    a2_new = hi
                else:
                    a2_new = a2
            if abs(a2_new - a2) < 1e-8 * (a2_new + a2 + 1e-8):  # minimum-progress guard
                return False
            a1_new = a1 + s * (a2 - a2_new)
            b1 = e1 + y1 * (a1_new - a1) * k11 + y2 * (a2_new - a2) * k12 + b
            b2 = e2 + y1 * (a1_new - a1) * k12 + y2 * (a2_new - a2) * k22 + b
            if 0 < a1_new < C:
                b_new = b1
            elif 0 < a2_new < C:
                b_new = b2
            else:
                b_new = (b1 + b2) / 2.0
            alpha[i1], alpha[i2] = a1_new, a2_new
            errors[:] += (
                y1 * (a1_new - a1) * K[i1]
                + y2 * (a2_new - a2) * K[i2]
                - (b_new - b)
            )
            b = b_new
            return True

        def examine(i2):
            y2, a2, e2 = t[i2], alpha[i2], errors[i2]
            r2 = e2 * y2
            if (r2 < -self.tol and a2 < C) or (r2 > self.tol and a2 > 0):
                non_bound = np.flatnonzero((alpha > _BOUND_EPS) & (alpha < C - _BOUND_EPS))
                if len(non_bound) > 1:
                    gaps = np.abs(errors[non_bound] - e2)
                    i1 = int(non_bound[np.argmax(gaps)])  # argmax ties -> lowest index
                    if take_step(i1, i2):
                        return True
                for i1 in scan_order:
                    if _BOUND_EPS < alpha[i1] < C - _BOUND_EPS and take_step(int(i1), i2):
                        return True
                for i1 in scan_order:
                    if take_step(int(i1), i2):
                        return True
            return False

        passes = 0
        examine_all = True
        non_bound_streak = 0
        while passes < self.max_passes:
            passes += 1
            changed = 0
            targets = (
                range(n)
                if examine_all
                else np.flatnonzero((alpha > _BOUND_EPS) & (alpha < C - _BOUND_EPS))
            )
            for i2 in targets:
                changed += examine(int(i2))
            if examine_all:
                if changed == 0:
                    break
                examine_all = False
                non_bound_streak = 0
            else:
                non_bound_streak += 1
                # bounded inner phase so bound-violating examples cannot starve
                if changed == 0 or non_bound_streak >= 8:
                    examine_all = True
        self.converged_ = passes < self.max_passes
        if not self.converged_:
            logger.warning("SmoSvm: pass budget exhausted (%d passes)", passes)
        self.X_ = X
        self.t_ = t
        self.dual_coef_ = alpha * t
        self.alpha_ = alpha
        self.bias_ = -b  # f(x) = sum alpha y k(x_i, x) - b
        support = alpha > 1e-12
        self.support_ = np.flatnonzero(support)
        self.degenerate_ = not np.any(support)
        fit_decision = K @ self.dual_coef_ + self.bias_
        self.kkt_residual_ = self._kkt_residual(fit_decision)
        return self

    def _kkt_residual(self, decision):
        yf = self.t_ * decision
        at_zero = self.alpha_ <= _BOUND_EPS
        at_c = self.alpha_ >= self.c_reg - _BOUND_EPS
        interior = ~(at_zero | at_c)
        res = np.zeros_like(yf)
        res[at_zero] = np.maximum(0.0, 1.0 - yf[at_zero])
        res[at_c] = np.maximum(0.0, yf[at_c] - 1.0)
        res[interior] = np.abs(yf[interior] - 1.0)
        return float(res.max()) if len(res) else 0.0

    def decision_function(self, X):
        X = check_array(X, "X", ndim=2)
        if self.degenerate_:
            sign = 1.0 if self.majority_ == self.classes_[1] else -1.0
            return np.full(X.shape[0], sign * 1e-9)
        return self._kernel(X, self.X_) @ self.dual_coef_ + self.bias_

    def predict(self, X):
        d = self.decision_function(X)
        return np.where(d >= 0, self.classes_[1], self.classes_[0])

    def margin(self):
        """Smallest y * f(x) over training points (positive iff separated)."""
        d = self._kernel(self.X_, self.X_) @ self.dual_coef_ + self.bias_
        return float(np.min(self.t_ * d))


def one_vs_one_predict(pairs, features_per_pair):
    """Majority vote over pairwise classifiers, each on its own bank's features.

    ``pairs`` is a list of fitted binary classifiers and ``features_per_pair``
    the matching feature matrices (same row count). A 1-1-1 tie goes to the
    class with the largest summed |decision value| among the pairs that voted
    for it; remaining ties break towards the lexicographically lower class.
    """
    n = features_per_pair[0].shape[0]
    votes = {}
    strengths = {}
    for clf, feats in zip(pairs, features_per_pair):
        pred = clf.predict(feats)
        dec = np.abs(clf.decision_function(feats))
        for c in clf.classes_:
            votes.setdefault(c, np.zeros(n, dtype=int))
            strengths.setdefault(c, np.zeros(n))
        for i in range(n):
            votes[pred[i]][i] += 1
            strengths[pred[i]][i] += dec[i]
    classes = sorted(votes)
    vote_matrix = np.stack([votes[c] for c in classes])
    strength_matrix = np.stack([strengths[c] for c in classes])
    out = []
    for i in range(n):
        top = vote_matrix[:, i].max()
        tied = [j for j in range(len(classes)) if vote_matrix[j, i] == top]
        if len(tied) > 1:
            tied.sort(key=lambda j: (-strength_matrix[j, i], classes[j]))
        out.append(classes[tied[0]])
    return np.array(out)
