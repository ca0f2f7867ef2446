import numpy as np
import pytest

from stride_intent.covariance import ClassCovariance, class_covariance, ledoit_wolf_shrink
from stride_intent.csp import (
    CspFeatureExtractor,
    apply_filters,
    csp_solve,
    extract_features,
    fit_bank,
    multiclass_banks,
    topography_export,
)
from stride_intent.signals import LabelScheme, WindowSet


def cov(C, n_windows=10):
    C = np.asarray(C, dtype=float)
    return ClassCovariance(
        C=C,
        n_channels=C.shape[0],
        n_windows=n_windows,
        shrinkage_alpha=0.0,
        target_scale=float(np.trace(C)) / C.shape[0],
    )


def window_set(tensor, labels, scheme=LabelScheme.ADAPT_NONADAPT):
    tensor = np.asarray(tensor)
    return WindowSet(
        windows=tensor,
        labels=tuple(labels),
        parent_epoch_id=np.arange(len(labels)),
        window_len_samples=tensor.shape[1],
        n_parent_epochs=len(labels),
        label_scheme=scheme,
    )


def two_class_windows(rng, n_per_class=60, w=90, mixing=None, ratio=4.0):
    """Planted data: a source with variance ratio flipped between classes,
    mixed by a rotation."""
    n = 2 if mixing is None else mixing.shape[0]
    windows, labels = [], []
    for label, variances in (
        ("adapt", (ratio, 1.0)),
        ("non_adapt", (1.0, ratio)),
    ):
        for _ in range(n_per_class):
            sources = rng.standard_normal((w, 2)) * np.sqrt(variances)
            if mixing is None:
                data = sources
            else:
                extra = rng.standard_normal((w, n - 2)) * 0.2
                data = np.hstack([sources, extra]) @ mixing.T
            windows.append(data)
            labels.append(label)
    return window_set(np.stack(windows), labels)


class TestCspSolve:
    def test_diagonal_case_exact(self):
        bank = csp_solve(cov(np.diag([2.0, 1.0])), cov(np.diag([1.0, 2.0])), k=2)
        assert abs(bank.eigenvalues[0] - 2.0) <= 1e-10
        assert abs(bank.eigenvalues[1] - 0.5) <= 1e-10
        # filters along coordinate axes
        for col in bank.filters.T:
            assert np.min(np.abs(col)) <= 1e-10 * np.max(np.abs(col))

    def test_equal_covariances_flagged(self, rng):
        C = rng.standard_normal((4, 4))
        C = C @ C.T + np.eye(4)
        bank = csp_solve(cov(C), cov(C.copy()), k=2)
        assert bank.no_discrimination
        np.testing.assert_allclose(bank.eigenvalues, 1.0, atol=1e-8)

    def test_planted_rotation_recovered(self, rng):
        theta = 0.7
        rotation = np.array(
            [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
        )
        windows = two_class_windows(rng, mixing=rotation)
        bank = fit_bank(windows, "adapt", "non_adapt", k=2, shrinkage=True)
        # top filter extracts the first planted source: s^T mixing ~ e_1
        response = bank.filters[:, 0] @ rotation
        cosine = abs(response[0]) / np.linalg.norm(response)
        assert cosine >= 0.95

    def test_swap_inverts_eigenvalues(self, rng):
        A = rng.standard_normal((5, 5))
        B = rng.standard_normal((5, 5))
        Ca, Cb = cov(A @ A.T + np.eye(5)), cov(B @ B.T + np.eye(5))
        fwd = csp_solve(Ca, Cb, k=4)
        rev = csp_solve(Cb, Ca, k=4)
        np.testing.assert_allclose(
            sorted(fwd.eigenvalues), sorted(1.0 / rev.eigenvalues), rtol=1e-8
        )
        # same directions up to sign and order
        for col in fwd.filters.T:
            cosines = np.abs(col @ rev.filters) / (
                np.linalg.norm(col) * np.linalg.norm(rev.filters, axis=0)
            )
            assert cosines.max() >= 1 - 1e-8

    def test_rayleigh_quotient_consistency(self, rng):
        A = rng.standard_normal((6, 6))
        B = rng.standard_normal((6, 6))
        Ca, Cb = cov(A @ A.T + np.eye(6)), cov(B @ B.T + np.eye(6))
        bank = csp_solve(Ca, Cb, k=6)
        for s, lam in zip(bank.filters.T, bank.eigenvalues):
            quotient = (s @ Ca.C @ s) / (s @ Cb.C @ s)
            assert abs(quotient - lam) <= 1e-8 * max(lam, 1.0)

    def test_sum_normalization(self, rng):
        A = rng.standard_normal((6, 6))
        B = rng.standard_normal((6, 6))
        Ca, Cb = cov(A @ A.T + np.eye(6)), cov(B @ B.T + np.eye(6))
        bank = csp_solve(Ca, Cb, k=4)
        S = Ca.C + Cb.C
        for s in bank.filters.T:
            assert abs(s @ S @ s - 1.0) <= 1e-8

    def test_ordering_by_log_eigenvalue(self, rng):
        A = rng.standard_normal((8, 8))
        B = rng.standard_normal((8, 8))
        Ca, Cb = cov(A @ A.T + np.eye(8)), cov(B @ B.T + np.eye(8))
        bank = csp_solve(Ca, Cb, k=6)
        keys = np.abs(np.log(bank.eigenvalues))
        assert np.all(np.diff(np.round(keys, 9)) <= 0)

    def test_non_pd_error_advises_shrinkage(self, rng):
        base = rng.standard_normal((4, 2))
        degenerate = base @ base.T  # rank 2 of 4
        with pytest.raises(ValueError, match="shrinkage"):
            csp_solve(cov(degenerate), cov(degenerate.copy()), k=2)

    def test_odd_k_rejected(self):
        with pytest.raises(ValueError, match="even"):
            csp_solve(cov(np.eye(4)), cov(np.eye(4)), k=3)

    def test_subspace_recovery_at_snr(self, rng):
        # high-SNR planted rotation: recovered top filter within 0.2 rad
        rotation, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        windows = two_class_windows(rng, n_per_class=120, mixing=rotation, ratio=10.0)
        bank = fit_bank(windows, "adapt", "non_adapt", k=2, shrinkage=True)
        response = bank.filters[:, 0] @ rotation
        angle = np.arccos(min(1.0, abs(response[0]) / np.linalg.norm(response)))
        assert angle <= 0.2


class TestApplyFilters:
    def bank(self, rng, n=4, k=4):
        A = rng.standard_normal((n, n))
        B = rng.standard_normal((n, n))
        return csp_solve(cov(A @ A.T + np.eye(n)), cov(B @ B.T + np.eye(n)), k=k)

    def test_k1_feature_is_zero(self, rng):
        bank = self.bank(rng)
        window = rng.standard_normal((90, 4))
        feats = apply_filters(window, bank, k=1)
        assert feats.shape == (1,)
        assert feats[0] == 0.0

    def test_scale_invariance(self, rng):
        bank = self.bank(rng)
        window = rng.standard_normal((90, 4))
        a = apply_filters(window, bank)
        b = apply_filters(window * 37.5, bank)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_sign_flip_invariance(self, rng):
        bank = self.bank(rng)
        window = rng.standard_normal((90, 4))
        flipped = type(bank)(
            filters=bank.filters * np.array([1, -1, 1, -1]),
            eigenvalues=bank.eigenvalues,
            patterns=bank.patterns,
            class_pair=bank.class_pair,
        )
        np.testing.assert_allclose(
            apply_filters(window, bank), apply_filters(window, flipped), atol=1e-12
        )

    def test_separation_on_planted_data(self, rng):
        windows = two_class_windows(rng, ratio=6.0)
        bank = fit_bank(windows, "adapt", "non_adapt", k=2, shrinkage=True)
        fa = apply_filters(windows.class_windows("adapt"), bank)
        fb = apply_filters(windows.class_windows("non_adapt"), bank)
        assert abs(fa[:, 0].mean() - fb[:, 0].mean()) >= 1.0

    def test_zero_variance_flagged_not_crashing(self, rng, caplog):
        bank = self.bank(rng)
        window = np.zeros((90, 4))
        with caplog.at_level("WARNING", logger="stride_intent.csp"):
            feats = apply_filters(window, bank)
        assert np.all(np.isfinite(feats))


class TestMulticlass:
    def three_class_windows(self, rng, n_per_class=40):
        tensors, labels = [], []
        for label, hot in (
            ("slow_to_fast", 0),
            ("fast_to_slow", 1),
            ("non_adapt", 2),
        ):
            scale = np.full(4, 0.5)
            scale[hot] = 2.5
            for _ in range(n_per_class):
                tensors.append(rng.standard_normal((60, 4)) * scale)
                labels.append(label)
        return window_set(np.stack(tensors), labels, LabelScheme.THREE_CLASS)

    def test_three_banks(self, rng):
        ws = self.three_class_windows(rng)
        banks = multiclass_banks(ws, k=2)
        assert len(banks) == 3
        assert banks[0].class_pair == ("slow_to_fast", "non_adapt")
        assert banks[1].class_pair == ("fast_to_slow", "non_adapt")
        assert banks[2].class_pair == ("slow_to_fast", "fast_to_slow")

    def test_feature_dimensionality(self, rng):
        ws = self.three_class_windows(rng)
        banks = multiclass_banks(ws, k=2)
        fm = extract_features(ws, banks)
        assert fm.features.shape == (ws.n_windows, 6)  # 3 banks x k

    def test_missing_class_rejected(self, rng):
        ws = window_set(
            rng.standard_normal((4, 60, 4)),
            ["slow_to_fast", "slow_to_fast", "non_adapt", "non_adapt"],
            LabelScheme.THREE_CLASS,
        )
        with pytest.raises(ValueError, match="missing classes"):
            multiclass_banks(ws, k=2)

    def test_collapsed_classes_flagged(self, rng):
        # slow_to_fast and fast_to_slow drawn from one distribution
        tensors, labels = [], []
        for label in ("slow_to_fast", "fast_to_slow"):
            for _ in range(80):
                tensors.append(rng.standard_normal((60, 4)))
                labels.append(label)
        for _ in range(80):
            tensors.append(rng.standard_normal((60, 4)) * np.array([3, 1, 1, 1]))
            labels.append("non_adapt")
        ws = window_set(np.stack(tensors), labels, LabelScheme.THREE_CLASS)
        banks = multiclass_banks(ws, k=2, force_alpha=0.01)
        assert banks[2].no_discrimination  # the up-vs-down bank


class TestTopographies:
    def test_diagonal_patterns_align_with_filters(self):
        bank = csp_solve(cov(np.diag([2.0, 1.0])), cov(np.diag([1.0, 2.0])), k=2)
        for f, p in zip(bank.filters.T, bank.patterns.T):
            cosine = abs(f @ p) / (np.linalg.norm(f) * np.linalg.norm(p))
            assert cosine >= 1 - 1e-10

    def test_planted_mixing_pattern_correlation(self, rng):
        rotation, _ = np.linalg.qr(rng.standard_normal((5, 5)))
        windows = two_class_windows(rng, n_per_class=150, mixing=rotation, ratio=8.0)
        bank = fit_bank(windows, "adapt", "non_adapt", k=2, shrinkage=True)
        # each planted discriminative source topography is matched by one
        # pattern column (component order follows |log lambda|, not source id)
        for source in (0, 1):
            planted = rotation[:, source]
            cors = [
                abs(np.corrcoef(bank.patterns[:, j], planted)[0, 1])
                for j in range(bank.n_components)
            ]
            assert max(cors) >= 0.9

    def test_export_shape_and_names(self, rng):
        A = rng.standard_normal((4, 4))
        B = rng.standard_normal((4, 4))
        bank = csp_solve(cov(A @ A.T + np.eye(4)), cov(B @ B.T + np.eye(4)), k=4)
        matrix, names = topography_export(bank, ("c1", "c2", "c3", "c4"))
        assert matrix.shape == (4, 4)
        assert names == ("c1", "c2", "c3", "c4")

    def test_patterns_inverse_transpose_identity(self, rng):
        A = rng.standard_normal((5, 5))
        B = rng.standard_normal((5, 5))
        Ca, Cb = cov(A @ A.T + np.eye(5)), cov(B @ B.T + np.eye(5))
        bank = csp_solve(Ca, Cb, k=4)
        # patterns^T filters = identity on the kept components
        gram = bank.patterns.T @ bank.filters
        np.testing.assert_allclose(gram, np.eye(4), atol=1e-8)


class TestExtractor:
    def test_fit_transform_two_class(self, rng):
        ws = two_class_windows(rng)
        ext = CspFeatureExtractor(n_components=2, shrinkage=True)
        fm = ext.fit_transform(ws)
        assert fm.features.shape == (ws.n_windows, 2)
        assert ext.get_params()["n_components"] == 2

    def test_unfitted_transform_errors(self, rng):
        ws = two_class_windows(rng)
        with pytest.raises(ValueError, match="not fitted"):
            CspFeatureExtractor().transform(ws)
