import numpy as np
import pytest

from stride_intent.epoching import TEMPO_HZ, build_steps, label_steps
from stride_intent.signals import LabelScheme, Mode
from stride_intent.synth import (
    SessionSpec,
    gen_kinematics,
    gen_protocol,
    gen_session,
    generate_session,
    load_manifest_spec,
)


class TestProtocol:
    def test_default_counts(self):
        tl = gen_protocol(SessionSpec(seed=0))
        assert len(tl.changes) == 60
        modes = [m for _, m in tl.changes]
        for mode in (Mode.SLOW, Mode.NORMAL, Mode.FAST):
            assert modes.count(mode) == 20

    def test_no_adjacent_repeats_including_lead_in(self):
        tl = gen_protocol(SessionSpec(seed=3))
        modes = [tl.lead_in_mode] + [m for _, m in tl.changes]
        assert all(a is not b for a, b in zip(modes, modes[1:]))

    def test_total_duration_in_band(self):
        tl = gen_protocol(SessionSpec(seed=1))
        spec = SessionSpec(seed=1)
        last_t, last_mode = tl.changes[-1]
        total_min = (last_t + 24 / spec.tempos[last_mode]) / 60.0
        assert 13.0 <= total_min <= 19.0

    def test_deterministic(self):
        a = gen_protocol(SessionSpec(seed=5))
        b = gen_protocol(SessionSpec(seed=5))
        assert a.changes == b.changes

    def test_tempo_ratios_fixed(self):
        tempos = SessionSpec().tempos
        assert tempos[Mode.SLOW] == pytest.approx(0.5 * tempos[Mode.NORMAL])
        assert tempos[Mode.FAST] == pytest.approx(1.5 * tempos[Mode.NORMAL])


class TestKinematics:
    def test_normal_mode_steady_interval(self, small_session):
        tl = small_session.timeline
        times = small_session.kinematics.strike_times
        intervals = []
        for idx, t0, t1, mode, _prev in tl.trial_bounds():
            if mode is not Mode.NORMAL:
                continue
            inside = times[(times > t0 + 4.0) & (times < min(t1, times[-1]))]
            intervals.extend(np.diff(inside))
        assert abs(np.mean(intervals) - 1 / 1.75) <= 0.005 + 0.02 / 1.75

    def test_instant_tracking_gives_immediate_rt(self):
        spec = SessionSpec(
            seed=2,
            n_trials_per_mode=2,
            step_jitter=0.0,
            rt_time_constant_s={Mode.SLOW: 1e-12, Mode.NORMAL: 1e-12, Mode.FAST: 1e-12},
        )
        tl = gen_protocol(spec)
        kin = gen_kinematics(tl, spec)
        from stride_intent.epoching import estimate_reaction_time

        steps = build_steps(kin.true_events, tl)
        for r in estimate_reaction_time(steps, tl):
            if r.detected:
                assert r.n_adapt_steps <= 1

    def test_sides_alternate(self, small_session):
        sides = small_session.kinematics.strike_sides
        assert all(a != b for a, b in zip(sides, sides[1:]))

    def test_keypoints_cover_both_ankles(self, small_session):
        kp = small_session.kinematics.keypoints
        assert set(kp.joint) == {"ankle_left", "ankle_right"}


class TestEeg:
    def test_snr_within_band(self, small_session):
        spec = small_session.spec
        snr = small_session.ground_truth.snr_db_per_channel
        assert np.abs(snr - spec.snr_db).max() <= 1.0

    def test_ground_truth_labels_consistent(self, small_session):
        tl = small_session.timeline
        steps = build_steps(small_session.kinematics.true_events, tl)
        for scheme, stored in (
            (LabelScheme.LEFT_RIGHT, small_session.ground_truth.labels_lr),
            (LabelScheme.ADAPT_NONADAPT, small_session.ground_truth.labels_ana),
            (LabelScheme.THREE_CLASS, small_session.ground_truth.labels_three),
        ):
            labeled = [
                (ls.step.onset_s, ls.label)
                for ls in label_steps(steps, tl, scheme)
                if ls.label is not None
            ]
            assert tuple(labeled) == stored

    def test_mixing_full_column_rank(self, small_session):
        mixing = small_session.ground_truth.mixing
        assert np.linalg.matrix_rank(mixing) == mixing.shape[1]

    def test_deterministic_generation(self):
        spec = SessionSpec(seed=21, n_trials_per_mode=2)
        a = generate_session(spec)
        b = generate_session(spec)
        np.testing.assert_array_equal(a.signal.data, b.signal.data)
        np.testing.assert_array_equal(
            a.kinematics.strike_times, b.kinematics.strike_times
        )

    def test_signal_carries_eeg_and_accel(self, small_session):
        names = small_session.signal.channel_names
        assert names[-3:] == ("accel_x", "accel_y", "accel_z")
        assert len(names) == 35


class TestSessionFiles:
    def test_five_files_and_matching_hashes(self, tmp_path):
        spec = SessionSpec(seed=4, n_trials_per_mode=2)
        manifest = gen_session(spec, tmp_path)
        for name in (
            "signals.csv",
            "keypoints.csv",
            "events.csv",
            "ground_truth.csv",
            "manifest.csv",
        ):
            assert (tmp_path / name).exists()
        import hashlib

        for name in ("signals.csv", "events.csv"):
            digest = hashlib.sha256((tmp_path / name).read_bytes()).hexdigest()
            assert manifest[f"hash:{name}"] == digest

    def test_events_file_has_60_tone_changes_scaled(self, tmp_path):
        spec = SessionSpec(seed=4, n_trials_per_mode=2)
        gen_session(spec, tmp_path)
        from stride_intent.signals import load_events, EventKind

        tl = load_events(tmp_path / "events.csv")
        assert len(tl.of_kind(EventKind.TONE_CHANGE)) == 6

    def test_different_seeds_differ(self, tmp_path):
        m1 = gen_session(SessionSpec(seed=1, n_trials_per_mode=2), tmp_path / "a")
        m2 = gen_session(SessionSpec(seed=2, n_trials_per_mode=2), tmp_path / "b")
        assert m1["hash:signals.csv"] != m2["hash:signals.csv"]

    def test_manifest_spec_round_trip(self, tmp_path):
        spec = SessionSpec(seed=9, n_trials_per_mode=2, snr_db=-2.5, outlier_rate=0.04)
        gen_session(spec, tmp_path)
        assert load_manifest_spec(tmp_path / "manifest.csv") == spec

    def test_same_seed_byte_identical(self, tmp_path):
        spec = SessionSpec(seed=6, n_trials_per_mode=2)
        gen_session(spec, tmp_path / "a")
        gen_session(spec, tmp_path / "b")
        for name in ("signals.csv", "keypoints.csv", "events.csv", "ground_truth.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()
