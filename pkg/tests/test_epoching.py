import math

import numpy as np
import pytest

from stride_intent.epoching import (
    ToneTimeline,
    behavior_report,
    build_steps,
    estimate_reaction_time,
    extract_epochs,
    label_steps,
    slide_windows,
)
from stride_intent.gait import GaitEvents, GaitSource
from stride_intent.signals import LabelScheme, Mode, MultichannelSignal


def events_from_times(times):
    times = np.asarray(times, dtype=float)
    return GaitEvents(times[0::2], times[1::2], GaitSource.VIDEO)


def trial_timeline(modes, duration=20.0, start=0.0):
    changes = [(start + i * duration, m) for i, m in enumerate(modes)]
    return ToneTimeline(changes=tuple(changes), lead_in_mode=Mode.NORMAL)


def steady_steps(timeline, period_map, jitter=None, trial_overrides=None):
    """Strikes pacing each trial exactly at its mode's period (or an
    explicit per-trial override)."""
    times = []
    bounds = timeline.trial_bounds()
    t = 0.25
    end = bounds[-1][1] + 20.0
    i = 0
    while t < end:
        trial = timeline.trial_of(t)
        mode = bounds[trial][3] if trial >= 0 else Mode.NORMAL
        if trial_overrides and trial in trial_overrides:
            d = trial_overrides[trial]
        else:
            d = period_map[mode]
        if jitter is not None:
            d *= jitter[i % len(jitter)]
        times.append(t)
        t += d
        i += 1
    return events_from_times(times)


PERIODS = {Mode.SLOW: 1 / 0.875, Mode.NORMAL: 1 / 1.75, Mode.FAST: 1 / 2.625}


class TestToneTimeline:
    def test_repeated_mode_rejected(self):
        with pytest.raises(ValueError, match="differ"):
            trial_timeline([Mode.SLOW, Mode.SLOW])

    def test_nonincreasing_times_rejected(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            ToneTimeline(changes=((5.0, Mode.SLOW), (5.0, Mode.FAST)))

    def test_trial_of(self):
        tl = trial_timeline([Mode.SLOW, Mode.FAST], duration=10.0, start=5.0)
        assert tl.trial_of(1.0) == -1
        assert tl.trial_of(5.0) == 0
        assert tl.trial_of(16.0) == 1


class TestBuildSteps:
    def test_three_strikes_two_steps(self):
        tl = trial_timeline([Mode.FAST], start=0.0)
        gait = GaitEvents(np.array([0.0, 1.14]), np.array([0.57]), GaitSource.VIDEO)
        steps = build_steps(gait, tl)
        assert len(steps) == 2
        assert steps[0].duration_s == pytest.approx(0.57)
        assert steps[1].duration_s == pytest.approx(0.57)
        assert [s.side for s in steps] == ["L", "R"]

    def test_single_strike_empty(self):
        tl = trial_timeline([Mode.FAST])
        gait = GaitEvents(np.array([1.0]), np.array([]), GaitSource.VIDEO)
        assert build_steps(gait, tl) == []

    def test_alternation_violation_flagged(self):
        tl = trial_timeline([Mode.FAST])
        gait = GaitEvents(np.array([0.0, 0.5]), np.array([]), GaitSource.VIDEO)
        steps = build_steps(gait, tl)
        assert steps[0].alternation_violation is False

    def test_positions_reset_per_trial(self):
        tl = trial_timeline([Mode.SLOW, Mode.FAST], duration=5.0, start=0.0)
        gait = events_from_times([0.5, 1.5, 2.5, 5.5, 6.5])
        steps = build_steps(gait, tl)
        positions = [(s.trial_index, s.position_in_trial) for s in steps]
        assert positions == [(0, 0), (0, 1), (0, 2), (1, 0)]


class TestReactionTime:
    def test_programmed_rt_recovered_in_session(self, small_session):
        gait = small_session.kinematics.true_events
        tl = small_session.timeline
        steps = build_steps(gait, tl)
        estimates = estimate_reaction_time(steps, tl)
        truth = small_session.ground_truth.programmed_rt
        for mode in (Mode.SLOW, Mode.NORMAL, Mode.FAST):
            est = [r.rt_s for r in estimates if r.mode is mode and r.detected]
            prog = [
                truth[r.trial_index]
                for r in estimates
                if r.mode is mode and r.detected and not math.isnan(truth[r.trial_index])
            ]
            if est and prog:
                period = PERIODS[mode]
                assert abs(np.mean(est) - np.mean(prog)) <= period

    def test_immediate_match(self):
        tl = trial_timeline([Mode.FAST], duration=30.0, start=1.0)
        gait = steady_steps(tl, {m: PERIODS[Mode.FAST] for m in Mode})
        steps = build_steps(gait, tl)
        results = estimate_reaction_time(steps, tl)
        r = results[0]
        assert r.detected
        assert r.n_adapt_steps == 1
        first = min(s.onset_s for s in steps if s.trial_index == 0)
        assert r.rt_s == pytest.approx(first - 1.0)

    def test_never_adapting_trial_excluded(self):
        modes = [Mode.FAST, Mode.SLOW] * 4  # four fast trials anchor the band
        tl = trial_timeline(modes, duration=15.0)
        # trial 4 (fast) paced far off the fast period: never reaches the band
        gait = steady_steps(
            tl, PERIODS, jitter=[0.99, 1.0, 1.01], trial_overrides={4: 1.4}
        )
        steps = build_steps(gait, tl)
        results = estimate_reaction_time(steps, tl)
        bad = [r for r in results if r.trial_index == 4]
        assert len(bad) == 1 and not bad[0].detected
        good_fast = [r for r in results if r.mode is Mode.FAST and r.trial_index != 4]
        assert any(r.detected for r in good_fast)
        report = behavior_report(steps, tl)
        assert report.n_trials_excluded >= 1

    def test_time_shift_invariance(self):
        tl = trial_timeline([Mode.FAST, Mode.NORMAL], duration=15.0, start=2.0)
        gait = steady_steps(tl, PERIODS, jitter=[0.98, 1.0, 1.02])
        steps = build_steps(gait, tl)
        base = estimate_reaction_time(steps, tl)
        delta = 100.0
        tl2 = ToneTimeline(
            changes=tuple((t + delta, m) for t, m in tl.changes),
            lead_in_mode=tl.lead_in_mode,
        )
        times, _ = gait.merged()
        gait2 = events_from_times(times + delta)
        steps2 = build_steps(gait2, tl2)
        shifted = estimate_reaction_time(steps2, tl2)
        for a, b in zip(base, shifted):
            assert a.detected == b.detected
            if a.detected:
                assert a.rt_s == pytest.approx(b.rt_s, abs=1e-9)
                assert a.n_adapt_steps == b.n_adapt_steps


class TestBehaviorReport:
    def test_single_trial_per_mode_std_zero(self):
        tl = ToneTimeline(
            changes=((0.0, Mode.SLOW), (20.0, Mode.NORMAL), (40.0, Mode.FAST)),
            lead_in_mode=Mode.NORMAL,
        )
        gait = steady_steps(tl, PERIODS, jitter=[0.99, 1.005, 1.0])
        steps = build_steps(gait, tl)
        report = behavior_report(steps, tl)
        for mode in (Mode.SLOW, Mode.NORMAL, Mode.FAST):
            stats = report.per_mode[mode]
            if stats.n_trials - stats.n_excluded == 1:
                assert stats.rt_std == 0.0

    def test_empty_steps_all_excluded(self):
        tl = trial_timeline([Mode.SLOW, Mode.FAST])
        report = behavior_report([], tl)
        assert report.n_trials_excluded == report.n_trials == 2


class TestLabelSteps:
    def make_trial_steps(self, n_steps, tl):
        times = [1.0 + 0.5 * i for i in range(n_steps + 1)]
        gait = events_from_times(times)
        return build_steps(gait, tl)

    def test_adapt_nonadapt_positions(self):
        tl = trial_timeline([Mode.FAST], duration=100.0, start=0.0)
        steps = self.make_trial_steps(24, tl)
        labeled = label_steps(steps, tl, LabelScheme.ADAPT_NONADAPT)
        labels = [ls.label for ls in labeled]
        adapt_pos = [i for i, l in enumerate(labels) if l == "adapt"]
        non_pos = [i for i, l in enumerate(labels) if l == "non_adapt"]
        assert adapt_pos == [0, 1, 2]  # steps 1-3, 1-based
        assert non_pos == [10, 11, 12]  # steps 11-13, 1-based

    def test_direction_labels(self):
        tl = trial_timeline([Mode.SLOW, Mode.FAST], duration=50.0, start=0.0)
        gait = steady_steps(tl, PERIODS)
        steps = build_steps(gait, tl)
        labeled = label_steps(steps, tl, LabelScheme.THREE_CLASS)
        first_trial = [ls.label for ls in labeled if ls.step.trial_index == 0]
        second_trial = [ls.label for ls in labeled if ls.step.trial_index == 1]
        assert first_trial[:3] == ["fast_to_slow"] * 3  # normal lead-in -> slow
        assert second_trial[:3] == ["slow_to_fast"] * 3

    def test_short_trial_skipped(self, caplog):
        tl = trial_timeline([Mode.FAST], duration=100.0)
        steps = self.make_trial_steps(5, tl)
        with caplog.at_level("WARNING", logger="stride_intent.epoching"):
            labeled = label_steps(steps, tl, LabelScheme.ADAPT_NONADAPT, n_adapt=3)
        assert all(ls.label is None for ls in labeled)
        assert any("skipped" in r.message for r in caplog.records)

    def test_left_right_labels_everything(self):
        tl = trial_timeline([Mode.FAST])
        steps = self.make_trial_steps(10, tl)
        labeled = label_steps(steps, tl, LabelScheme.LEFT_RIGHT)
        assert all(ls.label in ("left", "right") for ls in labeled)
        assert labeled[0].label == "left"

    def test_class_balance_per_trial(self):
        tl = trial_timeline([Mode.SLOW, Mode.FAST, Mode.NORMAL], duration=20.0)
        gait = steady_steps(tl, PERIODS)
        steps = build_steps(gait, tl)
        labeled = label_steps(steps, tl, LabelScheme.ADAPT_NONADAPT)
        for trial in (0, 1, 2):
            trial_labels = [ls.label for ls in labeled if ls.step.trial_index == trial]
            n_adapt = sum(1 for l in trial_labels if l == "adapt")
            n_non = sum(1 for l in trial_labels if l == "non_adapt")
            if n_adapt or n_non:
                assert n_adapt == n_non == 3


class TestEpochsAndWindows:
    def make_epochs(self, n_steps=12, rate=250.0, epoch_len=0.4):
        tl = trial_timeline([Mode.FAST], duration=100.0)
        times = [1.0 + 0.5 * i for i in range(n_steps + 1)]
        gait = events_from_times(times)
        steps = build_steps(gait, tl)
        labeled = label_steps(steps, tl, LabelScheme.LEFT_RIGHT)
        n = int(rate * (times[-1] + 1.0))
        rng = np.random.default_rng(0)
        sig = MultichannelSignal(rate, 0.0, ("a", "b"), rng.standard_normal((n, 2)))
        return extract_epochs(sig, labeled, LabelScheme.LEFT_RIGHT, epoch_len), sig

    def test_epoch_sample_count(self):
        epochs, _ = self.make_epochs()
        assert epochs.epoch_len_samples == 100

    def test_out_of_range_onsets_dropped(self):
        tl = trial_timeline([Mode.FAST], duration=100.0)
        gait = events_from_times([0.5, 1.0, 1.5, 2.0])
        steps = build_steps(gait, tl)
        labeled = label_steps(steps, tl, LabelScheme.LEFT_RIGHT)
        rng = np.random.default_rng(0)
        sig = MultichannelSignal(250.0, 0.0, ("a",), rng.standard_normal((450, 1)))
        epochs = extract_epochs(sig, labeled, LabelScheme.LEFT_RIGHT)
        assert epochs.n_epochs == 2  # the 1.5 s onset needs samples past 1.8 s
        assert epochs.n_rejected_onsets == 1
        # accepted + rejected = requested labeled steps
        assert epochs.n_epochs + epochs.n_rejected_onsets == len(steps)

    def test_no_epochs_is_error(self):
        tl = trial_timeline([Mode.FAST], duration=100.0)
        gait = events_from_times([50.0, 50.5, 51.0])
        steps = build_steps(gait, tl)
        labeled = label_steps(steps, tl, LabelScheme.LEFT_RIGHT)
        sig = MultichannelSignal(250.0, 0.0, ("a",), np.zeros((100, 1)))
        with pytest.raises(ValueError, match="no epochs"):
            extract_epochs(sig, labeled, LabelScheme.LEFT_RIGHT)

    @pytest.mark.parametrize(
        "w,stride,expected", [(90, 5, 3), (100, 5, 1), (60, 5, 9)]
    )
    def test_window_counts(self, w, stride, expected):
        epochs, _ = self.make_epochs()
        windows = slide_windows(epochs, w, stride)
        assert windows.n_windows == expected * epochs.n_epochs
        per_epoch = (epochs.epoch_len_samples - w) // stride + 1
        assert per_epoch == expected

    def test_windows_inherit_labels_and_parents(self):
        epochs, _ = self.make_epochs()
        windows = slide_windows(epochs, 90, 5)
        for label, pid in zip(windows.labels, windows.parent_epoch_id):
            assert 0 <= pid < epochs.n_epochs
            assert label == epochs.labels[pid]

    def test_window_too_long(self):
        epochs, _ = self.make_epochs()
        with pytest.raises(ValueError, match="exceeds epoch length"):
            slide_windows(epochs, 101, 5)

    def test_window_content_matches_slice(self):
        epochs, _ = self.make_epochs()
        windows = slide_windows(epochs, 90, 5)
        np.testing.assert_array_equal(windows.windows[1], epochs.epochs[0, 5:95])
