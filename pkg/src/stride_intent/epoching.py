"""Steps, labels, reaction times and epoch/window extraction.

A step is the interval between successive heel strikes of either foot. Steps
are partitioned into trials by tone-change times; the reaction time of a
trial is the latency from its tone change to the first step whose duration
matches the session-level average step of the target mode within
band_k standard deviations.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .signals import EpochSet, LabelScheme, Mode, MultichannelSignal, WindowSet, _snap

logger = logging.getLogger(__name__)

#: Strike rates (per second, both feet) implied by the three tone modes.
TEMPO_HZ = {Mode.SLOW: 0.875, Mode.NORMAL: 1.75, Mode.FAST: 2.625}


@dataclass(frozen=True)
class ToneTimeline:
    """Tone-change schedule: strictly increasing times, consecutive modes differ."""

    changes: tuple  # of (time_s, Mode)
    tempo_map: dict = field(default_factory=lambda: dict(TEMPO_HZ))
    lead_in_mode: Mode = Mode.NORMAL

    def __post_init__(self):
        changes = tuple((float(t), m) for t, m in self.changes)
        times = [t for t, _ in changes]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("tone-change times must be strictly increasing")
        modes = [self.lead_in_mode] + [m for _, m in changes]
        if any(a is b for a, b in zip(modes, modes[1:])):
            raise ValueError("consecutive tone modes must differ")
        object.__setattr__(self, "changes", changes)

    @property
    def n_trials(self):
        return len(self.changes)

    def trial_bounds(self):
        """Per trial: (index, start_s, end_s, mode, previous_mode)."""
        out = []
        prev = self.lead_in_mode
        for i, (t, mode) in enumerate(self.changes):
            end = self.changes[i + 1][0] if i + 1 < len(self.changes) else math.inf
            out.append((i, t, end, mode, prev))
            prev = mode
        return out

    def trial_of(self, time_s):
        """Trial index containing a time; -1 before the first change."""
        times = [t for t, _ in self.changes]
        return int(np.searchsorted(times, time_s, side="right")) - 1

    @classmethod
    def from_events(cls, timeline, lead_in_mode=Mode.NORMAL):
        from .signals import EventKind

        changes = [(e.time_s, e.mode) for e in timeline.of_kind(EventKind.TONE_CHANGE)]
        return cls(changes=tuple(changes), lead_in_mode=lead_in_mode)


@dataclass(frozen=True)
class StepRecord:
    onset_s: float
    side: str  # 'L' or 'R'
    duration_s: float
    trial_index: int  # -1 for lead-in steps before the first tone change
    position_in_trial: int
    alternation_violation: bool = False

    def __post_init__(self):
        if self.side not in ("L", "R"):
            raise ValueError(f"side must be 'L' or 'R', got {self.side!r}")
        if not self.duration_s > 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")


@dataclass(frozen=True)
class LabeledStep:
    step: StepRecord
    label: str | None


def build_steps(gait, tones):
    """Turn heel strikes into per-trial step records.

    Each step starts at a strike and lasts until the next strike of either
    side. Alternation violations are flagged on the record, not dropped.
    Fewer than 2 strikes yields an empty list.
    """
    times, sides = gait.merged()
    if len(times) < 2:
        return []
    steps = []
    positions = {}
    prev_side = None
    for t, side, t_next in zip(times[:-1], sides[:-1], times[1:]):
        trial = tones.trial_of(t)
        pos = positions.get(trial, 0)
        positions[trial] = pos + 1
        steps.append(
            StepRecord(
                onset_s=float(t),
                side=str(side),
                duration_s=float(t_next - t),
                trial_index=trial,
                position_in_trial=pos,
                alternation_violation=prev_side == side,
            )
        )
        prev_side = side
    return steps


@dataclass(frozen=True)
class TrialReaction:
    trial_index: int
    mode: Mode
    rt_s: float
    n_adapt_steps: int
    detected: bool


def _mode_step_stats(steps, tones, settle_after=6):
    """Session-level (mean, std) of step duration per target mode.

    Uses steps past the first ``settle_after`` positions of each trial so the
    adaptation transient does not bias the target band; falls back to all
    steps of the mode when trials are short.
    """
    stats = {}
    by_mode = {}
    bounds = {i: mode for i, _, _, mode, _ in tones.trial_bounds()}
    for s in steps:
        mode = bounds.get(s.trial_index)
        if mode is None:
            continue
        by_mode.setdefault(mode, []).append(s)
    for mode, mode_steps in by_mode.items():
        settled = [s.duration_s for s in mode_steps if s.position_in_trial >= settle_after]
        pool = settled if settled else [s.duration_s for s in mode_steps]
        arr = np.asarray(pool)
        stats[mode] = (float(arr.mean()), float(arr.std()))
    return stats


def estimate_reaction_time(steps, tones, band_k=1.0, settle_after=6):
    """Per-trial reaction time and adaptation step count.

    RT is the latency from the tone change to the onset of the first step of
    the trial whose duration lies within the target mode's session mean
    +/- band_k * std. Trials where no step reaches the band before the trial
    end are returned with detected=False (and excluded from aggregates).
    """
    stats = _mode_step_stats(steps, tones, settle_after)
    by_trial = {}
    for s in steps:
        by_trial.setdefault(s.trial_index, []).append(s)
    results = []
    for index, t_change, _end, mode, _prev in tones.trial_bounds():
        trial_steps = sorted(by_trial.get(index, []), key=lambda s: s.onset_s)
        mean, std = stats.get(mode, (math.nan, math.nan))
        hit = None
        if not math.isnan(mean):
            for s in trial_steps:
                if abs(s.duration_s - mean) <= band_k * std:
                    hit = s
                    break
        if hit is None:
            results.append(TrialReaction(index, mode, math.nan, 0, False))
        else:
            results.append(
                TrialReaction(
                    index, mode, hit.onset_s - t_change, hit.position_in_trial + 1, True
                )
            )
    return results


@dataclass(frozen=True)
class ModeStats:
    step_mean: float
    step_std: float
    rt_mean: float
    rt_std: float
    nsteps_mean: float
    nsteps_std: float
    n_trials: int
    n_excluded: int


@dataclass(frozen=True)
class BehaviorReport:
    per_mode: dict  # Mode -> ModeStats
    n_trials_excluded: int
    n_trials: int


def behavior_report(steps, tones, band_k=1.0, settle_after=6):
    """Aggregate step durations, reaction times and adaptation-step counts per mode."""
    reactions = estimate_reaction_time(steps, tones, band_k, settle_after)
    bounds = {i: mode for i, _, _, mode, _ in tones.trial_bounds()}
    durations = {}
    for s in steps:
        mode = bounds.get(s.trial_index)
        if mode is not None:
            durations.setdefault(mode, []).append(s.duration_s)
    per_mode = {}
    total_excluded = 0
    for mode in (Mode.SLOW, Mode.NORMAL, Mode.FAST):
        mode_reactions = [r for r in reactions if r.mode is mode]
        detected = [r for r in mode_reactions if r.detected]
        excluded = len(mode_reactions) - len(detected)
        total_excluded += excluded
        durs = np.asarray(durations.get(mode, []))
        rts = np.asarray([r.rt_s for r in detected])
        counts = np.asarray([r.n_adapt_steps for r in detected], dtype=float)
        if len(detected) == 1:
            logger.warning("behavior_report: single detected trial for %s, std set to 0", mode)

        def ms(arr):
            if len(arr) == 0:
                return (math.nan, math.nan)
            return (float(arr.mean()), float(arr.std()))

        per_mode[mode] = ModeStats(
            *ms(durs), *ms(rts), *ms(counts), n_trials=len(mode_reactions), n_excluded=excluded
        )
    return BehaviorReport(
        per_mode=per_mode, n_trials_excluded=total_excluded, n_trials=len(reactions)
    )


def save_behavior_report(report, path):
    with open(path, "w", newline="") as fh:
        fh.write(f"# n_trials_excluded={report.n_trials_excluded}\n")
        fh.write("mode,step_mean,step_std,rt_mean,rt_std,nsteps_mean,nsteps_std\n")
        for mode in (Mode.SLOW, Mode.NORMAL, Mode.FAST):
            s = report.per_mode[mode]
            row = [
                mode.value,
                s.step_mean,
                s.step_std,
                s.rt_mean,
                s.rt_std,
                s.nsteps_mean,
                s.nsteps_std,
            ]
            fh.write(",".join(str(v) if isinstance(v, str) else f"{v:.6g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# labeling


def label_steps(steps, tones, scheme, n_adapt=3):
    """Attach classification labels to steps.

    LeftRight labels every step by its side. AdaptNonAdapt marks the first
    ``n_adapt`` steps of each trial as adapt and the ``n_adapt`` steps centred
    at the trial midpoint (ties towards earlier steps) as non-adapt.
    ThreeClass additionally splits adapt steps by tempo direction. Trials too
    short for both blocks are skipped with a warning.
    """
    if scheme is LabelScheme.LEFT_RIGHT:
        return [
            LabeledStep(s, "left" if s.side == "L" else "right") for s in steps
        ]
    tempo = tones.tempo_map
    directions = {
        i: ("slow_to_fast" if tempo[mode] > tempo[prev] else "fast_to_slow")
        for i, _t, _e, mode, prev in tones.trial_bounds()
    }
    by_trial = {}
    for s in steps:
        by_trial.setdefault(s.trial_index, []).append(s)
    labels = {}
    for trial, trial_steps in by_trial.items():
        if trial < 0:
            continue
        trial_steps = sorted(trial_steps, key=lambda s: s.position_in_trial)
        count = len(trial_steps)
        if count < 2 * n_adapt + 1:
            logger.warning(
                "label_steps: trial %d has %d steps, need >= %d; skipped",
                trial,
                count,
                2 * n_adapt + 1,
            )
            continue
        adapt_label = directions[trial] if scheme is LabelScheme.THREE_CLASS else "adapt"
        mid_start = (count - n_adapt) // 2
        for s in trial_steps[:n_adapt]:
            labels[id(s)] = adapt_label
        for s in trial_steps[mid_start : mid_start + n_adapt]:
            labels[id(s)] = "non_adapt"
    return [LabeledStep(s, labels.get(id(s))) for s in steps]


def save_step_labels(labeled_steps, path):
    """labels.csv: one row per step; label is the three-class label or empty."""
    with open(path, "w", newline="") as fh:
        fh.write("onset_s,side,trial,label\n")
        for ls in labeled_steps:
            s = ls.step
            fh.write(
                f"{s.onset_s:.17g},{s.side},{s.trial_index},{ls.label or ''}\n"
            )


def load_step_labels(path):
    import pandas as pd

    df = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    if list(df.columns) != ["onset_s", "side", "trial", "label"]:
        raise ValueError(f"{path}: malformed header, expected onset_s,side,trial,label")
    return [
        (float(r.onset_s), str(r.side), int(r.trial), str(r.label) or None)
        for r in df.itertuples(index=False)
    ]


# ---------------------------------------------------------------------------
# epochs and windows


def extract_epochs(signal, labeled_steps, scheme, epoch_len_s=0.4):
    """Cut one fixed-length epoch per labeled step, anchored at the strike.

    Steps without a label are ignored; onsets whose window exceeds the signal
    extent are dropped and counted on the returned set.
    """
    n_len = int(round(epoch_len_s * signal.sample_rate_hz))
    if n_len <= 0:
        raise ValueError(f"epoch_len_s too short at this rate: {epoch_len_s}")
    rate = signal.sample_rate_hz
    epochs, labels, onsets = [], [], []
    rejected = 0
    for ls in labeled_steps:
        if ls.label is None:
            continue
        idx = int(np.ceil(_snap((ls.step.onset_s - signal.start_time_s) * rate)))
        if idx < 0 or idx + n_len > signal.n_samples:
            rejected += 1
            continue
        epochs.append(signal.data[idx : idx + n_len])
        labels.append(ls.label)
        onsets.append(ls.step.onset_s)
    if not epochs:
        raise ValueError("no epochs could be extracted (empty labels or out-of-range onsets)")
    return EpochSet(
        epochs=np.stack(epochs),
        labels=tuple(labels),
        onsets_s=np.asarray(onsets),
        sample_rate_hz=rate,
        label_scheme=scheme,
        n_rejected_onsets=rejected,
    )


def slide_windows(epochs, w_samples, stride_samples=5):
    """Slide fixed-length windows through every epoch.

    Offsets are 0, stride, ... up to epoch_len - w; every window inherits its
    parent epoch's label. Window count per epoch is
    floor((epoch_len - w) / stride) + 1.
    """
    length = epochs.epoch_len_samples
    if not 1 <= w_samples <= length:
        raise ValueError(f"window length {w_samples} exceeds epoch length {length}")
    offsets = np.arange(0, length - w_samples + 1, stride_samples)
    windows = []
    labels = []
    parents = []
    for i in range(epochs.n_epochs):
        for off in offsets:
            windows.append(epochs.epochs[i, off : off + w_samples])
            labels.append(epochs.labels[i])
            parents.append(i)
    return WindowSet(
        windows=np.stack(windows),
        labels=tuple(labels),
        parent_epoch_id=np.asarray(parents),
        window_len_samples=int(w_samples),
        n_parent_epochs=epochs.n_epochs,
        label_scheme=epochs.label_scheme,
    )
