"""Domain types for multichannel signals, event timelines, epochs and windows,
plus their CSV round-tripping.

All on-disk numeric data is CSV with full-precision decimal floats (17
significant digits, enough for exact float64 round trips). Times are absolute
seconds from session start everywhere.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd

from .validation import check_array, check_positive

FLOAT_FMT = "%.17g"


def format_float(x):
    return FLOAT_FMT % x


class EventKind(Enum):
    TONE_CHANGE = "tone_change"
    HEEL_LEFT = "heel_left"
    HEEL_RIGHT = "heel_right"
    FRAME = "frame"


class Mode(Enum):
    SLOW = "slow"
    NORMAL = "normal"
    FAST = "fast"


class LabelScheme(Enum):
    LEFT_RIGHT = "left_right"
    ADAPT_NONADAPT = "adapt_nonadapt"
    THREE_CLASS = "three_class"


#: Valid label values per scheme, in canonical (index) order.
SCHEME_LABELS = {
    LabelScheme.LEFT_RIGHT: ("left", "right"),
    LabelScheme.ADAPT_NONADAPT: ("adapt", "non_adapt"),
    LabelScheme.THREE_CLASS: ("slow_to_fast", "fast_to_slow", "non_adapt"),
}


@dataclass(frozen=True)
class MultichannelSignal:
    """Time-indexed samples x channels matrix with a fixed sample rate.

    Rows are time, columns are channels. Immutable after construction.
    """

    sample_rate_hz: float
    start_time_s: float
    channel_names: tuple
    data: np.ndarray

    def __post_init__(self):
        check_positive(self.sample_rate_hz, "sample_rate_hz")
        names = tuple(str(n) for n in self.channel_names)
        if len(set(names)) != len(names):
            raise ValueError("channel_names must be distinct")
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise ValueError(f"data must be 2-D, got shape {data.shape}")
        if data.shape[1] != len(names):
            raise ValueError(
                f"data has {data.shape[1]} columns but {len(names)} channel names"
            )
        if not np.all(np.isfinite(data)):
            raise ValueError("signal data contains non-finite values")
        data = data.copy()
        data.flags.writeable = False
        object.__setattr__(self, "channel_names", names)
        object.__setattr__(self, "data", data)

    @property
    def n_samples(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    @property
    def times(self):
        return self.start_time_s + np.arange(self.n_samples) / self.sample_rate_hz

    @property
    def duration_s(self):
        return self.n_samples / self.sample_rate_hz

    def channel(self, name):
        """Return one channel as a 1-D array."""
        return self.data[:, self.channel_names.index(name)]

    def select(self, names):
        """Return a new signal restricted to the named channels, in order."""
        idx = [self.channel_names.index(n) for n in names]
        return MultichannelSignal(
            self.sample_rate_hz, self.start_time_s, tuple(names), self.data[:, idx]
        )


@dataclass(frozen=True)
class Event:
    time_s: float
    kind: EventKind
    mode: Mode | None = None

    def __post_init__(self):
        if self.kind is EventKind.TONE_CHANGE:
            if self.mode is None:
                raise ValueError("tone_change event requires a mode")
        elif self.mode is not None:
            raise ValueError(f"{self.kind.value} event must not carry a mode")


@dataclass(frozen=True)
class EventTimeline:
    """Sequence of timestamped events, nondecreasing in time."""

    events: tuple

    def __post_init__(self):
        events = tuple(self.events)
        times = [e.time_s for e in events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("event times must be nondecreasing")
        object.__setattr__(self, "events", events)

    def of_kind(self, kind):
        return tuple(e for e in self.events if e.kind is kind)

    def __len__(self):
        return len(self.events)


@dataclass(frozen=True)
class EpochSet:
    """Uniform-length signal segments with one label and onset per epoch."""

    epochs: np.ndarray  # n_epochs x n_samples x n_channels
    labels: tuple
    onsets_s: np.ndarray
    sample_rate_hz: float
    label_scheme: LabelScheme
    n_rejected_onsets: int = 0

    def __post_init__(self):
        epochs = np.asarray(self.epochs, dtype=float)
        if epochs.ndim != 3:
            raise ValueError(f"epochs must be 3-D, got shape {epochs.shape}")
        labels = tuple(self.labels)
        onsets = np.asarray(self.onsets_s, dtype=float)
        if not (len(labels) == len(onsets) == epochs.shape[0]):
            raise ValueError("labels, onsets_s and epochs must agree in length")
        valid = SCHEME_LABELS[self.label_scheme]
        bad = sorted({l for l in labels if l not in valid})
        if bad:
            raise ValueError(f"labels {bad} invalid for scheme {self.label_scheme.value}")
        check_positive(self.sample_rate_hz, "sample_rate_hz")
        epochs = epochs.copy()
        epochs.flags.writeable = False
        onsets = onsets.copy()
        onsets.flags.writeable = False
        object.__setattr__(self, "epochs", epochs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "onsets_s", onsets)

    @property
    def n_epochs(self):
        return self.epochs.shape[0]

    @property
    def epoch_len_samples(self):
        return self.epochs.shape[1]

    @property
    def n_channels(self):
        return self.epochs.shape[2]


@dataclass(frozen=True)
class WindowSet:
    """Sliding windows cut from epochs; each window inherits its parent label."""

    windows: np.ndarray  # m x w x n_channels
    labels: tuple
    parent_epoch_id: np.ndarray
    window_len_samples: int
    n_parent_epochs: int
    label_scheme: LabelScheme

    def __post_init__(self):
        windows = np.asarray(self.windows, dtype=float)
        if windows.ndim != 3:
            raise ValueError(f"windows must be 3-D, got shape {windows.shape}")
        if windows.shape[1] != self.window_len_samples:
            raise ValueError("window_len_samples disagrees with tensor shape")
        labels = tuple(self.labels)
        parents = np.asarray(self.parent_epoch_id, dtype=int)
        if not (len(labels) == len(parents) == windows.shape[0]):
            raise ValueError("labels, parent_epoch_id and windows must agree in length")
        if len(parents) and (parents.min() < 0 or parents.max() >= self.n_parent_epochs):
            raise ValueError("parent_epoch_id references a nonexistent epoch")
        windows = windows.copy()
        windows.flags.writeable = False
        parents = parents.copy()
        parents.flags.writeable = False
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "parent_epoch_id", parents)

    @property
    def n_windows(self):
        return self.windows.shape[0]

    @property
    def n_channels(self):
        return self.windows.shape[2]

    def class_windows(self, label):
        """All windows carrying the given label, as an m x w x c tensor."""
        mask = np.array([l == label for l in self.labels])
        return self.windows[mask]


# ---------------------------------------------------------------------------
# time slicing


def _snap(x, tol=1e-9):
    """Round x to the nearest integer when it is within tol of one."""
    r = round(x)
    return float(r) if abs(x - r) < tol else x


def slice_time(signal, t0_s, t1_s):
    """Return the sub-signal with samples in [t0_s, t1_s).

    Sample i lives at start_time_s + i / rate; the slice keeps exactly the
    samples with t0_s <= t < t1_s and updates start_time_s to the first kept
    sample's time.
    """
    if not t0_s < t1_s:
        raise ValueError(f"slice bounds must satisfy t0 < t1, got [{t0_s}, {t1_s})")
    r = signal.sample_rate_hz
    i0 = int(np.ceil(_snap((t0_s - signal.start_time_s) * r)))
    i1 = int(np.ceil(_snap((t1_s - signal.start_time_s) * r)))
    i0 = max(i0, 0)
    i1 = min(i1, signal.n_samples)
    if i1 <= i0:
        raise ValueError(f"slice [{t0_s}, {t1_s}) contains no samples")
    return MultichannelSignal(
        sample_rate_hz=r,
        start_time_s=signal.start_time_s + i0 / r,
        channel_names=signal.channel_names,
        data=signal.data[i0:i1],
    )


# ---------------------------------------------------------------------------
# signals.csv


def save_signal(signal, path):
    """Write a signal to CSV: `# rate_hz=<r>` comment, then time + channels."""
    path = Path(path)
    times = signal.times
    with open(path, "w", newline="") as fh:
        fh.write(f"# rate_hz={format_float(signal.sample_rate_hz)}\n")
        fh.write(",".join(["time_s", *signal.channel_names]) + "\n")
        if signal.n_samples:
            block = np.column_stack([times, signal.data])
            np.savetxt(fh, block, fmt=FLOAT_FMT, delimiter=",")


def _read_rate_comment(path):
    with open(path) as fh:
        first = fh.readline().strip()
    if not first.startswith("# rate_hz="):
        raise ValueError(f"{path}: malformed header, expected '# rate_hz=<r>' comment")
    try:
        return float(first.split("=", 1)[1])
    except ValueError as exc:
        raise ValueError(f"{path}: malformed rate in header comment") from exc


def load_signal(path, expected_rate=None):
    """Load a signal written by :func:`save_signal`.

    Raises distinct diagnostics for a malformed header, non-finite values
    and a sample-rate mismatch against ``expected_rate``.
    """
    path = Path(path)
    rate = _read_rate_comment(path)
    if expected_rate is not None and not np.isclose(rate, expected_rate, rtol=1e-9):
        raise ValueError(
            f"{path}: sample rate mismatch, header says {rate} but expected {expected_rate}"
        )
    try:
        df = pd.read_csv(path, skiprows=1, float_precision="round_trip")
    except ValueError as exc:
        raise ValueError(f"{path}: malformed numeric value ({exc})") from exc
    if df.columns[0] != "time_s":
        raise ValueError(f"{path}: malformed header, first column must be time_s")
    if len(df) and not np.issubdtype(np.asarray(df.values).dtype, np.number):
        raise ValueError(f"{path}: malformed numeric value in data rows")
    values = df.values.astype(float)
    bad = np.argwhere(~np.isfinite(values))
    if len(bad):
        r, c = bad[0]
        raise ValueError(f"{path}: non-finite value at row {r}, col {c}")
    start = float(values[0, 0]) if len(values) else 0.0
    return MultichannelSignal(
        sample_rate_hz=rate,
        start_time_s=start,
        channel_names=tuple(df.columns[1:]),
        data=values[:, 1:] if len(values) else np.empty((0, len(df.columns) - 1)),
    )


# ---------------------------------------------------------------------------
# events.csv


def save_events(timeline, path):
    """Write an event timeline as `time_s,kind,mode` rows."""
    with open(path, "w", newline="") as fh:
        fh.write("time_s,kind,mode\n")
        for e in timeline.events:
            mode = e.mode.value if e.mode is not None else ""
            fh.write(f"{format_float(e.time_s)},{e.kind.value},{mode}\n")


def load_events(path):
    """Load events.csv; rows are stably sorted by time on load."""
    path = Path(path)
    df = pd.read_csv(path, float_precision="round_trip", keep_default_na=False)
    if list(df.columns) != ["time_s", "kind", "mode"]:
        raise ValueError(f"{path}: malformed header, expected time_s,kind,mode")
    kinds = {k.value: k for k in EventKind}
    modes = {m.value: m for m in Mode}
    events = []
    for i, row in enumerate(df.itertuples(index=False)):
        kind_token = str(row.kind)
        if kind_token not in kinds:
            raise ValueError(f"{path}: unknown kind token '{kind_token}' at row {i}")
        mode_token = str(row.mode)
        kind = kinds[kind_token]
        if kind is EventKind.TONE_CHANGE:
            if mode_token not in modes:
                raise ValueError(f"{path}: tone_change without valid mode at row {i}")
            mode = modes[mode_token]
        else:
            if mode_token:
                raise ValueError(f"{path}: {kind_token} must not carry a mode (row {i})")
            mode = None
        events.append(Event(float(row.time_s), kind, mode))
    events.sort(key=lambda e: e.time_s)  # sort() is stable
    return EventTimeline(tuple(events))


# ---------------------------------------------------------------------------
# keypoints.csv


@dataclass(frozen=True)
class Keypoints:
    """Columnar 2-D keypoint detections from a pose estimator."""

    frame: np.ndarray
    time_s: np.ndarray
    joint: tuple
    x_px: np.ndarray
    y_px: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        n = len(self.frame)
        for name in ("time_s", "joint", "x_px", "y_px", "confidence"):
            if len(getattr(self, name)) != n:
                raise ValueError("keypoint columns must agree in length")

    def joint_names(self):
        return sorted(set(self.joint))

    def for_joint(self, name):
        """Rows of one joint as (frame, time_s, x, y, confidence) arrays."""
        mask = np.array([j == name for j in self.joint])
        return (
            self.frame[mask],
            self.time_s[mask],
            self.x_px[mask],
            self.y_px[mask],
            self.confidence[mask],
        )


KEYPOINT_COLUMNS = ["frame", "time_s", "joint", "x_px", "y_px", "confidence"]


def save_keypoints(keypoints, path):
    df = pd.DataFrame(
        {
            "frame": keypoints.frame,
            "time_s": keypoints.time_s,
            "joint": list(keypoints.joint),
            "x_px": keypoints.x_px,
            "y_px": keypoints.y_px,
            "confidence": keypoints.confidence,
        }
    )
    df.to_csv(path, index=False, float_format=FLOAT_FMT)


def load_keypoints(path):
    path = Path(path)
    df = pd.read_csv(path, float_precision="round_trip")
    if list(df.columns) != KEYPOINT_COLUMNS:
        raise ValueError(f"{path}: malformed header, expected {','.join(KEYPOINT_COLUMNS)}")
    return Keypoints(
        frame=df["frame"].to_numpy(dtype=int),
        time_s=df["time_s"].to_numpy(dtype=float),
        joint=tuple(str(j) for j in df["joint"]),
        x_px=df["x_px"].to_numpy(dtype=float),
        y_px=df["y_px"].to_numpy(dtype=float),
        confidence=df["confidence"].to_numpy(dtype=float),
    )
