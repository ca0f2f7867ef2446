"""Heel-strike extraction from ankle keypoints and accelerometer data.

The video route takes the signed ankle gap along one camera axis, denoises it
with SSA and reads left/right strikes off the extrema. The acceleration route
projects the three axes onto their first principal component, denoises and
peak-picks, then assigns sides by alternation. Video is the canonical clock;
fusion reports agreement with acceleration and corrects a constant offset.
"""

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ica import pca
from .signals import Event, EventKind, EventTimeline
from .ssa import (
    default_embedding_dim,
    leading_components,
    peak_indices,
    ssa_decompose,
    ssa_reconstruct,
)

logger = logging.getLogger(__name__)


class GaitSource(Enum):
    VIDEO = "video"
    ACCELERATION = "acceleration"
    FUSED = "fused"


@dataclass(frozen=True)
class GaitEvents:
    """Sorted left/right heel-strike times.

    Alternation violations in the merged sequence are flagged, not dropped:
    ``alternation_gaps`` holds the times where a side repeats.
    """

    left_strikes_s: np.ndarray
    right_strikes_s: np.ndarray
    source: GaitSource
    alternation_gaps: tuple = ()

    def __post_init__(self):
        left = np.asarray(self.left_strikes_s, dtype=float)
        right = np.asarray(self.right_strikes_s, dtype=float)
        for name, arr in (("left", left), ("right", right)):
            if len(arr) > 1 and not np.all(np.diff(arr) > 0):
                raise ValueError(f"{name} strike times must be strictly increasing")
        gaps = _alternation_gaps(left, right)
        object.__setattr__(self, "left_strikes_s", left)
        object.__setattr__(self, "right_strikes_s", right)
        object.__setattr__(self, "alternation_gaps", tuple(gaps))

    @property
    def n_strikes(self):
        return len(self.left_strikes_s) + len(self.right_strikes_s)

    def merged(self):
        """All strikes as (times, sides) sorted by time; sides are 'L'/'R'."""
        times = np.concatenate([self.left_strikes_s, self.right_strikes_s])
        sides = np.array(["L"] * len(self.left_strikes_s) + ["R"] * len(self.right_strikes_s))
        order = np.argsort(times, kind="stable")
        return times[order], sides[order]

    def to_timeline(self):
        times, sides = self.merged()
        events = [
            Event(float(t), EventKind.HEEL_LEFT if s == "L" else EventKind.HEEL_RIGHT)
            for t, s in zip(times, sides)
        ]
        return EventTimeline(tuple(events))


def _alternation_gaps(left, right):
    times = np.concatenate([left, right])
    sides = ["L"] * len(left) + ["R"] * len(right)
    order = np.argsort(times, kind="stable")
    gaps = []
    prev = None
    for i in order:
        if prev is not None and sides[i] == prev:
            gaps.append(float(times[i]))
        prev = sides[i]
    return gaps


def events_from_timeline(timeline, source=GaitSource.VIDEO):
    left = [e.time_s for e in timeline.of_kind(EventKind.HEEL_LEFT)]
    right = [e.time_s for e in timeline.of_kind(EventKind.HEEL_RIGHT)]
    return GaitEvents(np.array(left), np.array(right), source)


# ---------------------------------------------------------------------------
# video route


def ankle_gap_series(keypoints, axis="y", min_confidence=0.2, min_coverage=0.9):
    """Signed per-frame left-minus-right ankle difference along one axis.

    Frames with a missing or low-confidence ankle are linearly interpolated.
    Coverage below ``min_coverage`` for either ankle is an error naming the
    sparse joint.

    Returns
    -------
    series, frame_times : 1-D arrays of equal length
    """
    if axis not in ("x", "y"):
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    frames = np.unique(keypoints.frame)
    if len(frames) == 0:
        raise ValueError("keypoints are empty")
    frame_to_pos = {int(f): i for i, f in enumerate(frames)}
    times = np.full(len(frames), np.nan)
    values = {}
    for joint in ("ankle_left", "ankle_right"):
        frame_idx, t, x, y, conf = keypoints.for_joint(joint)
        v = np.full(len(frames), np.nan)
        coords = y if axis == "y" else x
        for f, ti, c, val in zip(frame_idx, t, conf, coords):
            pos = frame_to_pos[int(f)]
            times[pos] = ti
            if c >= min_confidence:
                v[pos] = val
        coverage = np.mean(np.isfinite(v))
        if coverage < min_coverage:
            raise ValueError(
                f"joint {joint} present in only {coverage:.0%} of frames "
                f"(need >= {min_coverage:.0%})"
            )
        good = np.isfinite(v)
        v = np.interp(np.arange(len(frames)), np.flatnonzero(good), v[good])
        values[joint] = v
    if np.any(~np.isfinite(times)):
        # frames where neither ankle row carried a time stamp; interpolate
        good = np.isfinite(times)
        times = np.interp(np.arange(len(frames)), np.flatnonzero(good), times[good])
    return values["ankle_left"] - values["ankle_right"], times


def _denoise(series, l, energy_share):
    decomp = ssa_decompose(series, l)
    if decomp.degenerate:
        return np.zeros_like(series)
    return ssa_reconstruct(decomp, leading_components(decomp.eigenvalues, energy_share))


def strikes_from_video(
    keypoints,
    ssa_l=None,
    min_separation_s=0.25,
    threshold_k=0.0,
    left_is_max=True,
    axis="y",
    energy_share=0.9,
):
    """Heel strikes from ankle keypoints via the SSA-denoised signed gap.

    Maxima of the gap become left strikes and minima right strikes; the
    ``left_is_max`` flag swaps the assignment (which polarity is the left
    foot depends on camera placement and needs one-off calibration).
    """
    gap, times = ankle_gap_series(keypoints, axis=axis)
    if len(times) < 2:
        raise ValueError("insufficient gait: fewer than 2 frames")
    fps = 1.0 / np.median(np.diff(times))
    l = ssa_l if ssa_l is not None else default_embedding_dim(fps)
    l = min(l, len(gap))
    denoised = _denoise(gap, l, energy_share)
    min_sep = min_separation_s * fps
    maxima = peak_indices(denoised, min_sep, threshold_k)
    minima = peak_indices(-denoised, min_sep, threshold_k)
    if len(maxima) + len(minima) < 4:
        raise ValueError("insufficient gait: fewer than 4 strikes detected")
    left_idx, right_idx = (maxima, minima) if left_is_max else (minima, maxima)
    return GaitEvents(
        left_strikes_s=times[left_idx],
        right_strikes_s=times[right_idx],
        source=GaitSource.VIDEO,
    )


# ---------------------------------------------------------------------------
# acceleration route


def strikes_from_acceleration(
    accel,
    ssa_l=None,
    min_separation_s=0.25,
    threshold_k=0.0,
    first_side="left",
    energy_share=0.9,
):
    """Heel strikes from 3-axis acceleration.

    The first principal component carries the dominant gait variation; it is
    SSA-denoised and peak-picked. Acceleration alone cannot side-label, so
    sides alternate starting from ``first_side``.
    """
    if accel.n_channels != 3:
        raise ValueError(f"acceleration signal must have 3 channels, got {accel.n_channels}")
    components, scores, explained = pca(accel.data, n_components=3)
    if explained[0] <= 1e-12:
        raise ValueError("degenerate acceleration covariance (constant signal)")
    score = scores[:, 0]
    centered = score - score.mean()
    if np.mean(centered**3) < 0:  # orient impact bumps upward
        score = -score
    l = ssa_l if ssa_l is not None else default_embedding_dim(accel.sample_rate_hz)
    l = min(l, len(score))
    denoised = _denoise(score, l, energy_share)
    idx = peak_indices(denoised, min_separation_s * accel.sample_rate_hz, threshold_k)
    times = accel.start_time_s + idx / accel.sample_rate_hz
    if len(times) < 4:
        raise ValueError("insufficient gait: fewer than 4 strikes detected")
    starts_left = first_side == "left"
    left = times[0::2] if starts_left else times[1::2]
    right = times[1::2] if starts_left else times[0::2]
    return GaitEvents(left, right, GaitSource.ACCELERATION)


# ---------------------------------------------------------------------------
# fusion


@dataclass(frozen=True)
class SyncReport:
    match_fraction: float
    median_offset_s: float
    n_video: int
    n_accel: int
    offset_applied: bool

    def rows(self):
        return [
            ("match_fraction", self.match_fraction),
            ("median_offset_s", self.median_offset_s),
            ("n_video", self.n_video),
            ("n_accel", self.n_accel),
            ("offset_applied", int(self.offset_applied)),
        ]


def save_sync_report(report, path):
    with open(path, "w", newline="") as fh:
        fh.write("metric,value\n")
        for name, value in report.rows():
            fh.write(f"{name},{value:.17g}\n")


def fuse_video_accel(video, accel, tolerance_s=0.08, eeg_rate_hz=250.0):
    """Check video strikes against acceleration strikes and align the clocks.

    Video strikes are canonical. Each video strike is matched to the nearest
    acceleration strike within ``tolerance_s``; the median matched offset is
    applied to the video events when it exceeds one EEG sample. A match
    fraction below 0.5 raises a desynchronization error.
    """
    if video.n_strikes == 0 or accel.n_strikes == 0:
        raise ValueError("fuse_video_accel requires non-empty strike sets")
    v_times, v_sides = video.merged()
    a_times, _ = accel.merged()
    pos = np.searchsorted(a_times, v_times)
    offsets = np.full(len(v_times), np.inf)
    for i, (p, t) in enumerate(zip(pos, v_times)):
        for cand in (p - 1, p):
            if 0 <= cand < len(a_times):
                d = a_times[cand] - t
                if abs(d) < abs(offsets[i]):
                    offsets[i] = d
    matched = np.abs(offsets) <= tolerance_s
    fraction = float(np.mean(matched))
    if fraction < 0.5:
        raise ValueError(
            f"video/acceleration desynchronization: only {fraction:.0%} of video "
            f"strikes matched within {tolerance_s} s"
        )
    median_offset = float(np.median(offsets[matched]))
    apply = abs(median_offset) > 1.0 / eeg_rate_hz
    shift = median_offset if apply else 0.0
    report = SyncReport(
        match_fraction=fraction,
        median_offset_s=median_offset,
        n_video=len(v_times),
        n_accel=len(a_times),
        offset_applied=apply,
    )
    fused = GaitEvents(
        left_strikes_s=video.left_strikes_s + shift,
        right_strikes_s=video.right_strikes_s + shift,
        source=GaitSource.FUSED,
    )
    return fused, report
