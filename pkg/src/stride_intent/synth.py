"""Deterministic synthetic walking sessions with planted ground truth.

A session is built in three layers. The protocol schedules 20 tone changes
per mode, randomly permuted with no immediate repeats. Kinematics integrate
an instantaneous step rate that relaxes exponentially towards the current
tempo (which realizes tunable reaction times), yielding true strike times,
antiphase ankle keypoints and strike-locked acceleration. The EEG forward
model mixes, on top of pink background activity: two mu/beta sources whose
envelopes lateralize with the stepping side, beta-burst adaptation sources
active over the first three steps after each tone change with topographies
that differ by adaptation direction, gait-artifact sources locked to the
step frequency and its harmonics, and occasional high-amplitude burst
outliers. Per-channel sensor noise is scaled to the requested SNR exactly.

Everything is a pure function of (spec, seed): the RNG streams are derived
from the seed per layer, so individual generators stay composable.
"""

import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .epoching import TEMPO_HZ, ToneTimeline, build_steps, label_steps
from .gait import GaitEvents, GaitSource
from .signals import (
    Event,
    EventKind,
    EventTimeline,
    Keypoints,
    LabelScheme,
    Mode,
    MultichannelSignal,
    format_float,
    save_events,
    save_keypoints,
    save_signal,
)

EEG_CHANNEL_NAMES = tuple(f"eeg{i + 1:02d}" for i in range(32))
ACCEL_CHANNEL_NAMES = ("accel_x", "accel_y", "accel_z")


@dataclass(frozen=True)
class SessionSpec:
    """Tunable parameters of a synthetic session."""

    seed: int = 0
    n_trials_per_mode: int = 20
    steps_per_trial: tuple = (18, 30)  # inclusive uniform range, 24 +/- 6
    normal_tempo_hz: float = 1.75  # strike rate; slow/fast are 0.5x and 1.5x
    rt_time_constant_s: dict = field(
        default_factory=lambda: {Mode.SLOW: 0.22, Mode.NORMAL: 0.50, Mode.FAST: 0.40}
    )
    n_channels: int = 32
    eeg_rate_hz: float = 250.0
    camera_fps: float = 60.0
    snr_db: float = 4.0
    n_discriminative_sources: int = 5
    artifact_gain: float = 3.0
    # secondary knobs
    step_jitter: float = 0.02  # multiplicative step-duration noise (lognormal sigma)
    lead_in_s: float = 5.0
    ankle_amplitude_px: float = 60.0
    pixel_noise_px: float = 2.0
    keypoint_dropout: float = 0.01
    n_active_sources: int = 2  # adaptation sources bursting per trial
    direction_contrast: float = 0.6
    adapt_gain: float = 1.6
    lr_gain: float = 1.2
    background_gain: float = 0.8
    n_background: int = 8
    outlier_rate: float = 0.02  # fraction of steps hit by a burst outlier
    outlier_gain: float = 6.0
    noise_burstiness: float = 0.6  # lognormal sigma of the slow noise envelope
    noise_rank: int = 20  # spatial rank of the sensor noise (volume conduction)

    def __post_init__(self):
        if self.n_trials_per_mode <= 0 or self.n_channels <= 0:
            raise ValueError("counts must be positive")
        lo, hi = self.steps_per_trial
        if not (0 < lo <= hi):
            raise ValueError(f"invalid steps_per_trial range {self.steps_per_trial}")

    @property
    def tempos(self):
        base = self.normal_tempo_hz
        return {Mode.SLOW: 0.5 * base, Mode.NORMAL: base, Mode.FAST: 1.5 * base}

    # -- manifest round-tripping --------------------------------------------

    def to_params(self):
        lo, hi = self.steps_per_trial
        out = {
            "seed": repr(self.seed),
            "n_trials_per_mode": repr(self.n_trials_per_mode),
            "steps_per_trial_lo": repr(lo),
            "steps_per_trial_hi": repr(hi),
            "normal_tempo_hz": repr(self.normal_tempo_hz),
            "n_channels": repr(self.n_channels),
            "eeg_rate_hz": repr(self.eeg_rate_hz),
            "camera_fps": repr(self.camera_fps),
            "snr_db": repr(self.snr_db),
            "n_discriminative_sources": repr(self.n_discriminative_sources),
            "artifact_gain": repr(self.artifact_gain),
            "step_jitter": repr(self.step_jitter),
            "lead_in_s": repr(self.lead_in_s),
            "ankle_amplitude_px": repr(self.ankle_amplitude_px),
            "pixel_noise_px": repr(self.pixel_noise_px),
            "keypoint_dropout": repr(self.keypoint_dropout),
            "n_active_sources": repr(self.n_active_sources),
            "direction_contrast": repr(self.direction_contrast),
            "adapt_gain": repr(self.adapt_gain),
            "lr_gain": repr(self.lr_gain),
            "background_gain": repr(self.background_gain),
            "n_background": repr(self.n_background),
            "outlier_rate": repr(self.outlier_rate),
            "outlier_gain": repr(self.outlier_gain),
            "noise_burstiness": repr(self.noise_burstiness),
            "noise_rank": repr(self.noise_rank),
        }
        for mode in (Mode.SLOW, Mode.NORMAL, Mode.FAST):
            out[f"rt_tau_{mode.value}"] = repr(self.rt_time_constant_s[mode])
        return out

    @classmethod
    def from_params(cls, params):
        import ast

        p = dict(params)

        def take(key, conv):
            return conv(ast.literal_eval(p[key]))  # values written via repr

        taus = {m: take(f"rt_tau_{m.value}", float) for m in (Mode.SLOW, Mode.NORMAL, Mode.FAST)}
        return cls(
            seed=take("seed", int),
            n_trials_per_mode=take("n_trials_per_mode", int),
            steps_per_trial=(take("steps_per_trial_lo", int), take("steps_per_trial_hi", int)),
            normal_tempo_hz=take("normal_tempo_hz", float),
            rt_time_constant_s=taus,
            n_channels=take("n_channels", int),
            eeg_rate_hz=take("eeg_rate_hz", float),
            camera_fps=take("camera_fps", float),
            snr_db=take("snr_db", float),
            n_discriminative_sources=take("n_discriminative_sources", int),
            artifact_gain=take("artifact_gain", float),
            step_jitter=take("step_jitter", float),
            lead_in_s=take("lead_in_s", float),
            ankle_amplitude_px=take("ankle_amplitude_px", float),
            pixel_noise_px=take("pixel_noise_px", float),
            keypoint_dropout=take("keypoint_dropout", float),
            n_active_sources=take("n_active_sources", int),
            direction_contrast=take("direction_contrast", float),
            adapt_gain=take("adapt_gain", float),
            lr_gain=take("lr_gain", float),
            background_gain=take("background_gain", float),
            n_background=take("n_background", int),
            outlier_rate=take("outlier_rate", float),
            outlier_gain=take("outlier_gain", float),
            noise_burstiness=take("noise_burstiness", float),
            noise_rank=take("noise_rank", int),
        )


def _rng(spec, stream):
    return np.random.default_rng([spec.seed, stream])


# ---------------------------------------------------------------------------
# protocol


def gen_protocol(spec):
    """Tone-change schedule: n_trials_per_mode trials per mode, randomly
    permuted so consecutive modes differ (and the first differs from the
    normal-mode lead-in); trial lengths are drawn per spec."""
    rng = _rng(spec, 1)
    modes = [Mode.SLOW, Mode.NORMAL, Mode.FAST]
    tempos = spec.tempos
    for _ in range(1000):
        remaining = {m: spec.n_trials_per_mode for m in modes}
        seq = []
        prev = Mode.NORMAL  # lead-in
        ok = True
        for _i in range(3 * spec.n_trials_per_mode):
            options = [m for m in modes if remaining[m] > 0 and m is not prev]
            if not options:
                ok = False
                break
            weights = np.array([remaining[m] for m in options], dtype=float)
            pick = options[rng.choice(len(options), p=weights / weights.sum())]
            seq.append(pick)
            remaining[pick] -= 1
            prev = pick
        if ok:
            break
    else:
        raise RuntimeError("could not build a no-repeat mode permutation")
    lo, hi = spec.steps_per_trial
    counts = rng.integers(lo, hi + 1, size=len(seq))
    changes = []
    t = spec.lead_in_s
    for mode, steps in zip(seq, counts):
        changes.append((t, mode))
        t += steps / tempos[mode]
    return ToneTimeline(changes=tuple(changes), lead_in_mode=Mode.NORMAL)


# ---------------------------------------------------------------------------
# kinematics


def _simulate_strikes(timeline, spec):
    """Step-by-step simulation of strike times with exponential tempo tracking.

    Returns (times, sides, durations_programmed_rt dict per trial)."""
    rng = _rng(spec, 2)
    tempos = spec.tempos
    bounds = timeline.trial_bounds()
    last_t, last_mode = timeline.changes[-1]
    # length of the final trial from the protocol's own step budget
    end = last_t + 26 / tempos[last_mode] + 2.0
    taus = spec.rt_time_constant_s

    t = 0.5
    rate = tempos[Mode.NORMAL]
    rate_at_change = rate
    current_change_t = 0.0
    current_mode = Mode.NORMAL
    times, sides, rates = [], [], []
    i = 0
    while t < end:
        trial = timeline.trial_of(t)
        if trial >= 0:
            _idx, t_change, _e, mode, _prev = bounds[trial]
            if mode is not current_mode or t_change != current_change_t:
                # rate state at the moment of the change
                tau_prev = max(taus[current_mode], 1e-9)
                rate_at_change = tempos[current_mode] + (
                    rate_at_change - tempos[current_mode]
                ) * math.exp(-(t_change - current_change_t) / tau_prev)
                current_change_t = t_change
                current_mode = mode
        tau = max(taus[current_mode], 1e-9)
        target = tempos[current_mode]
        rate = target + (rate_at_change - target) * math.exp(
            -(t - current_change_t) / tau
        )
        jitter = math.exp(rng.normal(0.0, spec.step_jitter)) if spec.step_jitter > 0 else 1.0
        duration = jitter / rate
        times.append(t)
        sides.append("L" if i % 2 == 0 else "R")
        rates.append(rate)
        t += duration
        i += 1
    return np.asarray(times), np.asarray(sides), np.asarray(rates)


def _programmed_reaction_times(times, timeline, spec):
    """Ground-truth RT per trial: first step whose duration sits within one
    jitter band of the target period."""
    durations = np.diff(times)
    tempos = spec.tempos
    out = {}
    for index, t_change, t_end, mode, _prev in timeline.trial_bounds():
        target = 1.0 / tempos[mode]
        band = max(spec.step_jitter, 1e-12) * target
        rt = math.nan
        for t, d in zip(times[:-1], durations):
            if t < t_change or t >= min(t_end, times[-1]):
                continue
            if abs(d - target) <= band:
                rt = t - t_change
                break
        out[index] = rt
    return out


def _phase(times_grid, strike_times):
    """Piecewise-linear gait phase: advances by 1 at every strike."""
    idx = np.arange(len(strike_times), dtype=float)
    phase = np.interp(times_grid, strike_times, idx)
    # linear extrapolation at the edges instead of np.interp's clamping
    if len(strike_times) > 1:
        r0 = 1.0 / (strike_times[1] - strike_times[0])
        r1 = 1.0 / (strike_times[-1] - strike_times[-2])
        before = times_grid < strike_times[0]
        after = times_grid > strike_times[-1]
        phase[before] = (times_grid[before] - strike_times[0]) * r0
        phase[after] = idx[-1] + (times_grid[after] - strike_times[-1]) * r1
    return phase


@dataclass(frozen=True)
class Kinematics:
    keypoints: Keypoints
    true_events: GaitEvents
    strike_times: np.ndarray
    strike_sides: np.ndarray
    programmed_rt: dict
    duration_s: float


def gen_kinematics(timeline, spec):
    """Ankle keypoints plus the true strikes they encode."""
    times, sides, _rates = _simulate_strikes(timeline, spec)
    duration = float(times[-1] + 1.0)
    rng = _rng(spec, 3)
    n_frames = int(duration * spec.camera_fps)
    frame_times = np.arange(n_frames) / spec.camera_fps
    phase = _phase(frame_times, times)
    swing = np.sin(np.pi * (phase + 0.5))  # maxima at left strikes (even phase)
    amp = spec.ankle_amplitude_px / 2.0
    base_y = 400.0
    y_left = base_y + amp * swing + rng.normal(0, spec.pixel_noise_px, n_frames)
    y_right = base_y - amp * swing + rng.normal(0, spec.pixel_noise_px, n_frames)
    sway = 5.0 * np.sin(2 * np.pi * 0.1 * frame_times)
    x_left = 300.0 + sway + rng.normal(0, spec.pixel_noise_px, n_frames)
    x_right = 340.0 + sway + rng.normal(0, spec.pixel_noise_px, n_frames)
    conf = np.clip(rng.normal(0.92, 0.04, (n_frames, 2)), 0.3, 1.0)
    dropped = rng.random((n_frames, 2)) < spec.keypoint_dropout
    conf[dropped] = 0.05  # below the default confidence floor -> interpolated

    frames = np.repeat(np.arange(n_frames), 2)
    t_col = np.repeat(frame_times, 2)
    joints = tuple(["ankle_left", "ankle_right"] * n_frames)
    x_col = np.column_stack([x_left, x_right]).ravel()
    y_col = np.column_stack([y_left, y_right]).ravel()
    c_col = conf.ravel()
    keypoints = Keypoints(
        frame=frames, time_s=t_col, joint=joints, x_px=x_col, y_px=y_col, confidence=c_col
    )
    left = times[sides == "L"]
    right = times[sides == "R"]
    events = GaitEvents(left, right, GaitSource.VIDEO)
    return Kinematics(
        keypoints=keypoints,
        true_events=events,
        strike_times=times,
        strike_sides=sides,
        programmed_rt=_programmed_reaction_times(times, timeline, spec),
        duration_s=duration,
    )


# ---------------------------------------------------------------------------
# EEG + acceleration forward model


def _pink_noise(rng, n_samples, n_series):
    white = rng.standard_normal((n_samples, n_series))
    spectrum = np.fft.rfft(white, axis=0)
    freqs = np.fft.rfftfreq(n_samples)
    freqs[0] = 1.0
    spectrum /= np.sqrt(freqs)[:, None]
    spectrum[0] = 0.0  # no DC: keeps the series zero-mean
    pink = np.fft.irfft(spectrum, n=n_samples, axis=0)
    pink /= pink.std(axis=0)
    return pink


def _unit(v):
    return v / np.linalg.norm(v)


def _rms_normalized(x):
    rms = np.sqrt(np.mean(x**2))
    return x / rms if rms > 0 else x


def _bump_train(grid, centers, sigma):
    out = np.zeros_like(grid)
    rate = 1.0 / (grid[1] - grid[0])
    half = int(4 * sigma * rate)
    window = np.exp(-0.5 * ((np.arange(-half, half + 1) / rate) / sigma) ** 2)
    for c in centers:
        i = int(round(c * rate))
        lo, hi = i - half, i + half + 1
        wlo = max(0, -lo)
        whi = len(window) - max(0, hi - len(grid))
        lo, hi = max(lo, 0), min(hi, len(grid))
        if lo < hi:
            out[lo:hi] += window[wlo:whi]
    return out


def _step_envelope(phase, parity):
    """Smooth envelope peaking during the step after a given-side strike."""
    local = np.mod(phase - parity, 2.0)
    return 0.2 + 0.8 * (0.5 + 0.5 * np.cos(np.pi * np.minimum(local, 2 - local)))


@dataclass(frozen=True)
class SessionGroundTruth:
    """Planted truth for oracle checks."""

    mixing: np.ndarray  # channels x sources
    source_names: tuple
    artifact_indices: tuple
    strike_times: np.ndarray
    strike_sides: np.ndarray
    labels_lr: tuple  # (onset_s, label) pairs
    labels_ana: tuple
    labels_three: tuple
    programmed_rt: dict  # trial -> seconds (nan when never adapting)
    snr_db_per_channel: np.ndarray
    adapt_topographies: np.ndarray  # channels x n_sources (shared component)
    direction_topographies: np.ndarray  # channels x n_sources (direction component)
    active_sources: dict  # trial -> tuple of source indices


def gen_eeg(timeline, kinematics, spec):
    """Forward-model EEG plus 3-axis acceleration.

    Returns (signal, ground_truth, extras); extras carries the artifact-free
    channel data ('clean') and the sensor noise for oracle tests.
    """
    rng = _rng(spec, 4)
    fs = spec.eeg_rate_hz
    n = int(round(kinematics.duration_s * fs))
    grid = np.arange(n) / fs
    nch = spec.n_channels
    strike_times = kinematics.strike_times
    phase = _phase(grid, strike_times)
    bounds = timeline.trial_bounds()
    tempos = spec.tempos

    columns = []
    names = []
    streams = []  # (source index, waveform) accumulated lazily

    def add_source(name, topography, waveform):
        names.append(name)
        columns.append(topography)
        streams.append(waveform)

    # (a) mu/beta oscillators lateralizing with the stepping side
    step_gain = np.exp(rng.normal(0.0, 0.35, len(strike_times)))
    gain_series = np.interp(grid, strike_times, step_gain)
    for parity, tag in ((0, "lr_left"), (1, "lr_right")):
        carrier = np.sin(2 * np.pi * (10.2 + 0.8 * parity) * grid + rng.uniform(0, 2 * np.pi))
        carrier += 0.6 * np.sin(2 * np.pi * (19.0 + 1.5 * parity) * grid + rng.uniform(0, 2 * np.pi))
        env = _step_envelope(phase, parity) * gain_series
        add_source(tag, _unit(rng.standard_normal(nch)), spec.lr_gain * _rms_normalized(carrier * env))

    # (b) adaptation sources: beta bursts over the first three steps after a
    # change. All topographies live in one n_src-dimensional channel subspace
    # (direction differences rotate within it), so n_src spatial components
    # suffice to capture the adaptation signal.
    n_src = spec.n_discriminative_sources
    basis, _ = np.linalg.qr(rng.standard_normal((nch, n_src)))
    T = basis.copy()
    D = basis[:, (np.arange(n_src) + 1) % n_src]
    delta = spec.direction_contrast
    active = {}
    envelopes = {("up", k): np.zeros(n) for k in range(n_src)}
    envelopes.update({("down", k): np.zeros(n) for k in range(n_src)})
    ramp = 0.1
    for index, t_change, t_end, mode, prev in bounds:
        after = strike_times[strike_times > t_change]
        if len(after) >= 3:
            t_stop = min(after[2] + 0.5, t_end)
        else:
            t_stop = min(t_change + 2.5, t_end)
        direction = "up" if tempos[mode] > tempos[prev] else "down"
        chosen = tuple(sorted(rng.choice(n_src, size=min(spec.n_active_sources, n_src), replace=False).tolist()))
        active[index] = chosen
        amp = math.exp(rng.normal(0.0, 0.25))
        lo = np.clip(((grid - t_change) / ramp), 0.0, 1.0)
        hi = np.clip(((t_stop - grid) / ramp), 0.0, 1.0)
        window = amp * np.minimum(lo, hi)
        for k in chosen:
            envelopes[(direction, k)] += window
    for k in range(n_src):
        freq = 16.0 + 3.0 * k
        # distinct per-source strength so the normalized variance profile
        # itself carries the class, one component at a time
        strength = 0.8**k
        carrier = np.sin(2 * np.pi * freq * grid + rng.uniform(0, 2 * np.pi))
        col_up = _unit(T[:, k] + delta * D[:, k])
        col_down = _unit(T[:, k] - delta * D[:, k])
        up = carrier * envelopes[("up", k)]
        down = carrier * envelopes[("down", k)]
        scale = np.sqrt(np.mean((up + down) ** 2))
        scale = scale if scale > 0 else 1.0
        add_source(f"adapt_up_{k}", col_up, strength * spec.adapt_gain * up / scale)
        add_source(f"adapt_down_{k}", col_down, strength * spec.adapt_gain * down / scale)

    # (c) gait artifacts locked to the step frequency and harmonics; the
    # amplitude varies per trial (slow modulation keeps the spectral lines
    # sharp while making the marginal heavy-tailed, which infomax needs)
    artifact_idx = []
    change_times = np.array([t for t, _ in timeline.changes])
    for j in range(2):
        trial_gain = np.exp(rng.normal(0.0, 0.5, len(change_times) + 1))
        gain_env = trial_gain[1 + np.searchsorted(change_times, grid) - 1]
        wave = np.zeros(n)
        for h in range(1, 5):
            wave += h**-1.5 * np.sin(2 * np.pi * h * phase + rng.uniform(0, 2 * np.pi))
        artifact_idx.append(len(names))
        add_source(
            f"artifact_{j}",
            _unit(rng.standard_normal(nch)),
            spec.artifact_gain * _rms_normalized(wave * gain_env),
        )

    # (d) background pink sources
    bg = _pink_noise(rng, n, spec.n_background)
    for j in range(spec.n_background):
        add_source(f"background_{j}", _unit(rng.standard_normal(nch)), spec.background_gain * bg[:, j])

    mixing = np.stack(columns, axis=1)  # nch x n_sources
    source_data = np.stack(streams, axis=1)  # n x n_sources
    eeg = source_data @ mixing.T

    # outliers: brief single-electrode pops right after a strike (the classic
    # erroneous-epoch contamination regularization is meant to absorb)
    n_outliers = int(round(spec.outlier_rate * len(strike_times)))
    if n_outliers > 0:
        sig_rms = np.sqrt(np.mean(eeg**2))
        hit = rng.choice(len(strike_times), size=n_outliers, replace=False)
        half = int(0.4 * fs)
        for s in sorted(hit.tolist()):
            t0 = strike_times[s] + 0.1
            centre = int(round(t0 * fs))
            lo, hi = max(centre - half, 0), min(centre + half, n)
            if lo >= hi:
                continue
            env = np.exp(-0.5 * ((grid[lo:hi] - t0) / 0.06) ** 2)
            f = rng.uniform(5.0, 35.0)
            pop = env * np.sin(2 * np.pi * f * grid[lo:hi] + rng.uniform(0, 2 * np.pi))
            channel = int(rng.integers(nch))
            eeg[lo:hi, channel] += pop * spec.outlier_gain * sig_rms

    clean = eeg - source_data[:, artifact_idx] @ mixing[:, artifact_idx].T

    # sensor noise at the exact requested per-channel SNR. The noise is
    # spatially low-rank (volume-conducted) with a slow lognormal envelope
    # per noise source (bursty, non-stationary), plus a tiny flat floor so
    # the covariance stays full rank.
    rank = min(max(spec.noise_rank, 1), nch)
    sources = _pink_noise(rng, n, rank)
    if spec.noise_burstiness > 0:
        knots = np.arange(0, n + 2 * int(fs), int(2 * fs))
        knot_vals = rng.standard_normal((len(knots), rank))
        slow = np.empty((n, rank))
        for c in range(rank):
            slow[:, c] = np.interp(np.arange(n), knots, knot_vals[:, c])
        sources = sources * np.exp(spec.noise_burstiness * slow)
        sources /= np.sqrt(np.mean(sources**2, axis=0))
    noise_mix = np.stack([_unit(rng.standard_normal(nch)) for _ in range(rank)], axis=1)
    noise = sources @ noise_mix.T
    noise += 0.03 * _pink_noise(rng, n, nch)  # ~ -30 dB iid floor
    noise /= np.sqrt(np.mean(noise**2, axis=0))
    sig_rms_ch = np.sqrt(np.mean(eeg**2, axis=0))
    sig_rms_ch[sig_rms_ch == 0] = 1.0
    noise_scale = sig_rms_ch * 10 ** (-spec.snr_db / 20.0)
    noise = noise * noise_scale
    eeg_noisy = eeg + noise
    realized_snr = 20 * np.log10(sig_rms_ch / np.sqrt(np.mean(noise**2, axis=0)))

    # acceleration: strike-locked impulse train rotated into three axes
    accel_dir = _unit(rng.standard_normal(3))
    impulse = _bump_train(grid, strike_times, 0.03)
    accel = np.outer(impulse, accel_dir) + 0.05 * rng.standard_normal((n, 3))

    signal = MultichannelSignal(
        sample_rate_hz=fs,
        start_time_s=0.0,
        channel_names=EEG_CHANNEL_NAMES[:nch] + ACCEL_CHANNEL_NAMES,
        data=np.hstack([eeg_noisy, accel]),
    )

    true_events = kinematics.true_events
    steps = build_steps(true_events, timeline)

    def onset_labels(scheme):
        labeled = label_steps(steps, timeline, scheme)
        return tuple((ls.step.onset_s, ls.label) for ls in labeled if ls.label is not None)

    truth = SessionGroundTruth(
        mixing=mixing,
        source_names=tuple(names),
        artifact_indices=tuple(artifact_idx),
        strike_times=kinematics.strike_times,
        strike_sides=kinematics.strike_sides,
        labels_lr=onset_labels(LabelScheme.LEFT_RIGHT),
        labels_ana=onset_labels(LabelScheme.ADAPT_NONADAPT),
        labels_three=onset_labels(LabelScheme.THREE_CLASS),
        programmed_rt=dict(kinematics.programmed_rt),
        snr_db_per_channel=realized_snr,
        adapt_topographies=T,
        direction_topographies=D,
        active_sources=active,
    )
    extras = {"clean": np.hstack([clean + noise, accel]), "noise": noise}
    return signal, truth, extras


# ---------------------------------------------------------------------------
# full sessions on disk


@dataclass(frozen=True)
class Session:
    spec: SessionSpec
    timeline: ToneTimeline
    kinematics: Kinematics
    signal: MultichannelSignal
    ground_truth: SessionGroundTruth
    extras: dict


def generate_session(spec):
    """Generate a full session in memory."""
    timeline = gen_protocol(spec)
    kinematics = gen_kinematics(timeline, spec)
    signal, truth, extras = gen_eeg(timeline, kinematics, spec)
    return Session(spec, timeline, kinematics, signal, truth, extras)


def save_ground_truth(truth, path):
    with open(path, "w", newline="") as fh:
        fh.write("kind,index,value\n")
        times, sides = truth.strike_times, truth.strike_sides
        for i, (t, s) in enumerate(zip(times, sides)):
            kind = "strike_left" if s == "L" else "strike_right"
            fh.write(f"{kind},{i},{format_float(t)}\n")
        for tag, labels in (
            ("label_lr", truth.labels_lr),
            ("label_ana", truth.labels_ana),
            ("label_3c", truth.labels_three),
        ):
            for i, (onset, label) in enumerate(labels):
                fh.write(f"{tag}_onset,{i},{format_float(onset)}\n")
                fh.write(f"{tag},{i},{label}\n")
        for trial in sorted(truth.programmed_rt):
            fh.write(f"rt,{trial},{format_float(truth.programmed_rt[trial])}\n")
        nch, nsrc = truth.mixing.shape
        for i in range(nch):
            for j in range(nsrc):
                fh.write(f"mixing,{i}_{j},{format_float(truth.mixing[i, j])}\n")
        for j, name in enumerate(truth.source_names):
            fh.write(f"source_name,{j},{name}\n")
        for j in truth.artifact_indices:
            fh.write(f"artifact_source,{j},{j}\n")
        for i, v in enumerate(truth.snr_db_per_channel):
            fh.write(f"snr_db_channel,{i},{format_float(v)}\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


SESSION_FILES = (
    "signals.csv",
    "keypoints.csv",
    "events.csv",
    "ground_truth.csv",
)


def gen_session(spec, out_dir):
    """Write a full session to a directory; returns the manifest mapping.

    Files: signals.csv (EEG + acceleration), keypoints.csv, events.csv (tone
    changes only), ground_truth.csv and manifest.csv with the spec echo and
    content hashes.
    """
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    session = generate_session(spec)
    save_signal(session.signal, out / "signals.csv")
    save_keypoints(session.kinematics.keypoints, out / "keypoints.csv")
    tone_events = EventTimeline(
        tuple(
            Event(t, EventKind.TONE_CHANGE, mode) for t, mode in session.timeline.changes
        )
    )
    save_events(tone_events, out / "events.csv")
    save_ground_truth(session.ground_truth, out / "ground_truth.csv")
    manifest = {f"param:{k}": v for k, v in spec.to_params().items()}
    for name in SESSION_FILES:
        manifest[f"hash:{name}"] = _sha256(out / name)
    with open(out / "manifest.csv", "w", newline="") as fh:
        fh.write("key,value\n")
        for k in sorted(manifest):
            fh.write(f"{k},{manifest[k]}\n")
    return manifest


def load_manifest_spec(path):
    import pandas as pd

    df = pd.read_csv(path, keep_default_na=False)
    params = {
        str(row.key)[len("param:") :]: str(row.value)
        for row in df.itertuples(index=False)
        if str(row.key).startswith("param:")
    }
    return SessionSpec.from_params(params)
