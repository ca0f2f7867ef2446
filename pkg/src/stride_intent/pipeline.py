"""Stage orchestration shared by the CLI and the acceptance suite.

Each stage is a pure function from in-memory objects to in-memory objects;
the CLI wraps them with the file contracts. `session_metrics` chains the full
pipeline (strikes -> preprocess -> epochs -> features -> train/eval for all
three classification problems) and returns the flat metrics mapping.
"""

import logging

import numpy as np

from .classifiers import ClassifierSpec
from .epoching import (
    ToneTimeline,
    behavior_report,
    build_steps,
    estimate_reaction_time,
    extract_epochs,
    label_steps,
    slide_windows,
)
from .evaluation import train_eval_windows
from .filtering import design_bandpass, filtfilt
from .gait import fuse_video_accel, strikes_from_acceleration, strikes_from_video
from .ica import ica_infomax, remove_components, score_motion_components
from .signals import LabelScheme, Mode

logger = logging.getLogger(__name__)


def split_eeg_accel(signal, accel_names):
    eeg_names = tuple(n for n in signal.channel_names if n not in accel_names)
    missing = [n for n in accel_names if n not in signal.channel_names]
    if missing:
        raise ValueError(f"acceleration channels missing from signal: {missing}")
    return signal.select(eeg_names), signal.select(accel_names)


def stage_steps(signal, keypoints, cfg):
    """Heel strikes: video route, acceleration route, fusion."""
    video = strikes_from_video(
        keypoints,
        ssa_l=cfg.get("video", "ssa_l") or None,
        min_separation_s=cfg.get("video", "min_separation_s"),
        threshold_k=cfg.get("video", "threshold_k"),
        left_is_max=cfg.get("video", "left_is_max"),
        axis=cfg.get("video", "axis"),
        energy_share=cfg.get("video", "energy_share"),
    )
    _eeg, accel = split_eeg_accel(signal, cfg.accel_channels())
    accel_events = strikes_from_acceleration(
        accel,
        ssa_l=cfg.get("accel", "ssa_l") or None,
        min_separation_s=cfg.get("accel", "min_separation_s"),
        threshold_k=cfg.get("accel", "threshold_k"),
        first_side=cfg.get("accel", "first_side"),
        energy_share=cfg.get("accel", "energy_share"),
    )
    fused, report = fuse_video_accel(
        video,
        accel_events,
        tolerance_s=cfg.get("fuse", "tolerance_s"),
        eeg_rate_hz=signal.sample_rate_hz,
    )
    return fused, report


def auto_step_freq(strikes):
    """Median strike rate of the session; its first four harmonics cover the
    artifact lines that survive the 3-45 Hz bandpass across all tempos."""
    times, _ = strikes.merged()
    if len(times) < 2:
        raise ValueError("need at least 2 strikes to estimate the step frequency")
    return 1.0 / float(np.median(np.diff(times)))


def stage_preprocess(signal, strikes, cfg, seed=0):
    """Bandpass, ICA, motion-component scoring and removal on the EEG part."""
    eeg, _accel = split_eeg_accel(signal, cfg.accel_channels())
    filt = design_bandpass(
        low_hz=cfg.get("filter", "low_hz"),
        high_hz=cfg.get("filter", "high_hz"),
        fs_hz=eeg.sample_rate_hz,
        n_taps=cfg.get("filter", "n_taps"),
    )
    filtered = filtfilt(eeg, filt)
    n_comp = cfg.get("ica", "n_components") or None
    max_fit = cfg.get("ica", "max_fit_samples") or None
    model = ica_infomax(
        filtered,
        n_components=n_comp,
        max_iter=cfg.get("ica", "max_iter"),
        seed=seed,
        max_fit_samples=max_fit,
    )
    step_freq = cfg.get("ica", "step_freq_hz") or auto_step_freq(strikes)
    report = score_motion_components(
        model,
        filtered,
        step_freq_hz=step_freq,
        threshold=cfg.get("ica", "threshold"),
        manual_override=cfg.ica_overrides(),
    )
    clean = remove_components(filtered, model, report.rejected)
    return clean, model, report, filt


def stage_epochs(strikes, tones, cfg):
    """Steps, per-scheme labels, reaction times and the behavioral report."""
    steps = build_steps(strikes, tones)
    band_k = cfg.get("epochs", "band_k")
    settle = cfg.get("epochs", "settle_after")
    n_adapt = cfg.get("epochs", "n_adapt")
    labeled = {
        scheme: label_steps(steps, tones, scheme, n_adapt=n_adapt)
        for scheme in LabelScheme
    }
    report = behavior_report(steps, tones, band_k=band_k, settle_after=settle)
    reactions = estimate_reaction_time(steps, tones, band_k=band_k, settle_after=settle)
    return steps, labeled, report, reactions


def stage_windows(clean, labeled_steps, scheme, cfg, w=None):
    epochs = extract_epochs(
        clean, labeled_steps, scheme, epoch_len_s=cfg.get("epochs", "epoch_len_s")
    )
    return slide_windows(
        epochs,
        w if w is not None else cfg.get("windows", "w"),
        cfg.get("windows", "stride"),
    )


_PROBLEM_BY_SCHEME = {
    LabelScheme.ADAPT_NONADAPT: "ana",
    LabelScheme.LEFT_RIGHT: "lr",
    LabelScheme.THREE_CLASS: "three",
}


def stage_train_eval(windows, cfg, seed=0):
    problem = _PROBLEM_BY_SCHEME[windows.label_scheme]
    spec = cfg.classifier_spec(problem, seed)
    return train_eval_windows(
        windows,
        spec,
        n_components=cfg.get("csp", "k"),
        shrinkage=cfg.get("csp", "shrinkage"),
        n_folds=cfg.get("cv", "folds"),
        holdout_fraction=cfg.get("cv", "holdout_fraction"),
        seed=seed,
    )


def rt_report_dict(report):
    out = {}
    for mode in (Mode.SLOW, Mode.NORMAL, Mode.FAST):
        s = report.per_mode[mode]
        out[mode.value] = {
            "step_mean": s.step_mean,
            "step_std": s.step_std,
            "rt_mean": s.rt_mean,
            "rt_std": s.rt_std,
            "nsteps_mean": s.nsteps_mean,
            "nsteps_std": s.nsteps_std,
            "n_trials": s.n_trials,
            "n_excluded": s.n_excluded,
        }
    out["n_trials_excluded"] = report.n_trials_excluded
    return out


def confusion_dict(matrix):
    return {
        "classes": list(matrix.class_names),
        "matrix_percent": [[float(v) for v in row] for row in matrix.percentages],
    }


def session_metrics(signal, keypoints, tones, cfg, seed=0):
    """Full pipeline to the metrics mapping (no file IO)."""
    strikes, sync = stage_steps(signal, keypoints, cfg)
    clean, _model, ica_report, _filt = stage_preprocess(signal, strikes, cfg, seed=seed)
    _steps, labeled, behavior, _reactions = stage_epochs(strikes, tones, cfg)

    metrics = {
        "rt_report": rt_report_dict(behavior),
        "sync_match_fraction": sync.match_fraction,
        "sync_median_offset_s": sync.median_offset_s,
        "ica_rejected": list(ica_report.rejected),
        "seed": seed,
    }

    windows_ana = stage_windows(clean, labeled[LabelScheme.ADAPT_NONADAPT], LabelScheme.ADAPT_NONADAPT, cfg)
    res_ana = stage_train_eval(windows_ana, cfg, seed=seed)
    metrics.update(
        {
            "acc_ana_epoch": res_ana.holdout.accuracy_epoch,
            "acc_ana_window": res_ana.holdout.accuracy_window,
            "cv_loss_ana": res_ana.cv.loss_epoch,
            "cv_loss_ana_window": res_ana.cv.loss_window,
        }
    )

    windows_lr = stage_windows(clean, labeled[LabelScheme.LEFT_RIGHT], LabelScheme.LEFT_RIGHT, cfg)
    res_lr = stage_train_eval(windows_lr, cfg, seed=seed)
    metrics.update(
        {
            "acc_lr_epoch": res_lr.holdout.accuracy_epoch,
            "acc_lr_window": res_lr.holdout.accuracy_window,
            "cv_loss_lr": res_lr.cv.loss_epoch,
        }
    )

    windows_3c = stage_windows(clean, labeled[LabelScheme.THREE_CLASS], LabelScheme.THREE_CLASS, cfg)
    res_3c = stage_train_eval(windows_3c, cfg, seed=seed)
    metrics.update(
        {
            "acc_3c_epoch": res_3c.holdout.accuracy_epoch,
            "acc_3c_window": res_3c.holdout.accuracy_window,
            "confusion_3class": confusion_dict(res_3c.holdout.confusion_epoch),
            "sensitivity_3class": res_3c.holdout.confusion_epoch.sensitivity(),
        }
    )
    return metrics
