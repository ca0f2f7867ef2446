"""Command-line interface.

Subcommands mirror the pipeline stages (synth, steps, preprocess, epochs,
behavior, features, train-eval, sweep) plus `pipeline`, which runs them in
order on one output directory. Logs go to stderr, machine artifacts to files
only. Exit codes: 0 success, 2 validation/configuration error, 1 runtime
error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig
from .classifiers import ClassifierSpec
from .epoching import (
    StepRecord,
    LabeledStep,
    ToneTimeline,
    save_behavior_report,
    save_step_labels,
    load_step_labels,
    extract_epochs,
)
from .csp import CspFeatureExtractor, save_features, save_topographies
from .evaluation import (
    component_sweep,
    save_component_curve,
    save_confusion,
    save_metrics,
    save_sweep,
    window_sweep,
)
from .gait import events_from_timeline, save_sync_report
from .ica import save_ica_report
from .pipeline import (
    confusion_dict,
    rt_report_dict,
    stage_epochs,
    stage_preprocess,
    stage_steps,
    stage_train_eval,
    stage_windows,
)
from .signals import (
    LabelScheme,
    load_events,
    load_keypoints,
    load_signal,
    save_events,
    save_signal,
)
from .synth import SessionSpec, gen_session

logger = logging.getLogger("stride_intent")

SCHEME_BY_NAME = {
    "left-right": LabelScheme.LEFT_RIGHT,
    "adapt-nonadapt": LabelScheme.ADAPT_NONADAPT,
    "three-class": LabelScheme.THREE_CLASS,
}


def _build_config(args):
    cfg = PipelineConfig.from_file(args.config) if args.config else PipelineConfig()
    cfg.apply_overrides(args.set or [])
    if args.seed is not None:
        cfg.set("synth", "seed", args.seed)
    return cfg


def _seed(cfg):
    return int(cfg.get("synth", "seed"))


def _outdir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo_config(cfg, out):
    cfg.save(out / "config.effective.ini")


def _require(path, what):
    if not Path(path).exists():
        raise ConfigError(f"missing {what}: {path}")
    return Path(path)


def _session_spec(cfg):
    return SessionSpec(
        seed=_seed(cfg),
        n_trials_per_mode=cfg.get("synth", "n_trials_per_mode"),
        snr_db=cfg.get("synth", "snr_db"),
        artifact_gain=cfg.get("synth", "artifact_gain"),
        n_discriminative_sources=cfg.get("synth", "n_discriminative_sources"),
        outlier_rate=cfg.get("synth", "outlier_rate"),
        outlier_gain=cfg.get("synth", "outlier_gain"),
    )


# ---------------------------------------------------------------------------
# command handlers (file to file)


def cmd_synth(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    manifest = gen_session(_session_spec(cfg), out)
    logger.info("synth: wrote session to %s (%d manifest entries)", out, len(manifest))
    return 0


def cmd_steps(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    signal = load_signal(_require(args.signals, "signals file"))
    keypoints = load_keypoints(_require(args.keypoints, "keypoints file"))
    fused, report = stage_steps(signal, keypoints, cfg)
    save_events(fused.to_timeline(), out / "events.csv")
    save_sync_report(report, out / "sync_report.csv")
    logger.info(
        "steps: %d strikes, match fraction %.3f, median offset %.4f s",
        fused.n_strikes,
        report.match_fraction,
        report.median_offset_s,
    )
    return 0


def cmd_preprocess(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    signal = load_signal(_require(args.signals, "signals file"))
    strikes = events_from_timeline(load_events(_require(args.strikes, "strike events file")))
    clean, model, report, _filt = stage_preprocess(signal, strikes, cfg, seed=_seed(cfg))
    save_signal(clean, out / "signals.csv")
    save_ica_report(report, out / "ica_report.csv")
    logger.info(
        "preprocess: rejected components %s (converged=%s)",
        list(report.rejected),
        model.converged,
    )
    return 0


def _load_epoch_inputs(args):
    strikes = events_from_timeline(load_events(_require(args.strikes, "strike events file")))
    tones = ToneTimeline.from_events(load_events(_require(args.tones, "tone events file")))
    return strikes, tones


def cmd_epochs(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    strikes, tones = _load_epoch_inputs(args)
    _steps, labeled, report, _reactions = stage_epochs(strikes, tones, cfg)
    save_step_labels(labeled[LabelScheme.THREE_CLASS], out / "labels.csv")
    save_behavior_report(report, out / "behavior_report.csv")
    logger.info("epochs: %d labeled steps", sum(1 for ls in labeled[LabelScheme.THREE_CLASS] if ls.label))
    return 0


def cmd_behavior(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    strikes, tones = _load_epoch_inputs(args)
    _steps, _labeled, report, _reactions = stage_epochs(strikes, tones, cfg)
    save_behavior_report(report, out / "behavior_report.csv")
    return 0


def labeled_steps_from_rows(rows, scheme):
    """Rebuild labeled steps from labels.csv rows for a given scheme."""
    steps = []
    onsets = [r[0] for r in rows]
    for i, (onset, side, trial, label3) in enumerate(rows):
        duration = (
            onsets[i + 1] - onset if i + 1 < len(onsets) else (onsets[-1] - onsets[-2] if len(onsets) > 1 else 1.0)
        )
        step = StepRecord(
            onset_s=onset,
            side=side,
            duration_s=max(duration, 1e-6),
            trial_index=trial,
            position_in_trial=0,
        )
        if scheme is LabelScheme.LEFT_RIGHT:
            label = "left" if side == "L" else "right"
        elif scheme is LabelScheme.ADAPT_NONADAPT:
            label = (
                "adapt"
                if label3 in ("slow_to_fast", "fast_to_slow")
                else ("non_adapt" if label3 == "non_adapt" else None)
            )
        else:
            label = label3
        steps.append(LabeledStep(step, label))
    return steps


def _windows_from_files(args, cfg, w=None):
    clean = load_signal(_require(args.signals, "cleaned signals file"))
    rows = load_step_labels(_require(args.labels, "labels file"))
    scheme = SCHEME_BY_NAME[args.scheme]
    labeled = labeled_steps_from_rows(rows, scheme)
    epochs = extract_epochs(clean, labeled, scheme, epoch_len_s=cfg.get("epochs", "epoch_len_s"))
    from .epoching import slide_windows

    return (
        slide_windows(
            epochs, w if w is not None else cfg.get("windows", "w"), cfg.get("windows", "stride")
        ),
        epochs,
        clean,
    )


def cmd_features(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    windows, _epochs, clean = _windows_from_files(args, cfg)
    extractor = CspFeatureExtractor(
        n_components=cfg.get("csp", "k"), shrinkage=cfg.get("csp", "shrinkage")
    )
    fm = extractor.fit_transform(windows)
    save_features(fm, out / "features.csv")
    save_topographies(extractor.banks_, clean.channel_names, out / "filters.csv", which="filters")
    save_topographies(extractor.banks_, clean.channel_names, out / "patterns.csv", which="patterns")
    logger.info("features: %s windows x %s features", fm.features.shape[0], fm.features.shape[1])
    return 0


def cmd_train_eval(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    windows, _epochs, _clean = _windows_from_files(args, cfg)
    result = stage_train_eval(windows, cfg, seed=_seed(cfg))
    scheme = SCHEME_BY_NAME[args.scheme]
    tag = {"left-right": "lr", "adapt-nonadapt": "ana", "three-class": "3c"}[args.scheme]
    metrics = {
        f"acc_{tag}_epoch": result.holdout.accuracy_epoch,
        f"acc_{tag}_window": result.holdout.accuracy_window,
        f"cv_loss_{tag}": result.cv.loss_epoch,
    }
    if scheme is LabelScheme.THREE_CLASS:
        metrics["confusion_3class"] = confusion_dict(result.holdout.confusion_epoch)
        metrics["sensitivity_3class"] = result.holdout.confusion_epoch.sensitivity()
    save_metrics(metrics, out / "metrics.json")
    save_confusion(result.holdout.confusion_epoch, out / "confusion.csv")
    logger.info("train-eval %s: %s", args.scheme, metrics)
    return 0


def cmd_sweep(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    seed = _seed(cfg)
    if args.components:
        windows, _epochs, _clean = _windows_from_files(args, cfg)
        curve = component_sweep(
            windows,
            max_k=int(args.components),
            classifier_spec=ClassifierSpec(kind="lda", seed=seed),
            n_folds=cfg.get("cv", "folds"),
            seed=seed,
            shrinkage=cfg.get("csp", "shrinkage"),
        )
        save_component_curve(curve, out / "component_curve.csv")
        return 0
    ws = tuple(int(w) for w in args.w.split(",")) if args.w else cfg.get("sweep", "ws")
    _windows, epochs, _clean = _windows_from_files(args, cfg, w=max(ws))
    rows = window_sweep(
        epochs,
        ws=ws,
        stride_samples=cfg.get("windows", "stride"),
        n_components=cfg.get("csp", "k"),
        n_folds=cfg.get("cv", "folds"),
        holdout_fraction=cfg.get("cv", "holdout_fraction"),
        seed=seed,
    )
    save_sweep(rows, out / "sweep.csv")
    return 0


def cmd_pipeline(args):
    cfg = _build_config(args)
    out = _outdir(args)
    _echo_config(cfg, out)
    seed = _seed(cfg)
    if args.data:
        data_dir = _require(args.data, "input session directory")
        for name in ("signals.csv", "keypoints.csv", "events.csv"):
            _require(Path(data_dir) / name, name)
    else:
        data_dir = out / "session"
        gen_session(_session_spec(cfg), data_dir)
    ns = argparse.Namespace(**vars(args))

    ns.signals = str(Path(data_dir) / "signals.csv")
    ns.keypoints = str(Path(data_dir) / "keypoints.csv")
    ns.out = str(out / "steps")
    cmd_steps(ns)

    ns2 = argparse.Namespace(**vars(args))
    ns2.signals = str(Path(data_dir) / "signals.csv")
    ns2.strikes = str(out / "steps" / "events.csv")
    ns2.out = str(out / "preprocess")
    cmd_preprocess(ns2)

    ns3 = argparse.Namespace(**vars(args))
    ns3.strikes = str(out / "steps" / "events.csv")
    ns3.tones = str(Path(data_dir) / "events.csv")
    ns3.out = str(out / "epochs")
    cmd_epochs(ns3)

    metrics = {}
    for scheme_name, tag in (
        ("adapt-nonadapt", "ana"),
        ("left-right", "lr"),
        ("three-class", "3c"),
    ):
        ns4 = argparse.Namespace(**vars(args))
        ns4.signals = str(out / "preprocess" / "signals.csv")
        ns4.labels = str(out / "epochs" / "labels.csv")
        ns4.scheme = scheme_name
        ns4.out = str(out / f"features_{tag}")
        cmd_features(ns4)
        ns4.out = str(out / f"eval_{tag}")
        cmd_train_eval(ns4)
        with open(Path(out / f"eval_{tag}") / "metrics.json") as fh:
            metrics.update(json.load(fh))

    strikes, tones = (
        events_from_timeline(load_events(out / "steps" / "events.csv")),
        ToneTimeline.from_events(load_events(Path(data_dir) / "events.csv")),
    )
    _steps, _labeled, report, _reactions = stage_epochs(strikes, tones, cfg)
    metrics["rt_report"] = rt_report_dict(report)
    metrics["seed"] = seed
    save_metrics(metrics, out / "metrics.json")
    logger.info("pipeline: metrics written to %s", out / "metrics.json")
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stride-intent",
        description="Gait-adaptation intention detection pipeline (offline).",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="seed override, propagates everywhere")
        p.add_argument(
            "--set",
            action="append",
            metavar="SECTION.KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic session")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("steps", help="detect heel strikes from video + acceleration")
    common(p)
    p.add_argument("--signals", required=True)
    p.add_argument("--keypoints", required=True)
    p.set_defaults(func=cmd_steps)

    p = sub.add_parser("preprocess", help="bandpass + ICA motion-artifact removal")
    common(p)
    p.add_argument("--signals", required=True)
    p.add_argument("--strikes", required=True, help="heel-strike events.csv")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("epochs", help="label steps and write behavior report")
    common(p)
    p.add_argument("--strikes", required=True)
    p.add_argument("--tones", required=True, help="tone-change events.csv")
    p.set_defaults(func=cmd_epochs)

    p = sub.add_parser("behavior", help="behavioral (reaction-time) report only")
    common(p)
    p.add_argument("--strikes", required=True)
    p.add_argument("--tones", required=True)
    p.set_defaults(func=cmd_behavior)

    def learn_common(p):
        common(p)
        p.add_argument("--signals", required=True, help="cleaned signals.csv")
        p.add_argument("--labels", required=True, help="labels.csv")
        p.add_argument(
            "--scheme",
            choices=sorted(SCHEME_BY_NAME),
            default="adapt-nonadapt",
        )

    p = sub.add_parser("features", help="fit CSP banks and export features")
    learn_common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train-eval", help="cross-validate and evaluate holdout")
    learn_common(p)
    p.set_defaults(func=cmd_train_eval)

    p = sub.add_parser("sweep", help="window-size sweep or component sweep")
    learn_common(p)
    p.add_argument("--w", help="comma-separated window sizes (samples)")
    p.add_argument("--components", type=int, help="run the component sweep up to K")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", help="run every stage in order")
    common(p)
    p.add_argument("--data", help="existing session directory (default: synthesize)")
    p.add_argument("--synth-default", action="store_true", help="synthesize with defaults")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return 2
    except FileNotFoundError as exc:
        logger.error("missing file: %s", exc)
        return 2
    except Exception as exc:  # runtime failure
        logger.error("%s", exc, exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
