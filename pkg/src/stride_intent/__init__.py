"""Offline gait-adaptation intention detection from EEG.

Heel strikes come from single-camera ankle keypoints (SSA-denoised signed
gap) cross-checked against accelerometer data; EEG is bandpass-filtered and
cleaned with infomax ICA; strikes anchor 0.4 s epochs whose sliding windows
feed regularized common spatial patterns and LDA/SVM classifiers for the
left/right, adaptation/non-adaptation and three-class direction problems.
"""

from .classifiers import ClassifierSpec, LdaClassifier, SmoSvm, one_vs_one_predict
from .covariance import ClassCovariance, class_covariance, ledoit_wolf_shrink
from .csp import (
    CspFeatureExtractor,
    FeatureMatrix,
    SpatialFilterBank,
    apply_filters,
    csp_solve,
    extract_features,
    fit_bank,
    multiclass_banks,
    topography_export,
)
from .epoching import (
    BehaviorReport,
    LabeledStep,
    StepRecord,
    ToneTimeline,
    behavior_report,
    build_steps,
    estimate_reaction_time,
    extract_epochs,
    label_steps,
    slide_windows,
)
from .evaluation import (
    ConfusionMatrix,
    CvReport,
    component_sweep,
    confusion_matrix,
    evaluate_holdout,
    grouped_kfold_cv,
    train_eval_windows,
    window_sweep,
)
from .filtering import FirFilter, design_bandpass, filtfilt, frequency_response
from .gait import (
    GaitEvents,
    SyncReport,
    ankle_gap_series,
    fuse_video_accel,
    strikes_from_acceleration,
    strikes_from_video,
)
from .ica import (
    IcaModel,
    RejectionReport,
    ica_infomax,
    pca,
    remove_components,
    score_motion_components,
)
from .signals import (
    EpochSet,
    Event,
    EventKind,
    EventTimeline,
    Keypoints,
    LabelScheme,
    Mode,
    MultichannelSignal,
    WindowSet,
    load_events,
    load_keypoints,
    load_signal,
    save_events,
    save_keypoints,
    save_signal,
    slice_time,
)
from .ssa import (
    SsaDecomposition,
    TrajectoryMatrix,
    detect_peaks,
    hankel_embed,
    ssa_decompose,
    ssa_reconstruct,
)
from .synth import SessionSpec, SessionGroundTruth, gen_eeg, gen_kinematics, gen_protocol, gen_session, generate_session

__version__ = "0.1.0"
