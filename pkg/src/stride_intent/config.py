"""Flat `[section] key = value` pipeline configuration.

Every tunable of the pipeline lives here with its owning module's default.
Unknown sections or keys are rejected; CLI flags override file values; the
effective configuration is echoed into every output directory.
"""

import configparser
from pathlib import Path

#: section -> key -> (default, parser)
_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(s):
    key = str(s).strip().lower()
    if key not in _BOOL:
        raise ValueError(f"expected a boolean, got {s!r}")
    return _BOOL[key]


def _parse_int_list(s):
    s = str(s).strip()
    return tuple(int(tok) for tok in s.split(",") if tok.strip()) if s else ()


DEFAULTS = {
    "synth": {
        "seed": (0, int),
        "n_trials_per_mode": (20, int),
        "snr_db": (4.0, float),
        "artifact_gain": (3.0, float),
        "n_discriminative_sources": (5, int),
        "outlier_rate": (0.02, float),
        "outlier_gain": (6.0, float),
    },
    "filter": {
        "low_hz": (3.0, float),
        "high_hz": (45.0, float),
        "n_taps": (501, int),
    },
    "video": {
        "ssa_l": (0, int),  # 0 = auto: ~1.2 x fps / step rate
        "min_separation_s": (0.25, float),
        "threshold_k": (0.0, float),
        "left_is_max": (True, _parse_bool),
        "axis": ("y", str),
        "energy_share": (0.9, float),
    },
    "accel": {
        "ssa_l": (0, int),
        "min_separation_s": (0.25, float),
        "threshold_k": (0.0, float),
        "first_side": ("left", str),
        "energy_share": (0.9, float),
    },
    "fuse": {
        "tolerance_s": (0.08, float),
    },
    "ica": {
        "n_components": (0, int),  # 0 = all channels
        "max_iter": (512, int),
        "threshold": (0.5, float),
        "overrides": ("", str),  # comma-separated component indices
        "step_freq_hz": (0.0, float),  # 0 = auto from detected strikes
        "max_fit_samples": (20000, int),
    },
    "epochs": {
        "epoch_len_s": (0.4, float),
        "n_adapt": (3, int),
        "band_k": (1.0, float),
        "settle_after": (6, int),
    },
    "windows": {
        "w": (90, int),
        "stride": (5, int),
    },
    "csp": {
        "k": (6, int),
        "shrinkage": (True, _parse_bool),
    },
    "classify": {
        "ana": ("svm_rbf", str),
        "lr": ("lda", str),
        "three": ("svm_linear", str),
        "c_reg": (1.0, float),
        "gamma": ("scale", str),
    },
    "cv": {
        "folds": (10, int),
        "holdout_fraction": (0.2, float),
    },
    "sweep": {
        "ws": ((90, 80, 70, 60), _parse_int_list),
        "max_components": (10, int),
    },
    "channels": {
        "accel": ("accel_x,accel_y,accel_z", str),
    },
}


class ConfigError(ValueError):
    """A configuration problem the user must fix (exit code 2)."""


class PipelineConfig:
    def __init__(self, values=None):
        self._values = {s: dict() for s in DEFAULTS}
        for section, key, raw in values or ():
            self.set(section, key, raw)

    @classmethod
    def from_file(cls, path):
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        cfg = cls()
        for section in parser.sections():
            for key, raw in parser.items(section):
                cfg.set(section, key, raw)
        return cfg

    def set(self, section, key, raw):
        if section not in DEFAULTS:
            raise ConfigError(f"unknown config section [{section}]")
        if key not in DEFAULTS[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        _default, parse = DEFAULTS[section][key]
        try:
            self._values[section][key] = parse(raw) if isinstance(raw, str) else raw
        except ValueError as exc:
            raise ConfigError(f"bad value for {section}.{key}: {exc}") from exc

    def get(self, section, key):
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigError(f"unknown config key {section}.{key}")
        if key in self._values[section]:
            return self._values[section][key]
        return DEFAULTS[section][key][0]

    def apply_overrides(self, pairs):
        """Apply `section.key=value` strings (CLI overrides)."""
        for raw in pairs:
            if "=" not in raw or "." not in raw.split("=", 1)[0]:
                raise ConfigError(f"override must look like section.key=value, got {raw!r}")
            target, value = raw.split("=", 1)
            section, key = target.split(".", 1)
            self.set(section.strip(), key.strip(), value.strip())

    def effective(self):
        """All values, defaults filled in."""
        out = {}
        for section, keys in DEFAULTS.items():
            out[section] = {k: self.get(section, k) for k in keys}
        return out

    def save(self, path):
        eff = self.effective()
        with open(path, "w") as fh:
            for section in sorted(eff):
                fh.write(f"[{section}]\n")
                for key in sorted(eff[section]):
                    value = eff[section][key]
                    if isinstance(value, tuple):
                        value = ",".join(str(v) for v in value)
                    elif isinstance(value, bool):
                        value = "true" if value else "false"
                    fh.write(f"{key} = {value}\n")
                fh.write("\n")

    def ica_overrides(self):
        raw = str(self.get("ica", "overrides")).strip()
        return [int(tok) for tok in raw.split(",") if tok.strip()] if raw else None

    def accel_channels(self):
        return tuple(t.strip() for t in str(self.get("channels", "accel")).split(",") if t.strip())

    def classifier_spec(self, problem, seed):
        from .classifiers import ClassifierSpec

        name = str(self.get("classify", problem))
        gamma = self.get("classify", "gamma")
        if gamma != "scale":
            gamma = float(gamma)
        c_reg = self.get("classify", "c_reg")
        if name == "lda":
            return ClassifierSpec(kind="lda", seed=seed)
        if name == "svm_rbf":
            return ClassifierSpec(kind="svm", kernel="rbf", c_reg=c_reg, gamma=gamma, seed=seed)
        if name == "svm_linear":
            return ClassifierSpec(kind="svm", kernel="linear", c_reg=c_reg, gamma=gamma, seed=seed)
        raise ConfigError(f"unknown classifier name {name!r} for classify.{problem}")
