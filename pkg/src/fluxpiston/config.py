"""Run configuration: YAML files, shipped presets, schema validation.

Rates and frequencies are in units of kappa_C everywhere except the
``circuit`` section, which takes SI element values.
"""

from __future__ import annotations

import copy
import math
from pathlib import Path

import yaml

from .model import EngineParams


class ConfigError(ValueError):
    """Invalid or incomplete configuration (CLI exit code 2)."""


_NUM = (int, float)

# leaf value: tuple of accepted types; nested dict: sub-schema
SCHEMA = {
    "preset": (str,),
    "model": (str,),
    "params": {
        "kappa_C": _NUM, "kappa_H": _NUM, "alpha": _NUM, "J": _NUM, "Delta0": _NUM, "g": _NUM,
        "E_c": _NUM, "E_J": _NUM, "n_H": _NUM, "n_C": _NUM,
    },
    "init": {"phi": _NUM, "L": _NUM, "n_a": _NUM},
    "dt": _NUM,
    "t_end": _NUM,
    "n_traj": (int,),
    "seed": (int,),
    "sample_stride": (int,),
    "smoothing_window": _NUM,
    "workers": (int,),
    "write_trajectories": (bool,),
    "output_path": (str,),
    "steady_state": {"kappa_H_list": (list,), "delta_min": _NUM, "delta_max": _NUM, "n_delta": (int,)},
    "pv": {"tau_omega_list": (list,), "n_points": (int,)},
    "circuit": {
        "coupling": (str,), "C_tilde": _NUM, "CJ_tilde": _NUM, "C_c": _NUM, "L": _NUM, "E_J": _NUM,
        "expected_occupation": _NUM, "threshold": _NUM, "kappa_C": _NUM,
    },
    "analyze": {
        "threshold": _NUM, "min_rotating_fraction": _NUM, "gain_range": (list,), "var_range": (list,),
        "crossing_time": _NUM, "crossing_rtol": _NUM, "snr_variation_max": _NUM,
    },
}

DEFAULTS = {
    "model": "reduced",
    "init": {"phi": 0.0, "L": 0.0},
    "dt": 0.01,
    "t_end": 100.0,
    "n_traj": 1,
    "seed": 0,
    "smoothing_window": 200.0,
    "workers": 1,
    "write_trajectories": True,
    "steady_state": {"delta_min": -3.0, "delta_max": 3.0, "n_delta": 241},
    "pv": {"tau_omega_list": [0.0, 0.05, 0.1, 0.2, 0.4], "n_points": 720},
    "analyze": {
        "threshold": 0.1, "min_rotating_fraction": 0.6, "gain_range": [0.8, 1.2],
        "var_range": [0.7, 1.3], "crossing_time": 6770.0, "crossing_rtol": 0.15,
        "snr_variation_max": 0.3,
    },
}

# Steady-state and pV presets: alpha = 1, n_H = 10, n_C = 0.1 n_H,
# kappa_H = 10 kappa_C, g = 0.1 kappa_H, Delta0 = -kappa_H. E_c and E_J only
# matter for the rotor; E_c*E_J = 0.004 matches the fig3 preset.
_FIG2_PARAMS = {
    "kappa_C": 1.0, "kappa_H": 10.0, "alpha": 1.0, "Delta0": -10.0, "g": 1.0,
    "E_c": 1e-5, "E_J": 400.0, "n_H": 10.0, "n_C": 1.0,
}

PRESETS = {
    "fig2b": {
        "params": _FIG2_PARAMS,
        "steady_state": {"kappa_H_list": [0.1, 1.0, 10.0]},
    },
    "fig2c": {
        "params": _FIG2_PARAMS,
        "steady_state": {"kappa_H_list": [0.1, 1.0, 10.0]},
    },
    "fig2d": {
        "params": _FIG2_PARAMS,
        "pv": {"tau_omega_list": [0.0, 0.05, 0.1, 0.2, 0.4]},
    },
    # E_J E_c = hbar E_c g n_H = 0.004 and n_H = 100 n_C, with kappa_H = 10 and
    # Delta0 = -0.4 kappa_H (near gain-optimal). g = 0.4 kappa_H = |Delta0| is
    # the largest modulation that never flips the sign of the detuning.
    "fig3": {
        "model": "reduced",
        "params": {
            "kappa_C": 1.0, "kappa_H": 10.0, "alpha": 1.0, "Delta0": -4.0, "g": 4.0,
            "E_c": 1e-5, "E_J": 400.0, "n_H": 100.0, "n_C": 1.0,
        },
        "init": {"phi": -0.95 * math.pi, "L": 0.0},
        "dt": 0.01,
        "t_end": 7000.0,
        "n_traj": 4000,
        "seed": 2018,
        "sample_stride": 1000,
        "smoothing_window": 200.0,
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _validate(cfg: dict, schema: dict, prefix: str = "") -> None:
    for key, value in cfg.items():
        name = prefix + key
        if key not in schema:
            raise ConfigError(f"unknown config key '{name}'")
        rule = schema[key]
        if isinstance(rule, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{name}' must be a mapping")
            _validate(value, rule, name + ".")
        elif value is not None and (not isinstance(value, rule) or
                                    (isinstance(value, bool) and bool not in rule)):
            raise ConfigError(f"'{name}' has wrong type {type(value).__name__}")


def load_file(path) -> dict:
    try:
        data = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping")
    return data


def build_config(file_cfg: dict | None = None, preset: str | None = None,
                 overrides: dict | None = None) -> dict:
    """Defaults, then preset, then file, then command-line overrides."""
    file_cfg = file_cfg or {}
    _validate(file_cfg, SCHEMA)
    name = preset or file_cfg.get("preset")
    cfg = copy.deepcopy(DEFAULTS)
    if name is not None:
        if name not in PRESETS:
            raise ConfigError(f"unknown preset '{name}' (choose from {', '.join(PRESETS)})")
        cfg = _merge(cfg, PRESETS[name])
        cfg["preset"] = name
    cfg = _merge(cfg, file_cfg)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    _validate(overrides, SCHEMA)
    cfg = _merge(cfg, overrides)
    _validate(cfg, SCHEMA)
    if cfg.get("model") not in ("full", "reduced"):
        raise ConfigError("'model' must be 'full' or 'reduced'")
    return cfg


def require(cfg: dict, dotted: str):
    node = cfg
    for part in dotted.split("."):
        if not isinstance(node, dict) or node.get(part) is None:
            raise ConfigError(f"missing required field '{dotted}'")
        node = node[part]
    return node


def engine_params(cfg: dict) -> EngineParams:
    params = dict(require(cfg, "params"))
    for key in ("kappa_H", "Delta0", "g", "E_c", "E_J", "n_H", "n_C"):
        require(cfg, "params." + key)
    try:
        return EngineParams(**{k: float(v) for k, v in params.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid engine parameters: {exc}") from exc
