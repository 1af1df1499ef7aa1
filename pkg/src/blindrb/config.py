"""Experiment configuration files: TOML or JSON, strictly validated.

Unknown keys are hard errors (with a nearest-key suggestion) so typos never
silently fall back to defaults.  ``K`` and ``N`` are accepted as shorthand
for ``sequences_per_length`` and ``shots_per_sequence``.  The resolved
mapping, with every default filled in, is what gets hashed into the run
manifest; hashing canonicalizes key order first.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .experiment import ExperimentConfig
from .noise import NoiseModel, REDRAW_MODES


class ConfigError(ValueError):
    pass


_TOP_KEYS = {
    "lengths", "sequences_per_length", "K", "shots_per_sequence", "N",
    "seed", "measurement_mode", "paired_noise", "noise", "readout",
    "calibration",
}
_NOISE_KEYS = {
    "sigma_b", "uniform_b", "overrotation_12", "overrotation_23",
    "pulse_duration", "idle_duration", "z_only_fields", "theta_jitter",
    "redraw",
}
_READOUT_KEYS = {"visibility", "dark_fraction"}
_CAL_KEYS = {"pair", "theta_min", "theta_max", "theta_points", "repeats",
             "shots"}

_NOISE_DEFAULTS = {
    "sigma_b": 0.0,
    "uniform_b": [0.0, 0.0, 0.0],
    "overrotation_12": 0.0,
    "overrotation_23": 0.0,
    "pulse_duration": 1.0,
    "idle_duration": 0.0,
    "z_only_fields": False,
    "theta_jitter": 0.0,
    "redraw": "per_shot",
}
_READOUT_DEFAULTS = {"visibility": 1.0, "dark_fraction": 0.0}
_CAL_DEFAULTS = {
    "pair": [2, 3],
    "theta_min": math.pi - 0.5,
    "theta_max": math.pi + 0.5,
    "theta_points": 41,
    "repeats": [1],
    "shots": 1,
}


@dataclass(frozen=True)
class CalibrationSpec:
    pair: tuple[int, int]
    theta_min: float
    theta_max: float
    theta_points: int
    repeats: tuple[int, ...]
    shots: int


@dataclass(frozen=True)
class RunSpec:
    experiment: ExperimentConfig
    calibration: CalibrationSpec | None
    resolved: dict


def _reject_unknown(section: dict, allowed: set[str], where: str) -> None:
    for key in section:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            suggestion = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown key {key!r} in {where}{suggestion}")


def _load_raw(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".toml":
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    if suffix == ".json":
        with open(path, "rb") as fh:
            return json.load(fh)
    raise ConfigError(f"config must be .toml or .json, got {path.name!r}")


def _merge_alias(raw: dict, long: str, short: str, where: str):
    if long in raw and short in raw and raw[long] != raw[short]:
        raise ConfigError(f"{where}: {long!r} and alias {short!r} disagree")
    if short in raw:
        return raw[short]
    return raw.get(long)


def _require(value, name: str):
    if value is None:
        raise ConfigError(f"missing required key {name!r}")
    return value


def parse_config(path) -> RunSpec:
    """Load, validate, and resolve a config file into a RunSpec."""
    path = Path(path)
    raw = _load_raw(path)
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a table/object")
    _reject_unknown(raw, _TOP_KEYS, "config")

    noise_raw = raw.get("noise", {})
    readout_raw = raw.get("readout", {})
    cal_raw = raw.get("calibration", None)
    for section, allowed, where in ((noise_raw, _NOISE_KEYS, "[noise]"),
                                    (readout_raw, _READOUT_KEYS, "[readout]")):
        if not isinstance(section, dict):
            raise ConfigError(f"{where} must be a table/object")
        _reject_unknown(section, allowed, where)

    noise_cfg = {**_NOISE_DEFAULTS, **noise_raw}
    readout_cfg = {**_READOUT_DEFAULTS, **readout_raw}

    try:
        noise = NoiseModel(
            sigma_b=float(noise_cfg["sigma_b"]),
            uniform_b=tuple(float(b) for b in noise_cfg["uniform_b"]),
            overrotation={"12": float(noise_cfg["overrotation_12"]),
                          "23": float(noise_cfg["overrotation_23"])},
            pulse_duration=float(noise_cfg["pulse_duration"]),
            idle_duration=float(noise_cfg["idle_duration"]),
            z_only_fields=bool(noise_cfg["z_only_fields"]),
            theta_jitter=float(noise_cfg["theta_jitter"]),
            redraw=str(noise_cfg["redraw"]),
        )
    except ValueError as exc:
        raise ConfigError(f"[noise]: {exc}") from exc

    lengths = _require(raw.get("lengths"), "lengths")
    k = _require(_merge_alias(raw, "sequences_per_length", "K", "config"),
                 "sequences_per_length (or K)")
    n = _require(_merge_alias(raw, "shots_per_sequence", "N", "config"),
                 "shots_per_sequence (or N)")
    seed = _require(raw.get("seed"), "seed")

    try:
        experiment = ExperimentConfig(
            lengths=tuple(int(m) for m in lengths),
            sequences_per_length=int(k),
            shots_per_sequence=int(n),
            seed=int(seed),
            noise=noise,
            measurement_mode=str(raw.get("measurement_mode", "analytic")),
            paired_noise=bool(raw.get("paired_noise", True)),
            visibility=float(readout_cfg["visibility"]),
            dark_fraction=float(readout_cfg["dark_fraction"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    calibration = None
    if cal_raw is not None:
        if not isinstance(cal_raw, dict):
            raise ConfigError("[calibration] must be a table/object")
        _reject_unknown(cal_raw, _CAL_KEYS, "[calibration]")
        cal_cfg = {**_CAL_DEFAULTS, **cal_raw}
        pair = tuple(int(d) for d in cal_cfg["pair"])
        if pair not in ((1, 2), (2, 3)):
            raise ConfigError(f"[calibration]: pair must be [1,2] or [2,3], got {list(pair)}")
        repeats = cal_cfg["repeats"]
        repeats = (int(repeats),) if isinstance(repeats, (int, float)) \
            else tuple(int(r) for r in repeats)
        if int(cal_cfg["theta_points"]) < 5:
            raise ConfigError("[calibration]: theta_points must be >= 5")
        if not cal_cfg["theta_min"] < cal_cfg["theta_max"]:
            raise ConfigError("[calibration]: theta_min must be < theta_max")
        calibration = CalibrationSpec(
            pair=pair,
            theta_min=float(cal_cfg["theta_min"]),
            theta_max=float(cal_cfg["theta_max"]),
            theta_points=int(cal_cfg["theta_points"]),
            repeats=repeats,
            shots=int(cal_cfg["shots"]),
        )

    resolved = {
        "lengths": list(experiment.lengths),
        "sequences_per_length": experiment.sequences_per_length,
        "shots_per_sequence": experiment.shots_per_sequence,
        "seed": experiment.seed,
        "measurement_mode": experiment.measurement_mode,
        "paired_noise": experiment.paired_noise,
        "noise": {
            "sigma_b": noise.sigma_b,
            "uniform_b": list(noise.uniform_b),
            "overrotation_12": noise.overrotation["12"],
            "overrotation_23": noise.overrotation["23"],
            "pulse_duration": noise.pulse_duration,
            "idle_duration": noise.idle_duration,
            "z_only_fields": noise.z_only_fields,
            "theta_jitter": noise.theta_jitter,
            "redraw": noise.redraw,
        },
        "readout": {"visibility": experiment.visibility,
                    "dark_fraction": experiment.dark_fraction},
    }
    if calibration is not None:
        resolved["calibration"] = {
            "pair": list(calibration.pair),
            "theta_min": calibration.theta_min,
            "theta_max": calibration.theta_max,
            "theta_points": calibration.theta_points,
            "repeats": list(calibration.repeats),
            "shots": calibration.shots,
        }
    return RunSpec(experiment=experiment, calibration=calibration,
                   resolved=resolved)


def config_hash(resolved: dict) -> str:
    """SHA-256 of the canonical (sorted-key) JSON serialization."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
