"""Scenario configuration files (JSON, units in field names).

Schema (required keys marked *)::

    {
      "seed": 42,
      "monte_carlo_runs": 1,
      "buoys_m": [[x, y, z], ...],                    * reference first
      "sound_speed_mps": 1500.0,
      "timing_noise_std_s": 0.0,
      "dt_seconds": 10.0,                             *
      "process_noise": [[6x6]] | {"diagonal": [6]},   * m^2 and m^2/s^2
      "measurement_noise_m2": [[3x3]] | {"diagonal": [3]},   *
      "initial_covariance": {"position_var_m2": 100.0, "velocity_var_m2ps2": 25.0},
      "grid": {"origin_m": [3], "spacing_m": [3], "counts": [3], "z_descends": true},
      "trajectory": {
        "initial_state": [x, y, z, vx, vy, vz],
        "accelerations_mps2": [[ax, ay, az], ...]
            | "segments": [{"steps": n, "accel_mps2": [3]}, ...],
        "truth_process_noise": false
      },
      "dropped_steps": [],
      "disconnect_time_s": 50.0,
      "scenario": "continued_navigation" | "propulsion_failure",
      "confidence": 0.95,
      "radius_scale": 1.0,
      "disconnection_tolerance_factor": 1.5,
      "cdf_thresholds_m": [...],
      "solver_order": "chan_first" | "linearized_first"
    }

A manifest written by the CLI (``{"tool": ..., "config": {...}}``) is also
accepted and yields the embedded config.
"""

import json
import logging
import math
from pathlib import Path

import numpy as np

from .acoustic import DEFAULT_SOUND_SPEED, AcousticConfig, BuoyArray
from .errors import AuvTrackError, ParseError, ValidationError
from .kalman import DEFAULT_P0_POS_VAR, DEFAULT_P0_VEL_VAR, build_model
from .search import DEFAULT_TOLERANCE_FACTOR, Scenario
from .sim import GridSpec, ScenarioConfig, TrajectorySpec

log = logging.getLogger(__name__)

DEFAULTS = {
    "seed": 0,
    "monte_carlo_runs": 1,
    "sound_speed_mps": DEFAULT_SOUND_SPEED,
    "timing_noise_std_s": 0.0,
    "initial_covariance": {"position_var_m2": DEFAULT_P0_POS_VAR,
                           "velocity_var_m2ps2": DEFAULT_P0_VEL_VAR},
    "dropped_steps": [],
    "disconnect_time_s": None,
    "scenario": None,
    "confidence": 0.95,
    "radius_scale": 1.0,
    "disconnection_tolerance_factor": DEFAULT_TOLERANCE_FACTOR,
    "cdf_thresholds_m": [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0],
    "solver_order": "chan_first",
    "grid": None,
    "trajectory": None,
}
REQUIRED = ("buoys_m", "dt_seconds", "process_noise", "measurement_noise_m2")
CONFIGS_DIR = Path(__file__).parent / "configs"


def bundled_config(name):
    """Path of a config shipped with the package, e.g. ``"paper_s5.json"``."""
    path = CONFIGS_DIR / name
    if not path.exists():
        raise FileNotFoundError(f"no bundled config {name!r}")
    return path


def _finite(field, value):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(field, "expected numbers") from None
    if not np.all(np.isfinite(arr)):
        raise ValidationError(field, "values must be finite")
    return arr


def _matrix(field, value, n):
    if isinstance(value, dict):
        if set(value) != {"diagonal"}:
            raise ValidationError(field, "object form must be {\"diagonal\": [...]}")
        diag = _finite(field, value["diagonal"]).reshape(-1)
        if diag.shape != (n,):
            raise ValidationError(field, f"diagonal must have {n} entries")
        return np.diag(diag)
    m = _finite(field, value)
    if m.shape != (n, n):
        raise ValidationError(field, f"expected a {n}x{n} matrix, got shape {m.shape}")
    return m


def _vec(field, value, n):
    v = _finite(field, value).reshape(-1)
    if v.shape != (n,):
        raise ValidationError(field, f"expected {n} numbers")
    return v


def _trajectory(raw):
    if not isinstance(raw, dict):
        raise ValidationError("trajectory", "expected an object")
    if "initial_state" not in raw:
        raise ValidationError("trajectory.initial_state", "required")
    x0 = _vec("trajectory.initial_state", raw["initial_state"], 6)
    if "accelerations_mps2" in raw:
        acc = _finite("trajectory.accelerations_mps2", raw["accelerations_mps2"]).reshape(-1, 3)
    elif "segments" in raw:
        parts = []
        for i, seg in enumerate(raw["segments"]):
            name = f"trajectory.segments[{i}]"
            steps = seg.get("steps")
            if not isinstance(steps, int) or steps < 0:
                raise ValidationError(name + ".steps", "expected a non-negative integer")
            parts.append(np.tile(_vec(name + ".accel_mps2", seg.get("accel_mps2"), 3), (steps, 1)))
        acc = np.vstack(parts) if parts else np.zeros((0, 3))
    else:
        raise ValidationError("trajectory", "needs accelerations_mps2 or segments")
    if acc.shape[0] < 1:
        raise ValidationError("trajectory", "at least one step is required")
    return TrajectorySpec(x0, acc, bool(raw.get("truth_process_noise", False)))


def _grid(raw):
    if not isinstance(raw, dict):
        raise ValidationError("grid", "expected an object")
    counts = raw.get("counts")
    if (not isinstance(counts, list) or len(counts) != 3
            or not all(isinstance(c, int) and c >= 1 for c in counts)):
        raise ValidationError("grid.counts", "expected three integers >= 1")
    return GridSpec(
        _vec("grid.origin_m", raw.get("origin_m"), 3),
        _vec("grid.spacing_m", raw.get("spacing_m"), 3),
        tuple(counts),
        bool(raw.get("z_descends", True)),
    )


def resolve(raw):
    """Fill defaults into a raw config dict. Returns ``(resolved, defaulted_keys)``."""
    if not isinstance(raw, dict):
        raise ParseError("config root must be a JSON object")
    if "config" in raw and "tool" in raw:
        raw = raw["config"]
    for key in REQUIRED:
        if key not in raw:
            raise ValidationError(key, "required field is missing")
    unknown = set(raw) - set(DEFAULTS) - set(REQUIRED)
    if unknown:
        raise ValidationError(sorted(unknown)[0], "unknown field")
    resolved = {}
    defaulted = []
    for key in REQUIRED:
        resolved[key] = raw[key]
    for key, default in DEFAULTS.items():
        if key in raw:
            resolved[key] = raw[key]
        else:
            resolved[key] = json.loads(json.dumps(default))
            defaulted.append(key)
    return resolved, defaulted


def from_dict(raw):
    """Validate a config dict and build a ``ScenarioConfig``."""
    resolved, defaulted = resolve(raw)
    for key in defaulted:
        log.info("config: %s defaulted to %s", key, json.dumps(resolved[key]))
    r = resolved

    buoys_raw = _finite("buoys_m", r["buoys_m"])
    if buoys_raw.ndim != 2 or buoys_raw.shape[1] != 3:
        raise ValidationError("buoys_m", "expected a list of [x, y, z] triples")
    if buoys_raw.shape[0] < 5:
        raise ValidationError("buoys_m", "closed-form solve needs at least 5 buoys")
    try:
        buoys = BuoyArray.from_positions(buoys_raw)
    except AuvTrackError as exc:
        raise ValidationError("buoys_m", str(exc)) from None

    try:
        acoustic = AcousticConfig(float(r["sound_speed_mps"]), float(r["timing_noise_std_s"]))
    except (AuvTrackError, TypeError, ValueError) as exc:
        raise ValidationError("sound_speed_mps/timing_noise_std_s", str(exc)) from None

    dt = r["dt_seconds"]
    if not isinstance(dt, (int, float)) or isinstance(dt, bool) or not math.isfinite(dt) or dt <= 0:
        raise ValidationError("dt_seconds", "must be a positive number")
    q = _matrix("process_noise", r["process_noise"], 6)
    rm = _matrix("measurement_noise_m2", r["measurement_noise_m2"], 3)
    try:
        build_model(float(dt), q, rm)
    except AuvTrackError as exc:
        raise ValidationError("process_noise/measurement_noise_m2", str(exc)) from None

    p0 = r["initial_covariance"]
    if not isinstance(p0, dict):
        raise ValidationError("initial_covariance", "expected an object")
    pos_var = float(p0.get("position_var_m2", DEFAULT_P0_POS_VAR))
    vel_var = float(p0.get("velocity_var_m2ps2", DEFAULT_P0_VEL_VAR))
    if not (pos_var > 0 and vel_var > 0):
        raise ValidationError("initial_covariance", "variances must be positive")

    seed = r["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ValidationError("seed", "expected a non-negative integer")
    runs = r["monte_carlo_runs"]
    if not isinstance(runs, int) or isinstance(runs, bool) or runs < 1:
        raise ValidationError("monte_carlo_runs", "expected an integer >= 1")

    scenario = r["scenario"]
    if scenario is not None:
        try:
            scenario = Scenario(scenario)
        except ValueError:
            raise ValidationError("scenario", f"unknown scenario {scenario!r}") from None
    disconnect = r["disconnect_time_s"]
    if disconnect is not None:
        if not isinstance(disconnect, (int, float)) or disconnect < 0:
            raise ValidationError("disconnect_time_s", "must be a non-negative number")
        disconnect = float(disconnect)

    conf = float(r["confidence"])
    if not 0.0 < conf < 1.0:
        raise ValidationError("confidence", "must lie in (0, 1)")
    factor = float(r["disconnection_tolerance_factor"])
    if factor < 1.0:
        raise ValidationError("disconnection_tolerance_factor", "must be >= 1")
    thresholds = tuple(float(t) for t in _finite("cdf_thresholds_m", r["cdf_thresholds_m"]).reshape(-1))
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValidationError("cdf_thresholds_m", "must be sorted ascending")
    order = r["solver_order"]
    if order not in ("chan_first", "linearized_first"):
        raise ValidationError("solver_order", "expected chan_first or linearized_first")
    dropped = r["dropped_steps"]
    if not isinstance(dropped, list) or not all(isinstance(k, int) and k >= 1 for k in dropped):
        raise ValidationError("dropped_steps", "expected step indices >= 1")

    return ScenarioConfig(
        buoys=buoys,
        acoustic=acoustic,
        dt=float(dt),
        process_noise=q,
        measurement_noise=rm,
        p0_pos_var=pos_var,
        p0_vel_var=vel_var,
        grid=None if r["grid"] is None else _grid(r["grid"]),
        trajectory=None if r["trajectory"] is None else _trajectory(r["trajectory"]),
        dropped_steps=tuple(sorted(set(dropped))),
        disconnect_time=disconnect,
        scenario=scenario,
        seed=seed,
        monte_carlo_runs=runs,
        cdf_thresholds=thresholds,
        confidence=conf,
        radius_scale=float(r["radius_scale"]),
        tolerance_factor=factor,
        chan_first=order == "chan_first",
    )


def load_raw(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON at line {exc.lineno}: {exc.msg}") from None


def parse_config(path):
    """Read and validate a config (or manifest) file."""
    return from_dict(load_raw(path))


def resolved_config(path):
    """The config dict with all defaults filled in, as stored in manifests."""
    return resolve(load_raw(path))[0]
