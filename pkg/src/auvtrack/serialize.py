"""Writing run records as CSV/JSON plus a reproducibility manifest.

Trajectory columns (frozen, in this order)::

    index, time_s, truth_{x,y,z}_m, tdoa_{x,y,z}_m, tdoa_method,
    filtered_{x,y,z}_m, filtered_{vx,vy,vz}_mps, filtered_trace_p, updated

followed, only when at least one step carries a search region, by::

    region_horizon_s, region_center_{x,y,z}_m, region_radius_m,
    region_semi_{1,2,3}_m, region_confidence

``metrics.csv`` is long-format ``name,index,key,value``: scalars leave index
and key empty, series use the step index, CDF rows use the threshold as key.
Numbers use the shortest round-trip representation; missing values are empty
in CSV and ``null`` in JSON.
"""

import csv
import io
import json
import math
from pathlib import Path

from . import __version__
from .errors import IoError

TRAJECTORY_COLUMNS = (
    "index", "time_s",
    "truth_x_m", "truth_y_m", "truth_z_m",
    "tdoa_x_m", "tdoa_y_m", "tdoa_z_m", "tdoa_method",
    "filtered_x_m", "filtered_y_m", "filtered_z_m",
    "filtered_vx_mps", "filtered_vy_mps", "filtered_vz_mps",
    "filtered_trace_p", "updated",
)
REGION_COLUMNS = (
    "region_horizon_s",
    "region_center_x_m", "region_center_y_m", "region_center_z_m",
    "region_radius_m",
    "region_semi_1_m", "region_semi_2_m", "region_semi_3_m",
    "region_confidence",
)
METRICS_COLUMNS = ("name", "index", "key", "value")


def _num(x):
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


def _triple(v):
    return [None, None, None] if v is None else [_num(c) for c in v]


def trajectory_rows(record):
    with_region = any(s.region is not None for s in record.steps)
    columns = TRAJECTORY_COLUMNS + (REGION_COLUMNS if with_region else ())
    rows = []
    for s in record.steps:
        f = s.filtered
        values = [s.index, _num(s.time), *_triple(s.truth), *_triple(s.tdoa), s.method]
        if f is None:
            values += [None] * 7
        else:
            values += [*_triple(f.mean[:3]), *_triple(f.mean[3:]),
                       _num(sum(f.cov[i, i] for i in range(6)))]
        values.append(bool(s.updated))
        if with_region:
            r = s.region
            if r is None:
                values += [None] * len(REGION_COLUMNS)
            else:
                values += [_num(r.horizon), *_triple(r.center), _num(r.radius),
                           *_triple(r.semi_lengths), _num(r.confidence)]
        rows.append(dict(zip(columns, values)))
    return columns, rows


def metrics_rows(metrics):
    rows = []
    for name, value in metrics.items():
        if name == "cdf":
            for i, (tau, frac) in enumerate(value):
                rows.append((name, i, _num(tau), _num(frac)))
        elif isinstance(value, (list, tuple)):
            for i, v in enumerate(value):
                rows.append((name, i, None, _num(v)))
        elif isinstance(value, str):
            rows.append((name, None, value, None))
        else:
            rows.append((name, None, None, _num(value)))
    return rows


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_text(columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in (row.values() if isinstance(row, dict) else row)])
    return buf.getvalue()


def _json_clean(value):
    if isinstance(value, float):
        return None if math.isnan(value) else value
    if isinstance(value, dict):
        return {k: _json_clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_clean(v) for v in value]
    return value


def _json_text(obj):
    return json.dumps(_json_clean(obj), indent=2, allow_nan=False) + "\n"


def build_manifest(subcommand, resolved_config, fmt, backend):
    return {
        "tool": "auvtrack",
        "version": __version__,
        "subcommand": subcommand,
        "format": fmt,
        "seed": resolved_config["seed"],
        "kernel_backend": backend,
        "config": resolved_config,
    }


def write_run_record(record, out_dir, fmt="csv", manifest=None):
    """Write ``trajectory``, ``metrics`` and ``manifest.json``; return the paths."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    out = Path(out_dir)
    columns, rows = trajectory_rows(record)
    if fmt == "csv":
        traj_text = _csv_text(columns, rows)
        metrics_text = _csv_text(METRICS_COLUMNS, metrics_rows(record.metrics))
    else:
        traj_text = _json_text({"kind": record.kind, "columns": list(columns), "rows": rows})
        metrics_text = _json_text({"kind": record.kind, **record.metrics})
    files = {
        f"trajectory.{fmt}": traj_text,
        f"metrics.{fmt}": metrics_text,
        "manifest.json": _json_text(manifest if manifest is not None else {}),
    }
    paths = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            path = out / name
            path.write_text(text)
            paths.append(path)
    except OSError as exc:
        raise IoError(f"cannot write to {out}: {exc.strerror}") from None
    return paths


def read_metrics(path):
    """Parse a ``metrics.csv`` or ``metrics.json`` back into a dict."""
    path = Path(path)
    if path.suffix == ".json":
        data = json.loads(path.read_text())
        data.pop("kind", None)
        if "cdf" in data:
            data["cdf"] = [tuple(p) for p in data["cdf"]]
        return data
    out = {}
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            name = row["name"]
            value = float(row["value"]) if row["value"] != "" else None
            if name == "cdf":
                out.setdefault(name, []).append((float(row["key"]), value))
            elif row["index"] != "":
                out.setdefault(name, []).append(float("nan") if value is None else value)
            elif row["key"] != "":
                out[name] = row["key"]
            else:
                out[name] = value
    return out
