import csv
import json
import math

import numpy as np
import pytest

from auvtrack import kernels
from auvtrack.cli import main
from auvtrack.config import bundled_config, from_dict, load_raw, parse_config, resolve
from auvtrack.errors import ParseError, ValidationError
from auvtrack.serialize import REGION_COLUMNS, TRAJECTORY_COLUMNS, read_metrics, write_run_record
from auvtrack.sim import RunRecord, StepRecord

from pathlib import Path

DATA = Path(__file__).parent / "data"


def raw_s5():
    return load_raw(bundled_config("paper_s5.json"))


def test_parse_bundled_grid_config():
    cfg = parse_config(bundled_config("paper_s5.json"))
    assert cfg.dt == 10.0
    assert cfg.buoys.positions.shape == (5, 3)
    assert cfg.grid.counts == (10, 10, 10)
    assert cfg.acoustic.range_noise_std == pytest.approx(1.0)


def test_missing_process_noise_names_field():
    raw = raw_s5()
    del raw["process_noise"]
    with pytest.raises(ValidationError) as exc:
        from_dict(raw)
    assert exc.value.field == "process_noise"
    assert exc.value.exit_code == 52


@pytest.mark.parametrize("key,value,field", [
    ("dt_seconds", 0, "dt_seconds"),
    ("buoys_m", [[0, 0, 0]] * 4, "buoys_m"),
    ("measurement_noise_m2", {"diagonal": [1, 1]}, "measurement_noise_m2"),
    ("scenario", "sinking", "scenario"),
    ("bogus", 1, "bogus"),
])
def test_validation_errors(key, value, field):
    raw = raw_s5()
    raw[key] = value
    with pytest.raises(ValidationError) as exc:
        from_dict(raw)
    assert exc.value.field == field


def test_malformed_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ParseError):
        load_raw(p)


def test_defaults_are_filled_and_deterministic():
    raw = {k: v for k, v in raw_s5().items() if k not in ("seed", "initial_covariance")}
    a, defaulted = resolve(raw)
    b, _ = resolve(raw)
    assert a == b
    assert "seed" in defaulted and a["initial_covariance"]["position_var_m2"] == 100.0


def test_manifest_is_accepted_as_config():
    raw = raw_s5()
    manifest = {"tool": "auvtrack", "config": resolve(raw)[0]}
    assert resolve(manifest)[0] == resolve(raw)[0]


def _record(with_region):
    from auvtrack.kalman import GaussianState
    from auvtrack.search import search_region
    st = GaussianState([1.0, 2.0, 3.0, 0.1, 0.2, 0.3], np.eye(6) * 0.1234567890123, 10.0)
    steps = [StepRecord(0, 0.0, np.array([1 / 3, 2.0, -3.0]), np.array([0.1, 0.2, 0.3]), "chan", st,
                        search_region(st, 10.0) if with_region else None, True),
             StepRecord(1, 10.0, np.array([1.0, 2.0, 3.0]))]
    metrics = {"mae": 1 / 7, "series": [0.1, float("nan"), math.pi], "scenario": "x",
               "cdf": [(1.0, 0.25), (2.0, 0.75)]}
    return RunRecord("track", steps, metrics)


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_metrics_round_trip(tmp_path, fmt):
    rec = _record(False)
    write_run_record(rec, tmp_path, fmt, {})
    back = read_metrics(tmp_path / f"metrics.{fmt}")
    assert back["mae"] == pytest.approx(1 / 7, rel=1e-12)
    assert back["series"][0] == 0.1 and back["series"][2] == pytest.approx(math.pi, rel=1e-12)
    assert back["series"][1] is None or math.isnan(back["series"][1])
    assert back["cdf"] == [(1.0, 0.25), (2.0, 0.75)]
    assert back["scenario"] == "x"


def test_region_columns_only_when_present(tmp_path):
    write_run_record(_record(False), tmp_path / "a", "csv", {})
    write_run_record(_record(True), tmp_path / "b", "csv", {})
    head_a = (tmp_path / "a" / "trajectory.csv").read_text().splitlines()[0].split(",")
    head_b = (tmp_path / "b" / "trajectory.csv").read_text().splitlines()[0].split(",")
    assert tuple(head_a) == TRAJECTORY_COLUMNS
    assert tuple(head_b) == TRAJECTORY_COLUMNS + REGION_COLUMNS


def test_cli_localize_writes_three_files(tmp_path):
    out = tmp_path / "loc"
    assert main(["localize", "--config", "bundled:paper_s5.json", "--out", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["manifest.json", "metrics.csv", "trajectory.csv"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["subcommand"] == "localize"
    assert manifest["kernel_backend"] == kernels.backend()
    assert read_metrics(out / "metrics.csv")["n_points"] == 1000


def test_cli_unknown_subcommand():
    assert main(["fly"]) != 0


def test_cli_search_without_disconnect(tmp_path):
    assert main(["search", "--config", "bundled:paper_track.json", "--out", str(tmp_path)]) == 52


def test_cli_missing_config_file(tmp_path):
    assert main(["track", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 51


def test_cli_grid_prints_points(capsys):
    assert main(["grid"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1000 and lines[0] == "-100.0,-100.0,-50.0"


@pytest.mark.parametrize("sub,name", [
    ("track", "paper_track.json"),
    ("search", "paper_search_t50.json"),
])
def test_manifest_rerun_is_byte_identical(tmp_path, sub, name):
    first, second = tmp_path / "a", tmp_path / "b"
    assert main([sub, "--config", f"bundled:{name}", "--out", str(first), "--format", "json"]) == 0
    assert main([sub, "--config", str(first / "manifest.json"), "--out", str(second),
                 "--format", "json"]) == 0
    for f in ("trajectory.json", "metrics.json", "manifest.json"):
        assert (first / f).read_bytes() == (second / f).read_bytes()


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _same_cell(a, b):
    if a == b:
        return True
    try:
        return math.isclose(float(a), float(b), rel_tol=1e-9, abs_tol=1e-9)
    except ValueError:
        return False


def test_golden_track_output(tmp_path):
    if "compiled" not in kernels.available_backends():
        pytest.skip("compiled kernels not built")
    previous = kernels.backend()
    kernels.use_backend("compiled")
    try:
        assert main(["track", "--config", str(DATA / "small_track.json"), "--out", str(tmp_path)]) == 0
    finally:
        kernels.use_backend(previous)
    for name in ("trajectory.csv", "metrics.csv"):
        got, want = _rows(tmp_path / name), _rows(DATA / "golden_track" / name)
        assert got[0] == want[0]
        assert len(got) == len(want)
        for rg, rw in zip(got[1:], want[1:]):
            assert all(_same_cell(a, b) for a, b in zip(rg, rw)), (rg, rw)
