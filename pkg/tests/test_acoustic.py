import numpy as np
import pytest

from auvtrack.acoustic import (
    AcousticConfig,
    BuoyArray,
    make_observation,
    make_observations,
    range_differences,
    travel_time,
)
from auvtrack.errors import PreconditionError


def test_travel_time_zero_distance(quiet):
    assert travel_time([1, 2, 3], [1, 2, 3], quiet) == 0.0


def test_travel_time_unit():
    assert travel_time([1500, 0, 0], [0, 0, 0], AcousticConfig(1500.0)) == 1.0


def test_travel_time_reference_layout_buoy(quiet):
    # ||(-100, -100, -50)|| = 150 m
    assert travel_time([-100, -100, -50], [0, 0, 0], quiet) == pytest.approx(0.1, abs=1e-15)


def test_equidistant_source_gives_zero_deltas(quiet):
    b = BuoyArray.from_positions([[10, 0, 0], [-10, 0, 0], [0, 10, 0], [0, -10, 0], [0, 0, 10]])
    obs = make_observation([0, 0, 0], b, quiet)
    np.testing.assert_array_equal(obs.deltas, np.zeros(4))


def test_noise_free_deltas_match_travel_time_differences(buoys, quiet):
    p = np.array([-100.0, -100.0, -50.0])
    obs = make_observation(p, buoys, quiet)
    t0 = travel_time(p, buoys.reference, quiet)
    expected = [travel_time(p, s, quiet) - t0 for s in buoys.auxiliaries]
    np.testing.assert_allclose(obs.deltas, expected, atol=1e-15)
    # hyperbolic constraint in range units
    d = np.linalg.norm(buoys.positions - p, axis=1)
    assert np.max(np.abs(quiet.sound_speed * obs.deltas - (d[1:] - d[0]))) < 1e-12


def test_noise_statistics(buoys):
    sigma = 2e-4
    cfg = AcousticConfig(1500.0, sigma)
    p = np.array([-300.0, -400.0, -100.0])
    pts = np.broadcast_to(p, (100_000, 3))
    deltas = make_observations(pts, buoys, cfg, rng=7)
    clean = range_differences(p, buoys) / cfg.sound_speed
    std = (deltas - clean).std(axis=0)
    assert np.all(np.abs(std / sigma - 1.0) < 0.03)


def test_seed_determinism(buoys):
    cfg = AcousticConfig(1500.0, 1e-3)
    a = make_observation([0, 1, 2], buoys, cfg, rng=3)
    b = make_observation([0, 1, 2], buoys, cfg, rng=3)
    assert a == b
    assert a.deltas.tobytes() == b.deltas.tobytes()


def test_batch_matches_sequential_draws(buoys):
    cfg = AcousticConfig(1500.0, 1e-3)
    pts = np.array([[0.0, 1, 2], [-300, -200, -10]])
    rng = np.random.default_rng(5)
    seq = np.array([make_observation(p, buoys, cfg, rng).deltas for p in pts])
    np.testing.assert_array_equal(make_observations(pts, buoys, cfg, 5), seq)


def test_reference_swap_negates_delta(buoys, quiet):
    p = np.array([-250.0, -600.0, -80.0])
    swapped = buoys.with_reference(1)
    a = make_observation(p, buoys, quiet).deltas
    b = make_observation(p, swapped, quiet).deltas
    # old auxiliary 0 is the new reference; the old reference is new auxiliary 0
    assert b[0] == pytest.approx(-a[0], abs=1e-15)


def test_invalid_config():
    with pytest.raises(PreconditionError):
        AcousticConfig(sound_speed=0.0)
    with pytest.raises(PreconditionError):
        AcousticConfig(timing_noise_std=-1.0)


def test_coincident_buoys_rejected():
    with pytest.raises(PreconditionError):
        BuoyArray.from_positions([[0, 0, 0], [0, 0, 0], [1, 0, 0]])
