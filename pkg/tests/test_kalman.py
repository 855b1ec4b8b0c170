import numpy as np
import pytest

from auvtrack import kalman
from auvtrack.errors import InvalidDt, InvalidNoise, SingularInnovation
from auvtrack.kalman import (
    GaussianState,
    build_model,
    filter_sequence,
    innovation,
    normalized_innovation_squared,
    predict,
    update,
)

from . import oracles


def model(dt=10.0, q=0.0, r=1.0):
    return build_model(dt, q * np.eye(6), r * np.eye(3))


def test_build_model_ten_second_interval():
    m = model(10.0)
    assert m.f[0, 3] == 10.0
    assert m.g[0, 0] == 50.0
    assert m.g[3, 0] == 10.0
    np.testing.assert_array_equal(m.h, np.hstack([np.eye(3), np.zeros((3, 3))]))


def test_build_model_unit_interval():
    m = build_model(1.0, np.eye(6), np.eye(3))
    np.testing.assert_array_equal(m.f[:3, 3:], np.eye(3))


@pytest.mark.parametrize("dt", [0.0, -1.0, float("nan")])
def test_build_model_invalid_dt(dt):
    with pytest.raises(InvalidDt):
        model(dt)


def test_build_model_invalid_noise():
    with pytest.raises(InvalidNoise):
        build_model(1.0, -np.eye(6), np.eye(3))
    with pytest.raises(InvalidNoise):
        build_model(1.0, np.eye(6), np.zeros((3, 3)))
    with pytest.raises(InvalidNoise):
        build_model(1.0, np.eye(5), np.eye(3))


def test_predict_rest_state():
    s = GaussianState(np.zeros(6), np.eye(6), 3.0)
    out = predict(s, model(q=0.0), np.zeros(3))
    np.testing.assert_array_equal(out.mean, np.zeros(6))
    assert out.time == 13.0


def test_predict_constant_velocity():
    s = GaussianState([0, 0, 0, 1, 0, 0], np.zeros((6, 6)))
    out = predict(s, model(), None)
    np.testing.assert_allclose(out.mean, [10, 0, 0, 1, 0, 0])


def test_predict_acceleration():
    s = GaussianState(np.zeros(6), np.zeros((6, 6)))
    out = predict(s, model(), [1, 0, 0])
    np.testing.assert_allclose(out.mean, [50, 0, 0, 10, 0, 0])


def test_update_zero_gain_limit():
    s = GaussianState([1, 2, 3, 0.1, 0.2, 0.3], np.eye(6))
    m = build_model(10.0, np.zeros((6, 6)), 1e12 * np.eye(3))
    out = update(s, m, [100.0, -50.0, 20.0])
    np.testing.assert_allclose(out.mean, s.mean, rtol=1e-3, atol=1e-3)


def test_update_full_trust_limit():
    s = GaussianState(np.zeros(6), np.eye(6))
    m = build_model(10.0, np.zeros((6, 6)), 1e-12 * np.eye(3))
    z = np.array([5.0, -3.0, 2.0])
    out = update(s, m, z)
    assert np.max(np.abs(out.position - z)) < 1e-3


def test_update_midpoint_with_unit_covariances():
    s = GaussianState([2.0, 4.0, 6.0, 0, 0, 0], np.eye(6))
    out = update(s, model(r=1.0), [0.0, 0.0, 0.0])
    np.testing.assert_allclose(out.position, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(out.cov[:3, :3], 0.5 * np.eye(3))


def test_innovation_basics():
    s = GaussianState([1, 2, 3, 0, 0, 0], np.zeros((6, 6)))
    resid, cov = innovation(s, model(r=1.0), [1, 2, 3])
    np.testing.assert_array_equal(resid, np.zeros(3))
    np.testing.assert_array_equal(cov, np.eye(3))


def test_singular_innovation():
    s = GaussianState(np.zeros(6), -np.eye(6))
    with pytest.raises(SingularInnovation):
        update(s, model(r=0.5), [0, 0, 0])


def _random_scenario(seed, steps=100):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(6, 6))
    q = 0.01 * (a @ a.T)
    b = rng.normal(size=(3, 3))
    r = b @ b.T + 0.5 * np.eye(3)
    c = rng.normal(size=(6, 6))
    p0 = c @ c.T + np.eye(6)
    x0 = rng.normal(size=6) * 10
    u = rng.normal(size=(steps, 3)) * 0.1
    z = rng.normal(size=(steps, 3)) * 20
    return build_model(2.5, q, r), GaussianState(x0, p0), u, z


def _oracle_run(m, init, u, z, mask=None):
    f, g, h = oracles.model_matrices(m.dt)
    q, r = m.q.tolist(), m.r.tolist()
    x, p = init.mean.tolist(), init.cov.tolist()
    out = []
    for k in range(len(u)):
        x, p = oracles.kf_predict(x, p, f, g, q, u[k].tolist())
        if mask is None or mask[k]:
            x, p = oracles.kf_update(x, p, h, r, z[k].tolist())
        out.append((np.array(x), np.array(p)))
    return out


def _rel_err(a, b):
    return np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(b)))


def test_operators_match_bruteforce_oracle():
    m, state, u, z = _random_scenario(7)
    ref = _oracle_run(m, state, u, z)
    for k in range(len(u)):
        state = update(predict(state, m, u[k]), m, z[k])
        assert _rel_err(state.mean, ref[k][0]) < 1e-10
        assert _rel_err(state.cov, ref[k][1]) < 1e-10


def test_sequence_kernel_matches_oracle_with_gaps(backend):
    m, init, u, z = _random_scenario(8)
    mask = np.ones(len(u), dtype=bool)
    mask[[3, 4, 40, 99]] = False
    ref = _oracle_run(m, init, u, z, mask)
    priors, posts, nis = filter_sequence(m, init, u, z, mask)
    for k in range(len(u)):
        assert _rel_err(posts[k].mean, ref[k][0]) < 1e-10
        assert _rel_err(posts[k].cov, ref[k][1]) < 1e-10
        if not mask[k]:
            assert posts[k] == priors[k]
            assert np.isnan(nis[k])


def test_sequence_kernel_matches_operators(backend):
    m, state, u, z = _random_scenario(9, steps=30)
    _, posts, nis = filter_sequence(m, state, u, z)
    for k in range(len(u)):
        prior = predict(state, m, u[k])
        assert nis[k] == pytest.approx(normalized_innovation_squared(prior, m, z[k]), rel=1e-9)
        state = update(prior, m, z[k])
        np.testing.assert_allclose(posts[k].mean, state.mean, rtol=1e-12, atol=1e-9)
        assert posts[k].time == state.time


def test_covariance_invariants():
    m, state, u, z = _random_scenario(10)
    for k in range(len(u)):
        prior = predict(state, m, u[k])
        post = update(prior, m, z[k])
        for s in (prior, post):
            np.testing.assert_array_equal(s.cov, s.cov.T)
            assert np.linalg.eigvalsh(s.cov).min() >= -1e-9
        assert np.trace(post.cov) <= np.trace(prior.cov) + 1e-9
        state = post


def test_zero_process_noise_matches_closed_form_kinematics():
    m = model(dt=10.0, q=0.0)
    rng = np.random.default_rng(2)
    x0 = rng.normal(size=6)
    us = rng.normal(size=(25, 3)) * 0.01
    s = GaussianState(x0, np.zeros((6, 6)))
    for k, u in enumerate(us, start=1):
        s = predict(s, m, u)
        expected = np.linalg.matrix_power(m.f, k) @ x0 + sum(
            np.linalg.matrix_power(m.f, k - 1 - j) @ m.g @ us[j] for j in range(k))
        np.testing.assert_allclose(s.mean, expected, rtol=1e-12, atol=1e-9)


def test_initial_state_defaults():
    s = kalman.initial_state([1, 2, 3])
    np.testing.assert_array_equal(s.velocity, np.zeros(3))
    np.testing.assert_array_equal(np.diag(s.cov), [100, 100, 100, 25, 25, 25])


def test_nis_chi_square_mean():
    # Linear-Gaussian simulation with the filter's own noise model.
    rng = np.random.default_rng(4)
    q = np.diag([0.01, 0.01, 0.01, 1e-4, 1e-4, 1e-4])
    r = np.diag([1.0, 2.0, 0.5])
    m = build_model(10.0, q, r)
    lq, lr = np.linalg.cholesky(q), np.linalg.cholesky(r)
    vals = []
    for _ in range(20):
        x = np.array([0, 0, -100, 0.5, 0.2, 0.0])
        p0 = np.diag([4.0, 4, 4, 0.25, 0.25, 0.25])
        state = GaussianState(x + np.linalg.cholesky(p0) @ rng.standard_normal(6), p0)
        for _ in range(60):
            x = m.f @ x + lq @ rng.standard_normal(6)
            z = x[:3] + lr @ rng.standard_normal(3)
            prior = predict(state, m, None)
            vals.append(normalized_innovation_squared(prior, m, z))
            state = update(prior, m, z)
    assert 2.7 <= np.mean(vals) <= 3.3
