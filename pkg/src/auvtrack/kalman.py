"""Linear Kalman filter over the position-velocity state.

State ``[x, y, z, vx, vy, vz]``, acceleration input ``[ax, ay, az]``,
position-only observation. States are immutable values; ``predict`` and
``update`` return new ones.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidDt, InvalidNoise, PreconditionError, SingularInnovation
from .linalg import as_matrix, is_pd, is_psd, symmetrize, vec3

I3 = np.eye(3)
Z3 = np.zeros((3, 3))
H_POS = np.hstack([I3, Z3])

DEFAULT_P0_POS_VAR = 10.0**2
DEFAULT_P0_VEL_VAR = 5.0**2


def transition_matrices(dt):
    """``(F, G)`` for sampling interval ``dt``."""
    f = np.block([[I3, dt * I3], [Z3, I3]])
    g = np.vstack([0.5 * dt * dt * I3, dt * I3])
    return f, g


@dataclass(frozen=True, eq=False)
class KalmanModel:
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    q: np.ndarray
    r: np.ndarray
    dt: float


def build_model(dt, q, r):
    """Assemble F, G, H for ``dt`` and validate the noise covariances.

    Raises:
        InvalidDt: ``dt`` is not a positive finite number.
        InvalidNoise: ``q`` is not 6x6 symmetric PSD, or ``r`` is not 3x3
            symmetric PD.
    """
    if not (np.isfinite(dt) and dt > 0):
        raise InvalidDt(f"dt must be positive, got {dt}")
    try:
        q = as_matrix(q)
        r = as_matrix(r)
        if q.shape != (6, 6) or r.shape != (3, 3):
            raise InvalidNoise(f"expected Q 6x6 and R 3x3, got {q.shape} and {r.shape}")
        if not is_psd(q):
            raise InvalidNoise("process noise Q is not positive semidefinite")
        if not is_pd(r):
            raise InvalidNoise("measurement noise R is not positive definite")
    except (PreconditionError, ValueError) as exc:
        if isinstance(exc, InvalidNoise):
            raise
        raise InvalidNoise(str(exc)) from exc
    f, g = transition_matrices(float(dt))
    return KalmanModel(f, g, H_POS.copy(), symmetrize(q), symmetrize(r), float(dt))


def diagonal_noise(pos_var, vel_var=None):
    """Convenience diagonal covariance: 3x3 if ``vel_var`` is None, else 6x6."""
    if vel_var is None:
        return np.diag(np.broadcast_to(np.asarray(pos_var, dtype=float), 3)).copy()
    return np.diag(np.concatenate([np.broadcast_to(np.asarray(pos_var, float), 3),
                                   np.broadcast_to(np.asarray(vel_var, float), 3)]))


@dataclass(frozen=True, eq=False)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        mean = np.array(self.mean, dtype=float).reshape(6)
        cov = np.array(self.cov, dtype=float).reshape(6, 6)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "time", float(self.time))

    @property
    def position(self):
        return self.mean[:3]

    @property
    def velocity(self):
        return self.mean[3:]

    @property
    def cov_pos(self):
        return self.cov[:3, :3]

    def __eq__(self, other):
        if not isinstance(other, GaussianState):
            return NotImplemented
        return (self.time == other.time and np.array_equal(self.mean, other.mean)
                and np.array_equal(self.cov, other.cov))


def initial_state(position, time=0.0, pos_var=DEFAULT_P0_POS_VAR, vel_var=DEFAULT_P0_VEL_VAR):
    """State at a first position fix with zero velocity and diagonal P0."""
    mean = np.concatenate([vec3(position), np.zeros(3)])
    return GaussianState(mean, diagonal_noise(pos_var, vel_var), time)


def predict(state, model, u=None):
    u = np.zeros(3) if u is None else vec3(u)
    mean = model.f @ state.mean + model.g @ u
    cov = symmetrize(model.f @ state.cov @ model.f.T + model.q)
    return GaussianState(mean, cov, state.time + model.dt)


def innovation(state, model, z):
    """Residual ``z - H x`` and its covariance ``H P H^T + R``."""
    residual = vec3(z) - model.h @ state.mean
    s = symmetrize(model.h @ state.cov @ model.h.T + model.r)
    return residual, s


def normalized_innovation_squared(state, model, z):
    residual, s = innovation(state, model, z)
    return float(residual @ np.linalg.solve(s, residual))


def update(state, model, z):
    """Measurement update with a position fix ``z``.

    Uses ``P' = (I - K H) P`` followed by symmetrization.
    """
    residual, s = innovation(state, model, z)
    try:
        np.linalg.cholesky(s)
    except np.linalg.LinAlgError:
        raise SingularInnovation("innovation covariance is not positive definite") from None
    pht = state.cov @ model.h.T
    gain = np.linalg.solve(s, pht.T).T
    mean = state.mean + gain @ residual
    cov = symmetrize((np.eye(6) - gain @ model.h) @ state.cov)
    return GaussianState(mean, cov, state.time)


def filter_sequence(model, initial, inputs, fixes, mask=None):
    """Predict/update across a sequence with the active kernel backend.

    ``inputs[k]`` drives the prediction into step ``k``; ``fixes[k]`` is used
    only where ``mask[k]`` is true. Returns ``(priors, posteriors, nis)`` as
    lists of ``GaussianState`` plus an array of normalized innovation squared.
    """
    inputs = np.asarray(inputs, dtype=float).reshape(-1, 3)
    fixes = np.asarray(fixes, dtype=float).reshape(-1, 3)
    n = inputs.shape[0]
    mask = np.ones(n, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if fixes.shape[0] != n or mask.shape[0] != n:
        raise PreconditionError("inputs, fixes and mask must have equal length")
    fixes = np.where(mask[:, None], fixes, 0.0)
    xpr, ppr, xpo, ppo, nis, status = kernels.kalman_sequence(
        model.f, model.g, model.q, model.r, initial.mean, initial.cov, inputs, fixes, mask
    )
    if status != kernels.OK:
        raise SingularInnovation("innovation covariance is not positive definite")
    times = []
    t = initial.time
    for _ in range(n):
        t = t + model.dt
        times.append(t)
    priors = [GaussianState(xpr[k], ppr[k], times[k]) for k in range(n)]
    posts = [GaussianState(xpo[k], ppo[k], times[k]) for k in range(n)]
    return priors, posts, nis
