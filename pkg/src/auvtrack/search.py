"""Post-disconnection prediction and search regions.

After the last acoustic fix the filter only predicts. Two motion hypotheses
are supported: continued navigation along a known input schedule, and
propulsion failure, where the state drifts as ``x' = F x + w`` with
``w ~ N(0, Q)``.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .acoustic import make_rng
from .errors import PlanExhausted, PreconditionError, QNotPSD
from .kalman import GaussianState, predict
from .linalg import sym_eigen

DEFAULT_TOLERANCE_FACTOR = 1.5


class Scenario(str, enum.Enum):
    CONTINUED_NAVIGATION = "continued_navigation"
    PROPULSION_FAILURE = "propulsion_failure"


def detect_disconnection(last_packet_time, now, dt, tolerance_factor=DEFAULT_TOLERANCE_FACTOR):
    """True once the gap since the last packet exceeds ``tolerance_factor * dt``."""
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    if not tolerance_factor >= 1:
        raise PreconditionError("tolerance_factor must be >= 1")
    return (now - last_packet_time) > tolerance_factor * dt


@dataclass(frozen=True)
class DisconnectionEvent:
    time: float
    last_state: GaussianState
    scenario: Scenario

    @classmethod
    def from_state(cls, state, scenario):
        return cls(state.time, state, Scenario(scenario))


@dataclass(frozen=True, eq=False)
class NavigationPlan:
    """Acceleration schedule; ``accels[j]`` acts from ``times[j]`` to ``times[j] + dt``."""

    times: np.ndarray
    accels: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        a = np.asarray(self.accels, dtype=float).reshape(-1, 3)
        if t.shape[0] != a.shape[0]:
            raise PreconditionError("plan times and accelerations differ in length")
        if t.shape[0] > 1:
            steps = np.diff(t)
            if np.any(steps <= 0):
                raise PreconditionError("plan times must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
                raise PreconditionError("plan times must be evenly spaced")
        t.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "accels", a)

    @classmethod
    def uniform(cls, start_time, dt, accels):
        accels = np.asarray(accels, dtype=float).reshape(-1, 3)
        return cls(start_time + dt * np.arange(accels.shape[0]), accels)

    def __len__(self):
        return self.times.shape[0]

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if len(self) > 1 else None

    def index_of(self, time):
        if len(self) == 0:
            return None
        span = self.dt or 1.0
        j = int(round((time - self.times[0]) / span))
        if 0 <= j < len(self) and abs(self.times[j] - time) <= 1e-9 * max(1.0, abs(span)):
            return j
        return None

    def window(self, start_time, steps):
        """Accelerations for ``steps`` consecutive intervals starting at ``start_time``."""
        if steps == 0:
            return np.zeros((0, 3))
        j = self.index_of(start_time)
        if j is None or j + steps > len(self):
            have = 0 if j is None else len(self) - j
            raise PlanExhausted(f"plan covers {have} of {steps} steps from t={start_time}")
        return self.accels[j : j + steps]

    def __eq__(self, other):
        if not isinstance(other, NavigationPlan):
            return NotImplemented
        return np.array_equal(self.times, other.times) and np.array_equal(self.accels, other.accels)


def _check_steps(steps):
    if int(steps) != steps or steps < 0:
        raise PreconditionError("steps must be a non-negative integer")
    return int(steps)


def propagate_continued(event, model, plan, steps):
    """Prediction-only propagation with the planned inputs.

    Returns ``steps + 1`` states starting with the disconnection state.
    """
    if event.scenario != Scenario.CONTINUED_NAVIGATION:
        raise PreconditionError("event scenario is not continued navigation")
    steps = _check_steps(steps)
    accels = plan.window(event.time, steps)
    states = [event.last_state]
    for u in accels:
        states.append(predict(states[-1], model, u))
    return states


def propagate_drift(event, model, steps):
    """Mean/covariance propagation with no input (``steps + 1`` states)."""
    if event.scenario != Scenario.PROPULSION_FAILURE:
        raise PreconditionError("event scenario is not propulsion failure")
    steps = _check_steps(steps)
    states = [event.last_state]
    zero = np.zeros(3)
    for _ in range(steps):
        states.append(predict(states[-1], model, zero))
    return states


def psd_factor(cov, tol=1e-9):
    """Matrix ``L`` with ``L L^T = cov`` for a PSD ``cov`` (eigen-based, allows singular)."""
    w, v = sym_eigen(cov)
    if w[-1] < -tol * max(1.0, abs(w[0])):
        raise QNotPSD(f"covariance has eigenvalue {w[-1]:.3e} < 0")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_drift_ensemble(event, model, steps, n_runs, seed=None, sample_initial=False):
    """Monte Carlo drift realizations, ``(n_runs, steps + 1, 6)`` full states.

    ``sample_initial`` draws each run's starting state from the event's
    Gaussian instead of starting at its mean.
    """
    steps = _check_steps(steps)
    rng = make_rng(seed)
    q_factor = psd_factor(model.q)
    x0 = np.broadcast_to(event.last_state.mean, (n_runs, 6)).copy()
    if sample_initial:
        p_factor = psd_factor(event.last_state.cov)
        x0 = x0 + rng.standard_normal((n_runs, 6)) @ p_factor.T
    out = np.empty((n_runs, steps + 1, 6))
    out[:, 0] = x0
    for k in range(steps):
        w = rng.standard_normal((n_runs, 6)) @ q_factor.T
        out[:, k + 1] = out[:, k] @ model.f.T + w
    return out


def sample_drift_trajectory(event, model, steps, seed=None, sample_initial=False):
    """One drift realization as a list of ``steps + 1`` positions."""
    if event.scenario != Scenario.PROPULSION_FAILURE:
        raise PreconditionError("event scenario is not propulsion failure")
    states = sample_drift_ensemble(event, model, steps, 1, seed, sample_initial)[0]
    return [s[:3].copy() for s in states]


# --- chi-square quantiles -------------------------------------------------

def regularized_gamma_p(a, x):
    """Regularized lower incomplete gamma ``P(a, x)``.

    Power series below ``x < a + 1``, Lentz continued fraction above.
    """
    if a <= 0:
        raise ValueError("a must be positive")
    if x <= 0:
        return 0.0
    log_pref = a * math.log(x) - x - math.lgamma(a)
    if x < a + 1.0:
        term = 1.0 / a
        total = term
        n = 0
        while abs(term) > 1e-17 * abs(total) and n < 10_000:
            n += 1
            term *= x / (a + n)
            total += term
        return min(1.0, math.exp(log_pref) * total)
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10_000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        d = tiny if abs(d) < tiny else d
        c = b + an / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return max(0.0, 1.0 - math.exp(log_pref) * h)


def chi2_cdf(x, dof):
    return regularized_gamma_p(0.5 * dof, 0.5 * x)


def chi2_quantile(p, dof=3):
    """Inverse chi-square CDF by bisection, accurate to ~1e-12 relative."""
    if not 0.0 < p < 1.0:
        raise PreconditionError("probability must lie in (0, 1)")
    lo, hi = 0.0, max(1.0, float(dof))
    while chi2_cdf(hi, dof) < p:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if chi2_cdf(mid, dof) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    return 0.5 * (lo + hi)


# --- search regions -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SearchRegion:
    """Predicted search area at one horizon.

    ``axes[:, i]`` is the unit direction of the ``i``-th ellipsoid axis with
    half-length ``semi_lengths[i]`` (descending).
    """

    horizon: float
    center: np.ndarray
    cov_pos: np.ndarray
    radius: float
    axes: np.ndarray
    semi_lengths: np.ndarray
    confidence: float

    def mahalanobis_sq(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float)) - self.center
        return np.einsum("ij,ij->i", pts @ np.linalg.pinv(self.cov_pos), pts)

    def contains(self, points):
        """Boolean mask: points inside the confidence ellipsoid."""
        return self.mahalanobis_sq(points) <= chi2_quantile(self.confidence, 3)


def search_region(state, horizon, confidence=0.95, radius_scale=1.0):
    """Search area centered on the predicted position.

    ``radius`` is ``radius_scale * sqrt(trace(P))`` over the full 6x6
    covariance. The ellipsoid comes from the 3x3 position block scaled by the
    chi-square(3) quantile of ``confidence``.
    """
    if not 0.0 < confidence < 1.0:
        raise PreconditionError("confidence must lie in (0, 1)")
    cov_pos = np.array(state.cov_pos)
    w, v = sym_eigen(cov_pos)
    semi = np.sqrt(chi2_quantile(confidence, 3) * np.clip(w, 0.0, None))
    radius = radius_scale * math.sqrt(max(0.0, float(np.trace(state.cov))))
    return SearchRegion(
        horizon=float(horizon),
        center=np.array(state.position),
        cov_pos=cov_pos,
        radius=radius,
        axes=v,
        semi_lengths=semi,
        confidence=float(confidence),
    )
