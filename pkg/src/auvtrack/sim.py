"""Experiment engine: grid localization, filtered tracking and search.

Every random draw comes from a stream keyed by ``(seed, run index, purpose)``
so results do not depend on evaluation order.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kalman
from .acoustic import AcousticConfig, BuoyArray, make_observations
from .errors import AuvTrackError, EmptyInput, PreconditionError
from .kalman import GaussianState, build_model
from .search import (
    DEFAULT_TOLERANCE_FACTOR,
    DisconnectionEvent,
    NavigationPlan,
    Scenario,
    detect_disconnection,
    propagate_continued,
    propagate_drift,
    psd_factor,
    search_region,
)
from .solver import ChanBatchSolver, Method, solve_chan, solve_linearized, status_error

log = logging.getLogger(__name__)

_STREAMS = {"timing": 1, "truth": 2, "drift": 3, "initial": 4}


def rng_for(seed, unit, purpose):
    """Independent generator for one (seed, unit, purpose) triple."""
    return np.random.default_rng([int(seed), int(unit), _STREAMS[purpose]])


@dataclass(frozen=True, eq=False)
class GridSpec:
    origin: np.ndarray
    spacing: np.ndarray
    counts: tuple
    z_descends: bool = True


@dataclass(frozen=True, eq=False)
class TrajectorySpec:
    """True initial state and the per-step acceleration schedule from t = 0."""

    initial_state: np.ndarray
    accels: np.ndarray
    truth_process_noise: bool = False


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    buoys: BuoyArray
    acoustic: AcousticConfig
    dt: float
    process_noise: np.ndarray
    measurement_noise: np.ndarray
    p0_pos_var: float = kalman.DEFAULT_P0_POS_VAR
    p0_vel_var: float = kalman.DEFAULT_P0_VEL_VAR
    grid: GridSpec = None
    trajectory: TrajectorySpec = None
    dropped_steps: tuple = ()
    disconnect_time: float = None
    scenario: Scenario = None
    seed: int = 0
    monte_carlo_runs: int = 1
    cdf_thresholds: tuple = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0)
    confidence: float = 0.95
    radius_scale: float = 1.0
    tolerance_factor: float = DEFAULT_TOLERANCE_FACTOR
    chan_first: bool = True

    def model(self):
        return build_model(self.dt, self.process_noise, self.measurement_noise)

    def plan(self):
        if self.trajectory is None:
            return None
        return NavigationPlan.uniform(0.0, self.dt, self.trajectory.accels)


@dataclass(frozen=True, eq=False)
class StepRecord:
    index: int
    time: float
    truth: np.ndarray
    tdoa: np.ndarray = None
    method: str = None
    filtered: GaussianState = None
    region: object = None
    updated: bool = False
    prior: GaussianState = None


@dataclass(eq=False)
class RunRecord:
    kind: str
    steps: list
    metrics: dict = field(default_factory=dict)


# --- metrics ---------------------------------------------------------------

def compute_cdf(errors, thresholds):
    """Fraction of ``errors`` at or below each threshold."""
    e = np.sort(np.asarray(errors, dtype=float).reshape(-1))
    if e.size == 0:
        raise EmptyInput("no errors to summarize")
    t = np.asarray(thresholds, dtype=float).reshape(-1)
    if np.any(np.diff(t) < 0):
        raise PreconditionError("thresholds must be sorted ascending")
    counts = np.searchsorted(e, t, side="right")
    return [(float(tau), float(c) / e.size) for tau, c in zip(t, counts)]


def component_mae(estimates, truth):
    """Mean over x, y, z of the absolute error, per row."""
    return np.mean(np.abs(np.asarray(estimates) - np.asarray(truth)), axis=-1)


# --- grid localization -----------------------------------------------------

def generate_grid(origin, spacing, counts, z_descends=True):
    """Lattice points ``origin + (i*sx, j*sy, -k*|sz|)``, k varying fastest."""
    nx, ny, nz = (int(c) for c in counts)
    if min(nx, ny, nz) < 1:
        raise PreconditionError("grid counts must be >= 1")
    o = np.asarray(origin, dtype=float)
    s = np.asarray(spacing, dtype=float)
    sz = -abs(s[2]) if z_descends else s[2]
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    pts = np.stack([o[0] + i * s[0], o[1] + j * s[1], o[2] + k * sz], axis=-1)
    return pts.reshape(-1, 3)


def paper_grid():
    return generate_grid((-100.0, -100.0, -50.0), (60.0, 60.0, 30.0), (10, 10, 10))


def run_localization_experiment(cfg):
    """Closed-form fixes for every grid point, repeated ``monte_carlo_runs`` times.

    Per-step records hold run 0. Metrics aggregate all runs; failed solves
    are counted and excluded.
    """
    if cfg.grid is None:
        raise PreconditionError("localization experiment needs a grid")
    points = generate_grid(cfg.grid.origin, cfg.grid.spacing, cfg.grid.counts, cfg.grid.z_descends)
    solver = ChanBatchSolver(cfg.buoys, cfg.acoustic)
    maes, norms = [], []
    failures = 0
    steps = []
    for run in range(cfg.monte_carlo_runs):
        deltas = make_observations(points, cfg.buoys, cfg.acoustic, rng_for(cfg.seed, run, "timing"))
        pos, _, _, status = solver.solve(deltas)
        ok = status == 0
        failures += int(np.count_nonzero(~ok))
        maes.append(component_mae(pos[ok], points[ok]))
        norms.append(np.linalg.norm(pos[ok] - points[ok], axis=1))
        if run == 0:
            for idx, p in enumerate(points):
                steps.append(StepRecord(idx, 0.0, p, pos[idx] if ok[idx] else None,
                                        Method.CHAN.value if ok[idx] else None))
    maes = np.concatenate(maes)
    norms = np.concatenate(norms)
    if failures:
        log.warning("%d of %d grid solves failed and were excluded",
                    failures, len(points) * cfg.monte_carlo_runs)
    metrics = {
        "n_points": int(len(points)),
        "runs": int(cfg.monte_carlo_runs),
        "failures": failures,
        "mae": float(np.mean(maes)) if maes.size else float("nan"),
        "median_mae": float(np.median(maes)) if maes.size else float("nan"),
        "max_error_norm": float(np.max(norms)) if norms.size else float("nan"),
        "cdf": compute_cdf(maes, cfg.cdf_thresholds) if maes.size else [],
    }
    return RunRecord("localize", steps, metrics)


# --- tracking --------------------------------------------------------------

def simulate_truth(cfg, model, run, n_steps, scenario=None, switch_step=None):
    """True states ``(n_steps + 1, 6)``.

    Before ``switch_step`` (or throughout, if None) the truth follows the
    plan, plus process noise when enabled. After it, continued navigation
    keeps following the plan, and propulsion failure drifts with
    ``x' = F x + w``.
    """
    traj = cfg.trajectory
    rng = rng_for(cfg.seed, run, "truth")
    q_factor = psd_factor(model.q)
    x = np.empty((n_steps + 1, 6))
    x[0] = traj.initial_state
    for k in range(1, n_steps + 1):
        drifting = (scenario == Scenario.PROPULSION_FAILURE and switch_step is not None
                    and k > switch_step)
        u = np.zeros(3) if drifting else traj.accels[k - 1]
        w = rng.standard_normal(6) @ q_factor.T
        noisy = drifting or traj.truth_process_noise
        x[k] = model.f @ x[k - 1] + model.g @ u + (w if noisy else 0.0)
    return x


def _fixes(cfg, truth_pos, received, run):
    """Position fixes for the received steps. Closed form first, linearized on failure."""
    deltas = make_observations(truth_pos, cfg.buoys, cfg.acoustic, rng_for(cfg.seed, run, "timing"))
    n = truth_pos.shape[0]
    fixes = np.full((n, 3), np.nan)
    methods = [None] * n
    if cfg.chan_first:
        pos, _, _, status = ChanBatchSolver(cfg.buoys, cfg.acoustic).solve(deltas)
    prev = None
    for k in range(n):
        if not received[k]:
            continue
        try:
            if cfg.chan_first and status[k] == 0:
                fixes[k], methods[k] = pos[k], Method.CHAN.value
            elif cfg.chan_first:
                log.debug("step %d: %s, using linearized fallback", k, status_error(status[k]).__name__)
                fix = solve_linearized(deltas[k], cfg.buoys, cfg.acoustic, prev)
                fixes[k], methods[k] = fix.position, fix.method.value
            else:
                lin = solve_linearized(deltas[k], cfg.buoys, cfg.acoustic, prev)
                try:
                    fix = solve_chan(deltas[k], cfg.buoys, cfg.acoustic, prefer_near=lin.position)
                except AuvTrackError:
                    fix = lin
                fixes[k], methods[k] = fix.position, fix.method.value
        except AuvTrackError as exc:
            log.warning("step %d: no position fix (%s); treating as missing packet", k, exc)
            continue
        prev = fixes[k]
    return fixes, methods


def _packet_mask(cfg, n_steps):
    received = np.ones(n_steps + 1, dtype=bool)
    for k in cfg.dropped_steps:
        if 0 <= k <= n_steps:
            received[k] = False
    if cfg.disconnect_time is not None:
        times = cfg.dt * np.arange(n_steps + 1)
        received &= times <= cfg.disconnect_time + 1e-9 * cfg.dt
    return received


def _track_once(cfg, model, run, scenario=None):
    traj = cfg.trajectory
    n = traj.accels.shape[0]
    received = _packet_mask(cfg, n)
    if not received[0]:
        raise PreconditionError("the first step must deliver a packet to initialize the filter")
    switch = None
    if cfg.disconnect_time is not None:
        switch = int(np.flatnonzero(received)[-1])
    truth = simulate_truth(cfg, model, run, n, scenario, switch)
    fixes, methods = _fixes(cfg, truth[:, :3], received, run)
    have_fix = ~np.isnan(fixes[:, 0])
    if not have_fix[0]:
        raise AuvTrackError("no position fix at the first step; cannot initialize")
    init = kalman.initial_state(fixes[0], 0.0, cfg.p0_pos_var, cfg.p0_vel_var)
    priors, posts, nis = kalman.filter_sequence(model, init, traj.accels, fixes[1:], have_fix[1:])
    return (truth, fixes, methods, have_fix, [init] + posts, np.concatenate([[np.nan], nis]),
            [None] + priors)


def run_tracking_experiment(cfg):
    """Localize, predict and update at every step; skip the update on missing packets.

    Metrics average squared position errors over ``monte_carlo_runs``
    independent runs. Per-step records hold run 0.
    """
    if cfg.trajectory is None:
        raise PreconditionError("tracking experiment needs a trajectory")
    model = cfg.model()
    n = cfg.trajectory.accels.shape[0]
    se_raw = np.zeros(n + 1)
    se_raw_count = np.zeros(n + 1)
    se_filt = np.zeros(n + 1)
    mae_filt, mae_raw, nis_all = [], [], []
    steps = []
    for run in range(cfg.monte_carlo_runs):
        truth, fixes, methods, have_fix, states, nis, priors = _track_once(cfg, model, run)
        est = np.array([s.position for s in states])
        err_f = np.sum((est - truth[:, :3]) ** 2, axis=1)
        err_r = np.sum((fixes - truth[:, :3]) ** 2, axis=1)
        se_filt += err_f
        se_raw[have_fix] += err_r[have_fix]
        se_raw_count += have_fix
        mae_filt.append(component_mae(est, truth[:, :3]))
        mae_raw.append(component_mae(fixes[have_fix], truth[have_fix, :3]))
        nis_all.append(nis[~np.isnan(nis)])
        if run == 0:
            steps = _step_records(cfg, truth, fixes, methods, have_fix, states, priors=priors)
    mae_filt = np.concatenate(mae_filt)
    mae_raw = np.concatenate(mae_raw)
    nis_all = np.concatenate(nis_all)
    with np.errstate(invalid="ignore", divide="ignore"):
        mse_raw = np.where(se_raw_count > 0, se_raw / se_raw_count, np.nan)
    metrics = {
        "runs": int(cfg.monte_carlo_runs),
        "times": [float(cfg.dt * k) for k in range(n + 1)],
        "mse_tdoa": mse_raw.tolist(),
        "mse_filtered": (se_filt / cfg.monte_carlo_runs).tolist(),
        "mae_tdoa": float(np.mean(mae_raw)),
        "mae_filtered": float(np.mean(mae_filt)),
        "mean_nis": float(np.mean(nis_all)) if nis_all.size else float("nan"),
        "cdf": compute_cdf(mae_filt, cfg.cdf_thresholds),
    }
    return RunRecord("track", steps, metrics)


def _step_records(cfg, truth, fixes, methods, have_fix, states, regions=None, priors=None):
    out = []
    for k in range(truth.shape[0]):
        out.append(StepRecord(
            index=k,
            time=float(cfg.dt * k),
            truth=truth[k, :3].copy(),
            tdoa=fixes[k].copy() if have_fix[k] else None,
            method=methods[k],
            filtered=states[k],
            region=None if regions is None else regions[k],
            updated=bool(have_fix[k]) and k > 0,
            prior=None if priors is None or k >= len(priors) else priors[k],
        ))
    return out


# --- search ----------------------------------------------------------------

def run_search_experiment(cfg):
    """Track until the disconnect time, then predict only, per scenario.

    Packets at times up to and including ``disconnect_time`` are received.
    The disconnection is declared once the gap exceeds
    ``tolerance_factor * dt``; the prediction starts from the last posterior.
    """
    if cfg.trajectory is None:
        raise PreconditionError("search experiment needs a trajectory")
    if cfg.disconnect_time is None or cfg.scenario is None:
        raise PreconditionError("search experiment needs disconnect_time and scenario")
    model = cfg.model()
    plan = cfg.plan()
    n = cfg.trajectory.accels.shape[0]
    scenario = Scenario(cfg.scenario)

    divergences, traces, coverage = [], None, []
    steps, detected_at, horizons = [], None, None
    for run in range(cfg.monte_carlo_runs):
        truth, fixes, methods, have_fix, states, _, priors = _track_once(cfg, model, run, scenario)
        received = _packet_mask(cfg, n)
        last = int(np.flatnonzero(received & have_fix)[-1])
        last_state = states[last]
        if detected_at is None:
            for k in range(last + 1, n + 1):
                if detect_disconnection(last_state.time, cfg.dt * k, cfg.dt, cfg.tolerance_factor):
                    detected_at = float(cfg.dt * k)
                    break
        event = DisconnectionEvent.from_state(last_state, scenario)
        horizon_steps = n - last
        if scenario == Scenario.CONTINUED_NAVIGATION:
            predicted = propagate_continued(event, model, plan, horizon_steps)
        else:
            predicted = propagate_drift(event, model, horizon_steps)
        regions = [None] * (last + 1)
        for h, st in enumerate(predicted[1:], start=1):
            regions.append(search_region(st, h * cfg.dt, cfg.confidence, cfg.radius_scale))
        merged = list(states[: last + 1]) + list(predicted[1:])
        pred_pos = np.array([s.position for s in predicted])
        divergences.append(np.linalg.norm(pred_pos - truth[last:, :3], axis=1))
        coverage.append([bool(r.contains(truth[last + h, :3])[0])
                         for h, r in enumerate(regions[last + 1:], start=1)])
        if traces is None:
            traces = [float(np.trace(s.cov)) for s in predicted]
            horizons = [float(h * cfg.dt) for h in range(horizon_steps + 1)]
        if run == 0:
            steps = _step_records(cfg, truth, fixes, methods, have_fix & received, merged, regions,
                                  priors[: last + 1])
    div = np.array(divergences)
    metrics = {
        "runs": int(cfg.monte_carlo_runs),
        "scenario": scenario.value,
        "disconnect_time": float(cfg.disconnect_time),
        "last_packet_time": float(last_state.time),
        "detected_at": detected_at,
        "horizons": horizons,
        "trace_p": traces,
        "divergence_run0": div[0].tolist(),
        "divergence_median": np.median(div, axis=0).tolist(),
        "terminal_divergence_median": float(np.median(div[:, -1])),
        "coverage": np.mean(np.array(coverage, dtype=float), axis=0).tolist() if coverage[0] else [],
    }
    return RunRecord("search", steps, metrics)


def calibrate_fix_covariance(buoys, acoustic, point, samples=2000, seed=0):
    """Empirical 3x3 covariance of closed-form fixes at ``point``.

    Useful for choosing the filter's measurement noise from a timing noise
    level. Failed solves are dropped.
    """
    pts = np.broadcast_to(np.asarray(point, dtype=float), (samples, 3))
    deltas = make_observations(pts, buoys, acoustic, rng_for(seed, 0, "timing"))
    pos, _, _, status = ChanBatchSolver(buoys, acoustic).solve(deltas)
    err = pos[status == 0] - point
    return err.T @ err / max(1, err.shape[0])
