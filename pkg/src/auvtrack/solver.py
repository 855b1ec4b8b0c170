"""Position estimation from TDOA observations.

Three estimators share one observation model (range differences to a
reference buoy):

* ``solve_chan``: closed form. Linear system in ``p`` with the reference
  range ``r0`` as a parameter, then a scalar quadratic for ``r0``.
* ``solve_linearized``: one Gauss-Newton step about a nominal point.
* ``solve_overdetermined``: joint least squares in ``(p, r0)`` over all
  auxiliaries followed by one Gauss-Newton refinement.

Squaring ``c*dt_i = ||p - s_i|| - ||p - s_0||`` gives, per auxiliary,

    (s_i - s_0) . p = -c*dt_i * r0 + (k_i - k_0 - c^2 dt_i^2) / 2,

with ``k_i = ||s_i||^2``. Substituting ``p = a*r0 + b`` into
``r0^2 = ||p - s_0||^2`` gives the quadratic with leading coefficient
``||a||^2 - 1``.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    NoPositiveRoot,
    NoRealRoot,
    PreconditionError,
    RankDeficient,
    SingularGradient,
)
from .linalg import RANK_RTOL, pseudoinverse, solve_least_squares, vec3

CHAN_AUX = 4


class Method(str, enum.Enum):
    CHAN = "chan"
    LINEARIZED = "linearized"
    OVERDETERMINED = "overdetermined_ls"


@dataclass(frozen=True, eq=False)
class ChanSystem:
    """``a_mat @ p = r0 * c_vec + d_vec`` for the auxiliaries used."""

    a_mat: np.ndarray
    c_vec: np.ndarray
    d_vec: np.ndarray
    reference: np.ndarray


@dataclass(frozen=True)
class PositionFix:
    position: np.ndarray
    r0: float
    residual_rms: float
    method: Method


def _deltas(obs):
    return obs.deltas if hasattr(obs, "deltas") else np.asarray(obs, dtype=float).reshape(-1)


def residual_rms(p, obs, buoys, cfg):
    """RMS (meters) of ``c*dt_i - (||p - s_i|| - ||p - s_0||)`` over all auxiliaries."""
    d = np.linalg.norm(buoys.positions - np.asarray(p, dtype=float), axis=1)
    e = cfg.sound_speed * _deltas(obs) - (d[1:] - d[0])
    return float(np.sqrt(np.mean(e * e)))


def _chan_aux(buoys, aux_indices):
    if aux_indices is None:
        if buoys.n_aux < CHAN_AUX:
            raise PreconditionError(
                f"closed-form path needs {CHAN_AUX} auxiliary buoys, have {buoys.n_aux}"
            )
        return list(range(CHAN_AUX))
    idx = list(aux_indices)
    if len(idx) != CHAN_AUX:
        raise PreconditionError(f"closed-form path uses exactly {CHAN_AUX} auxiliaries")
    return idx


def build_chan_system(obs, buoys, cfg, aux_indices=None):
    """Assemble the linear system for the closed-form solve.

    Uses the first four auxiliaries unless ``aux_indices`` says otherwise.
    """
    idx = _chan_aux(buoys, aux_indices)
    dt = _deltas(obs)
    if dt.shape[0] != buoys.n_aux:
        raise PreconditionError(f"{dt.shape[0]} deltas for {buoys.n_aux} auxiliaries")
    s0 = buoys.reference
    aux = buoys.auxiliaries[idx]
    dt = dt[idx]
    c = cfg.sound_speed
    k0 = s0 @ s0
    k = np.einsum("ij,ij->i", aux, aux)
    a_mat = aux - s0
    sv = np.linalg.svd(a_mat, compute_uv=False)
    if sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficient("buoy offsets from the reference span fewer than 3 dimensions")
    return ChanSystem(
        a_mat=a_mat,
        c_vec=-c * dt,
        d_vec=0.5 * (k - k0 - c * c * dt * dt),
        reference=s0.copy(),
    )


def quadratic_coefficients(a, b, s0, omit_unit_term=False):
    """Coefficients of the quadratic in ``r0``.

    ``omit_unit_term=True`` drops the ``-1`` from the leading coefficient.
    That variant does not recover the source; it exists only so the
    regression test can show it.
    """
    bs = b - s0
    qa = a @ a - (0.0 if omit_unit_term else 1.0)
    return qa, 2.0 * (a @ bs), bs @ bs


def _roots(qa, qb, qc):
    if abs(qa) < kernels.DEGENERATE_QA:
        if qb == 0.0:
            raise NoRealRoot("degenerate quadratic with zero linear term")
        return [-qc / qb]
    disc = qb * qb - 4.0 * qa * qc
    if -kernels.DISC_CLAMP * qb * qb <= disc < 0.0:
        disc = 0.0
    if disc < 0.0:
        raise NoRealRoot(f"discriminant {disc:.3e} < 0")
    sq = np.sqrt(disc)
    q = -0.5 * (qb + sq if qb >= 0.0 else qb - sq)
    if q == 0.0:
        return [0.0]
    return [q / qa, qc / q]


def solve_chan(obs, buoys, cfg, aux_indices=None, omit_unit_term=False, prefer_near=None):
    """Closed-form position fix.

    When both roots are non-negative the one whose position best fits all
    range differences (smallest residual RMS) wins, or, if ``prefer_near`` is
    given, the one closest to that point.

    Raises:
        RankDeficient: coplanar or otherwise degenerate buoy offsets.
        NoRealRoot: negative discriminant beyond round-off.
        NoPositiveRoot: both roots negative.
    """
    system = build_chan_system(obs, buoys, cfg, aux_indices)
    pinv = pseudoinverse(system.a_mat)
    a = pinv @ system.c_vec
    b = pinv @ system.d_vec
    s0 = system.reference
    qa, qb, qc = quadratic_coefficients(a, b, s0, omit_unit_term)
    tol = kernels.ROOT_TOL * (1.0 + np.sqrt(qc))

    best, best_score = None, np.inf
    for r in _roots(qa, qb, qc):
        if not r >= -tol:
            continue
        r = max(r, 0.0)
        p = a * r + b
        res = residual_rms(p, obs, buoys, cfg)
        score = res if prefer_near is None else np.linalg.norm(p - prefer_near)
        if score < best_score:
            best, best_score = PositionFix(p, float(r), res, Method.CHAN), score
    if best is None:
        raise NoPositiveRoot("no non-negative root for the reference range")
    return best


def solve_linearized(obs, buoys, cfg, nominal=None):
    """One Gauss-Newton step of the range-difference model about ``nominal``.

    ``nominal`` defaults to the buoy centroid. All auxiliaries are used.
    """
    if buoys.n_aux < 3:
        raise PreconditionError("linearized solve needs at least 3 auxiliary buoys")
    n = buoys.centroid if nominal is None else vec3(nominal)
    diff = n - buoys.positions
    dist = np.linalg.norm(diff, axis=1)
    if np.any(dist == 0.0):
        raise SingularGradient("nominal point coincides with a buoy")
    unit = diff / dist[:, None]
    jac = unit[1:] - unit[0]
    rhs = cfg.sound_speed * _deltas(obs) - (dist[1:] - dist[0]) + jac @ n
    p = solve_least_squares(jac, rhs)
    return PositionFix(p, float(np.linalg.norm(p - buoys.reference)),
                       residual_rms(p, obs, buoys, cfg), Method.LINEARIZED)


def solve_overdetermined(obs, buoys, cfg):
    """Joint least squares in ``(p, r0)`` over all auxiliaries, then one
    linearized refinement at the result. Needs at least 5 auxiliaries."""
    if buoys.n_aux < CHAN_AUX + 1:
        raise PreconditionError(
            f"overdetermined solve needs >= {CHAN_AUX + 1} auxiliaries, have {buoys.n_aux}"
        )
    dt = _deltas(obs)
    c = cfg.sound_speed
    s0 = buoys.reference
    aux = buoys.auxiliaries
    k = np.einsum("ij,ij->i", aux, aux)
    lhs = np.column_stack([aux - s0, c * dt])
    rhs = 0.5 * (k - s0 @ s0 - c * c * dt * dt)
    theta = solve_least_squares(lhs, rhs)
    fix = solve_linearized(obs, buoys, cfg, nominal=theta[:3])
    return PositionFix(fix.position, fix.r0, fix.residual_rms, Method.OVERDETERMINED)


class ChanBatchSolver:
    """Closed-form solver with the pseudoinverse cached for one buoy array.

    ``solve(deltas)`` runs the active kernel over an ``(n, N-1)`` array and
    returns ``(positions, r0, residual_rms, status)``; see ``kernels``.
    """

    def __init__(self, buoys, cfg, aux_indices=None):
        idx = _chan_aux(buoys, aux_indices)
        self.buoys = buoys
        self.cfg = cfg
        self._order = idx + [i for i in range(buoys.n_aux) if i not in idx]
        positions = buoys.positions
        self._positions = np.vstack([positions[0], positions[1:][self._order]])
        self._pinv = pseudoinverse(self._positions[1 : CHAN_AUX + 1] - positions[0])

    def solve(self, deltas):
        d = np.atleast_2d(np.asarray(deltas, dtype=float))[:, self._order]
        return kernels.chan_batch(self._pinv, self._positions, d, self.cfg.sound_speed)


_STATUS_ERRORS = {
    kernels.NO_REAL_ROOT: NoRealRoot,
    kernels.NO_POSITIVE_ROOT: NoPositiveRoot,
}


def status_error(status):
    return _STATUS_ERRORS.get(int(status))


def solve_with_fallback(obs, buoys, cfg, nominal=None, chan_first=True):
    """Closed-form fix, falling back to the linearized step when it fails.

    With ``chan_first=False`` the linearized estimate is computed first and the
    closed form refines it, picking the root nearest that estimate.
    """
    if not chan_first:
        lin = solve_linearized(obs, buoys, cfg, nominal)
        try:
            return solve_chan(obs, buoys, cfg, prefer_near=lin.position)
        except (NoRealRoot, NoPositiveRoot):
            return lin
    try:
        return solve_chan(obs, buoys, cfg)
    except (NoRealRoot, NoPositiveRoot):
        return solve_linearized(obs, buoys, cfg, nominal)
