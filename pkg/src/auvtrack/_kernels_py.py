"""Pure-numpy implementations of the hot kernels.

Used when the compiled ``_kernels`` extension is unavailable. Signatures and
status codes must stay identical to ``_kernels.pyx``.
"""

import numpy as np

OK = 0
NO_REAL_ROOT = 1
NO_POSITIVE_ROOT = 2
SINGULAR_INNOVATION = 3

DEGENERATE_QA = 1e-12
DISC_CLAMP = 1e-9
ROOT_TOL = 1e-9


def chan_batch(pinv, positions, deltas, c):
    """Closed-form Chan solve for many observations sharing one buoy array.

    Args:
        pinv: ``(3, m)`` pseudoinverse of the ``m`` rows ``s_i - s_0`` used.
        positions: ``(N, 3)`` buoys, reference first. Rows ``1..m`` are the
            auxiliaries entering the linear system.
        deltas: ``(n, N-1)`` arrival-time differences in seconds.
        c: sound speed.

    Returns:
        ``(pos, r0, residual_rms, status)`` with shapes ``(n, 3)``, ``(n,)``,
        ``(n,)``, ``(n,)``. Rows with nonzero status hold NaN.
    """
    pinv = np.asarray(pinv, dtype=float)
    positions = np.asarray(positions, dtype=float)
    deltas = np.atleast_2d(np.asarray(deltas, dtype=float))
    m = pinv.shape[1]
    n = deltas.shape[0]
    s0 = positions[0]
    k = np.einsum("ij,ij->i", positions, positions)

    dt = deltas[:, :m]
    rhs_c = -c * dt
    rhs_d = 0.5 * (k[1 : m + 1] - k[0] - c * c * dt * dt)
    a = rhs_c @ pinv.T
    b = rhs_d @ pinv.T
    bs = b - s0
    qa = np.einsum("ij,ij->i", a, a) - 1.0
    qb = 2.0 * np.einsum("ij,ij->i", a, bs)
    qc = np.einsum("ij,ij->i", bs, bs)

    status = np.zeros(n, dtype=np.int8)
    roots = np.full((n, 2), np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.abs(qa) < DEGENERATE_QA
        lin_ok = lin & (qb != 0.0)
        roots[lin_ok, 0] = -qc[lin_ok] / qb[lin_ok]
        status[lin & ~lin_ok] = NO_REAL_ROOT

        quad = ~lin
        disc = qb * qb - 4.0 * qa * qc
        clamp = quad & (disc < 0.0) & (disc >= -DISC_CLAMP * qb * qb)
        disc[clamp] = 0.0
        status[quad & (disc < 0.0)] = NO_REAL_ROOT
        good = quad & (disc >= 0.0)
        sq = np.sqrt(np.where(good, disc, 0.0))
        q = -0.5 * (qb + np.where(qb >= 0.0, sq, -sq))
        nz = good & (q != 0.0)
        roots[nz, 0] = q[nz] / qa[nz]
        roots[nz, 1] = qc[nz] / q[nz]
        zq = good & (q == 0.0)
        roots[zq, 0] = 0.0

    tol = ROOT_TOL * (1.0 + np.sqrt(qc))
    valid = roots >= -tol[:, None]
    roots = np.where(valid, np.maximum(roots, 0.0), np.nan)

    d_meas = c * deltas
    best_pos = np.full((n, 3), np.nan)
    best_r = np.full(n, np.nan)
    best_res = np.full(n, np.inf)
    for j in range(2):
        r = roots[:, j]
        ok = (status == OK) & ~np.isnan(r)
        p = a * r[:, None] + b
        dist = np.linalg.norm(p[:, None, :] - positions[None, :, :], axis=-1)
        res = np.sqrt(np.mean((d_meas - (dist[:, 1:] - dist[:, :1])) ** 2, axis=1))
        take = ok & (res < best_res)
        best_pos[take] = p[take]
        best_r[take] = r[take]
        best_res[take] = res[take]

    missing = (status == OK) & np.isnan(best_r)
    status[missing] = NO_POSITIVE_ROOT
    best_res[status != OK] = np.nan
    return best_pos, best_r, best_res, status


def kalman_sequence(f, g, q, r, x0, p0, u, z, mask):
    """Run predict/update over ``n`` steps with an observation mask.

    Step ``k`` predicts from the previous posterior using input ``u[k]``, then
    updates with ``z[k]`` when ``mask[k]`` is set. When it is not set the
    posterior is the prior, unchanged.

    Returns:
        ``(x_prior, p_prior, x_post, p_post, nis, status)``. ``nis`` is the
        normalized innovation squared (NaN on skipped steps). ``status`` is
        ``OK`` or ``SINGULAR_INNOVATION``; on failure the outputs past the
        failing step are NaN.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    q = np.asarray(q, dtype=float)
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float).reshape(-1, 3)
    z = np.asarray(z, dtype=float).reshape(-1, 3)
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    n = u.shape[0]
    x_prior = np.full((n, 6), np.nan)
    p_prior = np.full((n, 6, 6), np.nan)
    x_post = np.full((n, 6), np.nan)
    p_post = np.full((n, 6, 6), np.nan)
    nis = np.full(n, np.nan)

    x = np.array(x0, dtype=float)
    p = np.array(p0, dtype=float)
    for k in range(n):
        x = f @ x + g @ u[k]
        p = f @ p @ f.T + q
        p = 0.5 * (p + p.T)
        x_prior[k] = x
        p_prior[k] = p
        if mask[k]:
            s = p[:3, :3] + r
            s = 0.5 * (s + s.T)
            try:
                chol = np.linalg.cholesky(s)
            except np.linalg.LinAlgError:
                return x_prior, p_prior, x_post, p_post, nis, SINGULAR_INNOVATION
            s_inv = np.linalg.inv(chol)
            s_inv = s_inv.T @ s_inv
            gain = p[:, :3] @ s_inv
            resid = z[k] - x[:3]
            nis[k] = resid @ s_inv @ resid
            x = x + gain @ resid
            p = p - gain @ p[:3, :]
            p = 0.5 * (p + p.T)
        x_post[k] = x
        p_post[k] = p
    return x_prior, p_prior, x_post, p_post, nis, OK
