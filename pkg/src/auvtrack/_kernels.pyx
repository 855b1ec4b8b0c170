# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels in ``_kernels_py``.

Same signatures, status codes and NaN conventions as the numpy fallback.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, NAN, INFINITY, isnan

cnp.import_array()

cdef enum:
    OK = 0
    NO_REAL_ROOT = 1
    NO_POSITIVE_ROOT = 2
    SINGULAR_INNOVATION = 3

cdef double DEGENERATE_QA = 1e-12
cdef double DISC_CLAMP = 1e-9
cdef double ROOT_TOL = 1e-9


cdef double _residual_rms(double px, double py, double pz,
                          const double[:, ::1] pos, const double[::1] dmeas) noexcept nogil:
    cdef Py_ssize_t i, nb = pos.shape[0]
    cdef double dx, dy, dz, r0, di, e, acc = 0.0
    dx = px - pos[0, 0]; dy = py - pos[0, 1]; dz = pz - pos[0, 2]
    r0 = sqrt(dx * dx + dy * dy + dz * dz)
    for i in range(1, nb):
        dx = px - pos[i, 0]; dy = py - pos[i, 1]; dz = pz - pos[i, 2]
        di = sqrt(dx * dx + dy * dy + dz * dz)
        e = dmeas[i - 1] - (di - r0)
        acc += e * e
    return sqrt(acc / (nb - 1))


def chan_batch(pinv, positions, deltas, double c):
    cdef const double[:, ::1] pv = np.ascontiguousarray(pinv, dtype=np.float64)
    cdef const double[:, ::1] pos = np.ascontiguousarray(positions, dtype=np.float64)
    cdef const double[:, ::1] dl = np.ascontiguousarray(np.atleast_2d(deltas), dtype=np.float64)
    cdef Py_ssize_t m = pv.shape[1], n = dl.shape[0], nb = pos.shape[0]
    cdef Py_ssize_t row, i, j, naux = nb - 1

    out_pos = np.full((n, 3), np.nan)
    out_r = np.full(n, np.nan)
    out_res = np.full(n, np.nan)
    out_status = np.zeros(n, dtype=np.int8)
    cdef double[:, ::1] op = out_pos
    cdef double[::1] orr = out_r
    cdef double[::1] ores = out_res
    cdef signed char[::1] ost = out_status

    kk = np.einsum("ij,ij->i", np.asarray(pos), np.asarray(pos))
    cdef double[::1] k = kk
    dmeas_arr = np.empty(naux)
    cdef double[::1] dmeas = dmeas_arr

    cdef double a[3]
    cdef double b[3]
    cdef double roots[2]
    cdef int nroots
    cdef double dt, rc, rd, qa, qb, qc, disc, sq, q, tol, r, px, py, pz, res, best_res
    cdef double bx, by, bz
    cdef int found

    with nogil:
        for row in range(n):
            for j in range(3):
                a[j] = 0.0
                b[j] = 0.0
            for i in range(m):
                dt = dl[row, i]
                rc = -c * dt
                rd = 0.5 * (k[i + 1] - k[0] - c * c * dt * dt)
                for j in range(3):
                    a[j] += pv[j, i] * rc
                    b[j] += pv[j, i] * rd
            bx = b[0] - pos[0, 0]; by = b[1] - pos[0, 1]; bz = b[2] - pos[0, 2]
            qa = a[0] * a[0] + a[1] * a[1] + a[2] * a[2] - 1.0
            qb = 2.0 * (a[0] * bx + a[1] * by + a[2] * bz)
            qc = bx * bx + by * by + bz * bz

            nroots = 0
            if fabs(qa) < DEGENERATE_QA:
                if qb == 0.0:
                    ost[row] = NO_REAL_ROOT
                    continue
                roots[0] = -qc / qb
                nroots = 1
            else:
                disc = qb * qb - 4.0 * qa * qc
                if disc < 0.0 and disc >= -DISC_CLAMP * qb * qb:
                    disc = 0.0
                if disc < 0.0:
                    ost[row] = NO_REAL_ROOT
                    continue
                sq = sqrt(disc)
                if qb >= 0.0:
                    q = -0.5 * (qb + sq)
                else:
                    q = -0.5 * (qb - sq)
                if q != 0.0:
                    roots[0] = q / qa
                    roots[1] = qc / q
                    nroots = 2
                else:
                    roots[0] = 0.0
                    nroots = 1

            for i in range(naux):
                dmeas[i] = c * dl[row, i]
            tol = ROOT_TOL * (1.0 + sqrt(qc))
            found = 0
            best_res = INFINITY
            for j in range(nroots):
                r = roots[j]
                if isnan(r) or r < -tol:
                    continue
                if r < 0.0:
                    r = 0.0
                px = a[0] * r + b[0]
                py = a[1] * r + b[1]
                pz = a[2] * r + b[2]
                res = _residual_rms(px, py, pz, pos, dmeas)
                if res < best_res:
                    best_res = res
                    op[row, 0] = px
                    op[row, 1] = py
                    op[row, 2] = pz
                    orr[row] = r
                    ores[row] = res
                    found = 1
            if not found:
                ost[row] = NO_POSITIVE_ROOT
                op[row, 0] = NAN
                op[row, 1] = NAN
                op[row, 2] = NAN
                orr[row] = NAN
                ores[row] = NAN
    return out_pos, out_r, out_res, out_status


cdef inline void _symmetrize6(double[:, ::1] p) noexcept nogil:
    cdef int i, j
    cdef double v
    for i in range(6):
        for j in range(i + 1, 6):
            v = 0.5 * (p[i, j] + p[j, i])
            p[i, j] = v
            p[j, i] = v


def kalman_sequence(f, g, q, r, x0, p0, u, z, mask):
    cdef const double[:, ::1] F = np.ascontiguousarray(f, dtype=np.float64)
    cdef const double[:, ::1] G = np.ascontiguousarray(g, dtype=np.float64)
    cdef const double[:, ::1] Q = np.ascontiguousarray(q, dtype=np.float64)
    cdef const double[:, ::1] R = np.ascontiguousarray(r, dtype=np.float64)
    cdef const double[:, ::1] U = np.ascontiguousarray(np.asarray(u, dtype=np.float64).reshape(-1, 3))
    cdef const double[:, ::1] Z = np.ascontiguousarray(np.asarray(z, dtype=np.float64).reshape(-1, 3))
    mask_arr = np.ascontiguousarray(np.asarray(mask, dtype=bool).reshape(-1), dtype=np.uint8)
    cdef const unsigned char[::1] M = mask_arr
    cdef Py_ssize_t n = U.shape[0]

    xpr_a = np.full((n, 6), np.nan)
    ppr_a = np.full((n, 6, 6), np.nan)
    xpo_a = np.full((n, 6), np.nan)
    ppo_a = np.full((n, 6, 6), np.nan)
    nis_a = np.full(n, np.nan)
    cdef double[:, ::1] xpr = xpr_a
    cdef double[:, :, ::1] ppr = ppr_a
    cdef double[:, ::1] xpo = xpo_a
    cdef double[:, :, ::1] ppo = ppo_a
    cdef double[::1] nis = nis_a

    x_arr = np.array(x0, dtype=np.float64).reshape(6)
    p_arr = np.array(p0, dtype=np.float64).reshape(6, 6)
    cdef double[::1] x = x_arr
    cdef double[:, ::1] P = p_arr
    cdef double xt[6]
    cdef double fp[6][6]
    cdef double pt[6][6]
    cdef double s[3][3]
    cdef double L[3][3]
    cdef double Li[3][3]
    cdef double Si[3][3]
    cdef double K[6][3]
    cdef double resid[3]
    cdef double tmp[3]
    cdef double acc, d
    cdef Py_ssize_t k, i, j, l
    cdef int status = OK

    with nogil:
        for k in range(n):
            # predict
            for i in range(6):
                acc = 0.0
                for j in range(6):
                    acc = acc + F[i, j] * x[j]
                for j in range(3):
                    acc = acc + G[i, j] * U[k, j]
                xt[i] = acc
            for i in range(6):
                x[i] = xt[i]
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for l in range(6):
                        acc = acc + F[i, l] * P[l, j]
                    fp[i][j] = acc
            for i in range(6):
                for j in range(6):
                    acc = 0.0
                    for l in range(6):
                        acc = acc + fp[i][l] * F[j, l]
                    P[i, j] = acc + Q[i, j]
            _symmetrize6(P)
            for i in range(6):
                xpr[k, i] = x[i]
                for j in range(6):
                    ppr[k, i, j] = P[i, j]

            if M[k]:
                for i in range(3):
                    for j in range(3):
                        s[i][j] = P[i, j] + R[i, j]
                for i in range(3):
                    for j in range(i + 1, 3):
                        d = 0.5 * (s[i][j] + s[j][i])
                        s[i][j] = d
                        s[j][i] = d
                # Cholesky s = L L^T
                for i in range(3):
                    for j in range(3):
                        L[i][j] = 0.0
                for j in range(3):
                    acc = s[j][j]
                    for l in range(j):
                        acc = acc - L[j][l] * L[j][l]
                    if not (acc > 0.0):
                        status = SINGULAR_INNOVATION
                        break
                    L[j][j] = sqrt(acc)
                    for i in range(j + 1, 3):
                        acc = s[i][j]
                        for l in range(j):
                            acc = acc - L[i][l] * L[j][l]
                        L[i][j] = acc / L[j][j]
                if status != OK:
                    break
                # Li = L^-1 (lower triangular)
                for i in range(3):
                    for j in range(3):
                        Li[i][j] = 0.0
                for i in range(3):
                    Li[i][i] = 1.0 / L[i][i]
                    for j in range(i):
                        acc = 0.0
                        for l in range(j, i):
                            acc = acc + L[i][l] * Li[l][j]
                        Li[i][j] = -acc / L[i][i]
                for i in range(3):
                    for j in range(3):
                        acc = 0.0
                        for l in range(3):
                            acc = acc + Li[l][i] * Li[l][j]
                        Si[i][j] = acc
                for i in range(6):
                    for j in range(3):
                        acc = 0.0
                        for l in range(3):
                            acc = acc + P[i, l] * Si[l][j]
                        K[i][j] = acc
                for i in range(3):
                    resid[i] = Z[k, i] - x[i]
                for i in range(3):
                    acc = 0.0
                    for j in range(3):
                        acc = acc + Si[i][j] * resid[j]
                    tmp[i] = acc
                nis[k] = resid[0] * tmp[0] + resid[1] * tmp[1] + resid[2] * tmp[2]
                for i in range(6):
                    acc = 0.0
                    for j in range(3):
                        acc = acc + K[i][j] * resid[j]
                    x[i] = x[i] + acc
                for i in range(6):
                    for j in range(6):
                        acc = 0.0
                        for l in range(3):
                            acc = acc + K[i][l] * P[l, j]
                        pt[i][j] = P[i, j] - acc
                for i in range(6):
                    for j in range(6):
                        P[i, j] = pt[i][j]
                _symmetrize6(P)
            for i in range(6):
                xpo[k, i] = x[i]
                for j in range(6):
                    ppo[k, i, j] = P[i, j]

    return xpr_a, ppr_a, xpo_a, ppo_a, nis_a, status
