"""Small dense linear algebra helpers.

Vectors and matrices are plain float64 numpy arrays. The helpers here add the
rank and symmetry checks the solvers rely on.
"""

import numpy as np

from .errors import NotSymmetric, PreconditionError, RankDeficient

RANK_RTOL = 1e-10
SYMMETRY_ATOL = 1e-9


def vec3(x, y=None, z=None):
    """Build a finite length-3 float vector from 3 scalars or one sequence."""
    v = np.asarray([x, y, z] if y is not None else x, dtype=float).reshape(-1)
    if v.shape != (3,):
        raise PreconditionError(f"expected 3 components, got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise PreconditionError("vector components must be finite")
    return v


def as_matrix(m):
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise PreconditionError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise PreconditionError("matrix entries must be finite")
    return m


def _check_rank(s):
    if s.size == 0 or s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficient(
            f"smallest singular value {s[-1] if s.size else 0.0:.3e} below "
            f"{RANK_RTOL:g} x largest {s[0] if s.size else 0.0:.3e}"
        )


def pseudoinverse(m):
    """Moore-Penrose pseudoinverse of a full-column-rank matrix.

    Raises:
        RankDeficient: if the smallest singular value is below
            ``RANK_RTOL`` times the largest, or there are fewer rows than
            columns.
    """
    m = as_matrix(m)
    if m.shape[0] < m.shape[1]:
        raise RankDeficient(f"{m.shape[0]}x{m.shape[1]} cannot have full column rank")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    _check_rank(s)
    return (vt.T / s) @ u.T


def solve_least_squares(a, b):
    """Return x minimizing ||a x - b||_2 for full-column-rank ``a``."""
    a = as_matrix(a)
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.shape[0] != a.shape[0]:
        raise PreconditionError(f"rhs length {b.shape[0]} != rows {a.shape[0]}")
    return pseudoinverse(a) @ b


def sym_eigen(m):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with ``vectors[:, i]`` the unit eigenvector
    for ``values[i]``.
    """
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise PreconditionError(f"matrix must be square, got {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > SYMMETRY_ATOL * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    return w[::-1].copy(), v[:, ::-1].copy()


def symmetrize(m):
    return 0.5 * (m + m.T)


def is_psd(m, tol=1e-9):
    w, _ = sym_eigen(m)
    return bool(w[-1] >= -tol * max(1.0, abs(w[0])))


def is_pd(m):
    w, _ = sym_eigen(m)
    return bool(w[-1] > 0.0)
