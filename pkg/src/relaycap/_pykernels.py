"""Pure-Python backend: the same kernel surface as ``_kernels`` on numpy/LAPACK."""

import numpy as np
from scipy.linalg import solve_triangular

from relaycap.errors import NotPositiveDefiniteError


def matmul(a, b):
    return np.matmul(a, b)


def _pivot_tol(a):
    n = a.shape[0]
    return n * 1e-14 * max(float(np.max(a.diagonal().real, initial=0.0)), 0.0)


def cholesky(a):
    try:
        lo = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None
    d = lo.diagonal().real
    if d.size and np.min(d) ** 2 <= _pivot_tol(a):
        raise NotPositiveDefiniteError(f"non-positive pivot at column {int(np.argmin(d))}")
    return lo


def eigvalsh(a):
    return np.linalg.eigvalsh(a)


def whiten_eigvalsh(r_s, r_n):
    lo = cholesky(r_n)
    y = solve_triangular(lo, r_s, lower=True)
    x = solve_triangular(lo, y.conj().T, lower=True)
    x = 0.5 * (x + x.conj().T)
    return np.linalg.eigvalsh(x)
