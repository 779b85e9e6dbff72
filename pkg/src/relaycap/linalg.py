"""Dense complex matrix kernels with explicit numerical contracts.

Matrices are plain ``complex128`` numpy arrays.  The hot routines (products,
Cholesky, Hermitian eigenvalues, whitening) dispatch to the compiled
``relaycap._kernels`` extension when it is importable and to a numpy/LAPACK
implementation otherwise.  :func:`set_backend` switches explicitly, which the
benchmark and the backend-agreement tests rely on.
"""

import numpy as np

from relaycap import _pykernels
from relaycap.errors import ContractError, NearSingularError, ShapeError

try:
    from relaycap import _kernels
except ImportError:  # extension not built
    _kernels = None

_BACKENDS = {"python": _pykernels}
if _kernels is not None:
    _BACKENDS["compiled"] = _kernels

_backend = _kernels if _kernels is not None else _pykernels

HERMITIAN_RTOL = 1e-10
PSD_FLOOR = 1e-10


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return "compiled" if _backend is _kernels and _kernels is not None else "python"


def set_backend(name):
    """Select ``"compiled"`` or ``"python"`` kernels; returns the previous name."""
    global _backend
    if name not in _BACKENDS:
        raise ValueError(f"unknown or unavailable backend {name!r}; have {available_backends()}")
    previous = backend_name()
    _backend = _BACKENDS[name]
    return previous


def as_matrix(a):
    """Validate and return ``a`` as a C-contiguous complex128 2-D array."""
    m = np.ascontiguousarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ContractError("matrix has non-finite entries")
    return m


def _square(a):
    if a.shape[0] != a.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a.shape}")


def check_hermitian(a, rtol=HERMITIAN_RTOL):
    a = as_matrix(a)
    _square(a)
    scale = np.linalg.norm(a)
    if np.max(np.abs(a - a.conj().T), initial=0.0) > rtol * max(scale, np.finfo(float).tiny):
        raise ContractError("matrix is not Hermitian")
    return a


def matmul(a, b):
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return _backend.matmul(a, b)


def scaled_gram(a, scale=1.0):
    """``scale * a @ a^H``, symmetrised so the result is exactly Hermitian."""
    if scale < 0:
        raise ContractError("scale must be nonnegative")
    a = as_matrix(a)
    m = scale * matmul(a, np.ascontiguousarray(a.conj().T))
    return 0.5 * (m + m.conj().T)


def cholesky(a):
    """Lower-triangular ``L`` with positive real diagonal and ``L L^H = a``."""
    a = check_hermitian(a)
    return _backend.cholesky(a)


def hermitian_eigenvalues(a):
    """Ascending real eigenvalues of a Hermitian matrix."""
    a = check_hermitian(a)
    return np.asarray(_backend.eigvalsh(a), dtype=np.float64)


def _clamp_psd(lam):
    floor = PSD_FLOOR * max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    if lam.size and lam[0] < -floor:
        raise ContractError(f"eigenvalue {lam[0]:.3e} below the PSD floor")
    return np.maximum(lam, 0.0)


def whiten_eigenvalues(r_s, r_n):
    """Eigenvalues of ``r_s r_n^{-1}`` (ascending, clamped at zero).

    Computed as the Hermitian spectrum of ``L^{-1} r_s L^{-H}`` with
    ``r_n = L L^H``, so no explicit inverse is formed.
    """
    r_s, r_n = check_hermitian(r_s), check_hermitian(r_n)
    if r_s.shape != r_n.shape:
        raise ShapeError(f"shape mismatch {r_s.shape} vs {r_n.shape}")
    lam = np.asarray(_backend.whiten_eigvalsh(r_s, r_n), dtype=np.float64)
    return _clamp_psd(lam)


def logdet_pd(a):
    """log det of a Hermitian positive definite matrix from its Cholesky diagonal."""
    lo = cholesky(a)
    return 2.0 * float(np.sum(np.log(lo.diagonal().real)))


def trace_norm_distance(a, c):
    """``(1/n) * ||c I - a||_Tr`` for Hermitian ``a``."""
    lam = hermitian_eigenvalues(a)
    return float(np.mean(np.abs(c - lam)))


def resolvent_trace(a, s, cond_max=1e12):
    """Empirical Stieltjes transform ``(1/n) Tr((s I + a)^{-1})``."""
    a = check_hermitian(a)
    n = a.shape[0]
    shifted = a + s * np.eye(n)
    if np.linalg.cond(shifted) > cond_max:
        raise NearSingularError(f"s I + A is numerically singular at s={s}")
    x = np.linalg.solve(shifted, np.eye(n, dtype=np.complex128))
    return complex(np.trace(x)) / n
