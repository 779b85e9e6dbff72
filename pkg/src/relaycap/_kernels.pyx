# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense complex kernels.

Eigenvalues use unblocked Householder tridiagonalisation followed by the
implicit QL iteration on the (real) tridiagonal matrix.  Every routine
releases the GIL for its numeric part so callers can run trials on threads.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, hypot, copysign
from libc.stdlib cimport malloc, free

from relaycap.errors import NotPositiveDefiniteError, NoConvergenceError

cnp.import_array()

ctypedef double complex cplx

cdef enum:
    QL_MAX_ITER = 60


cdef inline double creal(cplx z) noexcept nogil:
    return z.real


cdef inline double cimag(cplx z) noexcept nogil:
    return z.imag


cdef inline cplx conj(cplx z) noexcept nogil:
    return z.conjugate()


cdef inline double cabs(cplx z) noexcept nogil:
    return hypot(z.real, z.imag)


cdef inline double abs2(cplx z) noexcept nogil:
    return creal(z) * creal(z) + cimag(z) * cimag(z)


def matmul(const cplx[:, ::1] a, const cplx[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = a.shape[1], p = b.shape[1]
    cdef Py_ssize_t i, j, q
    cdef cplx aiq
    out = np.zeros((n, p), dtype=np.complex128)
    cdef cplx[:, ::1] c = out
    with nogil:
        for i in range(n):
            for q in range(m):
                aiq = a[i, q]
                for j in range(p):
                    c[i, j] = c[i, j] + aiq * b[q, j]
    return out


cdef int _cholesky(cplx[:, ::1] lo, double tol) noexcept nogil:
    """In-place lower Cholesky factor; returns failing column or -1."""
    cdef Py_ssize_t n = lo.shape[0], i, j, q
    cdef double d
    cdef cplx acc
    for j in range(n):
        d = creal(lo[j, j])
        for q in range(j):
            d -= abs2(lo[j, q])
        if d <= tol:
            return <int>j
        d = sqrt(d)
        lo[j, j] = d
        for i in range(j + 1, n):
            acc = lo[i, j]
            for q in range(j):
                acc = acc - lo[i, q] * conj(lo[j, q])
            lo[i, j] = acc / d
        for i in range(j):
            lo[i, j] = 0
    return -1


def cholesky(const cplx[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0], i
    cdef double dmax = 0.0
    for i in range(n):
        dmax = max(dmax, creal(a[i, i]))
    out = np.array(a, dtype=np.complex128, copy=True)
    cdef cplx[:, ::1] lo = out
    cdef int bad
    cdef double tol = n * 1e-14 * dmax
    with nogil:
        bad = _cholesky(lo, tol)
    if bad >= 0:
        raise NotPositiveDefiniteError(f"non-positive pivot at column {bad}")
    return out


cdef void _tridiagonalize(cplx[:, ::1] a, double *d, double *e) noexcept nogil:
    """Reduce Hermitian ``a`` (lower triangle used, destroyed) to real tridiagonal.

    The complex sub-diagonal is replaced by its modulus, which is a unitary
    diagonal similarity and leaves the spectrum unchanged.
    """
    cdef Py_ssize_t n = a.shape[0], k, i, j, m
    cdef double xnorm, tau, kk
    cdef cplx alpha, phase, s, vk
    cdef cplx *v = <cplx *> malloc(n * sizeof(cplx))
    cdef cplx *p = <cplx *> malloc(n * sizeof(cplx))
    for k in range(n - 2):
        m = n - k - 1
        xnorm = 0.0
        for i in range(m):
            xnorm += abs2(a[k + 1 + i, k])
        xnorm = sqrt(xnorm)
        d[k] = creal(a[k, k])
        e[k] = xnorm
        if xnorm == 0.0:
            continue
        vk = a[k + 1, k]
        if cabs(vk) == 0.0:
            phase = 1.0
        else:
            phase = vk / cabs(vk)
        alpha = -phase * xnorm
        for i in range(m):
            v[i] = a[k + 1 + i, k]
        v[0] = v[0] - alpha
        # v^H v = 2 xnorm (xnorm + |x0|)
        tau = 1.0 / (xnorm * (xnorm + cabs(vk)))
        # p = tau * A22 v using the lower triangle only
        for i in range(m):
            p[i] = 0
        for i in range(m):
            for j in range(i):
                p[i] = p[i] + a[k + 1 + i, k + 1 + j] * v[j]
                p[j] = p[j] + conj(a[k + 1 + i, k + 1 + j]) * v[i]
            p[i] = p[i] + creal(a[k + 1 + i, k + 1 + i]) * v[i]
        s = 0
        for i in range(m):
            p[i] = tau * p[i]
            s = s + conj(v[i]) * p[i]
        kk = 0.5 * tau * creal(s)
        for i in range(m):
            p[i] = p[i] - kk * v[i]
        for i in range(m):
            for j in range(i + 1):
                a[k + 1 + i, k + 1 + j] = (a[k + 1 + i, k + 1 + j]
                                           - v[i] * conj(p[j]) - p[i] * conj(v[j]))
    if n >= 2:
        d[n - 2] = creal(a[n - 2, n - 2])
        e[n - 2] = cabs(a[n - 1, n - 2])
    if n >= 1:
        d[n - 1] = creal(a[n - 1, n - 1])
        e[n - 1] = 0.0
    free(v)
    free(p)


cdef int _tql1(double *d, double *e, Py_ssize_t n) noexcept nogil:
    """Implicit QL on the symmetric tridiagonal (d, e); e[i] couples i and i+1."""
    cdef Py_ssize_t l, m, i
    cdef int it
    cdef double dd, g, r, s, c, p, f, b
    cdef double eps = 2.220446049250313e-16
    cdef double tst1 = 0.0
    for l in range(n):
        it = 0
        # running norm estimate as in EISPACK tql1: splits relative to ||T||
        tst1 = max(tst1, fabs(d[l]) + fabs(e[l]))
        while True:
            m = l
            while m < n - 1:
                dd = fabs(d[m]) + fabs(d[m + 1])
                if fabs(e[m]) <= eps * max(dd, tst1):
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > QL_MAX_ITER:
                return -1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                i -= 1
            if r == 0.0 and i >= l:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


cdef void _insertion_sort(double *x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double t
    for i in range(1, n):
        t = x[i]
        j = i - 1
        while j >= 0 and x[j] > t:
            x[j + 1] = x[j]
            j -= 1
        x[j + 1] = t


cdef int _eigvalsh_inplace(cplx[:, ::1] work, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = work.shape[0], i
    cdef double *e = <double *> malloc((n + 1) * sizeof(double))
    cdef int status
    _tridiagonalize(work, &out[0], e)
    status = _tql1(&out[0], e, n)
    free(e)
    if status == 0:
        _insertion_sort(&out[0], n)
    return status


def eigvalsh(const cplx[:, ::1] a):
    cdef Py_ssize_t n = a.shape[0]
    out = np.empty(n, dtype=np.float64)
    if n == 0:
        return out
    work = np.array(a, dtype=np.complex128, copy=True)
    cdef cplx[:, ::1] w = work
    cdef double[::1] o = out
    cdef int status
    with nogil:
        status = _eigvalsh_inplace(w, o)
    if status != 0:
        raise NoConvergenceError("implicit QL did not converge", size=n)
    return out


cdef void _forward_solve(const cplx[:, ::1] lo, cplx[:, ::1] x) noexcept nogil:
    """Overwrite x with lo^{-1} x (lo lower triangular)."""
    cdef Py_ssize_t n = lo.shape[0], ncol = x.shape[1], i, j, q
    cdef cplx lij
    for i in range(n):
        for q in range(i):
            lij = lo[i, q]
            for j in range(ncol):
                x[i, j] = x[i, j] - lij * x[q, j]
        for j in range(ncol):
            x[i, j] = x[i, j] / lo[i, i]


def whiten_eigvalsh(const cplx[:, ::1] r_s, const cplx[:, ::1] r_n):
    """Eigenvalues of r_s r_n^{-1} via L^{-1} r_s L^{-H}, r_n = L L^H."""
    cdef Py_ssize_t n = r_n.shape[0], i, j
    cdef double dmax = 0.0
    for i in range(n):
        dmax = max(dmax, creal(r_n[i, i]))
    lo_arr = np.array(r_n, dtype=np.complex128, copy=True)
    y_arr = np.array(r_s, dtype=np.complex128, copy=True)
    yt_arr = np.empty((n, n), dtype=np.complex128)
    out = np.empty(n, dtype=np.float64)
    cdef cplx[:, ::1] lo = lo_arr
    cdef cplx[:, ::1] y = y_arr
    cdef cplx[:, ::1] yt = yt_arr
    cdef double[::1] o = out
    cdef int bad, status = 0
    cdef double tol = n * 1e-14 * dmax
    with nogil:
        bad = _cholesky(lo, tol)
        if bad < 0:
            _forward_solve(lo, y)
            for i in range(n):
                for j in range(n):
                    yt[i, j] = conj(y[j, i])
            _forward_solve(lo, yt)
            for i in range(n):
                for j in range(i):
                    yt[i, j] = 0.5 * (yt[i, j] + conj(yt[j, i]))
                    yt[j, i] = conj(yt[i, j])
                yt[i, i] = creal(yt[i, i])
            status = _eigvalsh_inplace(yt, o)
    if bad >= 0:
        raise NotPositiveDefiniteError(f"non-positive pivot at column {bad}")
    if status != 0:
        raise NoConvergenceError("implicit QL did not converge", size=n)
    return out
