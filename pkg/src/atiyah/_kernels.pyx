# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batch evaluation of log|D|.

Same contract as ``atiyah._kernels_py.batch_eval``; the LU factorization
is written out here rather than delegated to LAPACK so the whole
per-configuration evaluation runs without touching the interpreter.
"""

import numpy as np

from libc.math cimport sqrt, log, atan2, fabs, NAN, INFINITY, M_PI, remainder


cdef inline double cabs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double cabs_(double complex z) noexcept nogil:
    return sqrt(cabs2(z))


cdef inline double carg_(double complex z) noexcept nogil:
    return atan2(z.imag, z.real)


cdef void _spinor(double[:, :, ::1] pts, Py_ssize_t b, Py_ssize_t i, Py_ssize_t j,
                  int real, double complex* out0, double complex* out1) noexcept nogil:
    cdef double x1, x2, x3, nrm, s
    cdef double complex a, c
    if real:
        x1 = pts[b, j, 0] - pts[b, i, 0]
        x2 = pts[b, j, 1] - pts[b, i, 1]
        nrm = sqrt(x1 * x1 + x2 * x2)
        x1 /= nrm
        x2 /= nrm
        if x2 <= 0.0:
            a = 1.0
            c = x1 / (1.0 - x2)
        else:
            a = x1 / (1.0 + x2)
            c = 1.0
    else:
        x1 = pts[b, j, 0] - pts[b, i, 0]
        x2 = pts[b, j, 1] - pts[b, i, 1]
        x3 = pts[b, j, 2] - pts[b, i, 2]
        nrm = sqrt(x1 * x1 + x2 * x2 + x3 * x3)
        x1 /= nrm
        x2 /= nrm
        x3 /= nrm
        if x3 <= 0.0:
            a = 1.0
            c = (x1 + 1j * x2) / (1.0 - x3)
        else:
            a = (x1 - 1j * x2) / (1.0 + x3)
            c = 1.0
    s = sqrt(cabs2(a) + cabs2(c))
    out0[0] = a / s
    out1[0] = c / s


cdef double _min_max_ratio(double[:, :, ::1] pts, Py_ssize_t b, Py_ssize_t n, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef double dmin = INFINITY, dmax = 0.0, acc, t
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                t = pts[b, j, k] - pts[b, i, k]
                acc += t * t
            if acc < dmin:
                dmin = acc
            if acc > dmax:
                dmax = acc
    if dmax == 0.0:
        return 0.0
    return sqrt(dmin / dmax)


cdef void _eval_one(double[:, :, ::1] pts, Py_ssize_t b, Py_ssize_t n, int real,
                    double complex[:, :, ::1] u, double complex[:, ::1] a,
                    double complex[:, ::1] inv, Py_ssize_t[::1] piv,
                    double* log_abs_out, double* arg_out, double* rcond_out) noexcept nogil:
    cdef Py_ssize_t i, j, m, k, p, deg
    cdef double logabs = 0.0, arg = 0.0, best, t, norm_a, norm_inv, colsum
    cdef double complex u0, u1, f, tmp, pair
    cdef int singular = 0

    for i in range(n):
        for j in range(n):
            if i != j:
                _spinor(pts, b, i, j, real, &u[i, j, 0], &u[i, j, 1])

    # column i of a holds v_i
    for i in range(n):
        for m in range(n):
            a[m, i] = 0.0
        a[0, i] = 1.0
        deg = 0
        for j in range(n):
            if j == i:
                continue
            u0 = u[i, j, 0]
            u1 = u[i, j, 1]
            a[deg + 1, i] = u1 * a[deg, i]
            m = deg
            while m >= 1:
                a[m, i] = u0 * a[m, i] + u1 * a[m - 1, i]
                m -= 1
            a[0, i] = u0 * a[0, i]
            deg += 1

    norm_a = 0.0
    for j in range(n):
        colsum = 0.0
        for i in range(n):
            colsum += cabs_(a[i, j])
        if colsum > norm_a:
            norm_a = colsum

    # LU with partial pivoting, in place
    for k in range(n):
        p = k
        best = cabs2(a[k, k])
        for i in range(k + 1, n):
            t = cabs2(a[i, k])
            if t > best:
                best = t
                p = i
        piv[k] = p
        if best == 0.0:
            singular = 1
            break
        if p != k:
            for j in range(n):
                tmp = a[k, j]
                a[k, j] = a[p, j]
                a[p, j] = tmp
            arg += M_PI
        logabs += log(cabs_(a[k, k]))
        arg += carg_(a[k, k])
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            a[i, k] = f
            for j in range(k + 1, n):
                a[i, j] -= f * a[k, j]

    for i in range(n):
        for j in range(i + 1, n):
            pair = u[i, j, 0] * u[j, i, 1] - u[i, j, 1] * u[j, i, 0]
            logabs -= log(cabs_(pair))
            arg -= carg_(pair)

    if singular:
        log_abs_out[0] = -INFINITY
        arg_out[0] = 0.0
        rcond_out[0] = 0.0
        return

    # inverse from the factors, for the 1-norm condition number
    for j in range(n):
        for i in range(n):
            inv[i, j] = 1.0 if i == j else 0.0
    for k in range(n):
        p = piv[k]
        if p != k:
            for j in range(n):
                tmp = inv[k, j]
                inv[k, j] = inv[p, j]
                inv[p, j] = tmp
    for j in range(n):
        for i in range(n):
            for k in range(i):
                inv[i, j] -= a[i, k] * inv[k, j]
        i = n - 1
        while i >= 0:
            for k in range(i + 1, n):
                inv[i, j] -= a[i, k] * inv[k, j]
            inv[i, j] = inv[i, j] / a[i, i]
            i -= 1
    norm_inv = 0.0
    for j in range(n):
        colsum = 0.0
        for i in range(n):
            colsum += cabs_(inv[i, j])
        if colsum > norm_inv:
            norm_inv = colsum

    log_abs_out[0] = logabs
    arg_out[0] = remainder(arg, 2.0 * M_PI)
    rcond_out[0] = 1.0 / (norm_a * norm_inv)


def batch_eval(points, bint real=False, double eps_sep=1e-9):
    """Return ``(log_abs_D, arg_D, rcond)`` arrays for a batch of configurations."""
    cdef double[:, :, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t B = pts.shape[0], n = pts.shape[1], d = pts.shape[2], b
    if n < 2:
        raise ValueError("need at least two points")
    if d != (2 if real else 3):
        raise ValueError(f"points of dim {d} for the {'real' if real else 'complex'} kernel")
    out_np = np.empty((3, B), dtype=np.float64)
    cdef double[:, ::1] out = out_np
    cdef double complex[:, :, ::1] u = np.zeros((n, n, 2), dtype=np.complex128)
    cdef double complex[:, ::1] a = np.zeros((n, n), dtype=np.complex128)
    cdef double complex[:, ::1] inv = np.zeros((n, n), dtype=np.complex128)
    cdef Py_ssize_t[::1] piv = np.zeros(n, dtype=np.intp)
    with nogil:
        for b in range(B):
            if _min_max_ratio(pts, b, n, d) < eps_sep:
                out[0, b] = NAN
                out[1, b] = NAN
                out[2, b] = NAN
                continue
            _eval_one(pts, b, n, real, u, a, inv, piv, &out[0, b], &out[1, b], &out[2, b])
    return out_np[0], out_np[1], out_np[2]
