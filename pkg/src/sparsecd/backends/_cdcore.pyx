# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled coordinate-descent kernels.

Mirrors pycore exactly: same cycling order, same closed-form updates.  The
design matrix must be Fortran-ordered so columns are contiguous.
"""

import numpy as np

from libc.math cimport fabs, sqrt


cdef inline double _sign(double z) noexcept nogil:
    if z > 0.0:
        return 1.0
    if z < 0.0:
        return -1.0
    return 0.0


cdef inline double _min_curvature(double gamma, double lam2, int pen) noexcept nogil:
    # convexity floor of the univariate subproblem (see penalties.min_curvature)
    if pen == 1:
        return 1.0001 / gamma - lam2
    if pen == 2:
        return 1.0001 / (gamma - 1.0) - lam2
    return 0.0


cdef inline double _thresh(double z, double lam1, double gamma, double d,
                           int pen) noexcept nogil:
    # minimizer of (d/2) b^2 - z b + J_{lam1,gamma}(|b|)
    cdef double az = fabs(z)
    if pen == 0:  # lasso
        if az <= lam1:
            return 0.0
        return _sign(z) * (az - lam1) / d
    if pen == 1:  # mcp
        if az <= lam1:
            return 0.0
        if az <= gamma * lam1 * d:
            return _sign(z) * (az - lam1) / (d - 1.0 / gamma)
        return z / d
    # scad
    if az <= lam1 * (1.0 + d):
        if az <= lam1:
            return 0.0
        return _sign(z) * (az - lam1) / d
    if az <= gamma * lam1 * d:
        return _sign(z) * (az - gamma * lam1 / (gamma - 1.0)) / (d - 1.0 / (gamma - 1.0))
    return z / d


def cd_cycle(double[::1, :] X, w, double[::1] rw, double[::1] beta,
             double[::1] v, Py_ssize_t[::1] target, double lam1, double lam2,
             double gamma, int pen):
    """See pycore.cd_cycle."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t nt = target.shape[0]
    cdef bint weighted = w is not None
    cdef double[::1] wv
    cdef double amin = _min_curvature(gamma, lam2, pen)
    cdef double maxdiff = 0.0
    cdef double zj, bj, bnew, diff, vj, a, acc, ad
    cdef Py_ssize_t i, j, t
    if weighted:
        wv = w
        with nogil:
            for t in range(nt):
                j = target[t]
                vj = v[j]
                if vj <= 0.0:
                    continue
                a = vj if vj > amin else amin
                bj = beta[j]
                acc = 0.0
                for i in range(n):
                    acc += X[i, j] * wv[i] * rw[i]
                zj = acc / n + a * bj
                bnew = _thresh(zj, lam1, gamma, a + lam2, pen)
                diff = bnew - bj
                if diff != 0.0:
                    beta[j] = bnew
                    for i in range(n):
                        rw[i] -= diff * X[i, j]
                    ad = fabs(diff)
                    if ad > maxdiff:
                        maxdiff = ad
    else:
        with nogil:
            for t in range(nt):
                j = target[t]
                vj = v[j]
                if vj <= 0.0:
                    continue
                a = vj if vj > amin else amin
                bj = beta[j]
                acc = 0.0
                for i in range(n):
                    acc += X[i, j] * rw[i]
                zj = acc / n + a * bj
                bnew = _thresh(zj, lam1, gamma, a + lam2, pen)
                diff = bnew - bj
                if diff != 0.0:
                    beta[j] = bnew
                    for i in range(n):
                        rw[i] -= diff * X[i, j]
                    ad = fabs(diff)
                    if ad > maxdiff:
                        maxdiff = ad
    return maxdiff


def group_cycle(double[::1, :] X, w, double[::1] rw, double[::1] beta,
                Py_ssize_t[::1] starts, Py_ssize_t[::1] ends,
                Py_ssize_t[::1] target, double[::1] mult, double v,
                double lam1, double gamma, int pen):
    """See pycore.group_cycle."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t nt = target.shape[0]
    cdef Py_ssize_t ng = starts.shape[0]
    cdef bint weighted = w is not None
    cdef double[::1] wv
    cdef Py_ssize_t maxpg = 1
    cdef Py_ssize_t g, lo, hi, i, j, k, tg
    for g in range(ng):
        if ends[g] - starts[g] > maxpg:
            maxpg = ends[g] - starts[g]
    zbuf = np.empty(maxpg, dtype=np.float64)
    cdef double[::1] z = zbuf
    cdef double amin = _min_curvature(gamma, 0.0, pen)
    cdef double a = v if v > amin else amin
    cdef double maxdiff = 0.0
    cdef double acc, tnorm, tnew, scale, diff, ad
    if weighted:
        wv = w
    with nogil:
        for tg in range(nt):
            g = target[tg]
            lo = starts[g]
            hi = ends[g]
            tnorm = 0.0
            for k in range(hi - lo):
                j = lo + k
                acc = 0.0
                if weighted:
                    for i in range(n):
                        acc += X[i, j] * wv[i] * rw[i]
                else:
                    for i in range(n):
                        acc += X[i, j] * rw[i]
                z[k] = acc / n + a * beta[j]
                tnorm += z[k] * z[k]
            tnorm = sqrt(tnorm)
            if tnorm > 0.0:
                tnew = _thresh(tnorm, lam1 * mult[g], gamma, a, pen)
                scale = tnew / tnorm
            else:
                scale = 0.0
            for k in range(hi - lo):
                j = lo + k
                diff = scale * z[k] - beta[j]
                if diff != 0.0:
                    beta[j] = scale * z[k]
                    for i in range(n):
                        rw[i] -= diff * X[i, j]
                    ad = fabs(diff)
                    if ad > maxdiff:
                        maxdiff = ad
    return maxdiff
