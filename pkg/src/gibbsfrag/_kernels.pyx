# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Zolotarev-window quadrature for the Mittag-Leffler law and
the sequential Gibbs partition sampler.  ``_kernels_py`` mirrors every routine."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, exp, sin, fmax, M_PI

cnp.import_array()

cdef int BISECT_STEPS = 30


cdef inline double _log_a(double a, double u) noexcept nogil:
    return (a * log(sin(a * u)) + (1.0 - a) * log(sin((1.0 - a) * u)) - log(sin(u))) / (1.0 - a)


cdef inline double _u_at(double a, double v, double la0) noexcept nogil:
    # inverse of the increasing map u -> log A(u) on (0, pi)
    cdef double lo = 0.0, hi = M_PI, mid
    cdef int it
    if v <= la0:
        return 0.0
    for it in range(BISECT_STEPS):
        mid = 0.5 * (lo + hi)
        if _log_a(a, mid) < v:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


cdef inline double _logaddexp(double x, double y) noexcept nogil:
    cdef double m = fmax(x, y)
    return m + log(exp(x - m) + exp(y - m))


cdef void _edges(double a, double logc, double la0, double* e) noexcept nogil:
    cdef double vs = -logc
    e[0] = _u_at(a, vs - 45.0, la0)
    e[1] = _u_at(a, vs - 4.0, la0)
    e[2] = _u_at(a, vs, la0)
    e[3] = _u_at(a, fmax(vs + 5.0, _logaddexp(la0, log(40.0) - logc)), la0)


def ml_pdf_zolo(double alpha, const double[::1] s, const double[::1] x, const double[::1] w):
    cdef Py_ssize_t n = s.shape[0], nq = x.shape[0], i, p, q
    cdef double la0 = (alpha * log(alpha) + (1.0 - alpha) * log(1.0 - alpha)) / (1.0 - alpha)
    cdef double e[4]
    cdef double logc, tot, half, mid, u, la
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            logc = log(s[i]) / (1.0 - alpha)
            _edges(alpha, logc, la0, e)
            tot = 0.0
            for p in range(3):
                half = 0.5 * (e[p + 1] - e[p])
                mid = 0.5 * (e[p + 1] + e[p])
                if half <= 0.0:
                    continue
                for q in range(nq):
                    u = mid + half * x[q]
                    la = _log_a(alpha, u)
                    tot += w[q] * half * exp(la - exp(la + logc))
            o[i] = exp(alpha * logc) / (M_PI * (1.0 - alpha)) * tot
    return out


def ml_sf_zolo(double alpha, const double[::1] s, const double[::1] x, const double[::1] w):
    cdef Py_ssize_t n = s.shape[0], nq = x.shape[0], i, p, q
    cdef double la0 = (alpha * log(alpha) + (1.0 - alpha) * log(1.0 - alpha)) / (1.0 - alpha)
    cdef double e[4]
    cdef double logc, tot, half, mid, u, la
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            logc = log(s[i]) / (1.0 - alpha)
            _edges(alpha, logc, la0, e)
            e[0] = 0.0
            tot = 0.0
            for p in range(3):
                half = 0.5 * (e[p + 1] - e[p])
                mid = 0.5 * (e[p + 1] + e[p])
                if half <= 0.0:
                    continue
                for q in range(nq):
                    u = mid + half * x[q]
                    la = _log_a(alpha, u)
                    tot += w[q] * half * exp(-exp(la + logc))
            o[i] = tot / M_PI
    return out


def gibbs_sample(const double[:, :, ::1] V, double alpha, const cnp.int64_t[::1] table_idx,
                 const cnp.int64_t[:, ::1] groups, const double[:, ::1] unif):
    """Sequential seating driven by pre-drawn uniforms.

    ``V[d, m, j]`` is the Gibbs weight for m seated items in j blocks (any
    positive row scaling is harmless).  Items sharing a ``groups`` label seat
    in their own restaurant; labels come out in least-element order.
    """
    cdef Py_ssize_t B = unif.shape[0], n = unif.shape[1]
    cdef Py_ssize_t gstride = 1 if groups.shape[0] > 1 else 0
    cdef Py_ssize_t tstride = 1 if table_idx.shape[0] > 1 else 0
    labels = np.empty((B, n), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] lab = labels
    cdef cnp.int64_t[::1] size = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] bgrp = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] gm = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[::1] gk = np.zeros(n, dtype=np.int64)
    cdef Py_ssize_t b, i, l, nb, g, m, j, d, pick
    cdef double wj, wn, cum, total, target
    with nogil:
        for b in range(B):
            d = table_idx[b * tstride]
            for i in range(n):
                gm[i] = 0
                gk[i] = 0
            nb = 0
            for i in range(n):
                g = groups[b * gstride, i]
                m = gm[g]
                j = gk[g]
                pick = nb
                if m > 0:
                    wj = V[d, m + 1, j]
                    wn = V[d, m + 1, j + 1]
                    cum = 0.0
                    for l in range(nb):
                        if bgrp[l] == g:
                            cum = cum + (size[l] - alpha) * wj
                    total = cum + wn
                    target = unif[b, i] * total
                    cum = 0.0
                    for l in range(nb):
                        if bgrp[l] == g:
                            cum = cum + (size[l] - alpha) * wj
                            if target < cum:
                                pick = l
                                break
                if pick == nb:
                    size[nb] = 1
                    bgrp[nb] = g
                    nb += 1
                    gk[g] = j + 1
                else:
                    size[pick] += 1
                gm[g] = m + 1
                lab[b, i] = pick
    return labels
