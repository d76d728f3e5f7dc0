# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. Semantics match ``_kernels_py`` exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def value_iteration(const long long[::1] sa_start, const long long[::1] tr_start,
                    const long long[::1] tr_succ, const double[::1] tr_prob,
                    const double[::1] tr_rew, const unsigned char[::1] active,
                    double gamma, double tol, long long max_iter):
    cdef Py_ssize_t n = sa_start.shape[0] - 1
    cdef double[::1] v = np.zeros(n)
    cdef double[::1] new = np.zeros(n)
    cdef double stop = tol * (1.0 - gamma) / gamma
    cdef double best, q, delta, cont
    cdef Py_ssize_t s, sa, j, s2
    cdef long long it
    for it in range(1, max_iter + 1):
        delta = 0.0
        for s in range(n):
            if not active[s]:
                new[s] = 0.0
                continue
            best = -1e308
            for sa in range(sa_start[s], sa_start[s + 1]):
                q = 0.0
                for j in range(tr_start[sa], tr_start[sa + 1]):
                    s2 = tr_succ[j]
                    cont = v[s2] if active[s2] else 0.0
                    q += tr_prob[j] * (tr_rew[j] + gamma * cont)
                if q > best:
                    best = q
            new[s] = best
        for s in range(n):
            if fabs(new[s] - v[s]) > delta:
                delta = fabs(new[s] - v[s])
            v[s] = new[s]
        if delta <= stop:
            return np.asarray(v), it
    return np.asarray(v), max_iter


cdef inline Py_ssize_t _pick(const double[:, ::1] cdf, Py_ssize_t row, double u, Py_ssize_t last) nogil:
    # first column with cdf > u, never beyond the last positive-probability column
    cdef Py_ssize_t c = 0
    while c < last and cdf[row, c] <= u:
        c += 1
    return c


def simulate_block(const double[:, ::1] pol_cdf, const long long[::1] pol_last,
                   const long long[::1] sa_start, const double[:, ::1] tr_cdf,
                   const long long[::1] tr_last, const long long[::1] tr_start,
                   const long long[::1] tr_succ, const double[::1] tr_cost,
                   const long long[::1] switch_to, const long long[::1] w_index,
                   double gamma, const double[:, ::1] uniforms, long long t0,
                   long long[::1] v, long long[::1] k, double[::1] disc,
                   long long[::1] switch, double[::1] reach, double[::1] cost,
                   long long[:, ::1] visits):
    cdef Py_ssize_t n = sa_start.shape[0] - 1
    cdef Py_ssize_t n_traces = uniforms.shape[0]
    cdef Py_ssize_t steps = uniforms.shape[1] // 2
    cdef Py_ssize_t i, t, s, s2, sa, j, prow
    with nogil:
        for i in range(n_traces):
            s = v[i]
            for t in range(steps):
                if switch[i] < 0 and switch_to[s] >= 0:
                    switch[i] = t0 + t
                    k[i] = switch_to[s]
                    if t0 + t == 0:
                        reach[i] = 1.0
                if switch[i] >= 0 and w_index[s] >= 0:
                    visits[i, w_index[s]] += 1
                prow = k[i] * n + s
                sa = sa_start[s] + _pick(pol_cdf, prow, uniforms[i, 2 * t], pol_last[prow])
                j = tr_start[sa] + _pick(tr_cdf, sa, uniforms[i, 2 * t + 1], tr_last[sa])
                s2 = tr_succ[j]
                cost[i] += disc[i] * tr_cost[j]
                if switch[i] < 0 and switch_to[s2] >= 0:
                    reach[i] += disc[i]
                disc[i] *= gamma
                s = s2
            v[i] = s
