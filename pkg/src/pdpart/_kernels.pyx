# cython: language_level=3
"""Compiled hot loops: the sequential partition sampler and the K_n law DP.

Both functions mirror ``_fallback`` exactly.  The sampler draws its
uniforms straight from a numpy BitGenerator through the C capsule, in the
same order as the pure-Python version, so the two produce identical paths.
"""
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from libc.math cimport exp, log, log1p, INFINITY
from libc.stdint cimport int32_t, int64_t
from libc.stdlib cimport free, malloc

import numpy as np
cimport numpy as cnp
from numpy.random cimport bitgen_t

cnp.import_array()

cdef const char *_CAPSULE_NAME = "BitGenerator"


cdef bitgen_t *_get_bitgen(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    if not PyCapsule_IsValid(capsule, _CAPSULE_NAME):
        raise ValueError("not a numpy BitGenerator")
    return <bitgen_t *> PyCapsule_GetPointer(capsule, _CAPSULE_NAME)


def crp_path(object bit_generator, double alpha, double theta,
             cnp.int64_t[::1] checkpoints, int l_max):
    """Run one trajectory and record (K_n, M_{1..l_max,n}) at each checkpoint."""
    cdef Py_ssize_t n_check = checkpoints.shape[0]
    cdef int64_t n_max = checkpoints[n_check - 1]
    out_k = np.zeros(n_check, dtype=np.int64)
    out_m = np.zeros((n_check, l_max), dtype=np.int64)
    cdef cnp.int64_t[::1] ok = out_k
    cdef cnp.int64_t[:, ::1] om = out_m
    cdef bitgen_t *rng = _get_bitgen(bit_generator)

    cdef int32_t *label = <int32_t *> malloc(max(n_max, 1) * sizeof(int32_t))
    cdef int32_t *bsize = <int32_t *> malloc(max(n_max, 1) * sizeof(int32_t))
    cdef int64_t *mult = <int64_t *> malloc((l_max + 2) * sizeof(int64_t))
    if label == NULL or bsize == NULL or mult == NULL:
        free(label); free(bsize); free(mult)
        raise MemoryError()

    cdef int64_t n = 0, k = 0, idx = 0, i, s, b
    cdef Py_ssize_t c = 0
    cdef double u
    for i in range(l_max + 2):
        mult[i] = 0

    with bit_generator.lock:
        with nogil:
            while c < n_check:
                while n < checkpoints[c]:
                    if n == 0:
                        b = k
                        k += 1
                        bsize[b] = 0
                    else:
                        u = rng.next_double(rng.state)
                        if u * (theta + n) < theta + k * alpha:
                            b = k
                            k += 1
                            bsize[b] = 0
                        else:
                            while True:
                                idx = <int64_t> (rng.next_double(rng.state) * n)
                                b = label[idx]
                                s = bsize[b]
                                if rng.next_double(rng.state) * s < s - alpha:
                                    break
                    s = bsize[b]
                    if 1 <= s <= l_max:
                        mult[s] -= 1
                    if s + 1 <= l_max:
                        mult[s + 1] += 1
                    bsize[b] = s + 1
                    label[n] = <int32_t> b
                    n += 1
                ok[c] = k
                for i in range(l_max):
                    om[c, i] = mult[i + 1]
                c += 1

    free(label)
    free(bsize)
    free(mult)
    return out_k, out_m


cdef inline double _logaddexp(double a, double b) noexcept nogil:
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def law_kn_logprob(double alpha, double theta, Py_ssize_t n):
    """log P(K_n = k) for k = 0..n via the one-step predictive recursion."""
    lp_arr = np.full(n + 1, -np.inf)
    cdef double[::1] lp = lp_arr
    cdef Py_ssize_t m, kk
    cdef double denom, stay, move
    lp[1] = 0.0
    with nogil:
        for m in range(1, n):
            denom = log(theta + m)
            # descending k so lp[kk - 1] still holds the step-m value
            for kk in range(m + 1, 0, -1):
                if kk <= m and m - kk * alpha > 0:
                    stay = lp[kk] + log(m - kk * alpha) - denom
                else:
                    stay = -INFINITY
                if kk >= 2:
                    move = lp[kk - 1] + log(theta + (kk - 1) * alpha) - denom
                else:
                    move = -INFINITY
                lp[kk] = _logaddexp(stay, move)
    return lp_arr
