# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-cell kernels.  Semantics are documented in ``_core_py``."""
import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport malloc, free, qsort
from libc.math cimport sqrt, cos, sin, fabs, floor, NAN, M_PI

cnp.import_array()

BACKEND = "compiled"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t SEED_SALT = 0x632BE59BD9B4E019ULL
cdef double INV53 = 1.0 / 9007199254740992.0


cdef struct KeyIdx:
    uint64_t key
    int64_t idx


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t step_key(uint64_t seed, uint64_t step) noexcept nogil:
    cdef uint64_t k = mix64(seed * GOLDEN + SEED_SALT)
    return mix64(k ^ ((step + 1) * GOLDEN))


cdef inline uint64_t cell_key(uint64_t skey, uint64_t cell) noexcept nogil:
    return mix64(skey ^ ((cell + 1) * GOLDEN))


cdef inline uint64_t bits(uint64_t ckey, uint64_t counter) noexcept nogil:
    return mix64(ckey + (counter + 1) * GOLDEN)


cdef inline double uniform(uint64_t ckey, uint64_t counter) noexcept nogil:
    return <double>(bits(ckey, counter) >> 11) * INV53


cdef int cmp_key(const void* a, const void* b) noexcept nogil:
    cdef uint64_t ka = (<KeyIdx*>a).key
    cdef uint64_t kb = (<KeyIdx*>b).key
    return (ka > kb) - (ka < kb)


cdef void collide_one(double[:, ::1] vel, const int64_t[::1] order, int64_t start,
                      int64_t n, uint64_t ckey, double p_accept, int d,
                      int64_t* acc, double* mdp, double* mde) noexcept nogil:
    cdef KeyIdx* buf
    cdef int64_t s, q, i, j
    cdef int a
    cdef uint64_t base
    cdef double vi[3]
    cdef double vj[3]
    cdef double e[3]
    cdef double ni[3]
    cdef double nj[3]
    cdef double gm, g, half, ct, st, phi, p_scale, e_scale, dp, de, si, sj, tmp
    if n < 2:
        return
    buf = <KeyIdx*>malloc(n * sizeof(KeyIdx))
    for s in range(n):
        buf[s].key = bits(ckey, <uint64_t>s)
        buf[s].idx = order[start + s]
    qsort(buf, n, sizeof(KeyIdx), cmp_key)
    for q in range(n // 2):
        base = <uint64_t>(n + 3 * q)
        if not uniform(ckey, base) < p_accept:
            continue
        i = buf[2 * q].idx
        j = buf[2 * q + 1].idx
        for a in range(d):
            vi[a] = vel[i, a]
            vj[a] = vel[j, a]
        if d == 1:
            ni[0] = vj[0]
            nj[0] = vi[0]
        else:
            gm = 0.0
            for a in range(d):
                g = vi[a] - vj[a]
                gm = gm + g * g
            gm = sqrt(gm)
            if d == 2:
                phi = 2.0 * M_PI * uniform(ckey, base + 1)
                e[0] = cos(phi)
                e[1] = sin(phi)
            else:
                ct = 2.0 * uniform(ckey, base + 1) - 1.0
                tmp = 1.0 - ct * ct
                st = sqrt(tmp if tmp > 0.0 else 0.0)
                phi = 2.0 * M_PI * uniform(ckey, base + 2)
                e[0] = st * cos(phi)
                e[1] = st * sin(phi)
                e[2] = ct
            for a in range(d):
                half = (0.5 * gm) * e[a]
                tmp = 0.5 * (vi[a] + vj[a])
                ni[a] = tmp + half
                nj[a] = tmp - half
        si = 0.0
        sj = 0.0
        dp = 0.0
        de = 0.0
        for a in range(d):
            si = si + vi[a] * vi[a]
            sj = sj + vj[a] * vj[a]
        p_scale = sqrt(si) + sqrt(sj)
        e_scale = si + sj
        si = 0.0
        sj = 0.0
        for a in range(d):
            tmp = ni[a] + nj[a] - vi[a] - vj[a]
            dp = dp + tmp * tmp
            si = si + ni[a] * ni[a]
            sj = sj + nj[a] * nj[a]
        dp = sqrt(dp) / (p_scale if p_scale > 0.0 else 1.0)
        de = fabs(si + sj - e_scale) / (e_scale if e_scale > 0.0 else 1.0)
        for a in range(d):
            vel[i, a] = ni[a]
            vel[j, a] = nj[a]
        acc[0] += 1
        if dp > mdp[0]:
            mdp[0] = dp
        if de > mde[0]:
            mde[0] = de
    free(buf)


def collide_cells(double[:, ::1] vel, order, starts, seed, step, double p_accept,
                  int nthreads=0):
    cdef const int64_t[::1] order_v = np.ascontiguousarray(order, dtype=np.int64)
    cdef const int64_t[::1] starts_v = np.ascontiguousarray(starts, dtype=np.int64)
    cdef Py_ssize_t ncell = starts_v.shape[0] - 1
    cdef int d = vel.shape[1]
    cdef uint64_t skey = step_key(<uint64_t>seed, <uint64_t>step)
    accepted = np.zeros(ncell, dtype=np.int64)
    max_dp = np.zeros(ncell)
    max_de = np.zeros(ncell)
    cdef int64_t[::1] acc_v = accepted
    cdef double[::1] dp_v = max_dp
    cdef double[::1] de_v = max_de
    cdef Py_ssize_t c
    if d < 1 or d > 3:
        raise ValueError("velocity dimension must be 1, 2 or 3")
    if nthreads <= 0:
        for c in prange(ncell, nogil=True, schedule="dynamic"):
            collide_one(vel, order_v, starts_v[c], starts_v[c + 1] - starts_v[c],
                        cell_key(skey, <uint64_t>c), p_accept, d,
                        &acc_v[c], &dp_v[c], &de_v[c])
    else:
        for c in prange(ncell, nogil=True, schedule="dynamic", num_threads=nthreads):
            collide_one(vel, order_v, starts_v[c], starts_v[c + 1] - starts_v[c],
                        cell_key(skey, <uint64_t>c), p_accept, d,
                        &acc_v[c], &dp_v[c], &de_v[c])
    return accepted, max_dp, max_de


cdef void moments_one(const double[:, ::1] vel, const int64_t[::1] order, int64_t start,
                      int64_t n, double* mean, double* m2, double* m3, int d) noexcept nogil:
    cdef int64_t s, idx
    cdef int a, b
    cdef double c[3]
    cdef double c2
    if n == 0:
        for a in range(d):
            mean[a] = NAN
            m3[a] = NAN
            for b in range(d):
                m2[a * d + b] = NAN
        return
    for a in range(d):
        mean[a] = 0.0
        m3[a] = 0.0
        for b in range(d):
            m2[a * d + b] = 0.0
    for s in range(n):
        idx = order[start + s]
        for a in range(d):
            mean[a] = mean[a] + vel[idx, a]
    for a in range(d):
        mean[a] = mean[a] / n
    for s in range(n):
        idx = order[start + s]
        c2 = 0.0
        for a in range(d):
            c[a] = vel[idx, a] - mean[a]
            c2 = c2 + c[a] * c[a]
        for a in range(d):
            for b in range(a, d):
                m2[a * d + b] = m2[a * d + b] + c[a] * c[b]
            m3[a] = m3[a] + c2 * c[a]
    for a in range(d):
        for b in range(a, d):
            m2[a * d + b] = m2[a * d + b] / n
            m2[b * d + a] = m2[a * d + b]
        m3[a] = m3[a] / n


def deposit_moments(double[:, ::1] vel, order, starts, int nthreads=0):
    cdef const int64_t[::1] order_v = np.ascontiguousarray(order, dtype=np.int64)
    cdef const int64_t[::1] starts_v = np.ascontiguousarray(starts, dtype=np.int64)
    cdef Py_ssize_t ncell = starts_v.shape[0] - 1
    cdef int d = vel.shape[1]
    mean = np.empty((ncell, d))
    m2 = np.empty((ncell, d, d))
    m3 = np.empty((ncell, d))
    cdef double[:, ::1] mean_v = mean
    cdef double[:, :, ::1] m2_v = m2
    cdef double[:, ::1] m3_v = m3
    cdef Py_ssize_t c
    if nthreads <= 0:
        for c in prange(ncell, nogil=True, schedule="static"):
            moments_one(vel, order_v, starts_v[c], starts_v[c + 1] - starts_v[c],
                        &mean_v[c, 0], &m2_v[c, 0, 0], &m3_v[c, 0], d)
    else:
        for c in prange(ncell, nogil=True, schedule="static", num_threads=nthreads):
            moments_one(vel, order_v, starts_v[c], starts_v[c + 1] - starts_v[c],
                        &mean_v[c, 0], &m2_v[c, 0, 0], &m3_v[c, 0], d)
    counts = np.diff(np.asarray(starts_v)).astype(np.int64)
    return counts, mean, m2, m3


def bin_cells(const double[:, ::1] positions, box, cells):
    cdef Py_ssize_t n = positions.shape[0]
    cdef int d = positions.shape[1]
    cdef double[::1] L = np.ascontiguousarray(box, dtype=np.float64)
    cdef int64_t[::1] C = np.ascontiguousarray(cells, dtype=np.int64)
    cdef int64_t ncell = 1
    cdef int a
    cdef Py_ssize_t i
    cdef int64_t k, flat
    for a in range(d):
        ncell *= C[a]
    order = np.empty(n, dtype=np.int64)
    starts = np.zeros(ncell + 1, dtype=np.int64)
    cdef int64_t[::1] order_v = order
    cdef int64_t[::1] starts_v = starts
    cdef int64_t[::1] flat_v = np.empty(n, dtype=np.int64)
    cdef int64_t[::1] fill = np.empty(ncell, dtype=np.int64)
    with nogil:
        for i in range(n):
            flat = 0
            for a in range(d):
                k = <int64_t>floor(positions[i, a] / L[a] * C[a])
                if k < 0:
                    k = 0
                elif k > C[a] - 1:
                    k = C[a] - 1
                flat = flat * C[a] + k
            flat_v[i] = flat
            starts_v[flat + 1] += 1
        for k in range(ncell):
            starts_v[k + 1] += starts_v[k]
            fill[k] = starts_v[k]
        for i in range(n):
            order_v[fill[flat_v[i]]] = i
            fill[flat_v[i]] += 1
    return order, starts


def wrap_inplace(double[:, ::1] positions, box):
    cdef double[::1] L = np.ascontiguousarray(box, dtype=np.float64)
    cdef Py_ssize_t i
    cdef int a
    cdef int d = positions.shape[1]
    cdef double x
    with nogil:
        for i in range(positions.shape[0]):
            for a in range(d):
                x = positions[i, a] - L[a] * floor(positions[i, a] / L[a])
                if x >= L[a]:
                    x = x - L[a]
                positions[i, a] = x
    return np.asarray(positions)
