# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Gray-code ground-state enumeration and path-integral sweeps.

Every function here has a line-for-line twin in ``_pycore.py``.  Both share the
splitmix64 stream, the sweep order and the floating point expression order, so
the two backends produce identical results for identical inputs.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, INFINITY
from libc.stdint cimport uint64_t, int64_t, int32_t, int8_t
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil
    int __builtin_ctzll(unsigned long long) nogil

BACKEND = "cython"


cdef inline uint64_t _splitmix(uint64_t *state) noexcept nogil:
    cdef uint64_t z
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t *state) noexcept nogil:
    return (_splitmix(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline int _popcount(uint64_t x) noexcept nogil:
    return __builtin_popcountll(x)


cdef inline int _ctz(uint64_t x) noexcept nogil:
    return __builtin_ctzll(x)


def uniform_stream(uint64_t state, Py_ssize_t count):
    """Return ``(values, new_state)`` drawn from the shared splitmix64 stream."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(count, dtype=np.float64)
    cdef Py_ssize_t i
    for i in range(count):
        out[i] = _uniform(&state)
    return out, state


def gray_enumerate(uint64_t[::1] sq_mask, uint64_t[::1] dm_mask,
                   int n_square, int n_dimer,
                   double j1=0.0, double j2=0.0, double hz=0.0,
                   bint collect=False, double tol=1e-9,
                   Py_ssize_t cap=1 << 22):
    """Enumerate all 2**n spin states in Gray-code order.

    Returns ``(hist, emin, configs)``.  ``hist[a, b, c]`` counts states with
    square-bond sum ``2a - n_square``, dimer-bond sum ``2b - n_dimer`` and
    magnetization ``2c - n``.  When ``collect`` is set, ``configs`` holds the
    bit patterns (bit i set means spin i up) of every state whose energy
    ``j1*S1 + j2*S2 + hz*M`` lies within ``tol`` of the minimum.

    The top spin is pinned down; its global flip partner is accounted for by
    mirroring, which halves the work.
    """
    cdef int n = sq_mask.shape[0]
    if n < 1 or n > 63:
        raise ValueError("gray_enumerate supports 1..63 spins")
    cdef int n_free = n - 1
    cdef cnp.ndarray[cnp.int64_t, ndim=3] hist_arr = np.zeros(
        (n_square + 1, n_dimer + 1, n + 1), dtype=np.int64)
    cdef int64_t *hist = <int64_t *>cnp.PyArray_DATA(hist_arr)
    # flat index of (s1, s2, m); a +-2 change in s1 moves it by +-stride_a
    cdef Py_ssize_t stride_b = n + 1
    cdef Py_ssize_t stride_a = (n_dimer + 1) * stride_b
    cdef Py_ssize_t idx
    cdef uint64_t cfg = 0
    cdef int s1 = n_square, s2 = n_dimer, m = -n
    cdef uint64_t step, total = (<uint64_t>1) << n_free
    cdef int i, sigma, nb_sq, nb_dm
    cdef int[64] deg_sq
    cdef int[64] deg_dm
    cdef double e, emin = INFINITY
    cdef Py_ssize_t count = 0, capacity = 1024
    cdef uint64_t *buf = NULL
    cdef uint64_t full = ((<uint64_t>1) << n) - 1
    cdef double etol = tol
    cdef bint overflow = False
    for i in range(n):
        deg_sq[i] = _popcount(sq_mask[i])
        deg_dm[i] = _popcount(dm_mask[i])
    if collect:
        buf = <uint64_t *>malloc(capacity * sizeof(uint64_t))
        if buf == NULL:
            raise MemoryError()
    idx = n_square * stride_a + n_dimer * stride_b
    try:
        with nogil:
            step = 0
            while True:
                hist[idx] += 1
                if collect:
                    # the state and its global flip
                    e = j1 * s1 + j2 * s2 + hz * m
                    if e < emin - etol:
                        emin = e
                        count = 0
                    if e <= emin + etol:
                        if count == capacity:
                            if capacity >= cap:
                                overflow = True
                                break
                            capacity = capacity * 2
                            buf = <uint64_t *>realloc(buf, capacity * sizeof(uint64_t))
                            if buf == NULL:
                                break
                        buf[count] = cfg
                        count += 1
                    e = j1 * s1 + j2 * s2 - hz * m
                    if e < emin - etol:
                        emin = e
                        count = 0
                    if e <= emin + etol:
                        if count == capacity:
                            if capacity >= cap:
                                overflow = True
                                break
                            capacity = capacity * 2
                            buf = <uint64_t *>realloc(buf, capacity * sizeof(uint64_t))
                            if buf == NULL:
                                break
                        buf[count] = cfg ^ full
                        count += 1
                step += 1
                if step >= total:
                    break
                i = _ctz(step)
                sigma = 1 if (cfg >> i) & 1 else -1
                nb_sq = 2 * _popcount(cfg & sq_mask[i]) - deg_sq[i]
                nb_dm = 2 * _popcount(cfg & dm_mask[i]) - deg_dm[i]
                s1 -= 2 * sigma * nb_sq
                s2 -= 2 * sigma * nb_dm
                m -= 2 * sigma
                idx -= sigma * (nb_sq * stride_a + nb_dm * stride_b + 1)
                cfg ^= (<uint64_t>1) << i
        if collect and buf == NULL:
            raise MemoryError("ground-state buffer allocation failed")
        if overflow:
            raise OverflowError(f"more than {cap} degenerate ground states")
        configs = np.empty(count if collect else 0, dtype=np.uint64)
        for i in range(count if collect else 0):
            configs[i] = buf[i]
    finally:
        if buf != NULL:
            free(buf)
    # add the globally flipped half: (s1, s2, m) -> (s1, s2, -m)
    hist_arr += hist_arr[:, :, ::-1].copy()
    return hist_arr, (emin if collect else float("nan")), configs


def pimc_sweeps(int8_t[:, ::1] spins, double[::1] h,
                int32_t[::1] indptr, int32_t[::1] indices, double[::1] weights,
                double[::1] beta_eff, double[::1] kperp,
                uint64_t rng_state, bint cluster=True):
    """Run ``len(beta_eff)`` path-integral sweeps in place; return the RNG state.

    ``spins`` has shape (slices, n).  Sweep ``t`` uses intra-slice inverse
    temperature ``beta_eff[t]`` (B/(M T)) and imaginary-time coupling
    ``kperp[t]`` (J_perp/T, may be +inf).  A sweep is n Metropolis attempts
    per slice at uniformly drawn sites, then n imaginary-time Wolff clusters
    at drawn sites.  Random site selection keeps the chain aperiodic when
    zero-cost flips are accepted with certainty.
    """
    cdef Py_ssize_t M = spins.shape[0], n = spins.shape[1]
    cdef Py_ssize_t nsweep = beta_eff.shape[0]
    cdef Py_ssize_t t, k, i, p, kp, kn, k0, size, kk, j, r
    cdef double be, K, local, de, ds, padd, u, tterm
    cdef int sigma, s0, grow
    cdef uint64_t state = rng_state
    if kperp.shape[0] != nsweep:
        raise ValueError("beta_eff and kperp must have equal length")
    cdef int32_t *members = <int32_t *>malloc(M * sizeof(int32_t))
    if members == NULL:
        raise MemoryError()
    try:
        with nogil:
            for t in range(nsweep):
                be = beta_eff[t]
                K = kperp[t]
                for k in range(M):
                    kp = k - 1 if k > 0 else M - 1
                    kn = k + 1 if k < M - 1 else 0
                    for r in range(n):
                        i = <Py_ssize_t>(_uniform(&state) * n)
                        if i >= n:
                            i = n - 1
                        sigma = spins[k, i]
                        local = h[i]
                        for p in range(indptr[i], indptr[i + 1]):
                            local = local + weights[p] * spins[k, indices[p]]
                        de = -2.0 * sigma * local
                        ds = be * de
                        if M > 1:
                            tterm = sigma * (spins[kp, i] + spins[kn, i])
                            if tterm != 0.0:
                                ds = ds + 2.0 * K * tterm
                        if ds <= 0.0:
                            spins[k, i] = -sigma
                        else:
                            u = _uniform(&state)
                            if u < exp(-ds):
                                spins[k, i] = -sigma
                if cluster and M > 1:
                    padd = 1.0 - exp(-2.0 * K)
                    for r in range(n):
                        i = <Py_ssize_t>(_uniform(&state) * n)
                        if i >= n:
                            i = n - 1
                        k0 = <Py_ssize_t>(_uniform(&state) * M)
                        if k0 >= M:
                            k0 = M - 1
                        s0 = spins[k0, i]
                        members[0] = <int32_t>k0
                        size = 1
                        kk = k0
                        grow = 1
                        while grow and size < M:
                            kk = kk + 1 if kk < M - 1 else 0
                            if spins[kk, i] != s0:
                                break
                            if padd < 1.0:
                                if _uniform(&state) >= padd:
                                    break
                            members[size] = <int32_t>kk
                            size += 1
                        kk = k0
                        while size < M:
                            kk = kk - 1 if kk > 0 else M - 1
                            if spins[kk, i] != s0:
                                break
                            if padd < 1.0:
                                if _uniform(&state) >= padd:
                                    break
                            members[size] = <int32_t>kk
                            size += 1
                        ds = 0.0
                        for j in range(size):
                            k = members[j]
                            local = h[i]
                            for p in range(indptr[i], indptr[i + 1]):
                                local = local + weights[p] * spins[k, indices[p]]
                            ds = ds + be * (-2.0 * s0 * local)
                        if ds <= 0.0:
                            for j in range(size):
                                spins[members[j], i] = -s0
                        else:
                            u = _uniform(&state)
                            if u < exp(-ds):
                                for j in range(size):
                                    spins[members[j], i] = -s0
    finally:
        free(members)
    return state


cdef double[65][65] _BINOM


cdef void _init_binom() noexcept nogil:
    cdef int a, b
    for a in range(65):
        for b in range(65):
            _BINOM[a][b] = 0.0
        _BINOM[a][0] = 1.0
        for b in range(1, a + 1):
            _BINOM[a][b] = _BINOM[a - 1][b - 1] + _BINOM[a - 1][b]


_init_binom()


def conditioned_sectors(int n_enum, double[::1] h, int32_t[::1] indptr,
                        int32_t[::1] indices, double[::1] weights,
                        bint pin_last=False, double tol=1e-9):
    """Minimum energy and its degeneracy in every magnetization sector.

    Spins ``0..n_enum-1`` are enumerated in Gray-code order with incremental
    local-field updates; the remaining spins must form an independent set, so
    given the enumerated ones each is decided separately.  For ``k`` free spins
    up, the optimum takes the ``k`` smallest local fields; ties are counted
    with binomial coefficients.

    Returns ``(emin, count)`` indexed by ``(M + n) // 2``.  With ``pin_last``
    the last enumerated spin is held down (valid when ``h`` is zero; the caller
    mirrors the result).
    """
    cdef int n = h.shape[0]
    cdef int n_free = n - n_enum
    cdef int n_gray = n_enum - 1 if pin_last else n_enum
    if n_enum < 1 or n_free < 0 or n_gray > 62:
        raise ValueError("bad enumeration split")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] emin_arr = np.full(n + 1, np.inf)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] count_arr = np.zeros(n + 1)
    cdef double[::1] emin = emin_arr
    cdef double[::1] count = count_arr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] field_arr = np.zeros(n)
    cdef double[::1] field = field_arr
    cdef cnp.ndarray[cnp.int8_t, ndim=1] spin_arr = -np.ones(n, dtype=np.int8)
    cdef int8_t[::1] spin = spin_arr
    cdef double[64] fs
    cdef double[65] prefix
    cdef int i, j, p, k, m_enum, lo, t, r, mm
    cdef double e_enum = 0.0, fsum, v, tmp, e, ways
    cdef uint64_t step, total = (<uint64_t>1) << n_gray
    # initial state: every enumerated spin down
    for i in range(n):
        field[i] = h[i]
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] < n_enum:
                field[i] = field[i] - weights[p]
    for i in range(n_enum):
        # each enumerated bond counted once, from its lower endpoint
        e_enum = e_enum - h[i]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j < n_enum and j > i:
                e_enum = e_enum + weights[p]
    m_enum = -n_enum
    with nogil:
        step = 0
        while True:
            fsum = 0.0
            for j in range(n_free):
                v = field[n_enum + j]
                fsum = fsum + v
                # insertion sort
                k = j
                while k > 0 and fs[k - 1] > v:
                    fs[k] = fs[k - 1]
                    k -= 1
                fs[k] = v
            prefix[0] = 0.0
            for j in range(n_free):
                prefix[j + 1] = prefix[j] + fs[j]
            for k in range(n_free + 1):
                e = e_enum - fsum + 2.0 * prefix[k]
                if k == 0 or k == n_free:
                    ways = 1.0
                else:
                    v = fs[k - 1]
                    lo = 0
                    while lo < n_free and fs[lo] < v - tol:
                        lo += 1
                    t = lo
                    while t < n_free and fs[t] <= v + tol:
                        t += 1
                    ways = _BINOM[t - lo][k - lo]
                mm = (m_enum + 2 * k - n_free + n) >> 1
                if e < emin[mm] - tol:
                    emin[mm] = e
                    count[mm] = ways
                elif e <= emin[mm] + tol:
                    count[mm] = count[mm] + ways
            step += 1
            if step >= total:
                break
            i = _ctz(step)
            # flip enumerated spin i
            e_enum = e_enum - 2.0 * spin[i] * field[i]
            for p in range(indptr[i], indptr[i + 1]):
                field[indices[p]] = field[indices[p]] - 2.0 * spin[i] * weights[p]
            m_enum = m_enum - 2 * spin[i]
            spin[i] = -spin[i]
    return emin_arr, count_arr


def conditioned_ground(int n_enum, double[::1] h, int32_t[::1] indptr,
                       int32_t[::1] indices, double[::1] weights,
                       double tol=1e-9, Py_ssize_t cap=1 << 22):
    """Ground energy and every ground state, as bit patterns (bit i = spin i up).

    Same enumeration split as :func:`conditioned_sectors`; free spins whose
    local field vanishes contribute both orientations.
    """
    cdef int n = h.shape[0]
    cdef int n_free = n - n_enum
    if n_enum < 1 or n_free < 0 or n_enum > 62 or n > 64:
        raise ValueError("bad enumeration split")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] field_arr = np.zeros(n)
    cdef double[::1] field = field_arr
    cdef cnp.ndarray[cnp.int8_t, ndim=1] spin_arr = -np.ones(n, dtype=np.int8)
    cdef int8_t[::1] spin = spin_arr
    cdef int i, j, p, nz
    cdef int[64] zero_idx
    cdef double e_enum = 0.0, e, v, emin = INFINITY
    cdef uint64_t step, total = (<uint64_t>1) << n_enum
    cdef uint64_t cfg_enum = 0, base, combo, pattern, ncombo
    cdef Py_ssize_t count = 0, capacity = 1024
    cdef bint overflow = False
    cdef uint64_t *buf = <uint64_t *>malloc(capacity * sizeof(uint64_t))
    if buf == NULL:
        raise MemoryError()
    for i in range(n):
        field[i] = h[i]
        for p in range(indptr[i], indptr[i + 1]):
            if indices[p] < n_enum:
                field[i] = field[i] - weights[p]
    for i in range(n_enum):
        e_enum = e_enum - h[i]
        for p in range(indptr[i], indptr[i + 1]):
            j = indices[p]
            if j < n_enum and j > i:
                e_enum = e_enum + weights[p]
    try:
        with nogil:
            step = 0
            while True:
                e = e_enum
                base = cfg_enum
                nz = 0
                for j in range(n_free):
                    v = field[n_enum + j]
                    if v > tol:
                        e = e - v
                    elif v < -tol:
                        e = e + v
                        base = base | ((<uint64_t>1) << (n_enum + j))
                    else:
                        zero_idx[nz] = n_enum + j
                        nz += 1
                if e < emin - tol:
                    emin = e
                    count = 0
                if e <= emin + tol:
                    ncombo = (<uint64_t>1) << nz
                    combo = 0
                    while combo < ncombo:
                        pattern = base
                        for j in range(nz):
                            if (combo >> j) & 1:
                                pattern = pattern | ((<uint64_t>1) << zero_idx[j])
                        if count == capacity:
                            if capacity >= cap:
                                overflow = True
                                break
                            capacity = capacity * 2
                            buf = <uint64_t *>realloc(buf, capacity * sizeof(uint64_t))
                            if buf == NULL:
                                break
                        buf[count] = pattern
                        count += 1
                        combo += 1
                    if overflow or buf == NULL:
                        break
                step += 1
                if step >= total:
                    break
                i = _ctz(step)
                e_enum = e_enum - 2.0 * spin[i] * field[i]
                for p in range(indptr[i], indptr[i + 1]):
                    field[indices[p]] = field[indices[p]] - 2.0 * spin[i] * weights[p]
                spin[i] = -spin[i]
                cfg_enum = cfg_enum ^ ((<uint64_t>1) << i)
        if buf == NULL:
            raise MemoryError("ground-state buffer allocation failed")
        if overflow:
            raise OverflowError(f"more than {cap} degenerate ground states")
        configs = np.empty(count, dtype=np.uint64)
        for i in range(count):
            configs[i] = buf[i]
    finally:
        if buf != NULL:
            free(buf)
    return emin, configs
