"""Pure-Python twins of the compiled kernels in ``_core.pyx``.

Same arguments, same RNG stream, same floating point expression order, so the
outputs match the compiled path exactly.  Expect it to be two to three orders
of magnitude slower.
"""

from __future__ import annotations

import math

import numpy as np

BACKEND = "python"

_MASK = (1 << 64) - 1


def _splitmix(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31), state


def _uniform(state: int) -> tuple[float, int]:
    z, state = _splitmix(state)
    return (z >> 11) * (1.0 / 9007199254740992.0), state


def uniform_stream(state: int, count: int):
    out = np.empty(count, dtype=np.float64)
    state = int(state)
    for i in range(count):
        out[i], state = _uniform(state)
    return out, state


def gray_enumerate(sq_mask, dm_mask, n_square, n_dimer, j1=0.0, j2=0.0, hz=0.0,
                   collect=False, tol=1e-9, cap=1 << 22):
    """Vectorised equivalent of the compiled Gray-code enumerator.

    States are generated in blocks rather than in Gray order; the histogram and
    the set of collected states are identical, the order of ``configs`` is not.
    """
    n = len(sq_mask)
    if n < 1 or n > 63:
        raise ValueError("gray_enumerate supports 1..63 spins")
    sq_mask = [int(x) for x in sq_mask]
    dm_mask = [int(x) for x in dm_mask]
    sq_pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if (sq_mask[i] >> j) & 1]
    dm_pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if (dm_mask[i] >> j) & 1]
    hist = np.zeros((n_square + 1, n_dimer + 1, n + 1), dtype=np.int64)
    total = 1 << (n - 1)
    block_bits = min(n - 1, 20)
    block = 1 << block_bits
    emin = math.inf
    kept: list[np.ndarray] = []
    full = np.uint64((1 << n) - 1)
    for start in range(0, total, block):
        cfg = np.arange(start, start + block, dtype=np.uint64)
        bits = ((cfg[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(np.int64)
        s = 2 * bits - 1
        s1 = np.zeros(block, dtype=np.int64)
        for i, j in sq_pairs:
            s1 += s[:, i] * s[:, j]
        s2 = np.zeros(block, dtype=np.int64)
        for i, j in dm_pairs:
            s2 += s[:, i] * s[:, j]
        m = s.sum(axis=1)
        a, b = (s1 + n_square) >> 1, (s2 + n_dimer) >> 1
        np.add.at(hist, (a, b, (m + n) >> 1), 1)
        np.add.at(hist, (a, b, (n - m) >> 1), 1)
        if collect:
            for sign, states in ((1, cfg), (-1, cfg ^ full)):
                e = j1 * s1 + j2 * s2 + sign * hz * m
                lo = e.min()
                if lo < emin - tol:
                    emin = lo
                    kept = []
                sel = e <= emin + tol
                if sel.any():
                    kept.append(states[sel])
    configs = np.concatenate(kept) if (collect and kept) else np.empty(0, dtype=np.uint64)
    if collect:
        # blocks visited before the final minimum may have kept stale states
        configs = _refilter(configs, sq_pairs, dm_pairs, n, j1, j2, hz, emin, tol)
        if len(configs) > cap:
            raise OverflowError(f"more than {cap} degenerate ground states")
    return hist, (emin if collect else float("nan")), configs


def _refilter(configs, sq_pairs, dm_pairs, n, j1, j2, hz, emin, tol):
    if len(configs) == 0:
        return configs
    bits = ((configs[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(np.int64)
    s = 2 * bits - 1
    e = hz * s.sum(axis=1).astype(float)
    for i, j in sq_pairs:
        e = e + j1 * s[:, i] * s[:, j]
    for i, j in dm_pairs:
        e = e + j2 * s[:, i] * s[:, j]
    return configs[e <= emin + tol]


def pimc_sweeps(spins, h, indptr, indices, weights, beta_eff, kperp, rng_state, cluster=True):
    M, n = spins.shape
    if len(kperp) != len(beta_eff):
        raise ValueError("beta_eff and kperp must have equal length")
    state = int(rng_state)
    sp = spins.tolist()
    h = [float(x) for x in h]
    indptr = [int(x) for x in indptr]
    indices = [int(x) for x in indices]
    weights = [float(x) for x in weights]
    for t in range(len(beta_eff)):
        be = float(beta_eff[t])
        K = float(kperp[t])
        for k in range(M):
            kp = k - 1 if k > 0 else M - 1
            kn = k + 1 if k < M - 1 else 0
            row = sp[k]
            for _ in range(n):
                u, state = _uniform(state)
                i = min(int(u * n), n - 1)
                sigma = row[i]
                local = h[i]
                for p in range(indptr[i], indptr[i + 1]):
                    local = local + weights[p] * row[indices[p]]
                de = -2.0 * sigma * local
                ds = be * de
                if M > 1:
                    tterm = float(sigma * (sp[kp][i] + sp[kn][i]))
                    if tterm != 0.0:
                        ds = ds + 2.0 * K * tterm
                if ds <= 0.0:
                    row[i] = -sigma
                else:
                    u, state = _uniform(state)
                    if u < math.exp(-ds):
                        row[i] = -sigma
        if cluster and M > 1:
            padd = 1.0 - math.exp(-2.0 * K)
            for _ in range(n):
                u, state = _uniform(state)
                i = min(int(u * n), n - 1)
                u, state = _uniform(state)
                k0 = min(int(u * M), M - 1)
                s0 = sp[k0][i]
                members = [k0]
                kk = k0
                while len(members) < M:
                    kk = kk + 1 if kk < M - 1 else 0
                    if sp[kk][i] != s0:
                        break
                    if padd < 1.0:
                        u, state = _uniform(state)
                        if u >= padd:
                            break
                    members.append(kk)
                kk = k0
                while len(members) < M:
                    kk = kk - 1 if kk > 0 else M - 1
                    if sp[kk][i] != s0:
                        break
                    if padd < 1.0:
                        u, state = _uniform(state)
                        if u >= padd:
                            break
                    members.append(kk)
                ds = 0.0
                for k in members:
                    row = sp[k]
                    local = h[i]
                    for p in range(indptr[i], indptr[i + 1]):
                        local = local + weights[p] * row[indices[p]]
                    ds = ds + be * (-2.0 * s0 * local)
                if ds <= 0.0:
                    for k in members:
                        sp[k][i] = -s0
                else:
                    u, state = _uniform(state)
                    if u < math.exp(-ds):
                        for k in members:
                            sp[k][i] = -s0
    spins[...] = np.asarray(sp, dtype=spins.dtype)
    return state


def _enum_block(start, size, n_enum):
    cfg = np.arange(start, start + size, dtype=np.uint64)
    bits = ((cfg[:, None] >> np.arange(n_enum, dtype=np.uint64)) & np.uint64(1)).astype(np.int64)
    return cfg, 2 * bits - 1


def _split_couplings(n_enum, h, indptr, indices, weights):
    n = len(h)
    w_ee = np.zeros((n_enum, n_enum))
    w_ef = np.zeros((n_enum, n - n_enum))
    for i in range(n):
        for p in range(indptr[i], indptr[i + 1]):
            j = int(indices[p])
            if i < n_enum and j < n_enum:
                w_ee[i, j] = weights[p]
            elif i < n_enum <= j:
                w_ef[i, j - n_enum] = weights[p]
            elif j < n_enum <= i:
                pass
            else:
                raise ValueError("free spins must form an independent set")
    return np.triu(w_ee, 1), w_ef


def conditioned_sectors(n_enum, h, indptr, indices, weights, pin_last=False, tol=1e-9):
    from math import comb

    h = np.asarray(h, dtype=float)
    n = len(h)
    n_free = n - n_enum
    n_gray = n_enum - 1 if pin_last else n_enum
    if n_enum < 1 or n_free < 0 or n_gray > 62:
        raise ValueError("bad enumeration split")
    w_ee, w_ef = _split_couplings(n_enum, h, indptr, indices, weights)
    binom = np.array([[comb(a, b) for b in range(65)] for a in range(65)], dtype=float)
    emin = np.full(n + 1, np.inf)
    count = np.zeros(n + 1)
    total = 1 << n_gray
    block = min(total, 1 << 16)
    for start in range(0, total, block):
        _, s = _enum_block(start, block, n_enum)
        if pin_last:
            s[:, n_enum - 1] = -1
        e_enum = s @ h[:n_enum] + np.einsum("bi,ij,bj->b", s, w_ee, s)
        f = h[n_enum:] + s @ w_ef
        fs = np.sort(f, axis=1)
        prefix = np.concatenate([np.zeros((block, 1)), np.cumsum(fs, axis=1)], axis=1)
        fsum = f.sum(axis=1)
        m_enum = s.sum(axis=1)
        for k in range(n_free + 1):
            e = e_enum - fsum + 2.0 * prefix[:, k]
            if k == 0 or k == n_free:
                ways = np.ones(block)
            else:
                v = fs[:, k - 1][:, None]
                lo = (fs < v - tol).sum(axis=1)
                t = (fs <= v + tol).sum(axis=1)
                ways = binom[t - lo, k - lo]
            mm = (m_enum + 2 * k - n_free + n) // 2
            for idx in np.unique(mm):
                sel = mm == idx
                eb = e[sel]
                lo_e = eb.min()
                cb = ways[sel][eb <= lo_e + tol].sum()
                if lo_e < emin[idx] - tol:
                    emin[idx], count[idx] = lo_e, cb
                elif lo_e <= emin[idx] + tol:
                    count[idx] += cb
    return emin, count


def conditioned_ground(n_enum, h, indptr, indices, weights, tol=1e-9, cap=1 << 22):
    h = np.asarray(h, dtype=float)
    n = len(h)
    n_free = n - n_enum
    if n_enum < 1 or n_free < 0 or n_enum > 62 or n > 64:
        raise ValueError("bad enumeration split")
    w_ee, w_ef = _split_couplings(n_enum, h, indptr, indices, weights)
    total = 1 << n_enum
    block = min(total, 1 << 16)
    emin = np.inf
    found: list[np.ndarray] = []
    free_bits = np.uint64(1) << (np.arange(n_free, dtype=np.uint64) + np.uint64(n_enum))
    for start in range(0, total, block):
        cfg, s = _enum_block(start, block, n_enum)
        e_enum = s @ h[:n_enum] + np.einsum("bi,ij,bj->b", s, w_ee, s)
        f = h[n_enum:] + s @ w_ef
        e = e_enum - np.where(np.abs(f) > tol, np.abs(f), 0.0).sum(axis=1)
        lo = e.min()
        if lo < emin - tol:
            emin = lo
            found = []
        for b in np.flatnonzero(e <= emin + tol):
            base = int(cfg[b])
            zeros = []
            for j in range(n_free):
                if f[b, j] < -tol:
                    base |= int(free_bits[j])
                elif f[b, j] <= tol:
                    zeros.append(int(free_bits[j]))
            pats = [base]
            for z in zeros:
                pats = pats + [p | z for p in pats]
            found.append(np.array(pats, dtype=np.uint64))
    configs = np.concatenate(found) if found else np.empty(0, dtype=np.uint64)
    if len(configs) > cap:
        raise OverflowError(f"more than {cap} degenerate ground states")
    return float(emin), configs
