"""Exact ground states and thermal averages by exhaustive enumeration.

Large instances (up to 36 sites) use conditioned enumeration: spins outside a
maximum independent set are enumerated in full, and given those, every spin of
the independent set sits in a fixed local field and is optimised on its own.
A 36-site torus then costs 2^24 steps instead of 2^35.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import core
from .ising import IsingModel
from .lattice import CouplingParams, SSLattice, config_from_str, config_to_str

MAX_GROUND_SITES = 36
MAX_THERMAL_SITES = 20
TOL = 1e-9


class SizeCapError(ValueError):
    pass


def _as_model(problem, params) -> IsingModel:
    if isinstance(problem, IsingModel):
        return problem
    if params is None:
        raise ValueError("params are required for a lattice")
    return IsingModel.from_lattice(problem, params)


def max_independent_set(n: int, edges) -> list[int]:
    """Largest independent set by branch and bound on bitmasks (fine for n <= 64)."""
    nbr = [0] * n
    for a, b in np.asarray(edges, dtype=np.int64).reshape(-1, 2):
        nbr[a] |= 1 << int(b)
        nbr[b] |= 1 << int(a)
    best = [0, 0]

    def go(cand: int, chosen: int, size: int):
        if size + bin(cand).count("1") <= best[0]:
            return
        if not cand:
            best[0], best[1] = size, chosen
            return
        # branch on the candidate with most candidate neighbours
        v, deg = -1, -1
        c = cand
        while c:
            low = c & -c
            i = low.bit_length() - 1
            d = bin(nbr[i] & cand).count("1")
            if d > deg:
                v, deg = i, d
            c ^= low
        if deg == 0:
            go(0, chosen | cand, size + bin(cand).count("1"))
            return
        go(cand & ~(1 << v) & ~nbr[v], chosen | (1 << v), size + 1)
        go(cand & ~(1 << v), chosen, size)

    go((1 << n) - 1, 0, 0)
    return [i for i in range(n) if (best[1] >> i) & 1]


def _split(model: IsingModel):
    """Order sites as (enumerated..., free...) with the free block independent."""
    free = max_independent_set(model.n, model.edges)
    if len(free) == model.n and model.n:
        free = free[:-1]  # keep at least one enumerated spin
    fset = set(free)
    order = np.array([i for i in range(model.n) if i not in fset] + free, dtype=np.int64)
    inv = np.empty_like(order)
    inv[order] = np.arange(model.n)
    reordered = IsingModel(model.h[order], inv[model.edges], model.J)
    return order, model.n - len(free), reordered


def _unpack(bits: np.ndarray, order: np.ndarray) -> np.ndarray:
    n = len(order)
    b = ((bits[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)).astype(np.int8)
    out = np.empty((len(bits), n), dtype=np.int8)
    out[:, order] = 2 * b - 1
    return out


@dataclass
class GroundManifold:
    energy: float
    configs: np.ndarray  # (degeneracy, n) int8, lexicographically sorted

    @property
    def degeneracy(self) -> int:
        return len(self.configs)

    @property
    def magnetizations(self) -> np.ndarray:
        return self.configs.mean(axis=1)

    @property
    def magnetization(self) -> float:
        """Per-site magnetization averaged over the manifold."""
        return float(self.magnetizations.mean())

    def contains(self, config) -> bool:
        c = np.asarray(config, dtype=np.int8)
        return bool(np.any(np.all(self.configs == c, axis=1)))


def brute_force_ground(problem, params: CouplingParams | None = None, tol: float = TOL,
                       cap: int = 1 << 22) -> GroundManifold:
    model = _as_model(problem, params)
    if model.n > MAX_GROUND_SITES:
        raise SizeCapError(f"{model.n} sites exceeds the cap of {MAX_GROUND_SITES}")
    if model.n == 0:
        return GroundManifold(0.0, np.empty((1, 0), dtype=np.int8))
    order, n_enum, red = _split(model)
    indptr, indices, weights = red.csr()
    emin, bits = core.conditioned_ground(n_enum, red.h, indptr, indices, weights, tol, cap)
    configs = _unpack(np.asarray(bits, dtype=np.uint64), order)
    configs = np.unique(configs, axis=0)
    return GroundManifold(float(emin), configs)


def sector_minima(problem, params: CouplingParams | None = None, tol: float = TOL):
    """Minimum interaction energy and its multiplicity in every magnetization sector.

    Fields are ignored, so with a uniform field hz the sector energy is
    ``e[k] + hz * M[k]``.  Returns (M, e, count); M runs from -N to N in steps
    of 2.  Empty sectors carry +inf.
    """
    model = _as_model(problem, params)
    if model.n > MAX_GROUND_SITES:
        raise SizeCapError(f"{model.n} sites exceeds the cap of {MAX_GROUND_SITES}")
    zero = IsingModel(np.zeros(model.n), model.edges, model.J)
    order, n_enum, red = _split(zero)
    indptr, indices, weights = red.csr()
    e, c = core.conditioned_sectors(n_enum, red.h, indptr, indices, weights, True, tol)
    e, c = np.asarray(e, dtype=float), np.asarray(c, dtype=float)
    # the pinned spin was fixed down; the flipped half is the mirror image
    er, cr = e[::-1], c[::-1]
    emin = np.minimum(e, er)
    count = np.where(e <= emin + tol, c, 0) + np.where(er <= emin + tol, cr, 0)
    M = np.arange(-model.n, model.n + 1, 2)
    return M, emin, count


@dataclass
class MagnetizationCurve:
    n_sites: int
    hz: np.ndarray
    m: np.ndarray  # per-site ground magnetization at each hz (mean over manifold)
    critical_fields: np.ndarray  # increasing
    plateaus: list  # (hz_low, hz_high, m) segments, increasing hz

    def plateau_at(self, m_value: float, tol: float = 1e-9):
        for lo, hi, m in self.plateaus:
            if abs(m - m_value) < tol:
                return lo, hi
        return None


def exact_magnetization_curve(lattice, j1: float = 1.0, j2: float = 1.0, hz_values=None,
                              tol: float = TOL) -> MagnetizationCurve:
    """Ground-state magnetization versus a uniform field from the sector lower envelope."""
    params = CouplingParams(j1, j2, 0.0)
    M, e, _ = sector_minima(lattice, params, tol)
    n = len(M) - 1
    ok = np.isfinite(e)
    M, e = M[ok], e[ok]
    # lower convex hull over (M, e); each hull vertex is a stable sector
    hull: list[int] = []
    for k in range(len(M)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (M[b] - M[a]) * (e[k] - e[a]) - (e[b] - e[a]) * (M[k] - M[a])
            if cross <= tol:
                hull.pop()
            else:
                break
        hull.append(k)
    # field at which neighbouring hull vertices cross, decreasing as M grows
    fields = [-(e[b] - e[a]) / (M[b] - M[a]) for a, b in zip(hull, hull[1:])]
    crit = np.array(sorted(fields))
    segs = []
    edges = [-np.inf] + list(crit) + [np.inf]
    for i, k in enumerate(reversed(hull)):
        segs.append((edges[i], edges[i + 1], M[k] / n))
    if hz_values is None:
        hz_values = np.linspace(-8, 8, 161)
    hz_values = np.asarray(hz_values, dtype=float)
    m = np.empty(len(hz_values))
    for i, h in enumerate(hz_values):
        en = e + h * M
        sel = en <= en.min() + tol
        m[i] = M[sel].mean() / n
    return MagnetizationCurve(n, hz_values, m, crit, segs)


@dataclass
class ThermalAverages:
    magnetization: float
    energy: float
    correlation: np.ndarray  # <s_i s_j>
    mean_spin: np.ndarray  # <s_i>
    probabilities: np.ndarray  # Boltzmann weight of each state, index = bit pattern


def all_configs(n: int) -> np.ndarray:
    """Every spin configuration; row k has spin i up iff bit i of k is set."""
    k = np.arange(1 << n, dtype=np.int64)
    return (2 * ((k[:, None] >> np.arange(n)) & 1) - 1).astype(np.int8)


def exact_thermal(problem, params: CouplingParams | None = None, T: float = 1.0) -> ThermalAverages:
    model = _as_model(problem, params)
    if model.n > MAX_THERMAL_SITES:
        raise SizeCapError(f"{model.n} sites exceeds the cap of {MAX_THERMAL_SITES}")
    if T < 0:
        raise ValueError("temperature must be non-negative")
    s = all_configs(model.n)
    e = model.energy(s.astype(float))
    emin = e.min()
    if T == 0 or not np.isfinite(T):
        w = (e <= emin + TOL).astype(float) if T == 0 else np.ones_like(e)
    else:
        w = np.exp(-(e - emin) / T)
    p = w / w.sum()
    sf = s.astype(float)
    mean_spin = p @ sf
    corr = (sf * p[:, None]).T @ sf
    return ThermalAverages(float(mean_spin.mean()) if model.n else 0.0, float(p @ e),
                           corr, mean_spin, p)


def dump_manifold(gm: GroundManifold) -> str:
    lines = [f"# energy {float(gm.energy)!r} degeneracy {gm.degeneracy}"]
    lines += [config_to_str(c) for c in gm.configs]
    return "\n".join(lines) + "\n"


def load_manifold(text: str) -> GroundManifold:
    rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
    head = rows[0].lstrip("#").split()
    if head[0] != "energy":
        raise ValueError("missing energy header")
    configs = np.array([config_from_str(r) for r in rows[1:]], dtype=np.int8)
    return GroundManifold(float(head[1]), configs)
