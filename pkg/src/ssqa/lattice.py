"""Shastry-Sutherland lattice construction and the classical Ising energy.

Geometry
--------
Sites sit on the integer square grid.  Every site has four square (J1)
neighbours.  Dimer (J2) bonds run along one diagonal of every other plaquette:
the plaquette with lower-left corner ``(x, y)`` carries

* the ``/`` diagonal ``(x, y)-(x+1, y+1)`` when ``x`` and ``y`` are both even,
* the ``\\`` diagonal ``(x+1, y)-(x, y+1)`` when ``x`` and ``y`` are both odd,

and no dimer otherwise, so neighbouring dimers are orthogonal and every site
belongs to exactly one dimer.

Dimer centres form a square grid rotated by 45 degrees.  Dimer ``(u, v)`` has
its plaquette corner at ``(u + v, u - v)``; this ``(u, v)`` grid is the one laid
onto Chimera unit cells by the half-cell embedding (row ``u``, column ``v``).

Two cell shapes are available:

``"logical"``
    The 8-site cell made of a 2x2 block of dimers, i.e. lattice vectors
    ``(2, -2)`` (along ``cells_x``) and ``(2, 2)`` (along ``cells_y``).  Intra-cell
    order is dimer (0,0), (0,1), (1,0), (1,1) in ``(u, v)``, and within each
    dimer the site with smaller ``x`` first.  This is the cell used for
    hardware embedding.
``"square"``
    The 4-site 2x2 block ``(0,0), (1,0), (0,1), (1,1)`` with lattice vectors
    ``(2, 0)`` and ``(0, 2)``.  Rectangular tori built from it are the natural
    oracle geometry: the 1/3 plateau needs both torus sides divisible by 6.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

SQUARE = 0
DIMER = 1
KIND_NAMES = ("square", "dimer")


@dataclass(frozen=True)
class CouplingParams:
    """Dimensionless couplings of the Ising Hamiltonian.

    ``H = j1 * sum_square s_i s_j + j2 * sum_dimer s_i s_j + hz * sum_i s_i``.
    Positive ``hz`` favours down spins.
    """

    j1: float = 1.0
    j2: float = 1.0
    hz: float = 0.0

    def __post_init__(self):
        for name in ("j1", "j2", "hz"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    def with_hz(self, hz: float) -> "CouplingParams":
        return CouplingParams(self.j1, self.j2, hz)


def _dimer_sites(u: int, v: int) -> tuple[tuple[int, int], tuple[int, int]]:
    px, py = u + v, u - v
    if px % 2 == 0:
        return (px, py), (px + 1, py + 1)
    return (px, py + 1), (px + 1, py)


_LOGICAL_CELL = [s for uv in ((0, 0), (0, 1), (1, 0), (1, 1)) for s in _dimer_sites(*uv)]
_SQUARE_CELL = [(0, 0), (1, 0), (0, 1), (1, 1)]
_CELLS = {
    "logical": (_LOGICAL_CELL, (2, -2), (2, 2)),
    "square": (_SQUARE_CELL, (2, 0), (0, 2)),
}


def _plaquette_dimer(x: int, y: int):
    """Dimer carried by the plaquette with lower-left corner (x, y), if any."""
    if x % 2 == 0 and y % 2 == 0:
        return (x, y), (x + 1, y + 1)
    if x % 2 == 1 and y % 2 == 1:
        return (x + 1, y), (x, y + 1)
    return None


@dataclass(frozen=True, eq=False)
class SSLattice:
    """Sites with integer coordinates plus typed bonds.

    ``bonds`` is an ``(B, 2)`` int array with ``a < b``; ``kinds`` holds
    ``SQUARE`` or ``DIMER`` per bond.  For periodic lattices ``periods`` holds
    the two torus vectors.
    """

    cells_x: int
    cells_y: int
    boundary: str
    cell: str
    coords: np.ndarray
    bonds: np.ndarray
    kinds: np.ndarray
    periods: tuple[tuple[int, int], tuple[int, int]] | None = None
    labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    def __len__(self) -> int:
        return len(self.coords)

    @cached_property
    def square_bonds(self) -> np.ndarray:
        return self.bonds[self.kinds == SQUARE]

    @cached_property
    def dimer_bonds(self) -> np.ndarray:
        return self.bonds[self.kinds == DIMER]

    @cached_property
    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """CSR ``(indptr, neighbours, kinds)`` over both bond kinds."""
        n = self.n_sites
        a = np.concatenate([self.bonds[:, 0], self.bonds[:, 1]])
        b = np.concatenate([self.bonds[:, 1], self.bonds[:, 0]])
        k = np.concatenate([self.kinds, self.kinds])
        order = np.lexsort((b, a))
        a, b, k = a[order], b[order], k[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, a + 1, 1)
        return np.cumsum(indptr), b, k

    def neighbors(self, site: int, kind: int | None = None) -> np.ndarray:
        indptr, nb, kinds = self.adjacency
        sl = slice(indptr[site], indptr[site + 1])
        if kind is None:
            return nb[sl]
        return nb[sl][kinds[sl] == kind]

    def square_degree(self) -> np.ndarray:
        deg = np.zeros(self.n_sites, dtype=np.int64)
        sq = self.square_bonds
        np.add.at(deg, sq[:, 0], 1)
        np.add.at(deg, sq[:, 1], 1)
        return deg

    def site_index(self) -> dict[tuple[int, int], int]:
        return {tuple(map(int, c)): i for i, c in enumerate(self.coords)}

    def translate(self, config: np.ndarray, shift: tuple[int, int]) -> np.ndarray:
        """Translate a config on a periodic lattice by a real-space vector."""
        if self.periods is None:
            raise ValueError("translation requires a periodic lattice")
        wrap = _Wrapper(self.periods)
        index = {wrap(tuple(map(int, c))): i for i, c in enumerate(self.coords)}
        out = np.empty_like(config)
        for i, (x, y) in enumerate(self.coords):
            j = index[wrap((int(x) + shift[0], int(y) + shift[1]))]
            out[j] = config[i]
        return out

    def remove_sites(self, sites: Iterable[int]) -> tuple["SSLattice", np.ndarray]:
        """Excise sites (and their bonds); return the reduced lattice and kept indices."""
        drop = np.zeros(self.n_sites, dtype=bool)
        for s in sites:
            if not 0 <= s < self.n_sites:
                raise IndexError(f"site {s} out of range")
            drop[s] = True
        kept = np.flatnonzero(~drop)
        remap = -np.ones(self.n_sites, dtype=np.int64)
        remap[kept] = np.arange(len(kept))
        keep_bond = ~(drop[self.bonds[:, 0]] | drop[self.bonds[:, 1]])
        bonds = remap[self.bonds[keep_bond]]
        labels = self.labels[kept] if self.labels is not None else kept
        return (
            SSLattice(self.cells_x, self.cells_y, self.boundary, self.cell,
                      self.coords[kept], bonds, self.kinds[keep_bond],
                      self.periods, labels),
            kept,
        )

    def drop_bonds(self, mask) -> "SSLattice":
        """Copy without the bonds where ``mask`` is true."""
        keep = ~np.asarray(mask, dtype=bool)
        return SSLattice(self.cells_x, self.cells_y, self.boundary, self.cell, self.coords,
                         self.bonds[keep], self.kinds[keep], self.periods, self.labels)


class _Wrapper:
    """Reduce coordinates modulo a 2D integer torus lattice."""

    def __init__(self, periods):
        self.A = np.array(periods, dtype=float).T
        self.Ainv = np.linalg.inv(self.A)

    def __call__(self, p):
        f = self.Ainv @ np.asarray(p, dtype=float)
        f = f - np.floor(f + 1e-9)
        q = self.A @ f
        return int(round(q[0])), int(round(q[1]))


def build_lattice(cells_x: int, cells_y: int, boundary: str = "open",
                  cell: str = "logical") -> SSLattice:
    """Build a Shastry-Sutherland patch of ``cells_x * cells_y`` cells.

    Sites are ordered row-major by cell (``cy * cells_x + cx``), then by the
    fixed intra-cell order.  Periodic lattices need at least two cells along
    each direction.
    """
    if cells_x < 1 or cells_y < 1:
        raise ValueError("cells_x and cells_y must be >= 1")
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary kind {boundary!r}")
    if cell not in _CELLS:
        raise ValueError(f"unknown cell shape {cell!r}")
    if boundary == "periodic" and (cells_x < 2 or cells_y < 2):
        raise ValueError("periodic lattices need cells_x >= 2 and cells_y >= 2")
    basis, ax, ay = _CELLS[cell]
    coords = []
    for cy in range(cells_y):
        for cx in range(cells_x):
            ox = cx * ax[0] + cy * ay[0]
            oy = cx * ax[1] + cy * ay[1]
            coords.extend((ox + bx, oy + by) for bx, by in basis)
    periods = None
    if boundary == "periodic":
        periods = ((cells_x * ax[0], cells_x * ax[1]), (cells_y * ay[0], cells_y * ay[1]))
        wrap = _Wrapper(periods)
        key = wrap
    else:
        key = lambda p: p  # noqa: E731
    index = {}
    for i, c in enumerate(coords):
        k = key(c)
        if k in index:
            raise ValueError("cell layout produced coincident sites")
        index[k] = i

    bonds: dict[tuple[int, int], int] = {}

    def add(p, q, kind):
        a, b = index.get(key(p)), index.get(key(q))
        if a is None or b is None:
            return
        if a == b:
            raise ValueError("lattice too small: bond wraps onto itself")
        pair = (min(a, b), max(a, b))
        if pair in bonds:
            raise ValueError("lattice too small: duplicate bond")
        bonds[pair] = kind

    for (x, y) in coords:
        add((x, y), (x + 1, y), SQUARE)
        add((x, y), (x, y + 1), SQUARE)
        d = _plaquette_dimer(x, y)
        if d is not None:
            add(d[0], d[1], DIMER)
    # open lattices: dimers whose corner site lies outside the patch but whose
    # two sites both lie inside
    if boundary == "open":
        for (x, y) in coords:
            for px, py in ((x - 1, y), (x, y - 1), (x - 1, y - 1)):
                if (px, py) in index:
                    continue
                d = _plaquette_dimer(px, py)
                if d is None:
                    continue
                a, b = index.get(d[0]), index.get(d[1])
                if a is not None and b is not None:
                    pair = (min(a, b), max(a, b))
                    bonds.setdefault(pair, DIMER)
    pairs = sorted(bonds)
    bond_arr = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    kinds = np.array([bonds[p] for p in pairs], dtype=np.int8)
    return SSLattice(cells_x, cells_y, boundary, cell,
                     np.array(coords, dtype=np.int64), bond_arr, kinds, periods)


def validate_config(lattice: SSLattice, config) -> np.ndarray:
    s = np.asarray(config)
    if s.shape[-1] != lattice.n_sites:
        raise ValueError(f"config length {s.shape[-1]} != {lattice.n_sites} sites")
    if not np.all(np.abs(s) == 1):
        raise ValueError("spins must be +1 or -1")
    return s.astype(np.int8, copy=False)


def bond_sums(lattice: SSLattice, config) -> tuple:
    """Return ``(S_square, S_dimer, M)``; works on a batch along the last axis."""
    s = validate_config(lattice, config).astype(np.int64)
    sq, dm = lattice.square_bonds, lattice.dimer_bonds
    s1 = (s[..., sq[:, 0]] * s[..., sq[:, 1]]).sum(axis=-1)
    s2 = (s[..., dm[:, 0]] * s[..., dm[:, 1]]).sum(axis=-1)
    return s1, s2, s.sum(axis=-1)


def energy(lattice: SSLattice, params: CouplingParams, config):
    s1, s2, m = bond_sums(lattice, config)
    return params.j1 * s1 + params.j2 * s2 + params.hz * m


def energy_delta(lattice: SSLattice, params: CouplingParams, config, site: int) -> float:
    """Energy change from flipping ``site``; O(degree)."""
    s = validate_config(lattice, config)
    if not 0 <= site < lattice.n_sites:
        raise IndexError(f"site {site} out of range")
    indptr, nb, kinds = lattice.adjacency
    sl = slice(indptr[site], indptr[site + 1])
    w = np.where(kinds[sl] == SQUARE, params.j1, params.j2)
    local = params.hz + float(np.dot(w, s[nb[sl]]))
    return -2.0 * int(s[site]) * local


# -- text formats ---------------------------------------------------------------

def config_to_str(config: Sequence[int]) -> str:
    return "".join("+" if int(v) > 0 else "-" for v in config)


def config_from_str(text: str) -> np.ndarray:
    text = text.strip()
    bad = set(text) - {"+", "-"}
    if bad:
        raise ValueError(f"unexpected characters in spin string: {sorted(bad)}")
    return np.array([1 if c == "+" else -1 for c in text], dtype=np.int8)


def dump_lattice(lattice: SSLattice) -> str:
    lines = [f"# cells {lattice.cells_x} {lattice.cells_y} boundary {lattice.boundary} "
             f"cell {lattice.cell} sites {lattice.n_sites}"]
    lines += [f"site {i} {x} {y}" for i, (x, y) in enumerate(lattice.coords)]
    lines += [f"{a} {b} {KIND_NAMES[k]}" for (a, b), k in zip(lattice.bonds, lattice.kinds)]
    return "\n".join(lines) + "\n"


def load_lattice(text: str) -> SSLattice:
    header, *rest = [ln for ln in text.splitlines() if ln.strip()]
    tok = header.lstrip("#").split()
    if tok[0] != "cells":
        raise ValueError("lattice header must start with '# cells'")
    cells_x, cells_y = int(tok[1]), int(tok[2])
    meta = dict(zip(tok[3::2], tok[4::2]))
    coords, bonds, kinds = [], [], []
    for ln in rest:
        parts = ln.split()
        if parts[0] == "site":
            coords.append((int(parts[2]), int(parts[3])))
        else:
            bonds.append((int(parts[0]), int(parts[1])))
            kinds.append(KIND_NAMES.index(parts[2]))
    boundary = meta.get("boundary", "open")
    cell = meta.get("cell", "logical")
    periods = None
    if boundary == "periodic":
        _, ax, ay = _CELLS[cell]
        periods = ((cells_x * ax[0], cells_x * ax[1]), (cells_y * ay[0], cells_y * ay[1]))
    return SSLattice(cells_x, cells_y, boundary, cell,
                     np.array(coords, dtype=np.int64).reshape(-1, 2),
                     np.array(bonds, dtype=np.int64).reshape(-1, 2),
                     np.array(kinds, dtype=np.int8), periods)
