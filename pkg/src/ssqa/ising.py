"""Generic sparse Ising problem, E(s) = sum_i h_i s_i + sum_(a,b) J_ab s_a s_b.

Both the logical lattice problem and the compiled Chimera problem reduce to
this form before they reach a sampler or the exact oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import CouplingParams, SSLattice


@dataclass(frozen=True)
class IsingModel:
    h: np.ndarray
    edges: np.ndarray  # (m, 2) int, a < b
    J: np.ndarray
    _csr: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float).reshape(-1)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        J = np.asarray(self.J, dtype=float).reshape(-1)
        if len(edges) != len(J):
            raise ValueError("edges and J differ in length")
        if len(edges) and (edges.min() < 0 or edges.max() >= len(h)):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self coupling")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(J))):
            raise ValueError("non-finite field or coupling")
        edges = np.sort(edges, axis=1)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "J", J)

    @property
    def n(self) -> int:
        return len(self.h)

    @classmethod
    def from_lattice(cls, lattice: SSLattice, params: CouplingParams) -> "IsingModel":
        J = np.where(lattice.kinds == 0, params.j1, params.j2).astype(float)
        return cls(np.full(lattice.n_sites, float(params.hz)), lattice.bonds, J)

    @classmethod
    def from_dict(cls, n: int, h: dict | None = None, J: dict | None = None) -> "IsingModel":
        hv = np.zeros(n)
        for i, v in (h or {}).items():
            hv[i] = v
        pairs = list((J or {}).items())
        edges = np.array([p for p, _ in pairs], dtype=np.int64).reshape(-1, 2)
        return cls(hv, edges, np.array([v for _, v in pairs], dtype=float))

    def csr(self):
        """Symmetric adjacency as (indptr, indices, weights), int32/int32/float64."""
        if self._csr is None:
            a, b = self.edges[:, 0], self.edges[:, 1]
            rows = np.concatenate([a, b])
            cols = np.concatenate([b, a])
            w = np.concatenate([self.J, self.J])
            order = np.lexsort((cols, rows))
            rows, cols, w = rows[order], cols[order], w[order]
            indptr = np.zeros(self.n + 1, dtype=np.int32)
            np.add.at(indptr, rows + 1, 1)
            indptr = np.cumsum(indptr).astype(np.int32)
            object.__setattr__(self, "_csr", (indptr, cols.astype(np.int32),
                                              np.ascontiguousarray(w, dtype=float)))
        return self._csr

    def energy(self, spins) -> np.ndarray | float:
        s = np.asarray(spins, dtype=float)
        e = s @ self.h + (s[..., self.edges[:, 0]] * s[..., self.edges[:, 1]]) @ self.J
        return float(e) if s.ndim == 1 else e

    def local_fields(self, spins) -> np.ndarray:
        s = np.asarray(spins, dtype=float)
        out = np.broadcast_to(self.h, s.shape).copy()
        a, b = self.edges[:, 0], self.edges[:, 1]
        np.add.at(out.T, a, (s[..., b] * self.J).T)
        np.add.at(out.T, b, (s[..., a] * self.J).T)
        return out

    def subgraph(self, keep) -> "IsingModel":
        """Restrict to the sites in ``keep``; dropped neighbours are treated as absent."""
        keep = np.asarray(keep, dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        e = remap[self.edges]
        ok = (e >= 0).all(axis=1)
        return IsingModel(self.h[keep], e[ok], self.J[ok])
