"""Magnetization, static structure factor, phase boundaries and motif labels."""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import find_peaks

from .lattice import CouplingParams, SSLattice, build_lattice

PLATEAU_PERIOD = 6


def _configs(ens) -> np.ndarray:
    c = ens.retained if hasattr(ens, "retained") else ens
    c = np.atleast_2d(np.asarray(c))
    if c.size == 0 or len(c) == 0:
        raise ValueError("empty ensemble")
    return c


def magnetization(ens) -> float:
    """Mean per-site magnetization over the retained samples."""
    return float(_configs(ens).mean())


def rescale_energies(energies) -> np.ndarray:
    e = np.asarray(energies, dtype=float)
    if e.size == 0:
        return e
    return e - e.min()


# -- structure factor -------------------------------------------------------------

@dataclass
class SFGrid:
    qx: np.ndarray
    qy: np.ndarray
    values: np.ndarray  # (len(qx), len(qy))
    normalization: str = "per-site"
    n_sites: int = 0
    n_samples: int = 0

    def argmax(self) -> tuple[float, float]:
        i, j = np.unravel_index(int(np.argmax(self.values)), self.values.shape)
        return float(self.qx[i]), float(self.qy[j])

    def nearest(self, qx: float, qy: float) -> float:
        i = int(np.argmin(np.abs(_wrap(self.qx - qx))))
        j = int(np.argmin(np.abs(_wrap(self.qy - qy))))
        return float(self.values[i, j])

    def to_csv(self) -> str:
        """Matrix CSV: first row 'qx\\qy' then the qy axis; each row starts with its qx."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"# normalization={self.normalization} n_sites={self.n_sites} "
                    f"n_samples={self.n_samples}"])
        w.writerow(["qx\\qy"] + [repr(float(q)) for q in self.qy])
        for q, row in zip(self.qx, self.values):
            w.writerow([repr(float(q))] + [repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SFGrid":
        rows = list(csv.reader(io.StringIO(text)))
        meta = dict(kv.split("=") for kv in rows[0][0].lstrip("# ").split())
        qy = np.array([float(x) for x in rows[1][1:]])
        qx = np.array([float(r[0]) for r in rows[2:]])
        vals = np.array([[float(x) for x in r[1:]] for r in rows[2:]])
        return cls(qx, qy, vals, meta["normalization"], int(meta["n_sites"]), int(meta["n_samples"]))


def _wrap(q):
    return (np.asarray(q) + np.pi) % (2 * np.pi) - np.pi


def commensurate_axis(length: int) -> np.ndarray:
    """q = 2 pi k / L for k in (-L/2, L/2], so +-pi appears once."""
    k = np.arange(-((length - 1) // 2), length // 2 + 1)
    return 2 * np.pi * k / length


def default_q_axes(lattice: SSLattice) -> tuple[np.ndarray, np.ndarray]:
    if lattice.periods is not None and lattice.cell == "square":
        lx, ly = lattice.periods[0][0], lattice.periods[1][1]
    else:
        ext = lattice.coords.max(axis=0) - lattice.coords.min(axis=0) + 1
        lx, ly = int(ext[0]), int(ext[1])
        if lattice.periods is not None:
            # torus along diagonals: the smallest square supercell repeats it
            lx = ly = int(abs(lattice.periods[0][0]) + abs(lattice.periods[1][0]))
    return commensurate_axis(lx), commensurate_axis(ly)


def _norm(values, n, normalization):
    if normalization == "per-site":
        return values / n
    if normalization == "raw":
        return values
    raise ValueError(f"unknown normalization {normalization!r}")


def structure_factor(ens, lattice: SSLattice, qx=None, qy=None,
                     normalization: str = "per-site") -> SFGrid:
    """S(q) = < |sum_i s_i exp(i q.R_i)|^2 > over retained samples."""
    c = _configs(ens).astype(float)
    if c.shape[1] != lattice.n_sites:
        raise ValueError("ensemble does not match the lattice")
    if qx is None or qy is None:
        dx, dy = default_q_axes(lattice)
        qx = dx if qx is None else qx
        qy = dy if qy is None else qy
    qx, qy = np.asarray(qx, dtype=float), np.asarray(qy, dtype=float)
    R = lattice.coords.astype(float)
    ex = np.exp(1j * np.outer(qx, R[:, 0]))  # (nqx, N)
    ey = np.exp(1j * np.outer(qy, R[:, 1]))  # (nqy, N)
    vals = np.zeros((len(qx), len(qy)))
    for s in c:
        amp = (ex * s) @ ey.T
        vals += np.abs(amp) ** 2
    vals /= len(c)
    return SFGrid(qx, qy, _norm(vals, lattice.n_sites, normalization), normalization,
                  lattice.n_sites, len(c))


def structure_factor_naive(ens, lattice: SSLattice, qx, qy,
                           normalization: str = "per-site") -> SFGrid:
    """Direct double sum over the correlation matrix; slow reference path."""
    c = _configs(ens).astype(float)
    corr = c.T @ c / len(c)
    R = lattice.coords.astype(float)
    dx = R[:, None, 0] - R[None, :, 0]
    dy = R[:, None, 1] - R[None, :, 1]
    qx, qy = np.asarray(qx, dtype=float), np.asarray(qy, dtype=float)
    vals = np.empty((len(qx), len(qy)))
    for i, a in enumerate(qx):
        for j, b in enumerate(qy):
            vals[i, j] = float(np.sum(corr * np.cos(a * dx + b * dy)))
    return SFGrid(qx, qy, _norm(vals, lattice.n_sites, normalization), normalization,
                  lattice.n_sites, len(c))


SYMMETRY_PATH = ((0.0, 0.0), (np.pi, 0.0), (np.pi, np.pi))


@dataclass
class SFCut:
    distance: np.ndarray
    qx: np.ndarray
    qy: np.ndarray
    intensity: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["distance", "intensity"])
        for d, v in zip(self.distance, self.intensity):
            w.writerow([repr(float(d)), repr(float(v))])
        return buf.getvalue()


def sf_cut(grid: SFGrid, path=SYMMETRY_PATH, n_points: int = 64) -> SFCut:
    """Sample ``grid`` at nearest grid points along a polyline in q space."""
    pts = np.asarray(path, dtype=float)
    if len(pts) < 2 or n_points < 1:
        raise ValueError("a cut needs at least two path vertices and one sample")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    d = np.linspace(0.0, cum[-1], n_points)
    qx = np.interp(d, cum, pts[:, 0])
    qy = np.interp(d, cum, pts[:, 1])
    vals = np.array([grid.nearest(a, b) for a, b in zip(qx, qy)])
    return SFCut(d, qx, qy, vals)


# -- phase boundaries -------------------------------------------------------------

def detect_phase_boundary(h, m, prominence: float = 0.05) -> list[float]:
    """Midpoints of the intervals where |dm/dh| peaks.

    Every local maximum of the interval slopes with prominence at least
    ``prominence`` (per unit h) is reported, in increasing h.
    """
    h = np.asarray(h, dtype=float)
    m = np.asarray(m, dtype=float)
    if len(h) < 2 or len(h) != len(m):
        raise ValueError("need at least two (h, m) points of equal length")
    order = np.argsort(h, kind="stable")
    h, m = h[order], m[order]
    dh = np.diff(h)
    if np.any(dh <= 0):
        raise ValueError("h values must be distinct")
    slope = np.abs(np.diff(m) / dh)
    padded = np.concatenate([[0.0], slope, [0.0]])
    peaks, _ = find_peaks(padded, prominence=prominence)
    mids = 0.5 * (h[:-1] + h[1:])
    return [float(mids[p - 1]) for p in peaks]


@dataclass
class PhaseDiagramGrid:
    hz: np.ndarray
    ratio: np.ndarray  # j2 / j1
    m: np.ndarray  # (len(ratio), len(hz))
    energy: np.ndarray
    motifs: list = field(default_factory=list)  # per (ratio, hz) Counter of labels
    boundaries: list = field(default_factory=list)  # per ratio, list of hz*

    def dominant(self, i: int, j: int) -> str:
        c = self.motifs[i][j] if self.motifs else Counter()
        return c.most_common(1)[0][0] if c else ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j2_over_j1", "hz", "m", "energy", "dominant_motif"])
        for i, r in enumerate(self.ratio):
            for j, h in enumerate(self.hz):
                w.writerow([repr(float(r)), repr(float(h)), repr(float(self.m[i, j])),
                            repr(float(self.energy[i, j])), self.dominant(i, j)])
        return buf.getvalue()

    def boundary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j2_over_j1", "hz_boundary"])
        for r, bs in zip(self.ratio, self.boundaries):
            for b in bs:
                w.writerow([repr(float(r)), repr(float(b))])
        return buf.getvalue()


# -- motifs -------------------------------------------------------------------------

@lru_cache(maxsize=1)
def plateau_templates() -> tuple:
    """The six m = +1/3 plateau orderings as {(x mod 6, y mod 6): spin} maps.

    Generated once from the exact ground manifold of the 36-site torus.
    """
    from .exact import brute_force_ground

    lat = build_lattice(3, 3, "periodic", "square")
    gm = brute_force_ground(lat, CouplingParams(1.0, 1.0, -2.1))
    out = []
    for c in gm.configs:
        out.append({(int(x) % PLATEAU_PERIOD, int(y) % PLATEAU_PERIOD): int(s)
                    for (x, y), s in zip(lat.coords, c)})
    out.sort(key=lambda t: tuple(t[k] for k in sorted(t)))
    return tuple(out)


def _window(lattice: SSLattice, window):
    if window is not None:
        return np.asarray(window, dtype=np.int64)
    if lattice.periods is not None:
        return np.arange(lattice.n_sites)
    return np.flatnonzero(lattice.square_degree() == 4)


def classify_motif(config, lattice: SSLattice, threshold: float = 0.9, window=None) -> str:
    """Best-matching label among FM, Neel, dimer-AFM and plateau-1..6, else 'mixed'.

    Agreement is the fraction of window sites matching a template (either
    global sign).  Dimer-AFM is scored by the fraction of antiparallel dimers
    in the window, since its ground states are 2^(N/2)-fold degenerate.
    """
    s = np.asarray(config)
    w = _window(lattice, window)
    xy = lattice.coords[w]
    ext = xy.max(axis=0) - xy.min(axis=0) + 1 if len(w) else np.zeros(2)
    if len(w) == 0 or min(ext) < PLATEAU_PERIOD:
        raise ValueError("classification window smaller than one template period")
    sw = s[w]
    scores = {}

    def score(t):
        a = float(np.mean(sw == t))
        return max(a, 1.0 - a)

    scores["FM"] = score(np.ones(len(w)))
    scores["Neel"] = score(np.where((xy[:, 0] + xy[:, 1]) % 2 == 0, 1, -1))
    for k, tpl in enumerate(plateau_templates(), start=1):
        t = np.array([tpl[(int(x) % PLATEAU_PERIOD, int(y) % PLATEAU_PERIOD)] for x, y in xy])
        scores[f"plateau-{k}"] = score(t)
    inw = np.zeros(lattice.n_sites, dtype=bool)
    inw[w] = True
    dm = lattice.dimer_bonds
    dm = dm[inw[dm[:, 0]] & inw[dm[:, 1]]]
    if len(dm):
        scores["dimer-AFM"] = float(np.mean(s[dm[:, 0]] != s[dm[:, 1]]))
    best = max(scores, key=lambda k: scores[k])
    return best if scores[best] >= threshold else "mixed"


def motif_histogram(configs, lattice: SSLattice, **kw) -> Counter:
    return Counter(classify_motif(c, lattice, **kw) for c in _configs(configs))
