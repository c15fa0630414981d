"""Mean-field boundary conditions.

Boundary sites (open perimeter and neighbours of excised defects) get their
own longitudinal field, tuned by

    h_i <- h_i + delta_h * (<s_i> - <m>_bulk)

until the boundary magnetization matches the bulk.  With ``H = ... + h s`` a
positive field pushes a spin down, so a boundary site that is too far up gets
a larger field.  Fields are kept on the side of zero given by the bulk field
(clamped to 0 otherwise) unless the bulk field is 0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .ising import IsingModel
from .lattice import CouplingParams, SSLattice

MAX_DELTA_H = 0.05


@dataclass(frozen=True)
class BoundarySpec:
    boundary: np.ndarray  # site indices
    bulk: np.ndarray
    h_boundary: np.ndarray  # one field per boundary site
    hz_bulk: float = 0.0
    delta_h: float = 0.05
    max_iter: int = 500
    sign_constraint: bool = True
    tol: float = 0.03

    def __post_init__(self):
        b = np.asarray(self.boundary, dtype=np.int64)
        k = np.asarray(self.bulk, dtype=np.int64)
        object.__setattr__(self, "boundary", b)
        object.__setattr__(self, "bulk", k)
        object.__setattr__(self, "h_boundary", np.asarray(self.h_boundary, dtype=float).reshape(-1))
        if len(np.intersect1d(b, k)):
            raise ValueError("boundary and bulk overlap")
        if len(self.h_boundary) != len(b):
            raise ValueError("one boundary field per boundary site")
        if not 0.0 <= self.delta_h <= MAX_DELTA_H:
            raise ValueError(f"delta_h must lie in [0, {MAX_DELTA_H}]")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")

    @property
    def n_sites(self) -> int:
        return len(self.boundary) + len(self.bulk)

    def fields(self) -> np.ndarray:
        h = np.full(self.n_sites, float(self.hz_bulk))
        h[self.boundary] = self.h_boundary
        return h

    def model(self, lattice: SSLattice, params: CouplingParams) -> IsingModel:
        """Logical problem with the bulk field on bulk sites and tuned boundary fields."""
        if lattice.n_sites != self.n_sites:
            raise ValueError("spec does not match the lattice")
        base = IsingModel.from_lattice(lattice, params.with_hz(self.hz_bulk))
        return IsingModel(self.fields(), base.edges, base.J)

    def with_fields(self, h) -> "BoundarySpec":
        return replace(self, h_boundary=np.asarray(h, dtype=float))

    def to_text(self) -> str:
        return "".join(f"{int(i)} {float(h)!r}\n" for i, h in zip(self.boundary, self.h_boundary))

    def load_fields(self, text: str) -> "BoundarySpec":
        vals = {}
        for ln in text.splitlines():
            ln = ln.split("#", 1)[0].strip()
            if ln:
                i, h = ln.split()
                vals[int(i)] = float(h)
        if set(vals) != set(self.boundary.tolist()):
            raise ValueError("stored fields do not cover the boundary sites")
        return self.with_fields([vals[int(i)] for i in self.boundary])


def identify_boundary(lattice: SSLattice, defects=(), hz_bulk: float = 0.0, **kw) -> BoundarySpec:
    """Split sites into boundary and bulk.

    Boundary sites have fewer than four square neighbours or touch a defect
    (by any bond).  Defects belong to neither set, so the spec is indexed by
    the sites of ``lattice.remove_sites(defects)``.
    """
    n = lattice.n_sites
    dset = set(int(d) for d in defects)
    for d in dset:
        if not 0 <= d < n:
            raise ValueError(f"defect {d} is not a site")
    flag = lattice.square_degree() < 4
    for d in dset:
        flag[lattice.neighbors(d)] = True
    keep = np.array([i for i in range(n) if i not in dset], dtype=np.int64)
    remap = -np.ones(n, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    boundary = remap[[i for i in keep if flag[i]]] if len(keep) else np.empty(0, np.int64)
    bulk = remap[[i for i in keep if not flag[i]]] if len(keep) else np.empty(0, np.int64)
    boundary = np.asarray(boundary, dtype=np.int64)
    bulk = np.asarray(bulk, dtype=np.int64)
    return BoundarySpec(boundary, bulk, np.full(len(boundary), float(hz_bulk)), float(hz_bulk), **kw)


def _project(h: np.ndarray, spec: BoundarySpec) -> np.ndarray:
    if not spec.sign_constraint or spec.hz_bulk == 0:
        return h
    s = np.sign(spec.hz_bulk)
    return np.where(np.sign(h) * s < 0, 0.0, h)


def gap(spec: BoundarySpec, configs) -> tuple[float, float, float]:
    """(m_bulk, m_boundary, |m_bulk - m_boundary|) over a sample batch."""
    c = np.asarray(configs, dtype=float)
    if c.ndim != 2 or len(c) == 0:
        raise ValueError("need a non-empty (samples, sites) array")
    mb = float(c[:, spec.bulk].mean()) if len(spec.bulk) else float("nan")
    mbd = float(c[:, spec.boundary].mean()) if len(spec.boundary) else mb
    return mb, mbd, abs(mb - mbd)


def mfbc_step(spec: BoundarySpec, configs) -> BoundarySpec:
    c = np.asarray(configs, dtype=float)
    if c.ndim != 2 or len(c) == 0:
        raise ValueError("empty ensemble")
    if c.shape[1] != spec.n_sites:
        raise ValueError("ensemble does not cover every site")
    if len(spec.boundary) == 0:
        return spec
    m_bulk = float(c[:, spec.bulk].mean())
    s_i = c[:, spec.boundary].mean(axis=0)
    h = spec.h_boundary + spec.delta_h * (s_i - m_bulk)
    return spec.with_fields(_project(h, spec))


@dataclass
class MFBCResult:
    spec: BoundarySpec  # final fields
    best: BoundarySpec  # fields at the smallest smoothed gap
    converged: bool
    iterations: int
    gaps: list = field(default_factory=list)
    m_bulk: list = field(default_factory=list)
    m_boundary: list = field(default_factory=list)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "m_bulk", "m_boundary", "gap"])
        for i, (a, b, g) in enumerate(zip(self.m_bulk, self.m_boundary, self.gaps)):
            w.writerow([i, repr(float(a)), repr(float(b)), repr(float(g))])
        return buf.getvalue()


def mfbc_optimize(sampler: Callable[[IsingModel, int], np.ndarray], lattice: SSLattice,
                  params: CouplingParams, spec: BoundarySpec, window: int = 5) -> MFBCResult:
    """Alternate sampling and ``mfbc_step`` until the boundary matches the bulk.

    ``sampler(model, iteration)`` returns retained logical configs for the
    problem with the current boundary fields.  The gap is smoothed over the
    last ``window`` iterations before comparing with ``spec.tol``.
    """
    if len(spec.boundary) == 0:
        return MFBCResult(spec, spec, True, 0)
    gaps, mbs, mbds = [], [], []
    best, best_gap = spec, np.inf
    for it in range(spec.max_iter):
        configs = sampler(spec.model(lattice, params), it)
        mb, mbd, g = gap(spec, configs)
        gaps.append(g)
        mbs.append(mb)
        mbds.append(mbd)
        smooth = abs(np.mean(mbs[-window:]) - np.mean(mbds[-window:]))
        if len(gaps) >= window and smooth < best_gap:
            best, best_gap = spec, smooth
        if len(gaps) >= window and smooth <= spec.tol:
            return MFBCResult(spec, spec, True, it + 1, gaps, mbs, mbds)
        spec = mfbc_step(spec, configs)
    return MFBCResult(spec, best, False, spec.max_iter, gaps, mbs, mbds)
