"""Chimera hardware graph, half-cell embedding, chi-compensation and decoding.

Qubit numbering follows the usual Chimera linear index
``q = ((row * cols + col) * 2 + shore) * 4 + k``.  Shore 0 qubits ("vertical")
couple to the same ``k`` in the cells above and below, shore 1 qubits
("horizontal") to the cells left and right.

Half-cell embedding
-------------------
Dimer ``(u, v)`` of the lattice sits in cell ``(u, v)``.  Its two sites own one
cyclic chain each, made of two vertical and two horizontal qubits of the cell.
The vertical qubits are split into the pairs ``{0,1}|{2,3}`` in even rows and
``{0,2}|{1,3}`` in odd rows; horizontals are split the same way by column
parity.  Pairs from different splittings share exactly one index, so each square
bond between neighbouring dimers lands on exactly one like-indexed external
coupler.  The slot-0 site (smaller x) takes the first pair of each split.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .ising import IsingModel
from .lattice import DIMER, SQUARE, CouplingParams, SSLattice

SHORE = 4
_PAIRS = (((0, 1), (2, 3)), ((0, 2), (1, 3)))

DEFAULT_H_RANGE = 2.0
DEFAULT_J_RANGE = 1.0


class EmbeddingError(ValueError):
    """The lattice does not fit on the hardware graph."""


class DeviceRangeError(ValueError):
    """A compiled field or coupling falls outside the device range."""


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True, eq=False)
class ChimeraGraph:
    rows: int
    cols: int
    dead_qubits: frozenset = frozenset()
    dead_couplers: frozenset = frozenset()

    @property
    def n_qubits(self) -> int:
        return self.rows * self.cols * 2 * SHORE

    def qubit(self, row: int, col: int, shore: int, k: int) -> int:
        return ((row * self.cols + col) * 2 + shore) * SHORE + k

    def coords(self, q: int) -> tuple[int, int, int, int]:
        k = q % SHORE
        shore = (q // SHORE) % 2
        cell = q // (2 * SHORE)
        return cell // self.cols, cell % self.cols, shore, k

    def ideal_couplers(self) -> tuple[list, list]:
        """(internal, external) coupler lists of the defect-free graph."""
        internal, external = [], []
        for r in range(self.rows):
            for c in range(self.cols):
                for a in range(SHORE):
                    for b in range(SHORE):
                        internal.append(_pair(self.qubit(r, c, 0, a), self.qubit(r, c, 1, b)))
                for k in range(SHORE):
                    if r + 1 < self.rows:
                        external.append(_pair(self.qubit(r, c, 0, k), self.qubit(r + 1, c, 0, k)))
                    if c + 1 < self.cols:
                        external.append(_pair(self.qubit(r, c, 1, k), self.qubit(r, c + 1, 1, k)))
        return internal, external

    def is_live_qubit(self, q: int) -> bool:
        return 0 <= q < self.n_qubits and q not in self.dead_qubits

    def is_live_coupler(self, a: int, b: int) -> bool:
        p = _pair(a, b)
        return (self.is_live_qubit(a) and self.is_live_qubit(b)
                and p not in self.dead_couplers and p in self._ideal_set)

    @property
    def _ideal_set(self) -> frozenset:
        cache = self.__dict__.get("_ideal_cache")
        if cache is None:
            i, e = self.ideal_couplers()
            cache = frozenset(i) | frozenset(e)
            object.__setattr__(self, "_ideal_cache", cache)
        return cache

    def live_couplers(self) -> list[tuple[int, int]]:
        i, e = self.ideal_couplers()
        return [p for p in i + e if self.is_live_coupler(*p)]

    def live_qubits(self) -> np.ndarray:
        return np.array([q for q in range(self.n_qubits) if q not in self.dead_qubits], dtype=np.int64)


def build_chimera(rows: int, cols: int, dead_qubits: Iterable[int] = (),
                  dead_couplers: Iterable[tuple[int, int]] = ()) -> ChimeraGraph:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    g = ChimeraGraph(rows, cols)
    dq = frozenset(int(q) for q in dead_qubits)
    for q in dq:
        if not 0 <= q < g.n_qubits:
            raise ValueError(f"dead qubit {q} outside the {rows}x{cols} graph")
    dc = frozenset(_pair(int(a), int(b)) for a, b in dead_couplers)
    for p in dc:
        if p not in g._ideal_set:
            raise ValueError(f"dead coupler {p} is not a coupler of the ideal graph")
    return ChimeraGraph(rows, cols, dq, dc)


def load_defects(text: str) -> tuple[list[int], list[tuple[int, int]]]:
    """Parse a defect list: one qubit id, or two ids for a coupler, per line."""
    qubits, couplers = [], []
    for ln in text.splitlines():
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        tok = re.sub(r"^(qubit|coupler|q|c)\b\s*|^[qc](?=\d)", "", ln).replace(",", " ").split()
        if len(tok) == 1:
            qubits.append(int(tok[0]))
        elif len(tok) == 2:
            couplers.append((int(tok[0]), int(tok[1])))
        else:
            raise ValueError(f"bad defect line: {ln!r}")
    return qubits, couplers


# -- embedding ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Embedding:
    """Half-cell embedding of ``lattice`` on ``graph``.

    ``logical`` is the lattice after excising ``defects`` and dropping bonds
    that use dead couplers; ``kept[i]`` is the original index of logical site i.
    ``chains[i]`` and ``bond_couplers[b]`` are indexed in ``logical`` order.
    """

    lattice: SSLattice
    graph: ChimeraGraph
    logical: SSLattice
    kept: np.ndarray
    chains: np.ndarray  # (n_logical, 4) qubit ids in cyclic order
    bond_couplers: list  # per logical bond, list of (a, b)
    defects: tuple = ()
    dropped_bonds: tuple = ()  # original bond indices lost to dead couplers
    j3: float = -1.0

    @property
    def n_sites(self) -> int:
        return self.logical.n_sites

    def chain_couplers(self, site: int) -> list[tuple[int, int]]:
        c = self.chains[site]
        return [_pair(int(c[i]), int(c[(i + 1) % 4])) for i in range(4)]

    def couplers_used(self) -> int:
        return 4 * self.n_sites + sum(len(b) for b in self.bond_couplers)


def _site_cells(lattice: SSLattice):
    """Per site: dimer grid (u, v) and slot (0 = smaller x)."""
    n = lattice.n_sites
    partner = -np.ones(n, dtype=np.int64)
    for a, b in lattice.dimer_bonds:
        if partner[a] >= 0 or partner[b] >= 0:
            raise EmbeddingError("site with more than one dimer bond")
        partner[a], partner[b] = b, a
    if np.any(partner < 0):
        raise EmbeddingError("every site needs a dimer partner for the half-cell embedding")
    uv = np.empty((n, 2), dtype=np.int64)
    slot = np.empty(n, dtype=np.int64)
    for i in range(n):
        j = partner[i]
        (xi, yi), (xj, yj) = lattice.coords[i], lattice.coords[j]
        px, py = min(xi, xj), min(yi, yj)
        uv[i] = ((px + py) // 2, (px - py) // 2)
        slot[i] = 0 if xi < xj else 1
    return uv - uv.min(axis=0), slot


def half_cell_embed(lattice: SSLattice, graph: ChimeraGraph | None = None,
                    j3: float = -1.0) -> Embedding:
    if lattice.boundary == "periodic":
        raise EmbeddingError("Chimera hardware is open; periodic lattices cannot be embedded")
    uv, slot = _site_cells(lattice)
    rows, cols = int(uv[:, 0].max()) + 1, int(uv[:, 1].max()) + 1
    if graph is None:
        graph = build_chimera(rows, cols)
    if graph.rows < rows or graph.cols < cols:
        raise EmbeddingError(f"lattice needs a {rows}x{cols} Chimera graph, have "
                             f"{graph.rows}x{graph.cols}")
    n = lattice.n_sites
    vset = np.empty((n, 2), dtype=np.int64)
    hset = np.empty((n, 2), dtype=np.int64)
    chains = np.empty((n, 4), dtype=np.int64)
    for i in range(n):
        u, v = uv[i]
        vk = _PAIRS[u % 2][slot[i]]
        hk = _PAIRS[v % 2][slot[i]]
        vset[i], hset[i] = vk, hk
        q = lambda shore, k: graph.qubit(int(u), int(v), shore, k)  # noqa: E731
        chains[i] = (q(0, vk[0]), q(1, hk[0]), q(0, vk[1]), q(1, hk[1]))
    defects = set()
    for i in range(n):
        c = chains[i]
        if any(not graph.is_live_qubit(int(x)) for x in c):
            defects.add(i)
        elif any(not graph.is_live_coupler(int(c[k]), int(c[(k + 1) % 4])) for k in range(4)):
            defects.add(i)
    couplers = []
    for (a, b), kind in zip(lattice.bonds, lattice.kinds):
        if kind == DIMER:
            ca, cb = chains[a], chains[b]
            # vertical of one chain with horizontal of the other
            cs = [_pair(int(x), int(y)) for x in ca[[0, 2]] for y in cb[[1, 3]]]
            cs += [_pair(int(x), int(y)) for x in ca[[1, 3]] for y in cb[[0, 2]]]
        else:
            du, dv = uv[b] - uv[a]
            if abs(du) + abs(dv) != 1:
                raise EmbeddingError(f"square bond {a}-{b} joins non-adjacent cells")
            shore, sa, sb = (1, hset[a], hset[b]) if du == 0 else (0, vset[a], vset[b])
            common = set(sa.tolist()) & set(sb.tolist())
            if len(common) != 1:
                raise EmbeddingError("chain index convention violated")
            k = common.pop()
            cs = [_pair(graph.qubit(int(uv[a, 0]), int(uv[a, 1]), shore, k),
                        graph.qubit(int(uv[b, 0]), int(uv[b, 1]), shore, k))]
        couplers.append(cs)
    dead_bond = np.array([any(not graph.is_live_coupler(*p) for p in cs) for cs in couplers],
                         dtype=bool)
    # bonds touching a defective site go with the site; only report the rest
    touches = np.array([a in defects or b in defects for a, b in lattice.bonds], dtype=bool)
    dropped = tuple(int(x) for x in np.flatnonzero(dead_bond & ~touches))
    reduced = lattice.drop_bonds(dead_bond & ~touches)
    bond_keep = np.flatnonzero(~(dead_bond & ~touches))
    logical, kept = reduced.remove_sites(sorted(defects))
    keep_site = np.zeros(n, dtype=bool)
    keep_site[kept] = True
    rb = reduced.bonds
    bond_keep = bond_keep[keep_site[rb[:, 0]] & keep_site[rb[:, 1]]]
    return Embedding(lattice, graph, logical, kept, chains[kept],
                     [couplers[k] for k in bond_keep], tuple(sorted(defects)), dropped, j3)


def dump_embedding(emb: Embedding) -> str:
    lines = [f"# rows {emb.graph.rows} cols {emb.graph.cols} j3 {emb.j3} "
             f"defects {' '.join(map(str, emb.defects)) or '-'}"]
    for i, c in zip(emb.kept, emb.chains):
        lines.append(f"{int(i)}: " + " ".join(str(int(q)) for q in c))
    return "\n".join(lines) + "\n"


# -- physical problems ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PhysicalProblem:
    graph: ChimeraGraph
    h: np.ndarray  # per qubit, zero on dead qubits
    edges: np.ndarray  # (m, 2)
    J: np.ndarray
    chi_b: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float))
        object.__setattr__(self, "edges", np.asarray(self.edges, dtype=np.int64).reshape(-1, 2))
        object.__setattr__(self, "J", np.asarray(self.J, dtype=float).reshape(-1))

    def to_ising(self) -> IsingModel:
        return IsingModel(self.h, self.edges, self.J)

    def coupling_dict(self) -> dict:
        return {(int(a), int(b)): float(j) for (a, b), j in zip(self.edges, self.J)}

    def check_range(self, h_range: float = DEFAULT_H_RANGE, j_range: float = DEFAULT_J_RANGE):
        if np.any(np.abs(self.h) > h_range + 1e-12):
            raise DeviceRangeError(f"field magnitude {np.abs(self.h).max():.4g} exceeds {h_range}")
        if len(self.J) and np.any(np.abs(self.J) > j_range + 1e-12):
            raise DeviceRangeError(f"coupling magnitude {np.abs(self.J).max():.4g} exceeds {j_range}")

    def with_offsets(self, offsets) -> "PhysicalProblem":
        """Problem seen by the device when flux offsets are applied (h - offset)."""
        return PhysicalProblem(self.graph, self.h - np.asarray(offsets, dtype=float),
                               self.edges, self.J, self.chi_b, dict(self.meta))

    def to_text(self) -> str:
        lines = ["[qubits]"]
        live = set(self.graph.live_qubits().tolist())
        lines += [f"{q} {float(self.h[q])!r}" for q in sorted(live)]
        lines.append("[couplers]")
        lines += [f"{a} {b} {float(j)!r}" for (a, b), j in zip(self.edges, self.J)]
        lines.append("[metadata]")
        meta = {"rows": self.graph.rows, "cols": self.graph.cols, "chi_b": repr(float(self.chi_b)),
                "dead_qubits": " ".join(map(str, sorted(self.graph.dead_qubits))),
                "dead_couplers": " ".join(f"{a}-{b}" for a, b in sorted(self.graph.dead_couplers))}
        meta.update({k: v for k, v in self.meta.items() if k not in meta})
        lines += [f"{k} = {v}" for k, v in meta.items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PhysicalProblem":
        section = None
        hs, edges, js, meta = {}, [], [], {}
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln or ln.startswith("#"):
                continue
            if ln.startswith("["):
                section = ln.strip("[]")
                continue
            if section == "qubits":
                q, v = ln.split()
                hs[int(q)] = float(v)
            elif section == "couplers":
                a, b, v = ln.split()
                edges.append((int(a), int(b)))
                js.append(float(v))
            elif section == "metadata":
                k, _, v = ln.partition("=")
                meta[k.strip()] = v.strip()
            else:
                raise ValueError(f"line outside a section: {ln!r}")
        dq = [int(x) for x in meta.pop("dead_qubits", "").split()]
        dc = [tuple(map(int, x.split("-"))) for x in meta.pop("dead_couplers", "").split()]
        graph = build_chimera(int(meta.pop("rows")), int(meta.pop("cols")), dq, dc)
        h = np.zeros(graph.n_qubits)
        for q, v in hs.items():
            h[q] = v
        chi = float(meta.pop("chi_b", 0.0))
        return cls(graph, h, np.array(edges, dtype=np.int64).reshape(-1, 2), np.array(js), chi, meta)


def _logical_targets(emb: Embedding, target) -> IsingModel:
    if isinstance(target, IsingModel):
        if target.n != emb.n_sites or len(target.J) != len(emb.logical.bonds):
            raise ValueError("logical model does not match the embedded lattice")
        if not np.array_equal(target.edges, emb.logical.bonds):
            raise ValueError("logical model edges must follow the embedded lattice bonds")
        return target
    return IsingModel.from_lattice(emb.logical, target)


def logical_chi_multipliers(chi_b: float, j1: float, j2: float, j3: float = -1.0):
    """First-order logical multipliers (J2, J1, h) for per-coupler strengths j1, j2, j3."""
    m2 = 1 + 4 * chi_b * j3
    m1 = 1 + 4 * chi_b * j3 + 2 * chi_b * j2
    mh = 1 + chi_b * j1 + 2 * chi_b * j2 + 2 * chi_b * j3
    return m2, m1, mh


def compile_physical(emb: Embedding, target, chi_b: float = 0.0, precorrect: bool = True,
                     h_range: float = DEFAULT_H_RANGE, j_range: float = DEFAULT_J_RANGE,
                     check: bool = True) -> PhysicalProblem:
    """Compile a logical problem (``CouplingParams`` or a per-site ``IsingModel``).

    Each dimer bond is split evenly over its 8 internal couplers, each logical
    field evenly over the 4 chain qubits, and each square bond goes unchanged
    onto its external coupler.  With ``precorrect`` the inputs are divided by
    the first-order chi multipliers so the device-perceived logical problem
    matches the target.
    """
    if abs(chi_b) >= 0.1:
        raise ValueError("chi_b outside the first-order regime |chi_b| < 0.1")
    model = _logical_targets(emb, target)
    lat = emb.logical
    j3 = emb.j3
    jin = np.where(lat.kinds == DIMER, model.J / 8.0, model.J)
    if precorrect and chi_b != 0.0:
        m2 = 1 + 4 * chi_b * j3
        jin = np.where(lat.kinds == DIMER, jin / m2, jin)
        j2site = np.zeros(lat.n_sites)
        for (a, b), k, j in zip(lat.bonds, lat.kinds, jin):
            if k == DIMER:
                j2site[a] = j2site[b] = j
        jin = np.array([j / (1 + 4 * chi_b * j3 + chi_b * (j2site[a] + j2site[b]))
                        if k == SQUARE else j
                        for (a, b), k, j in zip(lat.bonds, lat.kinds, jin)])
    g = emb.graph
    coup: dict[tuple[int, int], float] = {}
    for i in range(emb.n_sites):
        for p in emb.chain_couplers(i):
            coup[p] = j3
    for cs, j in zip(emb.bond_couplers, jin):
        for p in cs:
            coup[p] = coup.get(p, 0.0) + float(j)
    h = np.zeros(g.n_qubits)
    if precorrect and chi_b != 0.0:
        # logical fields are linear in the chain fields: h_L = P (1 + chi J) P^T x / 4
        owner = -np.ones(g.n_qubits, dtype=np.int64)
        for i, c in enumerate(emb.chains):
            owner[c] = i
        A = np.eye(emb.n_sites)
        for (a, b), j in coup.items():
            oa, ob = owner[a], owner[b]
            A[oa, ob] += chi_b * j / 4.0
            A[ob, oa] += chi_b * j / 4.0
        hq = np.linalg.solve(A, model.h) / 4.0
    else:
        hq = model.h / 4.0
    for i, c in enumerate(emb.chains):
        h[c] = hq[i]
    pairs = sorted(coup)
    prob = PhysicalProblem(g, h, np.array(pairs, dtype=np.int64).reshape(-1, 2),
                           np.array([coup[p] for p in pairs]), chi_b,
                           {"precorrected": str(bool(precorrect))})
    if check:
        prob.check_range(h_range, j_range)
    return prob


def apply_physical_chi(problem: PhysicalProblem, chi_b: float | None = None) -> PhysicalProblem:
    """Device-perceived problem: J + chi J.J (all pairs) and h + chi J.h.

    The result carries ``chi_b = 0`` since the leakage is now explicit.
    """
    chi = problem.chi_b if chi_b is None else chi_b
    n = problem.graph.n_qubits
    Jm = np.zeros((n, n))
    a, b = problem.edges[:, 0], problem.edges[:, 1]
    Jm[a, b] = problem.J
    Jm[b, a] = problem.J
    h = problem.h + chi * (Jm @ problem.h)
    Jn = Jm + chi * (Jm @ Jm)
    np.fill_diagonal(Jn, 0.0)
    iu, ju = np.nonzero(np.triu(Jn, 1))
    meta = dict(problem.meta, chi_applied=repr(float(chi)))
    return PhysicalProblem(problem.graph, h, np.stack([iu, ju], axis=1), Jn[iu, ju], 0.0, meta)


def contract_logical(emb: Embedding, problem: PhysicalProblem, tol: float = 1e-15) -> IsingModel:
    """Sum fields and couplings over chains; intra-chain couplings are constant and dropped.

    The result may contain couplings between sites that are not bonded in the
    lattice (from chi leakage); qubits outside every chain are ignored.
    """
    owner = -np.ones(problem.graph.n_qubits, dtype=np.int64)
    for i, c in enumerate(emb.chains):
        owner[c] = i
    h = np.zeros(emb.n_sites)
    np.add.at(h, owner[owner >= 0], problem.h[owner >= 0])
    acc: dict[tuple[int, int], float] = {}
    for (a, b), j in zip(problem.edges, problem.J):
        oa, ob = owner[a], owner[b]
        if oa < 0 or ob < 0 or oa == ob:
            continue
        p = _pair(int(oa), int(ob))
        acc[p] = acc.get(p, 0.0) + float(j)
    pairs = sorted(p for p, v in acc.items() if abs(v) > tol)
    return IsingModel(h, np.array(pairs, dtype=np.int64).reshape(-1, 2), [acc[p] for p in pairs])


def inject_disorder(problem: PhysicalProblem, seed, sigma_h: float = 0.0,
                    sigma_j: float = 0.0) -> PhysicalProblem:
    if sigma_h < 0 or sigma_j < 0:
        raise ValueError("disorder widths must be non-negative")
    rng = np.random.default_rng(seed)
    dh = rng.normal(0.0, sigma_h, size=problem.h.shape) if sigma_h > 0 else 0.0
    dj = rng.normal(0.0, sigma_j, size=problem.J.shape) if sigma_j > 0 else 0.0
    live = np.ones(problem.graph.n_qubits, dtype=bool)
    live[list(problem.graph.dead_qubits)] = False
    h = problem.h + np.where(live, dh, 0.0)
    return PhysicalProblem(problem.graph, h, problem.edges.copy(), problem.J + dj,
                           problem.chi_b, dict(problem.meta))


@dataclass
class CalibrationResult:
    offsets: np.ndarray
    residual: np.ndarray  # per-qubit mean magnetization at the last measurement
    iterations: int
    converged: bool
    history: list = field(default_factory=list)  # max |<s>| per iteration


def calibrate_flux_offsets(sampler: Callable[[PhysicalProblem], np.ndarray],
                           problem: PhysicalProblem, max_iter: int = 50, eta: float = 0.1,
                           tol: float = 0.05, fraction: float = 1.0,
                           qubits=None) -> CalibrationResult:
    """Descend flux offsets until per-qubit mean magnetizations vanish.

    ``sampler(problem)`` returns a ``(samples, n_qubits)`` spin array.  The
    device field is ``h - offset`` and the update is ``offset -= eta * <s>``.
    Convergence needs ``|<s_i>| <= tol`` on at least ``fraction`` of ``qubits``
    (default: all chain qubits, i.e. qubits carrying a coupler).
    """
    n = problem.graph.n_qubits
    if qubits is None:
        qubits = np.unique(problem.edges)
    qubits = np.asarray(qubits, dtype=np.int64)
    offsets = np.zeros(n)
    residual = np.full(n, np.nan)
    history = []
    for it in range(max_iter + 1):
        if it == max_iter and max_iter > 0:
            break
        samples = np.asarray(sampler(problem.with_offsets(offsets)), dtype=float)
        residual = samples.mean(axis=0)
        worst = np.abs(residual[qubits])
        history.append(float(worst.max()) if len(worst) else 0.0)
        if np.mean(worst <= tol) >= fraction:
            return CalibrationResult(offsets, residual, it, True, history)
        if max_iter == 0:
            break
        offsets[qubits] -= eta * residual[qubits]
    return CalibrationResult(offsets, residual, max_iter, False, history)


def decode(emb: Embedding, sample, seed=None, rng: np.random.Generator | None = None):
    """Majority vote per chain; ties go to a seeded coin flip.

    Accepts one sample (n_qubits,) or a batch (k, n_qubits).  Returns
    ``(configs, broken)`` where ``broken`` lists the logical sites whose chain
    was not unanimous (per sample for a batch).
    """
    s = np.asarray(sample)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    if s.shape[1] != emb.graph.n_qubits:
        raise ValueError(f"sample covers {s.shape[1]} qubits, graph has {emb.graph.n_qubits}")
    chain_vals = s[:, emb.chains]  # (k, n_sites, 4)
    if np.any(np.abs(chain_vals) != 1):
        raise ValueError("missing or non-spin values on chain qubits")
    tot = chain_vals.sum(axis=2)
    out = np.sign(tot).astype(np.int8)
    ties = tot == 0
    if ties.any():
        rng = rng if rng is not None else np.random.default_rng(seed)
        out[ties] = rng.choice(np.array([-1, 1], dtype=np.int8), size=int(ties.sum()))
    broken_mask = np.abs(tot) != 4
    broken = [np.flatnonzero(b).tolist() for b in broken_mask]
    if single:
        return out[0], broken[0]
    return out, broken


def expand(emb: Embedding, config, fill: int = 1) -> np.ndarray:
    """Physical sample with every chain set to its logical spin."""
    c = np.asarray(config)
    out = np.full(c.shape[:-1] + (emb.graph.n_qubits,), fill, dtype=np.int8)
    out[..., emb.chains] = c[..., :, None]
    return out


def params_model(emb: Embedding, params: CouplingParams) -> IsingModel:
    return IsingModel.from_lattice(emb.logical, params)
