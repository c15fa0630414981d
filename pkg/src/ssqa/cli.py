"""Command-line driver: ``ssqa <experiment> [options]``.

Every run is described by a nested config (YAML or JSON file, overridden by
flags).  The fully resolved config, master seed included, is written as a
``# config: {...}`` line at the top of every output file.
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import boundary as bnd
from . import chimera, exact, observables
from .engine import AnnealSchedule, chain_seed
from .ising import IsingModel
from .lattice import CouplingParams, build_lattice, config_to_str
from .qemc import Ensemble, QEMCConfig, chain_trace, run_chain, scan_pause_parameters

log = logging.getLogger("ssqa")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EMBEDDING = 3
EXIT_NOT_CONVERGED = 4

EXPERIMENTS = ("sweep", "qemc", "sf", "exact", "embed", "calibrate-boundary", "scan-pause")

DEFAULTS = {
    "experiment": None,
    "seed": 0,
    "out": "out",
    "workers": 1,
    "lattice": {"cells": [2, 2], "boundary": "periodic", "cell": "logical"},
    "couplings": {"j1": 1.0, "j2": 1.0, "hz": 0.0,
                  "hz_grid": [0.0, 8.0, 0.1], "ratio_grid": [1.0, 1.0, 1.0]},
    "schedule": {"s_p": 0.4, "t_p": 2.0, "t_r": 1.0, "temperature": None, "trotter": 16,
                 "sweeps_per_unit": 10.0, "table": None},
    "qemc": {"chain_length": 100, "burn_in": 50, "init_policy": "all-up", "chains": 5},
    "embedding": {"use": False, "chi_b": 0.0, "precorrect": True, "defects": None,
                  "dead_qubits": [], "sigma_h": 0.0, "sigma_j": 0.0},
    "boundary": {"mfbc": "auto", "delta_h": 0.05, "max_iter": 500, "tol": 0.03,
                 "chain_length": 10},
    "scan": {"s_p": [0.3, 0.4, 0.5, 0.7], "t_p": [0.0, 2.0, 8.0], "repetitions": 3},
    "sf": {"ensembles": [], "normalization": "per-site", "path_points": 64},
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    data = json.loads(text) if path.endswith(".json") else yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return data


@dataclass
class RunConfig:
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    def header(self) -> str:
        return "# config: " + json.dumps(self.data, sort_keys=True) + "\n"

    @property
    def out(self) -> Path:
        return Path(self.data["out"])

    def params(self, hz=None, ratio=None) -> CouplingParams:
        c = self.data["couplings"]
        j1 = float(c["j1"])
        j2 = float(c["j2"]) if ratio is None else float(ratio) * j1
        return CouplingParams(j1, j2, float(c["hz"]) if hz is None else float(hz))

    def lattice(self):
        lat = self.data["lattice"]
        cx, cy = lat["cells"]
        return build_lattice(int(cx), int(cy), lat["boundary"], lat["cell"])

    def qemc(self, n_sites: int | None = None, hz: float = 0.0) -> QEMCConfig:
        """Chain settings; policy 'aligned' starts every spin along the field (up at hz = 0)."""
        q = self.data["qemc"]
        if q["init_policy"] == "aligned":
            if n_sites is None:
                return QEMCConfig(int(q["chain_length"]), int(q["burn_in"]), "all-up")
            spin = -1 if hz > 0 else 1
            return QEMCConfig(int(q["chain_length"]), int(q["burn_in"]), "given",
                              tuple([spin] * n_sites))
        return QEMCConfig(int(q["chain_length"]), int(q["burn_in"]), q["init_policy"])

    def schedule(self, max_abs_j: float = 1.0) -> AnnealSchedule:
        s = self.data["schedule"]
        temp = s["temperature"]
        if temp is None:
            temp = 0.05 * max_abs_j
        kw = dict(temperature=float(temp), trotter=int(s["trotter"]),
                  sweeps_per_unit=float(s["sweeps_per_unit"]), t_r=float(s["t_r"]),
                  s_p=float(s["s_p"]), t_p=float(s["t_p"]))
        if s["table"]:
            return AnnealSchedule.from_table(Path(s["table"]).read_text(), **kw)
        return AnnealSchedule(**kw)


def validate(data: dict) -> RunConfig:
    if data.get("experiment") not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
    lat = data["lattice"]
    if len(lat["cells"]) != 2 or min(int(x) for x in lat["cells"]) < 1:
        raise ConfigError("lattice.cells must be two positive integers")
    if lat["boundary"] not in ("open", "periodic") or lat["cell"] not in ("logical", "square"):
        raise ConfigError("bad lattice boundary or cell")
    for key in ("hz_grid", "ratio_grid"):
        g = data["couplings"][key]
        if len(g) != 3 or float(g[2]) <= 0 or float(g[1]) < float(g[0]):
            raise ConfigError(f"couplings.{key} must be [start, stop, step] with step > 0")
    q = data["qemc"]
    if not 0 <= int(q["burn_in"]) < int(q["chain_length"]) or int(q["chains"]) < 1:
        raise ConfigError("need 0 <= burn_in < chain_length and chains >= 1")
    if not 0 <= float(data["boundary"]["delta_h"]) <= bnd.MAX_DELTA_H:
        raise ConfigError("boundary.delta_h must lie in [0, 0.05]")
    if int(data["workers"]) < 1:
        raise ConfigError("workers must be >= 1")
    try:
        RunConfig(data).schedule()
        RunConfig(data).qemc()
        RunConfig(data).params()
    except (ValueError, TypeError, OSError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(data)


def _grid(spec) -> np.ndarray:
    a, b, step = (float(x) for x in spec)
    n = int(round((b - a) / step))
    return np.round(a + step * np.arange(n + 1), 10)


# -- problem assembly ---------------------------------------------------------------

@dataclass
class Setup:
    lattice: object  # logical lattice actually sampled
    logical: IsingModel
    problem: object  # what the engine anneals
    embedding: object = None
    spec: object = None  # BoundarySpec when MFBC applies


def build_setup(cfg: RunConfig, params: CouplingParams, fields=None) -> Setup:
    full = cfg.lattice()
    emb_cfg = cfg["embedding"]
    emb = None
    lattice = full
    if emb_cfg["use"]:
        dq = list(emb_cfg["dead_qubits"])
        dc = []
        if emb_cfg["defects"]:
            q, c = chimera.load_defects(Path(emb_cfg["defects"]).read_text())
            dq += q
            dc += c
        base = chimera.half_cell_embed(full)
        graph = chimera.build_chimera(base.graph.rows, base.graph.cols, dq, dc)
        emb = chimera.half_cell_embed(full, graph)
        lattice = emb.logical
    logical = IsingModel.from_lattice(lattice, params)
    if fields is not None:
        logical = IsingModel(fields, logical.edges, logical.J)
    problem = logical
    if emb is not None:
        problem = chimera.compile_physical(emb, logical, float(emb_cfg["chi_b"]),
                                           bool(emb_cfg["precorrect"]))
        if emb_cfg["chi_b"]:
            problem = chimera.apply_physical_chi(problem)
        if emb_cfg["sigma_h"] or emb_cfg["sigma_j"]:
            problem = chimera.inject_disorder(problem, cfg["seed"], float(emb_cfg["sigma_h"]),
                                              float(emb_cfg["sigma_j"]))
    return Setup(lattice, logical, problem, emb)


def _max_abs_j(setup: Setup) -> float:
    m = setup.problem.to_ising() if hasattr(setup.problem, "to_ising") else setup.problem
    return float(np.abs(m.J).max()) if len(m.J) else 1.0


def _mfbc_applies(cfg: RunConfig, setup: Setup) -> bool:
    mode = cfg["boundary"]["mfbc"]
    if mode == "auto":
        return cfg["lattice"]["boundary"] == "open" or bool(setup.embedding and setup.embedding.defects)
    return bool(mode)


def _boundary_spec(cfg: RunConfig, setup: Setup, params: CouplingParams):
    b = cfg["boundary"]
    kw = dict(hz_bulk=params.hz, delta_h=float(b["delta_h"]), max_iter=int(b["max_iter"]),
              tol=float(b["tol"]))
    if setup.embedding is not None:
        emb = setup.embedding
        return bnd.identify_boundary(emb.lattice.drop_bonds(
            np.isin(np.arange(len(emb.lattice.bonds)), emb.dropped_bonds)), emb.defects, **kw)
    return bnd.identify_boundary(setup.lattice, (), **kw)


def calibrate(cfg: RunConfig, params: CouplingParams, seed: int):
    """MFBC loop with short warm-started chains; returns (result, setup)."""
    setup = build_setup(cfg, params)
    spec = _boundary_spec(cfg, setup, params)
    schedule = cfg.schedule(_max_abs_j(setup))
    n_iter_chain = int(cfg["boundary"]["chain_length"])
    state = {"init": np.full(setup.lattice.n_sites, -1 if params.hz > 0 else 1, dtype=np.int8)}

    def sampler(model: IsingModel, it: int):
        s = build_setup(cfg, params, fields=model.h)
        c = QEMCConfig(n_iter_chain, n_iter_chain // 2, "given", tuple(state["init"].tolist()))
        ens = run_chain(s.problem, schedule, c, seed, embedding=s.embedding, logical=s.logical,
                        chain_index=10_000 + it)
        state["init"] = ens.configs[-1]
        return ens.retained

    return bnd.mfbc_optimize(sampler, setup.lattice, params, spec), setup


def run_point(cfg: RunConfig, params: CouplingParams, seed: int, fields=None) -> tuple:
    """Run ``qemc.chains`` chains at one parameter point; returns (setup, ensembles)."""
    setup = build_setup(cfg, params, fields)
    schedule = cfg.schedule(_max_abs_j(setup))
    qc = cfg.qemc(setup.lattice.n_sites, params.hz)
    ens = [run_chain(setup.problem, schedule, qc, seed, embedding=setup.embedding,
                     logical=setup.logical, chain_index=k)
           for k in range(int(cfg["qemc"]["chains"]))]
    return setup, ens


# -- output helpers -------------------------------------------------------------------

def write_output(cfg: RunConfig, name: str, body: str) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / name
    path.write_text(cfg.header() + body)
    return path


def _csv(rows, header) -> str:
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


# -- experiments ------------------------------------------------------------------------

def cmd_exact(cfg: RunConfig) -> int:
    lat = cfg.lattice()
    params = cfg.params()
    gm = exact.brute_force_ground(lat, params)
    write_output(cfg, "manifold.txt", exact.dump_manifold(gm))
    curve = exact.exact_magnetization_curve(lat, params.j1, params.j2, _grid(cfg["couplings"]["hz_grid"]))
    write_output(cfg, "magnetization_curve.csv",
                 _csv([(float(h), float(m)) for h, m in zip(curve.hz, curve.m)], ["hz", "m"]))
    write_output(cfg, "critical_fields.csv",
                 _csv([(float(h),) for h in curve.critical_fields], ["hz_critical"]))
    print(f"sites {lat.n_sites} ground energy {gm.energy:.10g} degeneracy {gm.degeneracy} "
          f"m {gm.magnetization:.6f}")
    print("critical fields " + " ".join(f"{h:.6g}" for h in curve.critical_fields))
    return EXIT_OK


def cmd_embed(cfg: RunConfig) -> int:
    cfg.data["embedding"]["use"] = True
    setup = build_setup(cfg, cfg.params())
    emb = setup.embedding
    write_output(cfg, "embedding.txt", chimera.dump_embedding(emb))
    write_output(cfg, "physical_problem.txt", setup.problem.to_text())
    print(f"logical sites {emb.n_sites} (defects {len(emb.defects)}) qubits "
          f"{4 * emb.n_sites} couplers {emb.couplers_used()} on a "
          f"{emb.graph.rows}x{emb.graph.cols} Chimera graph")
    return EXIT_OK


def _ensemble_files(cfg: RunConfig, tag: str, ensembles, setup: Setup):
    for k, e in enumerate(ensembles):
        e.metadata["config"] = cfg.data
        write_output(cfg, f"{tag}ensemble_{k}.txt", e.to_text())
        tr = chain_trace(e)
        write_output(cfg, f"{tag}trace_{k}.csv",
                     _csv([(i, float(a), float(b)) for i, (a, b) in enumerate(tr)],
                          ["iteration", "energy", "m"]))


def cmd_qemc(cfg: RunConfig) -> int:
    params = cfg.params()
    setup, ens = run_point(cfg, params, int(cfg["seed"]))
    _ensemble_files(cfg, "", ens, setup)
    ms = [e.mean_magnetization() for e in ens]
    es = [e.mean_energy() for e in ens]
    rows = [(k, float(m), float(e)) for k, (m, e) in enumerate(zip(ms, es))]
    write_output(cfg, "summary.csv", _csv(rows, ["chain", "m", "energy"]))
    print(f"m {np.mean(ms):.6f} +- {np.std(ms) / np.sqrt(len(ms)):.6f} energy {np.mean(es):.6f}")
    return EXIT_OK


def cmd_sf(cfg: RunConfig) -> int:
    files = cfg["sf"]["ensembles"]
    if files:
        configs = np.concatenate([Ensemble.from_text(Path(f).read_text()).retained for f in files])
        lattice = cfg.lattice()
        if cfg["embedding"]["use"]:
            lattice = build_setup(cfg, cfg.params()).lattice
    else:
        setup, ens = run_point(cfg, cfg.params(), int(cfg["seed"]))
        configs = np.concatenate([e.retained for e in ens])
        lattice = setup.lattice
    grid = observables.structure_factor(configs, lattice, normalization=cfg["sf"]["normalization"])
    write_output(cfg, "sf_grid.csv", grid.to_csv())
    cut = observables.sf_cut(grid, n_points=int(cfg["sf"]["path_points"]))
    write_output(cfg, "sf_cut.csv", cut.to_csv())
    print("argmax q = (%.4f, %.4f)" % grid.argmax())
    return EXIT_OK


def cmd_calibrate(cfg: RunConfig) -> int:
    params = cfg.params()
    res, _ = calibrate(cfg, params, int(cfg["seed"]))
    write_output(cfg, "boundary_fields.txt", res.best.to_text())
    write_output(cfg, "gap_trace.csv", res.trace_csv())
    print(f"converged {res.converged} after {res.iterations} iterations; "
          f"last gap {res.gaps[-1] if res.gaps else 0.0:.4f}")
    return EXIT_OK if res.converged else EXIT_NOT_CONVERGED


def cmd_scan(cfg: RunConfig) -> int:
    params = cfg.params()
    setup = build_setup(cfg, params)
    sc = cfg["scan"]
    grid = [(a, b) for a in sc["s_p"] for b in sc["t_p"]]
    rows = scan_pause_parameters(setup.problem, cfg.schedule(_max_abs_j(setup)), grid,
                                 int(sc["repetitions"]), cfg.qemc(setup.lattice.n_sites, params.hz),
                                 int(cfg["seed"]),
                                 embedding=setup.embedding, logical=setup.logical)
    write_output(cfg, "pause_scan.csv", figure_2c(rows))
    for r in rows:
        print(f"s_p {r.s_p:.3f} t_p {r.t_p:.3f} mean {r.mean:.4f} +- {r.stderr:.4f}")
    return EXIT_OK


def _sweep_cell(args):
    cfg_data, i, j, ratio, hz = args
    cfg = RunConfig(cfg_data)
    seed = chain_seed(int(cfg["seed"]), i * 100_003 + j)
    params = cfg.params(hz=hz, ratio=ratio)
    try:
        fields = None
        setup = build_setup(cfg, params)
        if _mfbc_applies(cfg, setup):
            res, _ = calibrate(cfg, params, seed)
            fields = res.best.fields()
        setup, ens = run_point(cfg, params, seed, fields)
        retained = np.concatenate([e.retained for e in ens])
        energies = np.concatenate([e.retained_energies for e in ens])
        try:
            motifs = observables.motif_histogram(retained, setup.lattice)
        except ValueError:
            motifs = Counter()
        return i, j, float(retained.mean()), float(energies.mean()) / setup.lattice.n_sites, motifs, ""
    except Exception as exc:  # recorded per cell, sweep continues
        return i, j, float("nan"), float("nan"), Counter(), f"{type(exc).__name__}: {exc}"


def run_sweep(cfg: RunConfig) -> observables.PhaseDiagramGrid:
    hz = _grid(cfg["couplings"]["hz_grid"])
    ratio = _grid(cfg["couplings"]["ratio_grid"])
    m = np.full((len(ratio), len(hz)), np.nan)
    en = np.full_like(m, np.nan)
    motifs = [[Counter() for _ in hz] for _ in ratio]
    errors = []
    tasks = [(cfg.data, i, j, float(r), float(h)) for i, r in enumerate(ratio) for j, h in enumerate(hz)]
    workers = int(cfg["workers"])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_cell, tasks))
    else:
        results = [_sweep_cell(t) for t in tasks]
    for i, j, mv, ev, mo, err in sorted(results, key=lambda r: (r[0], r[1])):
        m[i, j], en[i, j], motifs[i][j] = mv, ev, mo
        if err:
            errors.append((float(ratio[i]), float(hz[j]), err))
    bounds = []
    for i in range(len(ratio)):
        ok = np.isfinite(m[i])
        bounds.append(observables.detect_phase_boundary(hz[ok], m[i][ok]) if ok.sum() >= 2 else [])
    grid = observables.PhaseDiagramGrid(hz, ratio, m, en, motifs, bounds)
    grid.errors = errors
    return grid


def cmd_sweep(cfg: RunConfig) -> int:
    grid = run_sweep(cfg)
    emit_figure_data({"phase_diagram": grid}, "3a", cfg)
    if grid.errors:
        write_output(cfg, "errors.csv", _csv(grid.errors, ["j2_over_j1", "hz", "error"]))
    print(f"{grid.m.size} cells, {len(grid.errors)} failed; boundaries "
          + "; ".join(" ".join(f"{b:.3g}" for b in bs) for bs in grid.boundaries))
    return EXIT_OK


# -- figure data -------------------------------------------------------------------------

def figure_2c(rows) -> str:
    return _csv([(r.s_p, r.t_p, r.mean, r.stderr, r.raw_mean, r.n_samples) for r in rows],
                ["s_p", "t_p", "mean_energy", "stderr", "raw_mean_energy", "n_samples"])


FIGURES = ("2a", "2b", "2c", "3a", "3b", "3c", "3d", "3e", "3f", "4a", "4b", "4c", "4d", "4e")


def emit_figure_data(results: dict, figure: str, cfg: RunConfig) -> list[Path]:
    """Write the plot-ready data layer of one figure; returns the files written.

    Expected ``results`` keys: ``ensembles`` (2a, 2b), ``scan_rows`` (2c),
    ``phase_diagram`` (3a, 3b), ``config`` + ``lattice`` (3c-3f),
    ``sf_grid`` (4a-4d), ``sf_grids`` mapping hz -> SFGrid (4e).
    """
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure id {figure!r}; expected one of {FIGURES}")
    out = []
    try:
        if figure == "2a":
            rows = []
            for label, ens in results["ensembles"].items():
                for e in observables.rescale_energies(np.concatenate([x.retained_energies for x in ens])):
                    rows.append((label, float(e)))
            out.append(write_output(cfg, "fig2a_energy_distribution.csv",
                                    _csv(rows, ["label", "rescaled_energy"])))
        elif figure == "2b":
            rows = []
            for label, ens in results["ensembles"].items():
                for k, e in enumerate(ens):
                    for it, (en, mg) in enumerate(chain_trace(e)):
                        rows.append((label, k, it, float(en), float(mg)))
            out.append(write_output(cfg, "fig2b_magnetization_trace.csv",
                                    _csv(rows, ["label", "chain", "iteration", "energy", "m"])))
        elif figure == "2c":
            out.append(write_output(cfg, "fig2c_pause_scan.csv", figure_2c(results["scan_rows"])))
        elif figure in ("3a", "3b"):
            g = results["phase_diagram"]
            if figure == "3a":
                out.append(write_output(cfg, "fig3a_phase_grid.csv", g.to_csv()))
                out.append(write_output(cfg, "fig3a_boundaries.csv", g.boundary_csv()))
            else:
                i = int(np.argmin(np.abs(g.ratio - results.get("ratio", 1.0))))
                rows = [(float(h), float(m)) for h, m in zip(g.hz, g.m[i])]
                out.append(write_output(cfg, "fig3b_slice.csv", _csv(rows, ["hz", "m"])))
                out.append(write_output(cfg, "fig3b_boundaries.csv",
                                        _csv([(float(b),) for b in g.boundaries[i]], ["hz_boundary"])))
        elif figure in ("3c", "3d", "3e", "3f"):
            lat, c = results["lattice"], results["config"]
            rows = [(int(x), int(y), int(s)) for (x, y), s in zip(lat.coords, c)]
            out.append(write_output(cfg, f"fig{figure}_motif.csv", _csv(rows, ["x", "y", "spin"])))
        elif figure in ("4a", "4b", "4c", "4d"):
            grid = results["sf_grid"]
            out.append(write_output(cfg, f"fig{figure}_sf_grid.csv", grid.to_csv()))
        elif figure == "4e":
            rows = []
            for h, grid in sorted(results["sf_grids"].items()):
                cut = observables.sf_cut(grid)
                rows += [(float(h), float(d), float(v)) for d, v in zip(cut.distance, cut.intensity)]
            out.append(write_output(cfg, "fig4e_cuts.csv", _csv(rows, ["hz", "distance", "intensity"])))
    except KeyError as exc:
        raise ConfigError(f"figure {figure} needs results[{exc.args[0]!r}]") from exc
    return out


# -- argument parsing -----------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ssqa", description=__doc__.splitlines()[0])
    p.add_argument("--verbose", "-v", action="store_true")
    sub = p.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML or JSON config file")
        s.add_argument("--seed", type=int)
        s.add_argument("--out")
        s.add_argument("--workers", type=int)
        s.add_argument("--cells", type=int, nargs=2, metavar=("X", "Y"))
        s.add_argument("--boundary", choices=["open", "periodic"])
        s.add_argument("--cell", choices=["logical", "square"])
        s.add_argument("--j1", type=float)
        s.add_argument("--j2", type=float)
        s.add_argument("--hz", type=float)
        s.add_argument("--s-p", type=float, dest="s_p")
        s.add_argument("--t-p", type=float, dest="t_p")
        s.add_argument("--t-r", type=float, dest="t_r")
        s.add_argument("--temperature", type=float)
        s.add_argument("--trotter", type=int)
        s.add_argument("--sweeps-per-unit", type=float, dest="sweeps_per_unit")
        s.add_argument("--schedule-table", dest="table")
        s.add_argument("--chain-length", type=int, dest="chain_length")
        s.add_argument("--burn-in", type=int, dest="burn_in")
        s.add_argument("--chains", type=int)
        s.add_argument("--init", dest="init_policy", choices=["all-up", "random", "aligned"])
        s.add_argument("--embed", action="store_true", default=None, dest="use")
        s.add_argument("--chi-b", type=float, dest="chi_b")
        s.add_argument("--defects")
        s.add_argument("--dead-qubits", type=int, nargs="*", dest="dead_qubits")
        s.add_argument("--sigma-h", type=float, dest="sigma_h")
        s.add_argument("--sigma-j", type=float, dest="sigma_j")
        s.add_argument("--tol", type=float)
        s.add_argument("--delta-h", type=float, dest="delta_h")
        s.add_argument("--max-iter", type=int, dest="max_iter")
        s.add_argument("--mfbc", choices=["auto", "on", "off"])
        s.add_argument("--hz-grid", type=float, nargs=3, dest="hz_grid", metavar=("START", "STOP", "STEP"))
        s.add_argument("--ratio-grid", type=float, nargs=3, dest="ratio_grid",
                       metavar=("START", "STOP", "STEP"))
        s.add_argument("--scan-s-p", type=float, nargs="+", dest="scan_s_p")
        s.add_argument("--scan-t-p", type=float, nargs="+", dest="scan_t_p")
        s.add_argument("--repetitions", type=int)
        s.add_argument("--ensembles", nargs="+")
        s.add_argument("--normalization", choices=["per-site", "raw"])
    return p


_FLAG_PATHS = {
    "seed": ("seed",), "out": ("out",), "workers": ("workers",),
    "cells": ("lattice", "cells"), "boundary": ("lattice", "boundary"), "cell": ("lattice", "cell"),
    "j1": ("couplings", "j1"), "j2": ("couplings", "j2"), "hz": ("couplings", "hz"),
    "hz_grid": ("couplings", "hz_grid"), "ratio_grid": ("couplings", "ratio_grid"),
    "s_p": ("schedule", "s_p"), "t_p": ("schedule", "t_p"), "t_r": ("schedule", "t_r"),
    "temperature": ("schedule", "temperature"), "trotter": ("schedule", "trotter"),
    "sweeps_per_unit": ("schedule", "sweeps_per_unit"), "table": ("schedule", "table"),
    "chain_length": ("qemc", "chain_length"), "burn_in": ("qemc", "burn_in"),
    "chains": ("qemc", "chains"), "init_policy": ("qemc", "init_policy"),
    "use": ("embedding", "use"), "chi_b": ("embedding", "chi_b"),
    "defects": ("embedding", "defects"), "dead_qubits": ("embedding", "dead_qubits"),
    "sigma_h": ("embedding", "sigma_h"), "sigma_j": ("embedding", "sigma_j"),
    "tol": ("boundary", "tol"), "delta_h": ("boundary", "delta_h"),
    "max_iter": ("boundary", "max_iter"), "mfbc": ("boundary", "mfbc"),
    "scan_s_p": ("scan", "s_p"), "scan_t_p": ("scan", "t_p"),
    "repetitions": ("scan", "repetitions"),
    "ensembles": ("sf", "ensembles"), "normalization": ("sf", "normalization"),
}


def resolve_config(argv=None) -> tuple[RunConfig, argparse.Namespace]:
    args = _parser().parse_args(argv)
    data = copy.deepcopy(DEFAULTS)
    if args.config:
        data = _merge(data, load_config_file(args.config))
    data["experiment"] = args.experiment
    for flag, path in _FLAG_PATHS.items():
        v = getattr(args, flag, None)
        if v is None:
            continue
        if flag == "mfbc":
            v = {"on": True, "off": False}.get(v, v)
        node = data
        for k in path[:-1]:
            node = node[k]
        node[path[-1]] = list(v) if isinstance(v, tuple) else v
    return validate(data), args


COMMANDS = {
    "exact": cmd_exact, "embed": cmd_embed, "qemc": cmd_qemc, "sf": cmd_sf,
    "calibrate-boundary": cmd_calibrate, "scan-pause": cmd_scan, "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    try:
        cfg, args = resolve_config(argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[cfg["experiment"]](cfg)
    except (chimera.EmbeddingError, chimera.DeviceRangeError) as exc:
        print(f"embedding infeasible: {exc}", file=sys.stderr)
        return EXIT_EMBEDDING
    except exact.SizeCapError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
