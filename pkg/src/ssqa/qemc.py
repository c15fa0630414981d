"""Quantum Evolution Monte Carlo chains: iterated reverse anneals.

Iteration k starts from the (decoded) readout of iteration k-1; the first
``burn_in`` iterations are discarded.  The chain state between iterations is a
classical config plus one 64-bit RNG word, so a chain can be snapshotted and
replayed from any iteration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .chimera import Embedding, decode, expand
from .engine import AnnealSchedule, _as_model, chain_seed, reverse_anneal
from .ising import IsingModel
from .lattice import config_from_str, config_to_str

INIT_POLICIES = ("all-up", "random", "given")


@dataclass(frozen=True)
class QEMCConfig:
    chain_length: int = 100
    burn_in: int = 50
    init_policy: str = "all-up"
    init_config: tuple | None = None

    def __post_init__(self):
        if self.chain_length < 1:
            raise ValueError("chain_length must be >= 1")
        if not 0 <= self.burn_in < self.chain_length:
            raise ValueError("need 0 <= burn_in < chain_length")
        if self.init_policy not in INIT_POLICIES:
            raise ValueError(f"init_policy must be one of {INIT_POLICIES}")
        if self.init_policy == "given" and self.init_config is None:
            raise ValueError("init_policy 'given' needs init_config")


@dataclass
class Ensemble:
    configs: np.ndarray  # (chain_length, n) int8, logical
    energies: np.ndarray
    burn_in: int
    metadata: dict = field(default_factory=dict)
    broken: np.ndarray | None = None  # broken chains per iteration (embedded runs)

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def retained(self) -> np.ndarray:
        return self.configs[self.burn_in:]

    @property
    def retained_energies(self) -> np.ndarray:
        return self.energies[self.burn_in:]

    @property
    def flags(self) -> np.ndarray:
        f = np.ones(len(self), dtype=bool)
        f[: self.burn_in] = False
        return f

    def magnetizations(self) -> np.ndarray:
        return self.configs.mean(axis=1)

    def mean_magnetization(self) -> float:
        return float(self.retained.mean())

    def mean_energy(self) -> float:
        return float(self.retained_energies.mean())

    def to_text(self) -> str:
        lines = [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in sorted(self.metadata.items())]
        lines.append(f"# burn_in: {self.burn_in}")
        lines.append("# iter flag energy spins")
        for i, (c, e, keep) in enumerate(zip(self.configs, self.energies, self.flags)):
            lines.append(f"{i} {'keep' if keep else 'burn'} {float(e)!r} {config_to_str(c)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Ensemble":
        meta, configs, energies, burn = {}, [], [], None
        for ln in text.splitlines():
            if not ln.strip():
                continue
            if ln.startswith("#"):
                key, sep, val = ln[1:].strip().partition(": ")
                if not sep or key == "iter flag energy spins":
                    continue
                if key == "burn_in":
                    burn = int(val)
                else:
                    meta[key] = json.loads(val)
                continue
            _, flag, e, spins = ln.split()
            energies.append(float(e))
            configs.append(config_from_str(spins))
        if burn is None:
            raise ValueError("ensemble text lacks a burn_in header")
        return cls(np.array(configs, dtype=np.int8), np.array(energies), burn, meta)


def chain_trace(ens: Ensemble) -> np.ndarray:
    """Per-iteration ``(energy, magnetization)`` rows, burn-in included."""
    if len(ens) == 0:
        raise ValueError("empty ensemble")
    return np.column_stack([ens.energies, ens.magnetizations()])


@dataclass
class Snapshot:
    iteration: int  # next iteration to run
    config: np.ndarray  # logical config that seeds it
    rng_state: int

    def to_text(self) -> str:
        return (f"iteration {self.iteration}\nrng_state {self.rng_state}\n"
                f"config {config_to_str(self.config)}\n")

    @classmethod
    def from_text(cls, text: str) -> "Snapshot":
        kv = dict(ln.split(None, 1) for ln in text.splitlines() if ln.strip())
        return cls(int(kv["iteration"]), config_from_str(kv["config"]), int(kv["rng_state"]))


def _initial_config(cfg: QEMCConfig, n: int, seed: int) -> np.ndarray:
    if cfg.init_policy == "all-up":
        return np.ones(n, dtype=np.int8)
    if cfg.init_policy == "random":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1A17]))
        return rng.choice(np.array([-1, 1], dtype=np.int8), size=n)
    c = np.asarray(cfg.init_config, dtype=np.int8)
    if c.shape != (n,):
        raise ValueError(f"init_config has {c.size} spins, problem has {n}")
    return c


def run_chain(problem, schedule: AnnealSchedule, cfg: QEMCConfig, seed: int,
              embedding: Embedding | None = None, logical: IsingModel | None = None,
              chain_index: int = 0, resume: Snapshot | None = None,
              on_iteration: Callable[[Snapshot], None] | None = None) -> Ensemble:
    """Run one QEMC chain and return its ensemble of logical configs.

    Without an embedding the schedule acts on ``problem`` directly (a logical
    model).  With one, ``problem`` is the compiled physical problem; readouts
    are decoded by majority vote and the next anneal starts from the
    re-expanded logical state.  ``logical`` gives the model used for the
    recorded energies (default: ``problem`` when unembedded).
    """
    physical = _as_model(problem)
    if embedding is None:
        logical = physical if logical is None else logical
        n = physical.n
    else:
        if embedding.n_sites == 0:
            raise ValueError("every logical site is defective")
        if logical is None:
            raise ValueError("embedded chains need the logical model for energies")
        n = embedding.n_sites
    if logical.n != n:
        raise ValueError("logical model does not match the chain size")
    rng_state = chain_seed(seed, chain_index)
    configs = np.empty((cfg.chain_length, n), dtype=np.int8)
    energies = np.empty(cfg.chain_length)
    broken = np.zeros(cfg.chain_length, dtype=np.int64)
    start = 0
    current = _initial_config(cfg, n, chain_seed(seed, chain_index))
    if resume is not None:
        start, current, rng_state = resume.iteration, np.asarray(resume.config, np.int8), resume.rng_state
    for k in range(start, cfg.chain_length):
        init = current if embedding is None else expand(embedding, current)
        sample, _, rng_state = reverse_anneal(physical, schedule, init, rng_state)
        if embedding is None:
            current = sample.astype(np.int8)
        else:
            current, bad = decode(embedding, sample, seed=chain_seed(rng_state, k))
            broken[k] = len(bad)
        configs[k] = current
        energies[k] = logical.energy(current)
        if on_iteration is not None:
            on_iteration(Snapshot(k + 1, current.copy(), rng_state))
    meta = {"seed": int(seed), "chain_index": int(chain_index),
            "chain_length": cfg.chain_length, "init_policy": cfg.init_policy,
            "s_p": schedule.s_p, "t_p": schedule.t_p, "t_r": schedule.t_r,
            "temperature": schedule.temperature, "trotter": schedule.trotter,
            "sweeps_per_unit": schedule.sweeps_per_unit}
    if resume is not None:
        configs[:start] = 0
        energies[:start] = np.nan
        meta["resumed_at"] = start
    return Ensemble(configs, energies, cfg.burn_in, meta,
                    broken if embedding is not None else None)


def run_chains(problem, schedule: AnnealSchedule, cfg: QEMCConfig, seed: int, n_chains: int,
               **kw) -> list[Ensemble]:
    return [run_chain(problem, schedule, cfg, seed, chain_index=i, **kw) for i in range(n_chains)]


@dataclass
class PauseScanRow:
    s_p: float
    t_p: float
    mean: float  # rescaled so the lowest energy observed anywhere in the scan is 0
    stderr: float
    raw_mean: float
    n_samples: int


def scan_pause_parameters(problem, schedule: AnnealSchedule, grid, repetitions: int = 3,
                          cfg: QEMCConfig | None = None, seed: int = 0,
                          **kw) -> list[PauseScanRow]:
    """Mean retained energy over a grid of (s_p, t_p) pairs.

    Each cell runs ``repetitions`` independent chains; the standard error is
    taken over the per-chain means (over samples if only one chain).
    """
    grid = [(float(a), float(b)) for a, b in grid]
    if not grid:
        raise ValueError("empty (s_p, t_p) grid")
    cfg = cfg or QEMCConfig()
    cells = []
    for ci, (sp, tp) in enumerate(grid):
        sch = schedule.with_(s_p=sp, t_p=tp)
        ens = [run_chain(problem, sch, cfg, seed, chain_index=ci * repetitions + r, **kw)
               for r in range(repetitions)]
        cells.append(np.array([e.retained_energies for e in ens]))
    lowest = min(float(c.min()) for c in cells)
    rows = []
    for (sp, tp), c in zip(grid, cells):
        means = c.mean(axis=1)
        if len(means) > 1:
            se = float(means.std(ddof=1) / np.sqrt(len(means)))
        else:
            se = float(c.std(ddof=1) / np.sqrt(c.size)) if c.size > 1 else 0.0
        rows.append(PauseScanRow(sp, tp, float(c.mean()) - lowest, se, float(c.mean()), int(c.size)))
    return rows
