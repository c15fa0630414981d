"""Path-integral Monte Carlo emulation of a transverse-field Ising anneal.

The device Hamiltonian ``H(s) = A(s) sum X_i + B(s) H_ising`` is Trotterised
into ``M`` imaginary-time slices.  Each slice sees the classical problem at
inverse temperature ``B(s) / (M T)`` and neighbouring slices of the same spin
are coupled ferromagnetically with ``K = J_perp / T = -1/2 ln tanh(A / (M T))``,
which is infinite when ``A = 0`` (slices locked).
The sign of the transverse term does not matter: a rotation about z flips it.

Time is measured in schedule units; ``sweeps_per_unit`` converts a segment
duration into a number of Monte Carlo sweeps, each evaluated at the segment
midpoint of ``s``.  Along a trajectory, sweeps where ``A(s) = 0`` are skipped:
with no transverse field the device has no spin-flip dynamics.  Fixed-``s``
sampling still runs them, which gives classical Metropolis sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import core
from .ising import IsingModel


def _as_model(problem) -> IsingModel:
    if isinstance(problem, IsingModel):
        return problem
    to_ising = getattr(problem, "to_ising", None)
    if to_ising is None:
        raise TypeError(f"cannot anneal a {type(problem).__name__}")
    return to_ising()


def chain_seed(master: int, index: int = 0) -> int:
    """64-bit worldline RNG seed for chain ``index`` of a master seed."""
    ss = np.random.SeedSequence([int(master) & 0xFFFFFFFFFFFFFFFF, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class AnnealSchedule:
    s_knots: tuple = (0.0, 1.0)
    a_knots: tuple = (1.0, 0.0)
    b_knots: tuple = (0.0, 1.0)
    temperature: float = 0.05
    trotter: int = 16
    sweeps_per_unit: float = 10.0
    t_r: float = 1.0
    s_p: float = 0.4
    t_p: float = 0.0
    cluster: bool = True
    waypoints: tuple | None = None  # explicit ((t, s), ...), overrides t_r/s_p/t_p

    def __post_init__(self):
        s = np.asarray(self.s_knots, dtype=float)
        if len(s) < 2 or s[0] != 0.0 or s[-1] != 1.0 or np.any(np.diff(s) <= 0):
            raise ValueError("schedule knots must increase strictly from 0 to 1")
        if not (len(self.a_knots) == len(self.b_knots) == len(s)):
            raise ValueError("A and B tables must match the s knots")
        if np.any(np.asarray(self.a_knots) < 0) or np.any(np.asarray(self.b_knots) < 0):
            raise ValueError("amplitudes must be non-negative")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        if self.trotter < 1:
            raise ValueError("need at least one Trotter slice")
        if not self.sweeps_per_unit > 0:
            raise ValueError("sweeps_per_unit must be positive")
        if not 0.0 <= self.s_p <= 1.0:
            raise ValueError("s_p must lie in [0, 1]")
        if self.t_r < 0 or self.t_p < 0:
            raise ValueError("ramp and pause times must be non-negative")

    def with_(self, **kw) -> "AnnealSchedule":
        return replace(self, **kw)

    def eval(self, s):
        return schedule_eval(self, s)

    def trajectory(self) -> list[tuple[float, float]]:
        if self.waypoints is not None:
            return [(float(t), float(s)) for t, s in self.waypoints]
        t1 = self.t_r
        t2 = t1 + self.t_p
        return [(0.0, 1.0), (t1, self.s_p), (t2, self.s_p), (t2 + self.t_r, 1.0)]

    @property
    def duration(self) -> float:
        return self.trajectory()[-1][0]

    def s_at(self, t):
        tr = self.trajectory()
        ts = np.array([p[0] for p in tr])
        ss = np.array([p[1] for p in tr])
        return np.interp(t, ts, ss)

    def couplings(self, s):
        """Per-sweep (beta_eff, K) arrays for an array of s values."""
        A, B, _ = schedule_eval(self, s)
        A, B = np.atleast_1d(A), np.atleast_1d(B)
        M, T = self.trotter, self.temperature
        beta = B / (M * T)
        x = A / (M * T)
        with np.errstate(divide="ignore"):
            e = np.exp(-2.0 * x)
            # -1/2 ln tanh(x), stable for large x; +inf at x = 0
            k = np.where(x > 0, 0.5 * (np.log1p(e) - np.log1p(-e)), np.inf)
        if M == 1:
            k = np.zeros_like(k)
        return np.ascontiguousarray(beta, dtype=float), np.ascontiguousarray(k, dtype=float)

    @classmethod
    def from_table(cls, text: str, **kw) -> "AnnealSchedule":
        """Build from text lines ``s A B`` ('#' comments allowed)."""
        rows = []
        for ln in text.splitlines():
            ln = ln.split("#", 1)[0].strip()
            if ln:
                rows.append([float(x) for x in ln.split()[:3]])
        arr = np.array(rows, dtype=float).reshape(-1, 3)
        return cls(tuple(arr[:, 0]), tuple(arr[:, 1]), tuple(arr[:, 2]), **kw)

    def to_table(self) -> str:
        return "".join(f"{float(s)!r} {float(a)!r} {float(b)!r}\n" for s, a, b in
                       zip(self.s_knots, self.a_knots, self.b_knots))


def schedule_eval(schedule: AnnealSchedule, s):
    """Interpolated ``(A, B, Q = A/B)`` at ``s`` in [0, 1]."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0) or np.any(s_arr > 1):
        raise ValueError("s must lie in [0, 1]")
    A = np.interp(s_arr, schedule.s_knots, schedule.a_knots)
    B = np.interp(s_arr, schedule.s_knots, schedule.b_knots)
    with np.errstate(divide="ignore", invalid="ignore"):
        Q = np.where(B > 0, A / np.where(B > 0, B, 1.0), np.inf)
    if np.ndim(s) == 0:
        return float(A), float(B), float(Q)
    return A, B, Q


@dataclass
class ReplicatedState:
    spins: np.ndarray  # (M, n) int8
    s: float = 1.0
    rng_state: int = 0
    sweeps: int = field(default=0)

    @classmethod
    def from_config(cls, config, trotter: int, rng_state: int, s: float = 1.0):
        c = np.asarray(config, dtype=np.int8)
        if np.any(np.abs(c) != 1):
            raise ValueError("spins must be +1 or -1")
        return cls(np.ascontiguousarray(np.tile(c, (trotter, 1))), s, int(rng_state))

    @property
    def trotter(self) -> int:
        return self.spins.shape[0]

    def uniform(self, count: int = 1) -> np.ndarray:
        vals, self.rng_state = core.uniform_stream(self.rng_state, count)
        return np.asarray(vals)

    def readout(self) -> np.ndarray:
        """One slice chosen uniformly at random."""
        k = min(int(self.uniform(1)[0] * self.trotter), self.trotter - 1)
        return self.spins[k].copy()


def run_sweeps(problem, state: ReplicatedState, beta_eff, kperp, cluster: bool = True):
    model = _as_model(problem)
    if state.spins.shape[1] != model.n:
        raise ValueError("state does not match the problem size")
    indptr, indices, weights = model.csr()
    state.rng_state = int(core.pimc_sweeps(state.spins, np.ascontiguousarray(model.h), indptr,
                                           indices, weights, np.ascontiguousarray(beta_eff),
                                           np.ascontiguousarray(kperp), state.rng_state,
                                           bool(cluster)))
    state.sweeps += len(beta_eff)
    return state


def run_segment(problem, schedule: AnnealSchedule, state: ReplicatedState, t_start: float,
                t_end: float, sweeps_per_unit_time: float | None = None) -> ReplicatedState:
    """Advance ``state`` along the schedule trajectory from ``t_start`` to ``t_end``."""
    spu = schedule.sweeps_per_unit if sweeps_per_unit_time is None else sweeps_per_unit_time
    if not spu > 0:
        raise ValueError("sweeps_per_unit_time must be positive")
    if t_end < t_start:
        raise ValueError("segment runs backwards in time")
    n = int(round((t_end - t_start) * spu))
    if n > 0:
        t = t_start + (np.arange(n) + 0.5) * (t_end - t_start) / n
        s = schedule.s_at(t)
        # without a transverse field nothing flips a spin: skip those sweeps
        live = np.atleast_1d(schedule_eval(schedule, s)[0]) > 0
        if live.any():
            beta, k = schedule.couplings(s[live])
            run_sweeps(problem, state, beta, k, schedule.cluster)
    state.s = float(schedule.s_at(t_end))
    return state


def reverse_anneal(problem, schedule: AnnealSchedule, init, rng_state: int):
    """One reverse anneal from the classical state ``init``.

    Returns ``(sample, energy, rng_state)``; ``sample`` is one Trotter slice
    chosen uniformly and ``energy`` its classical energy.
    """
    model = _as_model(problem)
    init = np.asarray(init)
    if init.shape != (model.n,):
        raise ValueError(f"init has shape {init.shape}, problem has {model.n} spins")
    tr = schedule.trajectory()
    if tr[0][1] != 1.0 or tr[-1][1] != 1.0:
        raise ValueError("a reverse anneal must start and end at s = 1")
    state = ReplicatedState.from_config(init, schedule.trotter, rng_state)
    for (t0, _), (t1, _) in zip(tr, tr[1:]):
        run_segment(model, schedule, state, t0, t1)
    out = state.readout()
    return out, model.energy(out), state.rng_state


def forward_anneal(problem, schedule: AnnealSchedule, duration: float, rng_state: int,
                   n_samples: int = 1):
    """Anneal from s = 0 to s = 1 over ``duration``, ``n_samples`` times.

    Used for flux-offset calibration.  Returns ``(samples, rng_state)``.
    """
    model = _as_model(problem)
    out = np.empty((n_samples, model.n), dtype=np.int8)
    fwd = schedule.with_(waypoints=((0.0, 0.0), (float(duration), 1.0)))
    for r in range(n_samples):
        state = ReplicatedState(np.ones((schedule.trotter, model.n), dtype=np.int8), 0.0, rng_state)
        # random start: the s = 0 state is the transverse-field ground state
        state.spins[...] = np.where(state.uniform(model.n * schedule.trotter)
                                    .reshape(schedule.trotter, model.n) < 0.5, 1, -1)
        run_segment(model, fwd, state, 0.0, float(duration))
        out[r] = state.readout()
        rng_state = state.rng_state
    return out, rng_state


def sample_fixed_s(problem, schedule: AnnealSchedule, s: float, n_samples: int, rng_state: int,
                   thin: int = 1, burn: int = 100, init=None):
    """Equilibrium samples of slice 0 at fixed ``s``; returns ``(samples, rng_state)``."""
    model = _as_model(problem)
    beta, k = schedule.couplings(np.array([s]))
    if init is None:
        init = np.ones(model.n, dtype=np.int8)
    state = ReplicatedState.from_config(init, schedule.trotter, rng_state, s)
    run_sweeps(model, state, np.repeat(beta, burn), np.repeat(k, burn), schedule.cluster)
    out = np.empty((n_samples, model.n), dtype=np.int8)
    bt, kt = np.repeat(beta, thin), np.repeat(k, thin)
    for i in range(n_samples):
        run_sweeps(model, state, bt, kt, schedule.cluster)
        out[i] = state.spins[0]
    return out, state.rng_state
