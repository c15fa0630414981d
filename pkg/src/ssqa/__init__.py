"""Reverse-annealing emulation of the Shastry-Sutherland Ising model."""

from ._backend import BACKEND
from .boundary import BoundarySpec, identify_boundary, mfbc_optimize, mfbc_step
from .chimera import (EmbeddingError, DeviceRangeError, build_chimera, compile_physical,
                      decode, half_cell_embed)
from .engine import AnnealSchedule, ReplicatedState, forward_anneal, reverse_anneal, sample_fixed_s
from .exact import brute_force_ground, exact_magnetization_curve, exact_thermal
from .ising import IsingModel
from .lattice import CouplingParams, SSLattice, build_lattice
from .observables import classify_motif, detect_phase_boundary, structure_factor
from .qemc import Ensemble, QEMCConfig, run_chain, scan_pause_parameters

__version__ = "0.1.0"
