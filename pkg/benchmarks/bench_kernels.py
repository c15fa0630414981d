"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 3]

Both backends produce identical output; only the wall time differs.
"""

import argparse
import time

import numpy as np

from ssqa._backend import get_core
from ssqa.exact import _split
from ssqa.ising import IsingModel
from ssqa.lattice import CouplingParams, build_lattice


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def pimc_case(core, sweeps):
    model = IsingModel.from_lattice(build_lattice(2, 2, "periodic"), CouplingParams(1, 1, 2.1))
    indptr, indices, weights = model.csr()
    beta = np.full(sweeps, 2.0)
    k = np.full(sweeps, 1.0)

    def run():
        spins = np.ones((16, model.n), dtype=np.int8)
        core.pimc_sweeps(spins, model.h, indptr, indices, weights, beta, k, 1, True)

    return run


def ground_case(core, cells):
    model = IsingModel.from_lattice(build_lattice(*cells, "periodic"), CouplingParams(1, 1, 2.1))
    _, n_enum, red = _split(model)
    csr = red.csr()
    return lambda: core.conditioned_ground(n_enum, red.h, *csr, 1e-9, 1 << 22)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    cores = {"python": get_core("python")}
    try:
        cores["cython"] = get_core("cython")
    except ImportError:
        print("compiled kernels not built; timing the fallback only")
    cases = [
        ("pimc_sweeps, 32 spins x 16 slices, 20 sweeps", lambda c: pimc_case(c, 20)),
        ("pimc_sweeps, 32 spins x 16 slices, 200 sweeps", lambda c: pimc_case(c, 200)),
        ("conditioned_ground, 32-site torus", lambda c: ground_case(c, (2, 2))),
    ]
    print(f"{'case':48s} " + " ".join(f"{k:>10s}" for k in cores) + "   speedup")
    for name, make in cases:
        t = {k: _best(make(c), args.repeat) for k, c in cores.items()}
        speed = f"{t['python'] / t['cython']:9.1f}x" if "cython" in t else ""
        print(f"{name:48s} " + " ".join(f"{v:9.4f}s" for v in t.values()) + f" {speed}")


if __name__ == "__main__":
    main()
