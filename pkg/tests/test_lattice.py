import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ssqa.ising import IsingModel
from ssqa.lattice import (DIMER, SQUARE, CouplingParams, build_lattice, config_from_str, config_to_str,
                          dump_lattice, energy, energy_delta, load_lattice)


def _cell_vectors(lat):
    (ax, ay), (bx, by) = lat.periods
    return (ax // lat.cells_x, ay // lat.cells_x), (bx // lat.cells_y, by // lat.cells_y)


def spins(n):
    return st.lists(st.sampled_from([-1, 1]), min_size=n, max_size=n).map(np.array)


params = st.builds(CouplingParams, st.floats(-3, 3), st.floats(-3, 3), st.floats(-8, 8))


def test_single_open_cell():
    lat = build_lattice(1, 1, "open")
    assert lat.n_sites == 8
    assert len(lat.dimer_bonds) == 4


def test_periodic_2x2_counts():
    lat = build_lattice(2, 2, "periodic")
    assert lat.n_sites == 32
    assert len(lat.dimer_bonds) == 16
    assert len(lat.square_bonds) == 64
    assert np.all(lat.square_degree() == 4)
    # every site sits on exactly one dimer
    assert sorted(lat.dimer_bonds.ravel().tolist()) == list(range(32))


def test_square_cell_torus_counts():
    lat = build_lattice(3, 3, "periodic", "square")
    assert lat.n_sites == 36
    assert len(lat.square_bonds) == 72
    assert len(lat.dimer_bonds) == 18


def test_bonds_sorted_and_unique():
    lat = build_lattice(3, 2, "open")
    assert np.all(lat.bonds[:, 0] < lat.bonds[:, 1])
    assert len({tuple(b) for b in lat.bonds.tolist()}) == len(lat.bonds)


def test_site_order_is_deterministic():
    a, b = build_lattice(2, 3, "open"), build_lattice(2, 3, "open")
    assert np.array_equal(a.coords, b.coords) and np.array_equal(a.bonds, b.bonds)


def test_energy_examples():
    lat = build_lattice(2, 2, "periodic")
    up = np.ones(32, dtype=int)
    assert energy(lat, CouplingParams(1, 1, 0), up) == 80
    assert energy(lat, CouplingParams(1, 1, -8), up) == -176
    rng = np.random.default_rng(0)
    assert energy(lat, CouplingParams(0, 0, 0), rng.choice([-1, 1], 32)) == 0


def test_energy_delta_examples():
    lat = build_lattice(2, 2, "periodic")
    up = np.ones(32, dtype=int)
    assert energy_delta(lat, CouplingParams(0, 0, 1), up, 5) == -2
    assert energy_delta(lat, CouplingParams(1, 0, 0), up, 5) == -8


def test_bad_configs_rejected():
    lat = build_lattice(1, 1, "open")
    with pytest.raises(ValueError):
        energy(lat, CouplingParams(1, 1, 0), np.ones(7))
    with pytest.raises(ValueError):
        energy(lat, CouplingParams(1, 1, 0), np.zeros(8))
    with pytest.raises(ValueError):
        build_lattice(1, 1, "twisted")


@settings(max_examples=60, deadline=None)
@given(params, spins(32), st.integers(0, 31))
def test_delta_matches_recomputation(p, s, site):
    lat = build_lattice(2, 2, "periodic")
    flipped = s.copy()
    flipped[site] *= -1
    assert energy_delta(lat, p, s, site) == pytest.approx(energy(lat, p, flipped) - energy(lat, p, s))


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), spins(32))
def test_spin_flip_symmetry_at_zero_field(j1, j2, s):
    lat = build_lattice(2, 2, "periodic")
    p = CouplingParams(j1, j2, 0.0)
    assert energy(lat, p, s) == pytest.approx(energy(lat, p, -s))


@settings(max_examples=30, deadline=None)
@given(params, spins(32))
def test_translation_invariance(p, s):
    lat = build_lattice(2, 2, "periodic")
    for v in _cell_vectors(lat):
        assert energy(lat, p, lat.translate(s, v)) == pytest.approx(energy(lat, p, s))


@settings(max_examples=30, deadline=None)
@given(params, spins(36))
def test_ising_model_agrees_with_lattice_energy(p, s):
    lat = build_lattice(3, 3, "periodic", "square")
    model = IsingModel.from_lattice(lat, p)
    assert model.energy(s) == pytest.approx(energy(lat, p, s))


def test_text_round_trips():
    lat = build_lattice(2, 1, "open")
    back = load_lattice(dump_lattice(lat))
    assert np.array_equal(back.bonds, lat.bonds) and np.array_equal(back.kinds, lat.kinds)
    assert np.array_equal(back.coords, lat.coords)
    c = np.array([1, -1, -1, 1])
    assert config_to_str(c) == "+--+"
    assert np.array_equal(config_from_str("+--+"), c)
    with pytest.raises(ValueError):
        config_from_str("+x-")


def test_remove_sites_and_drop_bonds():
    lat = build_lattice(2, 2, "open")
    red, kept = lat.remove_sites([0, 5])
    assert red.n_sites == lat.n_sites - 2 and len(kept) == red.n_sites
    assert not np.isin(kept, [0, 5]).any()
    touching = np.isin(lat.bonds, [0, 5]).any(axis=1).sum()
    assert len(red.bonds) == len(lat.bonds) - touching
    fewer = lat.drop_bonds(lat.kinds == DIMER)
    assert np.all(fewer.kinds == SQUARE)


def test_ising_model_validation_and_subgraph():
    m = IsingModel.from_dict(3, {0: 0.5}, {(0, 1): 1.0, (2, 1): -1.0})
    assert m.n == 3
    assert m.energy(np.array([1, 1, 1])) == pytest.approx(0.5 + 1.0 - 1.0)
    fields = m.local_fields(np.array([1, -1, 1]))
    assert fields[1] == pytest.approx(1.0 - 1.0)
    sub = m.subgraph([0, 1])
    assert sub.n == 2 and len(sub.J) == 1
    with pytest.raises(ValueError):
        IsingModel([0.0, 0.0], [(0, 0)], [1.0])
