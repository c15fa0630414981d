import numpy as np
import pytest

from ssqa.boundary import BoundarySpec, gap, identify_boundary, mfbc_optimize, mfbc_step
from ssqa.lattice import CouplingParams, build_lattice


def _spec(h, hz=2.1, **kw):
    return BoundarySpec([0], [1, 2], [h], hz, **kw)


def test_periodic_lattice_has_no_boundary():
    lat = build_lattice(2, 2, "periodic")
    spec = identify_boundary(lat, hz_bulk=2.1)
    assert len(spec.boundary) == 0 and len(spec.bulk) == lat.n_sites

    def never(model, it):
        raise AssertionError("no sampling needed")

    res = mfbc_optimize(never, lat, CouplingParams(1, 1, 2.1), spec)
    assert res.converged and res.iterations == 0


def test_open_lattice_flags_perimeter():
    lat = build_lattice(2, 2, "open")
    spec = identify_boundary(lat, hz_bulk=1.0)
    deg = lat.square_degree()
    assert set(spec.boundary.tolist()) == set(np.flatnonzero(deg < 4).tolist())
    assert np.all(deg[spec.bulk] == 4)
    assert np.all(spec.h_boundary == 1.0)


def test_defect_neighbours_are_flagged():
    lat = build_lattice(3, 3, "periodic")
    d = 20
    spec = identify_boundary(lat, defects=[d])
    reduced, _ = lat.remove_sites([d])
    assert spec.n_sites == reduced.n_sites == lat.n_sites - 1
    nb = lat.neighbors(d)
    expected = sorted(int(i) - (i > d) for i in nb)
    assert sorted(spec.boundary.tolist()) == expected
    with pytest.raises(ValueError):
        identify_boundary(lat, defects=[lat.n_sites])


def test_step_fixed_point():
    spec = _spec(0.7)
    configs = np.array([[1, 1, 1], [-1, -1, -1]])
    assert mfbc_step(spec, configs).h_boundary[0] == 0.7


def test_step_worked_example():
    spec = BoundarySpec([0], [1, 2, 3], [0.5], 2.1, delta_h=0.05)
    # boundary <s> = 0.8, bulk mean 1/3
    rows = np.array([[1, 1, 1, -1]] * 9 + [[-1, 1, 1, -1]], dtype=float)
    new = mfbc_step(spec, rows)
    assert gap(spec, rows)[0] == pytest.approx(1 / 3)
    assert new.h_boundary[0] == pytest.approx(0.5 + 0.05 * (0.8 - 1 / 3))
    assert new.h_boundary[0] == pytest.approx(0.5233, abs=1e-4)


def test_sign_constraint_clamps_to_zero():
    spec = _spec(0.01, hz=2.1)
    configs = np.array([[-1, 1, 1]])
    assert mfbc_step(spec, configs).h_boundary[0] == 0.0
    free = _spec(0.01, hz=2.1, sign_constraint=False)
    assert mfbc_step(free, configs).h_boundary[0] == pytest.approx(0.01 - 0.1)
    neg = _spec(-0.01, hz=-2.1)
    assert mfbc_step(neg, np.array([[1, -1, -1]])).h_boundary[0] == 0.0


def test_spec_validation():
    with pytest.raises(ValueError):
        _spec(0.0, delta_h=0.2)
    with pytest.raises(ValueError):
        BoundarySpec([0, 1], [1], [0.0, 0.0])
    with pytest.raises(ValueError):
        mfbc_step(_spec(0.0), np.empty((0, 3)))
    with pytest.raises(ValueError):
        mfbc_step(_spec(0.0), np.ones((2, 5)))


def test_fields_text_round_trip():
    spec = identify_boundary(build_lattice(2, 2, "open"), hz_bulk=2.1)
    h = np.linspace(0.1, 2.0, len(spec.boundary))
    back = spec.load_fields(spec.with_fields(h).to_text())
    assert np.array_equal(back.h_boundary, h)
    with pytest.raises(ValueError):
        spec.load_fields("0 1.0\n")


def test_optimizer_converges_on_mean_field_response():
    # boundary responds as a free spin in its own field, bulk sits at -1/3
    lat = build_lattice(2, 2, "open")
    spec = identify_boundary(lat, hz_bulk=2.1)

    def sampler(model, it):
        m = np.full(model.n, -1 / 3)
        m[spec.boundary] = -np.tanh(model.h[spec.boundary])
        return m[None, :]

    res = mfbc_optimize(sampler, lat, CouplingParams(1, 1, 2.1), spec)
    assert res.converged and res.iterations < spec.max_iter
    assert np.all(res.spec.h_boundary > 0)
    assert res.spec.h_boundary == pytest.approx(np.arctanh(1 / 3), abs=0.1)
    assert res.trace_csv().count("\n") == res.iterations + 1
