import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rieszlab.baup import (
    baup_test, direction_grid, eligible_cells, nonbaup_family, rarefy,
)
from rieszlab.exceptions import InvalidParameterError, ScaleWindowError
from rieszlab.lattice import build_lattice
from rieszlab.measure import DiscreteMeasure, gen_cantor, gen_hyperplane


@pytest.fixture(scope="module")
def cantor5():
    mu = gen_cantor(5)
    return mu, build_lattice(mu)


@pytest.fixture(scope="module")
def cantor4():
    mu = gen_cantor(4)
    return mu, build_lattice(mu)


def test_direction_grid_shapes():
    g = direction_grid(2, math.pi / 32)
    assert g.shape == (32, 2)
    assert np.allclose(np.linalg.norm(g, axis=1), 1.0)
    # halving the step keeps every old direction
    fine = direction_grid(2, math.pi / 64)
    assert np.allclose(fine[::2], g)
    g3 = direction_grid(3, math.pi / 8)
    assert np.allclose(np.linalg.norm(g3, axis=1), 1.0) and np.all(g3[:, 2] >= -1e-12)
    with pytest.raises(InvalidParameterError):
        direction_grid(2, 0.0)


def test_plane_family_is_empty():
    mu = gen_hyperplane(1, 1.0, 1 / 1024)
    lat = build_lattice(mu)
    cells = eligible_cells(mu, lat, 0.1, interior_only=True)
    assert cells
    assert nonbaup_family(mu, lat, 0.1, interior_only=True) == []


def test_two_parallel_planes_are_baup():
    h = 1 / 256
    p = gen_hyperplane(1, 4.0, h)
    for gap in (0.05, 0.3):
        pts = np.vstack([p.points, p.points + [0.0, gap]])
        two = DiscreteMeasure(1, pts, np.concatenate([p.weights, p.weights]), h, domain=p.domain)
        lat = build_lattice(two)
        cells = eligible_cells(two, lat, 0.1, interior_only=True)
        assert cells
        for cid in cells:
            v = baup_test(two, lat, cid, 0.1, max_samples=None)
            assert not v.non_baup and v.witness_x is None


def test_sheet_edge_is_a_hole():
    # without the interior filter the edge of a finite sheet defeats every plane
    mu = gen_hyperplane(1, 1.0, 1 / 1024)
    lat = build_lattice(mu)
    assert nonbaup_family(mu, lat, 0.1) != []


def test_cantor_majority_non_baup(cantor5):
    mu, lat = cantor5
    cells = eligible_cells(mu, lat, 0.1)
    fam = nonbaup_family(mu, lat, 0.1)
    assert len(fam) >= 0.5 * len(cells)
    rng = np.random.default_rng(0)
    for cid in rng.choice(cells, 5, replace=False):
        coarse = baup_test(mu, lat, int(cid), 0.1)
        fine = baup_test(mu, lat, int(cid), 0.1, direction_step=math.pi / 256)
        assert coarse.non_baup == fine.non_baup


def test_precondition(cantor4):
    mu, lat = cantor4
    fine = lat.levels[lat.k_max][0]
    with pytest.raises(ScaleWindowError):
        baup_test(mu, lat, fine, 0.1)
    assert fine not in eligible_cells(mu, lat, 0.1)


def test_rarefied_mass_fraction(cantor4):
    mu, lat = cantor4
    fam = nonbaup_family(mu, lat, 0.1)
    kept = nonbaup_family(mu, lat, 0.1, rarefied=True)
    assert kept and set(kept) <= set(fam)
    ratio = sum(lat.mass(c) for c in kept) / sum(lat.mass(c) for c in fam)
    assert ratio >= 1 / 30


@settings(max_examples=30)
@given(st.lists(st.integers(0, 84), unique=True, max_size=40))
def test_rarefy_disjoint_and_covering(ids):
    mu = gen_cantor(3)
    lat = build_lattice(mu, 0, 1)
    ids = [i for i in ids if i < len(lat)]
    kept = rarefy(lat, ids)
    assert set(kept) <= set(ids)
    z = {c: lat.center_point(c) for c in ids}
    ell = {c: lat.cells[c].scale for c in ids}
    for a in kept:
        for b in kept:
            if a < b:
                assert np.linalg.norm(z[a] - z[b]) >= 10 * (ell[a] + ell[b])
    for c in set(ids) - set(kept):
        assert any(np.linalg.norm(z[c] - z[q]) < 10 * ell[c] + 10 * ell[q] and ell[q] >= ell[c]
                   for q in kept)
        assert any(np.linalg.norm(z[c] - z[q]) + 10 * ell[c] <= 30 * ell[q] for q in kept)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 50), st.floats(0.1, 0.4), st.floats(0.0, 0.3))
def test_monotone_in_delta(i, d_small, extra):
    mu = gen_cantor(4)
    lat = build_lattice(mu)
    cells = eligible_cells(mu, lat, 0.1)
    cid = cells[i % len(cells)]
    ell = lat.cells[cid].scale
    ystep = 0.05 * ell / 2
    kw = dict(y_step=ystep, early_exit=False, seed=3)
    small = baup_test(mu, lat, cid, d_small, **kw)
    big = baup_test(mu, lat, cid, d_small + extra, **kw)
    assert small.best_plane_hole == big.best_plane_hole
    if big.non_baup:
        assert small.non_baup


def test_direction_refinement_only_removes_witnesses(cantor4):
    mu, lat = cantor4
    for cid in eligible_cells(mu, lat, 0.1):
        ell = lat.cells[cid].scale
        coarse = baup_test(mu, lat, cid, 0.1, direction_step=math.pi / 32, y_step=0.05 * ell)
        fine = baup_test(mu, lat, cid, 0.1, direction_step=math.pi / 64, y_step=0.05 * ell)
        for x, hole in fine.best_plane_hole.items():
            assert hole <= coarse.best_plane_hole[x]
        assert fine.non_baup <= coarse.non_baup


def test_determinism_and_serialisation(cantor4):
    mu, lat = cantor4
    cid = eligible_cells(mu, lat, 0.1)[0]
    a = baup_test(mu, lat, cid, 0.1, max_samples=8, seed=1)
    b = baup_test(mu, lat, cid, 0.1, max_samples=8, seed=1)
    assert a == b
    assert a.samples == min(8, len(lat.cells[cid].members))
    d = a.to_dict()
    assert set(d) == {"id", "delta", "non_baup", "witness"}
    if a.non_baup:
        assert d["witness"] in lat.cells[cid].members
