import numpy as np
import pytest
from sklearn.base import clone

from rieszlab.estimators import (
    BaupDetector, DavidSemmesLattice, FlatnessEstimator, RieszOperator, as_measure,
)
from rieszlab.exceptions import NotFittedError
from rieszlab.lattice import build_lattice, spatial_member
from rieszlab.measure import gen_cantor, gen_hyperplane
from rieszlab.riesz.kernels import KernelSpec
from rieszlab.riesz.operators import op_norm, riesz_transform


@pytest.mark.parametrize("est", [RieszOperator(), DavidSemmesLattice(), FlatnessEstimator(),
                                 BaupDetector()])
def test_params_round_trip(est):
    twin = clone(est)
    assert twin.get_params() == est.get_params()


@pytest.mark.parametrize("est, call", [
    (RieszOperator(), lambda e: e.transform(np.ones(3))),
    (DavidSemmesLattice(), lambda e: e.transform([[0.0, 0.0]])),
    (FlatnessEstimator(), lambda e: e.predict()),
    (BaupDetector(), lambda e: e.predict()),
])
def test_unfitted_use_raises(est, call):
    with pytest.raises(NotFittedError):
        call(est)


def test_as_measure_accepts_arrays():
    mu = as_measure(np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]))
    assert mu.d == 1 and len(mu) == 3 and np.all(mu.weights == 1.0)
    cantor = gen_cantor(2)
    assert as_measure(cantor) is cantor


def test_riesz_operator_matches_library():
    mu = gen_cantor(3)
    f = np.arange(len(mu), dtype=float)
    est = RieszOperator(delta=0.1).fit(mu)
    spec = KernelSpec("full", 0.1)
    assert np.array_equal(est.transform(f), riesz_transform(mu, f, spec).values)
    assert est.operator_norm() == op_norm(mu, spec).value


def test_lattice_transform_matches_spatial_member():
    mu = gen_cantor(3)
    est = DavidSemmesLattice().fit(mu)
    lat = build_lattice(mu)
    X = mu.points[:5] + 0.001
    got = est.transform(X)
    assert got.shape == (5, len(est.levels_))
    for i, x in enumerate(X):
        assert [int(v) for v in got[i]] == [spatial_member(lat, x, k) for k in est.levels_]


def test_flatness_estimator_on_plane():
    mu = gen_hyperplane(1, 12.0, 0.05)
    est = FlatnessEstimator(alpha=0.1).fit(mu)
    flat = est.predict()
    assert set(flat) == {cid for cid, g in est.geometric_.items() if g <= 0.1}
    inner = [cid for cid, g in est.geometric_.items() if np.isfinite(g) and est.lattice_.is_interior(cid, 6.0)]
    assert inner and set(inner) <= set(flat)
    assert est.defect_at([0.0, 0.0], 1.0, [0.0, 1.0]) <= 2 * mu.mesh


def test_baup_detector_on_cantor():
    det = BaupDetector(delta=0.1).fit(gen_cantor(4))
    assert det.fraction_ >= 0.5
    assert list(det.predict()) == det.family_
    assert det.carleson_.best_constant >= 1
