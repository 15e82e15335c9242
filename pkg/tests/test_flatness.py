import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.distance import cdist

from rieszlab.exceptions import DegenerateInputError, DomainError, InvalidParameterError, ScaleWindowError
from rieszlab.flatness import (
    FlatnessQuery, analytic_defect, annular_riesz, annulus_weight, best_plane, cell_approx,
    flat_predicate, flatness_report, geometric_defect, psi0, spatial_depth,
)
from rieszlab.lattice import build_lattice
from rieszlab.measure import DiscreteMeasure, blow_up, gen_cantor, gen_hyperplane, gen_lipschitz_graph, translate
from rieszlab.riesz.kernels import Hyperplane

HORIZ = Hyperplane([0.0, 1.0])


def _graph(amp, h=0.05):
    return gen_lipschitz_graph(1, amp, 1.0, 12.0, h)


def _hausdorff_oracle(mu, z, ell, A, normal, step):
    """Two-sided deviation in B(z, A l) from full distance matrices, over l."""
    normal = np.asarray(normal, float) / np.linalg.norm(normal)
    tangent = np.array([normal[1], -normal[0]])
    R = A * ell
    n = int(math.floor(R / step + 1e-9))
    s = np.arange(-n, n + 1) * step
    grid = z + s[np.abs(s) < R, None] * tangent
    inside = np.linalg.norm(mu.points - z, axis=1) < R
    dev = np.abs((mu.points[inside] - z) @ normal).max()
    gap = cdist(grid, mu.points).min(axis=1).max()
    return max(dev, gap) / ell


def test_plane_defects_vanish():
    mu = gen_hyperplane(1, 12.0, 0.05)
    q = FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ)
    assert geometric_defect(mu, q) <= 2 * mu.mesh / q.ell
    value, info = analytic_defect(mu, q, return_report=True)
    assert value <= info["slack"] + 1e-12


def test_offset_support():
    mu = translate(gen_hyperplane(1, 12.0, 0.05), [0.0, 0.3])
    q = FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ)
    assert geometric_defect(mu, q) == pytest.approx(0.3, abs=1e-12)


def test_geometric_matches_exhaustive_oracle():
    mu = _graph(0.05)
    for normal in ([0.0, 1.0], [0.05, 1.0], [-0.1, 1.0]):
        q = FlatnessQuery(mu.points[240], 1.0, 6.0, Hyperplane(normal))
        want = _hausdorff_oracle(mu, mu.points[240], 1.0, 6.0, normal, mu.mesh)
        assert geometric_defect(mu, q) == pytest.approx(want, abs=1e-9)


def test_geometric_witnesses():
    mu = _graph(0.05)
    val, wit = geometric_defect(mu, FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ), return_witness=True)
    assert val == max(wit["support_dev"], wit["grid_dev"])


def test_defect_errors():
    mu = gen_hyperplane(1, 12.0, 0.05)
    with pytest.raises(ScaleWindowError):
        geometric_defect(mu, FlatnessQuery([0.0, 0.0], 0.01, 6.0, HORIZ))
    with pytest.raises(DomainError):
        geometric_defect(mu, FlatnessQuery([0.0, 50.0], 1.0, 6.0, HORIZ))
    with pytest.raises(InvalidParameterError):
        FlatnessQuery([0.0, 0.0], 1.0, 5.0, HORIZ)
    with pytest.raises(InvalidParameterError):
        geometric_defect(mu, FlatnessQuery([0.0, 0.0], 1.0, 6.0))
    sparse = DiscreteMeasure(1, [[0.0, 0.0], [30.0, 0.0]], [1.0, 1.0], 0.05)
    with pytest.raises(DegenerateInputError):
        best_plane(sparse, [0.0, 0.0], 1.0)


@settings(max_examples=20)
@given(st.floats(-0.5, 0.5), st.floats(0.1, 2.0), st.floats(-0.5, 0.5))
def test_geometric_defect_is_similarity_invariant(shift, lam, slope):
    mu = _graph(0.05, h=0.1)
    H = Hyperplane([slope, 1.0])
    base = geometric_defect(mu, FlatnessQuery(mu.points[120], 1.0, 6.0, H), check_scale=False)
    lam = 2.0 ** round(math.log2(lam))
    moved = blow_up(translate(mu, [shift, shift]), np.zeros(2), lam)
    z = (mu.points[120] + shift) / lam
    q = FlatnessQuery(z, 1.0 / lam, 6.0, H)
    got = geometric_defect(moved, q, step=mu.mesh / lam, check_scale=False)
    assert got == pytest.approx(base, rel=1e-9, abs=1e-12)


def test_best_plane_recovers_exact_plane():
    theta = 0.3
    mu0 = gen_hyperplane(1, 12.0, 0.05)
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    mu = DiscreteMeasure(1, mu0.points @ rot.T, mu0.weights, mu0.mesh)
    plane, val = best_plane(mu, [0.0, 0.0], 1.0)
    true_normal = rot @ np.array([0.0, 1.0])
    assert abs(abs(plane.normal @ true_normal) - 1) <= 1 - math.cos(math.pi / 64)
    assert val <= 2 * mu.mesh


def test_best_plane_refinement_monotone_and_near_optimal():
    mu = _graph(0.05)
    z = mu.points[240]
    plane, val, info = best_plane(mu, z, 1.0, return_trace=True)
    assert val <= info["initial"]
    assert all(a >= b for a, b in zip(info["trace"], info["trace"][1:]))
    angles = np.arange(512) * math.pi / 512
    oracle = min(geometric_defect(mu, FlatnessQuery(z, 1.0, 6.0, Hyperplane([math.cos(a), math.sin(a)])))
                 for a in angles)
    assert val <= 1.1 * oracle


@settings(max_examples=20)
@given(st.floats(-1.0, 1.0), st.integers(0, 480))
def test_best_plane_beats_supplied_planes(slope, i):
    mu = _graph(0.05)
    z = mu.points[i]
    user = [[slope, 1.0], [0.0, 1.0]]
    _, val = best_plane(mu, z, 1.0, candidates=user)
    for n in user:
        assert val <= geometric_defect(mu, FlatnessQuery(z, 1.0, 6.0, Hyperplane(n)))


def test_plane_defects_shrink_under_refinement():
    geo, an = [], []
    for h in (0.1, 0.05, 0.025):
        mu = gen_hyperplane(1, 12.0, h)
        q = FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ)
        geo.append(geometric_defect(mu, q))
        an.append(analytic_defect(mu, q))
    assert all(a >= b for a, b in zip(geo, geo[1:]))
    assert max(an) <= 1e-12


def _tilted(beta, h=0.05):
    mu = gen_hyperplane(1, 12.0, h)
    return DiscreteMeasure(1, mu.points, mu.weights * (1 + beta * mu.points[:, 0]), h)


@pytest.mark.parametrize("beta", [0.02, 0.04])
def test_tilt_matches_closed_form(beta):
    # the optimal test function is the odd tent min(|x|, 6 - |x|) sgn x, giving 54 beta
    q = FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ)
    assert analytic_defect(_tilted(beta), q) == pytest.approx(54 * beta, rel=0.01)


def test_tilt_ratio_against_full_pairwise_lp():
    q = FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ)
    sparse = [analytic_defect(_tilted(b, 0.1), q) for b in (0.02, 0.04)]
    full = [analytic_defect(_tilted(b, 0.1), q, full_pairs=True) for b in (0.02, 0.04)]
    assert sparse[1] / sparse[0] == pytest.approx(2.0, rel=0.15)
    assert np.allclose(sparse, full, rtol=1e-6)


def test_sine_graph_analytic_doubles():
    q = FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ)
    small, big = (analytic_defect(_graph(a, 0.1), q) for a in (0.05, 0.1))
    assert big / small == pytest.approx(2.0, rel=0.15)
    assert analytic_defect(_graph(0.1, 0.1), q, full_pairs=True) == pytest.approx(big, rel=1e-6)


def test_analytic_defect_is_dilation_invariant():
    mu = _tilted(0.03, 0.1)
    q = FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ)
    base = analytic_defect(mu, q)
    lam = 0.5
    # lambda^-d mu(lambda .) keeps the density, so the defect is unchanged
    scaled = DiscreteMeasure(1, mu.points * lam, mu.weights * lam, mu.mesh * lam)
    got = analytic_defect(scaled, FlatnessQuery([0.0, 0.0], lam, 6.0, HORIZ))
    assert got == pytest.approx(base, rel=1e-6)
    moved = translate(mu, [0.3, -0.2])
    assert analytic_defect(moved, FlatnessQuery([0.3, -0.2], 1.0, 6.0, HORIZ)) == pytest.approx(base, rel=1e-6)


def test_flatness_report_fields():
    mu = _graph(0.05, 0.1)
    rep = flatness_report(mu, FlatnessQuery([0.0, 0.0], 1.0, 6.0))
    d = rep.to_dict()
    assert set(d) == {"alpha_geo", "alpha_an", "normal", "lp_size", "slack"}
    assert rep.alpha_geo >= 0 and rep.alpha_an >= 0 and rep.lp_size > 0


def test_flat_predicate():
    lat = build_lattice(gen_hyperplane(1, 12.0, 0.05))
    pred = flat_predicate(lat, [[0.0, 1.0]], alpha=0.1)
    flags = [pred(c.id) for c in lat.cells]
    assert any(flags)
    assert not any(flat_predicate(lat, [[1.0, 0.0]], alpha=0.1)(c.id) for c in lat.cells)


def test_psi0_ramp():
    t = np.array([0.0, 1.0, 1.5, 2.0, 3.0])
    assert np.allclose(psi0(t), [1.0, 1.0, 0.5, 0.0, 0.0])
    tt = np.linspace(0, 3, 301)
    assert np.all(np.diff(psi0(tt)) <= 0)


def test_annulus_on_plane_cancels():
    mu = gen_hyperplane(1, 4.0, 0.01)
    v = annular_riesz(mu, np.zeros(2), 0.05, 0.4, 4.0)
    assert np.all(np.abs(v) <= 1e-10)


def test_annulus_half_plane_sign():
    mu = gen_hyperplane(1, 4.0, 0.01)
    keep = mu.points[:, 0] >= 0
    half = DiscreteMeasure(1, mu.points[keep], mu.weights[keep], mu.mesh)
    v = annular_riesz(half, np.zeros(2), 0.05, 0.4, 4.0)
    assert v[0] < 0 and abs(v[1]) <= 1e-12


def test_annulus_matches_naive_sum_on_cantor():
    mu = gen_cantor(4)
    rng = np.random.default_rng(0)
    for _ in range(10):
        z = mu.points[rng.integers(len(mu))]
        delta, Delta = sorted(rng.uniform(0.05, 0.45, 2))
        R = 1.0
        got = annular_riesz(mu, z, delta, Delta, R)
        want = np.zeros(2)
        for p, w in zip(mu.points, mu.weights):
            r = np.linalg.norm(z - p)
            psi = psi0(r / (Delta * R)) - psi0(r / (delta * R))
            if psi != 0:
                want += psi * w * (z - p) / r ** 2
        assert np.allclose(got, want, rtol=1e-10, atol=1e-14)


def test_annulus_additivity():
    mu = gen_cantor(4)
    z = mu.points[7]
    psi_a = annulus_weight(mu, z, 0.05, 0.1)
    psi_b = annulus_weight(mu, z, 0.1, 0.4)
    assert np.allclose(psi_a + psi_b, annulus_weight(mu, z, 0.05, 0.4), atol=1e-15)
    whole = annular_riesz(mu, z, 0.05, 0.4, 1.0)
    parts = annular_riesz(mu, z, 0.05, 0.1, 1.0) + annular_riesz(mu, z, 0.1, 0.4, 1.0)
    assert np.allclose(whole, parts, atol=1e-12)


def test_annulus_errors():
    mu = gen_cantor(3)
    with pytest.raises(DomainError):
        annular_riesz(mu, [5.0, 5.0], 0.1, 0.4, 1.0)
    with pytest.raises(InvalidParameterError):
        annular_riesz(mu, mu.points[0], 0.3, 0.2, 1.0)


def test_cell_approx_properties():
    mu = gen_hyperplane(1, 4.0, 1 / 256)
    lat = build_lattice(mu)
    eps = 1 / 48
    cells = [c.id for c in lat.cells_at(lat.k_max) if lat.is_interior(c.id)]
    assert cells
    for cid in cells:
        ap = cell_approx(lat, cid, eps)
        assert ap.nu_mass == pytest.approx(math.fsum(ap.phi_support * mu.weights[ap.support]), rel=1e-10)
        assert np.all((ap.phi_grid >= 0) & (ap.phi_grid <= 1))
        assert np.all((ap.phi_support >= 0) & (ap.phi_support <= 1))
        depth = spatial_depth(lat, cid, mu.points[ap.support])
        assert np.all(ap.phi_support[depth >= 3 * eps] == 1.0)
        assert 0.1 <= ap.a <= 10
    with pytest.raises(InvalidParameterError):
        cell_approx(lat, cells[0], 0.03)
