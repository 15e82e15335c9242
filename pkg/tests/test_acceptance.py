"""Acceptance criteria 1-9, one test each.

Every test stores a short summary of what it measured; the terminal summary
prints one PASS/FAIL line per criterion (see conftest.py).
"""

import itertools
import math
import time
from fractions import Fraction

import numpy as np

from _oracles import alternating_violations, brute_certify, layer_violations
from _toys import toy_lattice
from rieszlab.baup import eligible_cells, nonbaup_family
from rieszlab.carleson import (
    alternating_layers, carleson_constant, check_alternating, check_layer_stack, non_carleson_layers,
)
from rieszlab.cli import main
from rieszlab.flatness import FlatnessQuery, analytic_defect, geometric_defect
from rieszlab.lattice import build_lattice, small_boundary_profile
from rieszlab.measure import DiscreteMeasure, gen_cantor, gen_hyperplane, gen_lipschitz_graph
from rieszlab.riesz.kernels import Hyperplane, KernelSpec, kernel_block
from rieszlab.riesz.operators import (
    Tree, adjoint_apply, contracted_transform, dense_op_norm, inner, op_norm, plane_isometry_constant,
    riesz_transform,
)

E2 = np.array([0.0, 1.0])
HORIZ = Hyperplane(E2)


def _variation(values):
    hi, lo = max(values), min(values)
    return 0.0 if hi == 0 else (hi - lo) / hi


def _verdict(record, parts):
    """Store the per-part summary, then fail listing the parts that did not hold."""
    record("detail", "; ".join(f"{k}: {'ok' if ok else 'FAIL'} ({info})" for k, (ok, info) in parts.items()))
    bad = [k for k, (ok, _) in parts.items() if not ok]
    assert not bad, f"failed parts: {bad}"


def test_criterion_1_lattice_certificates(record_property):
    t0 = time.perf_counter()
    parts = {}
    for name, mu in (("plane", gen_hyperplane(1, 1.0, 0.004)),
                     ("graph", gen_lipschitz_graph(1, 0.1, 1.0, 1.0, 0.005)),
                     ("cantor5", gen_cantor(5))):
        lat = build_lattice(mu)
        try:
            brute_certify(lat)
            parts[name] = (True, f"{len(mu)} pts, levels {lat.k_min}..{lat.k_max}")
        except AssertionError as exc:
            parts[name] = (False, f"certificate broken: {exc}")
    elapsed = time.perf_counter() - t0
    parts["runtime"] = (elapsed < 60, f"{elapsed:.1f}s < 60s")
    _verdict(record_property, parts)


def test_criterion_2_small_boundary(record_property):
    prof = small_boundary_profile(build_lattice(gen_hyperplane(1, 1.0, 1 / 1024)))
    frac, gamma = prof["monotone_fraction"], prof["gamma"]
    _verdict(record_property, {
        "monotone": (prof["cells"] > 0 and frac >= 0.95, f"{frac:.3f} of {prof['cells']} cells"),
        "gamma": (gamma > 0, f"gamma={gamma:.3f}"),
    })


def _antisymmetry_exact(rng):
    L = Hyperplane(E2, [0.0, -0.5])
    x = rng.random((200, 2)) * 2 - [1.0, 0.0]
    y = rng.random((200, 2)) * 2 - [1.0, 0.0]
    ok = True
    for delta in (0.0, 0.01, 0.3):
        for spec in (KernelSpec("full", delta), KernelSpec("restricted", delta, HORIZ),
                     KernelSpec("reflected", delta, HORIZ, L)):
            fwd = kernel_block(spec, x, y, 1)
            back = kernel_block(spec, y, x, 1)
            ok &= bool(np.array_equal(fwd, -np.swapaxes(back, 0, 1)))
    return ok


def _adjoint_worst(rng):
    L = Hyperplane(E2, [0.0, -0.5])
    worst = 0.0
    for spec in (KernelSpec("full", 0.02), KernelSpec("restricted", 0.02, HORIZ),
                 KernelSpec("reflected", 0.02, HORIZ, L)):
        mu = DiscreteMeasure(1, rng.random((500, 2)), rng.random(500) + 0.5, 0.01)
        f = rng.standard_normal(500)
        g = spec.plane.project_vectors(rng.standard_normal((500, 2))) if spec.plane else rng.standard_normal((500, 2))
        rf = inner(mu, riesz_transform(mu, f, spec).values, g)
        scale = math.sqrt(inner(mu, f, f) * inner(mu, g, g)) * dense_op_norm(mu, spec)
        worst = max(worst, abs(rf + inner(mu, f, contracted_transform(mu, g, spec))) / scale,
                    abs(rf - inner(mu, f, adjoint_apply(mu, g, spec))) / scale)
    return worst


def _tree_worst(instances=100, n=10_000, targets=200):
    worst = 0.0
    spec = KernelSpec("full", 0.01)
    for seed in range(instances):
        rng = np.random.default_rng(seed)
        mu = DiscreteMeasure(1, rng.random((n, 2)), np.full(n, 1 / n), 0.01)
        f = 1.0 + rng.random(n)
        tg = mu.points[rng.choice(n, targets, replace=False)]
        naive = riesz_transform(mu, f, spec, targets=tg).values
        tree = riesz_transform(mu, f, spec, targets=tg, method=Tree(0.2, "dipole")).values
        err = np.linalg.norm(tree - naive, axis=1) / np.linalg.norm(naive, axis=1)
        worst = max(worst, float(err.max()))
    return worst


def test_criterion_3_kernel_operator_suite(record_property):
    rng = np.random.default_rng(0)
    exact = _antisymmetry_exact(rng)
    adj = _adjoint_worst(rng)
    tree = _tree_worst()
    _verdict(record_property, {
        "antisymmetry": (exact, "bit-exact over 3 variants x 3 truncations"),
        "adjoint": (adj <= 1e-10, f"max rel {adj:.1e} <= 1e-10"),
        "tree": (tree <= 1e-4, f"max rel {tree:.2e} <= 1e-4 at theta=0.2 dipole, 100 instances"),
    })


def test_criterion_4_plane_isometry(record_property):
    t0 = time.perf_counter()
    fit = plane_isometry_constant(1, 4001)
    elapsed = time.perf_counter() - t0
    rel = abs(abs(fit.value) - math.pi ** 2) / math.pi ** 2
    _verdict(record_property, {
        "constant": (rel <= 0.05, f"|c|={abs(fit.value):.4f}, {100 * rel:.2f}% from pi^2"),
        "dispersion": (fit.dispersion <= 0.05, f"{fit.dispersion:.4f}"),
        "runtime": (elapsed < 30, f"{elapsed:.1f}s < 30s"),
    })


def test_criterion_5_dichotomy(record_property):
    t0 = time.perf_counter()
    cantor = [op_norm(gen_cantor(n), KernelSpec("full", 4.0 ** -n), strict_window=False).value
              for n in (2, 3, 4, 5)]
    h = 2.0 / 1999
    plane = gen_hyperplane(1, 1.0, h)
    flat = [op_norm(plane, KernelSpec("full", m * h)).value for m in (8, 16, 32)]
    elapsed = time.perf_counter() - t0
    _verdict(record_property, {
        "cantor": (all(a < b for a, b in zip(cantor, cantor[1:])),
                   "n=2..5: " + ", ".join(f"{v:.4f}" for v in cantor)),
        "plane": (_variation(flat) < 0.2,
                  "8h,16h,32h: " + ", ".join(f"{v:.3f}" for v in flat) + f", variation {_variation(flat):.3f}"),
        "runtime": (elapsed < 300, f"{elapsed:.1f}s < 300s"),
    })


def test_criterion_6_flatness_calibration(record_property):
    plane = gen_hyperplane(1, 12.0, 0.05)
    geo_ok, an_ok, worst_geo = True, True, 0.0
    for z, ell in (([0.0, 0.0], 1.0), ([1.3, 0.0], 0.5), ([-2.0, 0.0], 0.75)):
        q = FlatnessQuery(z, ell, 6.0, HORIZ)
        geo = geometric_defect(plane, q)
        value, info = analytic_defect(plane, q, return_report=True)
        geo_ok &= geo <= 2 * plane.mesh / ell
        an_ok &= value <= info["slack"] + 1e-12
        worst_geo = max(worst_geo, geo * ell / plane.mesh)
    q = FlatnessQuery([0.0, 0.0], 1.0, 6.0, HORIZ)
    graphs = [gen_lipschitz_graph(1, a, 1.0, 12.0, 0.05) for a in (0.05, 0.1)]
    small, big = (analytic_defect(g, q) for g in graphs)
    full = [analytic_defect(g, q, full_pairs=True) for g in graphs]
    ratio = big / small
    oracle_ok = len(graphs[0]) <= 800 and np.allclose([small, big], full, rtol=1e-6)
    _verdict(record_property, {
        "plane geometric": (geo_ok, f"max {worst_geo:.2f} mesh/l <= 2"),
        "plane analytic": (an_ok, "within LP slack"),
        "sine doubling": (abs(ratio - 2) <= 0.3, f"{small:.4f} -> {big:.4f}, ratio {ratio:.4f}"),
        "full-pair oracle": (oracle_ok, f"N={len(graphs[0])}, " + ", ".join(f"{v:.4f}" for v in full)),
    })


def test_criterion_7_baup_dichotomy(record_property):
    plane = gen_hyperplane(1, 1.0, 1 / 1024)
    plane_lat = build_lattice(plane)
    plane_fam = nonbaup_family(plane, plane_lat, 0.1, interior_only=True)
    consts, frac = [], None
    for n in (3, 4, 5):
        mu = gen_cantor(n)
        lat = build_lattice(mu)
        fam = nonbaup_family(mu, lat, 0.1)
        consts.append(carleson_constant(lat, fam).best_constant)
        if n == 5:
            frac = len(fam) / len(eligible_cells(mu, lat, 0.1))
    lip = []
    for n in (3, 4, 5):
        mu = gen_lipschitz_graph(1, 0.05, 1.0, 1.0, 4.0 ** -n)
        lat = build_lattice(mu)
        lip.append(carleson_constant(lat, nonbaup_family(mu, lat, 0.1, interior_only=True)).best_constant)
    _verdict(record_property, {
        "plane empty": (plane_fam == [], f"{len(plane_fam)} non-BAUP interior cells"),
        "cantor fraction": (frac >= 0.5, f"{frac:.2f} >= 0.5"),
        "cantor constants": (all(a < b for a, b in zip(consts, consts[1:])),
                             "depth 3,4,5: " + ", ".join(f"{c:g}" for c in consts)),
        "lipschitz": (_variation(lip) < 0.25, "depth 3,4,5: " + ", ".join(f"{c:g}" for c in lip)),
    })


TOY_SHAPES = [
    [[1, 1], [2]],
    [[[1, 1], [1]]],
    [[[1], [1, 1]], [[2]]],
    [[[[1, 1]], [[1]]]],
    [[[[1], [1]]]],
]


def _working(lat, fam, flat, N):
    out = []
    for c in fam:
        below, layer = [c], [c]
        for _ in range(N):
            layer = [ch for x in layer for ch in lat.cells[x].children]
            below += layer
        if any(flat(b) for b in below):
            out.append(c)
    return set(out)


def _subsets(ids):
    return itertools.chain.from_iterable(itertools.combinations(ids, r) for r in range(1, len(ids) + 1))


def test_criterion_8_layer_algebra(record_property):
    runs = ok_nc = ok_alt = 0
    bad = []
    for shape in TOY_SHAPES:
        lat = toy_lattice(shape)
        assert lat.k_max - lat.k_min + 1 <= 4
        ids = list(range(len(lat)))
        # every consecutive run of L levels has constant exactly L
        for lo in range(lat.k_min, lat.k_max + 1):
            for hi in range(lo, lat.k_max + 1):
                fam = [c for k in range(lo, hi + 1) for c in lat.levels[k]]
                if carleson_constant(lat, fam).exact != hi - lo + 1:
                    bad.append(f"levels {lo}..{hi}")
        for fam in _subsets(ids):
            for M, eta in itertools.product((1, 2, 3), (0.25, 0.5)):
                res = non_carleson_layers(lat, fam, M, eta)
                runs += 1
                if res.ok:
                    ok_nc += 1
                    v = layer_violations(lat, res.root, res.layers, fam) + check_layer_stack(lat, res, fam)
                    mass = sum(lat.exact_mass(c) for c in res.layers[-1])
                    if v or len(res.layers) != M + 1 or mass < (1 - Fraction(eta)) * lat.exact_mass(res.root):
                        bad.append(f"layers {shape} {fam} {M} {eta}: {v}")
        if len(ids) > 7:
            continue
        for fam in _subsets(ids):
            for flat_set in _subsets(ids):
                flat = set(flat_set).__contains__
                for K, N, S in itertools.product((0, 1), (1, 2), (1, 2)):
                    res = alternating_layers(lat, fam, flat, K, 0.5, N, S)
                    runs += 1
                    if not res.ok:
                        continue
                    ok_alt += 1
                    work = _working(lat, fam, flat, N)
                    v = alternating_violations(lat, res.root, res.layers, res.flat_layers, work, flat)
                    v += check_alternating(lat, res, work, flat)
                    if v or len(res.layers) != K + 1:
                        bad.append(f"alternating {shape} {fam} {flat_set} {K}{N}{S}: {v}")
    detail = f"{runs} exhaustive runs, {ok_nc} layer stacks and {ok_alt} alternating stacks verified"
    _verdict(record_property, {"structure": (not bad, detail if not bad else "; ".join(bad[:3]))})


def test_criterion_9_determinism(tmp_path, capsys, record_property):
    argv = ["gen=cantor", "depth=4", "stages=lattice,flatness,baup,carleson,layers,riesz", "seed=11"]
    blobs = []
    for name in ("a", "b"):
        assert main(["run", *argv, f"out={tmp_path / name}"]) == 0
        blobs.append((tmp_path / name / "report.json").read_bytes())
    capsys.readouterr()
    _verdict(record_property, {"report.json": (blobs[0] == blobs[1], f"{len(blobs[0])} bytes, identical")})
