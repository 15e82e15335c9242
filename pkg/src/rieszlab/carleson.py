"""Carleson packing of cell families, layer extraction and Riesz-system statistics.

Containment between cells is the lattice's nesting: ``Q`` lies in ``P``
when ``P`` is ``Q`` or one of its ancestors. Masses are summed as exact
rationals so that constants such as "``L`` full levels give ``L``" hold
exactly.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._lipschitz import neighbour_pairs, solve_lipschitz_lp
from ._validation import check_int, check_positive
from .baup import direction_grid
from .exceptions import ConstructionInvariantError, DegenerateInputError, InvalidParameterError
from .measure import ball_indices
from .riesz.kernels import KernelSpec
from .riesz.operators import riesz_transform

MAX_RATIO_ROWS = 200


@dataclass(frozen=True)
class CellFamily:
    """A labelled set of cell ids of one lattice."""

    label: str
    ids: tuple

    def __post_init__(self):
        object.__setattr__(self, "ids", tuple(sorted({int(i) for i in self.ids})))

    def validate(self, lattice):
        bad = [i for i in self.ids if not 0 <= i < len(lattice)]
        if bad:
            raise InvalidParameterError(f"family {self.label!r} has ids outside the lattice: {bad[:5]}")
        return self

    def to_dict(self):
        return {"label": self.label, "ids": list(self.ids)}

    @classmethod
    def from_dict(cls, data):
        return cls(data["label"], data["ids"])


def _ids(lattice, family):
    ids = family.ids if isinstance(family, CellFamily) else tuple(sorted({int(i) for i in family}))
    CellFamily("family", ids).validate(lattice)
    return ids


@dataclass(frozen=True)
class CarlesonReport:
    """Best Carleson constant of a family, with the cell attaining it."""

    best_constant: float
    witness: int = None
    exact: Fraction = Fraction(0)
    ratios: dict = field(default_factory=dict)

    def to_dict(self):
        return {"best_constant": self.best_constant, "witness": self.witness,
                "ratios": {str(k): v for k, v in sorted(self.ratios.items())}}


def packing_sums(lattice, family):
    """``P -> sum of mu(Q)`` over family cells ``Q`` inside ``P`` (exact)."""
    acc = {}
    for q in _ids(lattice, family):
        m = lattice.exact_mass(q)
        for p in (q, *lattice.ancestors(q)):
            acc[p] = acc.get(p, Fraction(0)) + m
    return acc


def carleson_constant(lattice, family, max_rows=MAX_RATIO_ROWS):
    """Exact best Carleson constant of ``family``.

    Each family cell adds its mass to itself and to its ancestors, so the
    cost is ``O(|family| * depth)``. Ties for the maximum go to the coarsest
    cell, then to the lowest id. ``ratios`` keeps the ``max_rows`` largest.
    """
    acc = packing_sums(lattice, family)
    if not acc:
        return CarlesonReport(0.0, None, Fraction(0), {})
    ratio = {p: s / lattice.exact_mass(p) for p, s in acc.items()}
    order = sorted(ratio, key=lambda p: (-ratio[p], lattice.cells[p].k, p))
    best = order[0]
    rows = {p: float(ratio[p]) for p in order[:max_rows]}
    return CarlesonReport(float(ratio[best]), best, ratio[best], rows)


# ---------------------------------------------------------------- layers


@dataclass(frozen=True)
class Refusal:
    """Returned instead of a layer stack when the family cannot support it."""

    reason: str
    root: int = None
    coverage: float = 0.0
    layers: tuple = ()

    ok = False

    def to_dict(self):
        return {"ok": False, "reason": self.reason, "root": self.root, "coverage": self.coverage,
                "layers": [list(x) for x in self.layers]}


@dataclass(frozen=True)
class LayerStack:
    """Nested layers under a root cell.

    For non-Carleson layers ``layers`` holds ``L_0..L_M``. For alternating
    layers ``layers`` holds ``P_0..P_K`` and ``flat_layers`` holds
    ``Q_0..Q_K``.
    """

    root: int
    layers: tuple
    coverage: float
    flat_layers: tuple = ()
    accounting: tuple = ()
    repeats: tuple = ()
    mass_bound_met: bool = True

    ok = True

    def to_dict(self):
        out = {"ok": True, "root": self.root, "coverage": self.coverage,
               "layers": [list(x) for x in self.layers], "repeats": list(self.repeats)}
        if self.flat_layers:
            out["flat_layers"] = [list(x) for x in self.flat_layers]
            out["accounting"] = [dict(a) for a in self.accounting]
            out["mass_bound_met"] = self.mass_bound_met
        return out


def _inside(lattice, q, p):
    """True if cell ``q`` lies in cell ``p`` (equal or descendant)."""
    return q == p or p in lattice.ancestors(q)


def maximal_cells(lattice, ids):
    """Cells of ``ids`` with no strict ancestor in ``ids``."""
    s = set(ids)
    return sorted(c for c in s if not any(a in s for a in lattice.ancestors(c)))


def _fraction_sum(lattice, ids):
    return sum((lattice.exact_mass(c) for c in ids), Fraction(0))


def peel_layers(lattice, family, root, M):
    """``L_0 = {root}``, then ``L_m`` = maximal cells of the rest of the family inside ``root``.

    Stops early (returning fewer than ``M + 1`` layers) once the family is used up.
    """
    ids = _ids(lattice, family)
    rest = {q for q in ids if q != root and _inside(lattice, q, root)}
    layers = [(root,)]
    for _ in range(M):
        layer = maximal_cells(lattice, rest)
        if not layer:
            break
        layers.append(tuple(layer))
        rest.difference_update(layer)
    return layers


def _best_root(lattice, ids):
    acc = packing_sums(lattice, ids)
    s = set(ids)
    cand = [p for p in acc if p in s]
    ratio = {p: acc[p] / lattice.exact_mass(p) for p in cand}
    return min(cand, key=lambda p: (-ratio[p], lattice.cells[p].k, p))


def non_carleson_layers(lattice, family, M, eta):
    """Non-Carleson layers ``L_0..L_M`` under the family cell of largest packing ratio.

    Succeeds iff ``mu(L_M) >= (1 - eta) mu(P)``. Otherwise, or if the family
    runs out of cells before ``M`` layers, a :class:`Refusal` carrying the
    achieved coverage is returned.
    """
    M = check_int(M, "M", minimum=1)
    if not 0 < eta < 1:
        raise InvalidParameterError(f"eta must lie in (0, 1), got {eta}")
    ids = _ids(lattice, family)
    if not ids:
        return Refusal("empty family")
    root = _best_root(lattice, ids)
    layers = peel_layers(lattice, ids, root, M)
    if len(layers) < M + 1:
        return Refusal(f"family exhausted after {len(layers) - 1} layers", root, 0.0, tuple(layers))
    cov = _fraction_sum(lattice, layers[-1]) / lattice.exact_mass(root)
    if cov < 1 - Fraction(eta):
        return Refusal("bottom layer coverage below 1 - eta", root, float(cov), tuple(layers))
    stack = LayerStack(root, tuple(layers), float(cov))
    violations = check_layer_stack(lattice, stack, ids)
    if violations:
        raise ConstructionInvariantError("non-Carleson layers: " + "; ".join(violations), stack)
    return stack


def _disjoint(lattice, layer):
    seen = set()
    for c in layer:
        m = set(lattice.cells[c].members.tolist())
        if seen & m:
            return False
        seen |= m
    return True


def check_layer_stack(lattice, stack, family):
    """Violations of the non-Carleson layer properties (empty list when valid)."""
    fam = set(_ids(lattice, family))
    out = []
    layers = stack.layers
    if tuple(layers[0]) != (stack.root,):
        out.append("L_0 is not {P}")
    flat = [c for layer in layers for c in layer]
    if len(flat) != len(set(flat)):
        out.append("a cell appears in two layers")
    for m, layer in enumerate(layers):
        if any(c not in fam or not _inside(lattice, c, stack.root) for c in layer):
            out.append(f"L_{m} leaves the family inside P")
        if not _disjoint(lattice, layer):
            out.append(f"L_{m} is not pairwise disjoint")
        if m:
            prev = set(layers[m - 1])
            for c in layer:
                hits = [a for a in lattice.ancestors(c) if a in prev]
                if len(hits) != 1:
                    out.append(f"cell {c} of L_{m} has {len(hits)} strict containers in L_{m - 1}")
    return out


def _has_flat_below(lattice, cid, flat, N):
    layer = [cid]
    for _ in range(N + 1):
        if any(flat(c) for c in layer):
            return True
        layer = [ch for c in layer for ch in lattice.cells[c].children]
    return False


def alternating_layers(lattice, nonbaup_family, flat_predicate, K, eta, N, S=2):
    """Alternating non-BAUP layers ``P_k`` and flat layers ``Q_k``, ``k = 0..K``.

    The working family is the non-BAUP cells holding a flat cell at most
    ``N`` levels down. Non-Carleson layers ``L_0..L_{(K+1)SN}`` are peeled
    under its best root; then for ``m = 0, SN, ..., KSN`` the cells of
    ``L_{m+SN}`` inside ``P_k`` that are not exceptional become ``P_{k+1}``
    and the maximal flat cells between them and ``P_k`` become ``Q_k``.

    ``accounting[k]`` records, for the step from ``P_k``, the exceptional
    mass fraction at each ``s = 1..S``, the mass outside ``P_k`` and the
    resulting mass of ``P_{k+1}``. The final bound ``mu(Q_K) >= (1-eta) mu(P)``
    is reported in ``mass_bound_met`` rather than enforced.
    """
    K = check_int(K, "K", minimum=0)
    N = check_int(N, "N", minimum=1)
    S = check_int(S, "S", minimum=1)
    if not 0 < eta < 1:
        raise InvalidParameterError(f"eta must lie in (0, 1), got {eta}")
    flat_cache = {}

    def flat(c):
        if c not in flat_cache:
            flat_cache[c] = bool(flat_predicate(c))
        return flat_cache[c]

    fam = [c for c in _ids(lattice, nonbaup_family) if _has_flat_below(lattice, c, flat, N)]
    if not fam:
        return Refusal("no non-BAUP cell holds a flat cell within N levels")
    root = _best_root(lattice, fam)
    M = (K + 1) * S * N
    L = peel_layers(lattice, fam, root, M)
    if len(L) < M + 1:
        return Refusal(f"only {len(L) - 1} non-Carleson layers below the root, {M} needed",
                       root, 0.0, tuple(L))
    mroot = lattice.exact_mass(root)
    P_layers, Q_layers, acct = [L[0]], [], []
    current = list(L[0])
    for k in range(K + 1):
        m = k * S * N
        owner = {}
        for s in range(1, S + 1):
            for c in L[m + s * N]:
                anc = set(lattice.ancestors(c))
                hit = [p for p in current if p in anc]
                if hit:
                    owner[c] = hit[0]
        exc_frac = []
        for s in range(1, S + 1):
            exc = [c for c in L[m + s * N] if c in owner and not _flat_between(lattice, c, owner[c], flat)]
            exc_frac.append(float(_fraction_sum(lattice, exc) / mroot))
        bottom = L[m + S * N]
        outside = [c for c in bottom if c not in owner]
        nxt = [c for c in bottom if c in owner and _flat_between(lattice, c, owner[c], flat)]
        qset = set()
        for c in nxt:
            for a in (c, *lattice.ancestors(c)):
                if flat(a):
                    qset.add(a)
                if a == owner[c]:
                    break
        Q_layers.append(tuple(maximal_cells(lattice, qset)))
        acct.append({
            "step": k,
            "exceptional": exc_frac,
            "outside": float(_fraction_sum(lattice, outside) / mroot),
            "kept": float(_fraction_sum(lattice, nxt) / mroot),
        })
        if k < K:
            P_layers.append(tuple(sorted(nxt)))
        current = nxt
    cov = _fraction_sum(lattice, Q_layers[-1]) / mroot
    cells = [c for layer in P_layers + Q_layers for c in layer]
    repeats = tuple(sorted({c for c in cells if cells.count(c) > 1}))
    stack = LayerStack(root, tuple(P_layers), float(cov), tuple(Q_layers), tuple(acct), repeats,
                       bool(cov >= 1 - Fraction(eta)))
    violations = check_alternating(lattice, stack, fam, flat)
    if violations:
        raise ConstructionInvariantError("alternating layers: " + "; ".join(violations), stack)
    return stack


def _flat_between(lattice, low, high, flat):
    """True if some flat cell ``Q`` has ``low <= Q <= high`` in the nesting."""
    for a in (low, *lattice.ancestors(low)):
        if flat(a):
            return True
        if a == high:
            return False
    return False


def check_alternating(lattice, stack, family, flat_predicate):
    """Violations of the structural properties of alternating layers (mass bound excluded)."""
    fam = set(_ids(lattice, family))
    P, Q = stack.layers, stack.flat_layers
    out = []
    if tuple(P[0]) != (stack.root,):
        out.append("P_0 is not {P}")
    if len(P) != len(Q):
        out.append("P and Q layer counts differ")
    for k, layer in enumerate(P):
        if any(c not in fam or not _inside(lattice, c, stack.root) for c in layer):
            out.append(f"P_{k} leaves the family inside P")
    for k, layer in enumerate(Q):
        if not all(flat_predicate(c) for c in layer):
            out.append(f"Q_{k} holds a non-flat cell")
    for name, group in (("P", P), ("Q", Q)):
        for k, layer in enumerate(group):
            if not _disjoint(lattice, layer):
                out.append(f"{name}_{k} is not pairwise disjoint")
    for k in range(min(len(P), len(Q))):
        for q in Q[k]:
            if not any(_inside(lattice, q, p) for p in P[k]):
                out.append(f"cell {q} of Q_{k} lies in no cell of P_{k}")
    for k in range(1, len(P)):
        for p in P[k]:
            if not any(_inside(lattice, p, q) for q in Q[k - 1]):
                out.append(f"cell {p} of P_{k} lies in no cell of Q_{k - 1}")
    return out


# ---------------------------------------------------------------- xi and Bessel


def _cell_depth_check(lattice, cid, N):
    c = lattice.cells[cid]
    if c.k + N > lattice.k_max:
        raise InvalidParameterError(
            f"cell {cid} at level {c.k} is too shallow for Haar depth {N} (k_max={lattice.k_max})"
        )


def haar_projection(lattice, cid, values, N=1):
    """L2(mu) norm of the projection of ``values`` onto the depth-``N`` Haar space of a cell.

    The space holds the mean-zero functions on the cell that are constant on
    its descendants ``N`` levels down. ``values`` is ``(n,)`` or ``(n, m)``;
    vector values are projected component-wise and the norms combined.
    Returns ``(norm, coefficients)`` where ``coefficients`` has one row per
    piece: the piece mean minus the cell mean.
    """
    N = check_int(N, "N", minimum=1)
    _cell_depth_check(lattice, cid, N)
    v = np.asarray(values, dtype=np.float64)
    v = v.reshape(len(v), -1)
    w = lattice.mu.weights
    pieces = lattice.descendants(cid, N)
    mass = np.array([lattice.mass(p) for p in pieces])
    means = np.array([(w[lattice.cells[p].members, None] * v[lattice.cells[p].members]).sum(0) / lattice.mass(p)
                      for p in pieces])
    overall = (mass[:, None] * means).sum(0) / mass.sum()
    dev = means - overall
    return math.sqrt(max(0.0, float((mass[:, None] * dev ** 2).sum()))), dev


def _lip_extremum(mu, z, ell, A, values, seed=0):
    """Sup of ``|<values, psi>|`` over the Lipschitz wavelets of a cell.

    ``psi`` is scalar, mean zero, supported in ``B(z, A l)`` with Lipschitz
    constant ``l^(-d/2-1)``. Vector values are handled by maximising over
    a grid of directions ``u`` (step pi/8) of ``<u . values, psi>``.
    Returns ``(value, psi, idx)`` with ``psi`` sampled at support indices ``idx``.
    """
    idx = ball_indices(mu, z, A * ell)
    if idx.size < 2:
        return 0.0, np.zeros(idx.size), idx
    nodes = mu.points[idx]
    w = mu.weights[idx]
    lip = ell ** (-mu.d / 2.0 - 1.0)
    caps = lip * np.maximum(A * ell - np.sqrt(((nodes - z) ** 2).sum(axis=1)), 0.0)
    pairs = neighbour_pairs(nodes, seed=seed)
    v = np.asarray(values, dtype=np.float64).reshape(len(mu), -1)[idx]
    dirs = np.eye(1) if v.shape[1] == 1 else direction_grid(v.shape[1], math.pi / 8)
    best, best_psi = 0.0, np.zeros(idx.size)
    for u in dirs:
        res = solve_lipschitz_lp(nodes, w * (v @ u), caps, lip, pairs, eq_rows=[w], seed=seed)
        if res.value > best:
            best, best_psi = res.value, res.f
    return best, best_psi, idx


def xi_statistic(lattice, cid, system="haar", A_ext=2.0, N=1, delta=None, method=None,
                 threads=None, seed=0):
    """Upper bound on ``xi(P)``: the test set is ``E = B(z_P, (4 + A_ext) l(P))``.

    Parameters
    ----------
    system : {"haar", "lip"}
        Haar functions of depth ``N`` (unit L2 norm) or Lipschitz wavelets
        supported on ``B(z_P, A_ext l(P))``.
    A_ext : float
        Extension factor, ``> 1``.
    delta : float, optional
        Truncation of the Riesz transform (default ``4 mesh``).
    """
    if system not in ("haar", "lip"):
        raise InvalidParameterError(f"system must be 'haar' or 'lip', got {system!r}")
    A_ext = check_positive(A_ext, "A_ext")
    if A_ext <= 1:
        raise InvalidParameterError(f"A_ext must exceed 1, got {A_ext}")
    mu = lattice.mu
    c = lattice.cells[cid]
    if system == "haar":
        _cell_depth_check(lattice, cid, check_int(N, "N", minimum=1))
    delta = 4.0 * mu.mesh if delta is None else check_positive(delta, "delta")
    z = mu.points[c.center]
    ell = c.scale
    chi = np.zeros(len(mu))
    chi[ball_indices(mu, z, (4.0 + A_ext) * ell)] = 1.0
    spec = KernelSpec("full", delta)
    if system == "haar":
        tg = c.members
    else:
        tg = ball_indices(mu, z, A_ext * ell)
    field_ = np.zeros((len(mu), mu.ambient_dim))
    if tg.size:
        field_[tg] = riesz_transform(mu, chi, spec, targets=mu.points[tg], method=method,
                                     threads=threads).values
    if system == "haar":
        val, _ = haar_projection(lattice, cid, field_, N)
    else:
        val, _, _ = _lip_extremum(mu, z, ell, A_ext, field_, seed=seed)
    return val / math.sqrt(lattice.mass(cid))


def bessel_check(lattice, f, system="haar", N=1, A_ext=2.0, cells=None, seed=0):
    """Bessel ratio ``sum_Q <f, psi_Q>^2 / ||f||^2`` with ``psi_Q`` the cell-wise extremiser.

    For Haar systems ``psi_Q`` is the normalised projection of ``f``, so each
    term is the squared projection norm. Cells default to every cell deep
    enough for the system.
    """
    mu = lattice.mu
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != len(mu):
        raise InvalidParameterError(f"f has {f.shape[0]} rows for {len(mu)} support points")
    v = f.reshape(len(mu), -1)
    norm2 = math.fsum((mu.weights[:, None] * v ** 2).ravel())
    if norm2 == 0.0:
        raise DegenerateInputError("f vanishes in L2(mu); the Bessel ratio is undefined")
    if cells is None:
        cells = [c.id for c in lattice.cells if system != "haar" or c.k + N <= lattice.k_max]
    terms = []
    for cid in cells:
        if system == "haar":
            val, _ = haar_projection(lattice, cid, v, N)
        else:
            c = lattice.cells[cid]
            val, _, _ = _lip_extremum(mu, mu.points[c.center], c.scale, A_ext, v, seed=seed)
        terms.append(val * val)
    return math.fsum(terms) / norm2
