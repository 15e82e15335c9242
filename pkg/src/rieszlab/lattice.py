"""David-Semmes lattice on a discrete measure.

Scales are ``l_k = 16^(-k)``. Each level carries a maximal ``l_k``-separated
net ``Z_k`` of support points and its Voronoi cells ``V_z``. A net point
``w`` at a finer level descends from ``z`` when a chain of Voronoi cells,
one per level and each meeting the next, links them; ``~V_z`` is the union
of the Voronoi cells of all descendants. Nets are ordered level by level
(the nobility order) and each support point joins the top-ranked ``z`` with
``x`` in ``~V_z``, which gives the cells ``E_z``.

Every construction is certified: nesting, per-level partition, the ball
sandwich ``B(z, l/4) & E  <=  E_z  <=  B(z, 2l)``, net separation and
covering, and consistency of the order across levels.
"""

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import sparse
from scipy.spatial import cKDTree

from ._validation import check_int, check_positive, check_vector
from .exceptions import ConstructionInvariantError, InvalidParameterError, ScaleWindowError
from .measure import is_interior

TIE_SLACK = 1e-12


def scale_of(k):
    return 16.0 ** (-k)


def default_levels(mu):
    """Largest level range ``(k_min, k_max)`` inside the valid scale window.

    ``k_min`` is the coarsest level with ``16^-k <= diam`` and ``k_max`` the
    finest with ``16^-k >= 4*mesh``.
    """
    diam = mu.diameter
    if diam <= 0:
        return 0, 0
    k_min = math.ceil(-math.log(diam, 16) - 1e-12)
    k_max = math.floor(-math.log(4.0 * mu.mesh, 16) + 1e-12)
    return k_min, k_max


def _check_levels(mu, k_min, k_max, strict_window):
    if len(mu) == 0:
        raise InvalidParameterError("measure is empty")
    if k_min is None or k_max is None:
        lo, hi = default_levels(mu)
        k_min = lo if k_min is None else k_min
        k_max = max(hi, k_min) if k_max is None else k_max
    k_min = check_int(k_min, "k_min")
    k_max = check_int(k_max, "k_max")
    if k_max < k_min:
        raise InvalidParameterError(f"k_max={k_max} is below k_min={k_min}")
    if strict_window:
        if scale_of(k_max) < 4.0 * mu.mesh * (1 - 1e-12):
            raise ScaleWindowError(
                f"level {k_max} has scale {scale_of(k_max):.6g} below 4*mesh={4 * mu.mesh:.6g}"
            )
        if len(mu) > 1 and scale_of(k_min) > mu.diameter * (1 + 1e-12):
            raise ScaleWindowError(
                f"level {k_min} has scale {scale_of(k_min):.6g} above the diameter {mu.diameter:.6g}"
            )
    return k_min, k_max


def build_nets(mu, k_min=None, k_max=None, strict_window=True):
    """Greedy maximal ``16^-k``-separated nets, one per level.

    Support points are scanned in index order and a point is admitted iff no
    admitted point lies at distance ``< 16^-k``.

    Returns
    -------
    dict mapping level ``k`` to a sorted array of support indices.
    """
    k_min, k_max = _check_levels(mu, k_min, k_max, strict_window)
    tree = mu.tree
    pts = mu.points
    nets = {}
    for k in range(k_min, k_max + 1):
        r = scale_of(k)
        covered = np.zeros(len(mu), dtype=bool)
        net = []
        for i in range(len(mu)):
            if covered[i]:
                continue
            net.append(i)
            near = np.asarray(tree.query_ball_point(pts[i], r), dtype=np.intp)
            if near.size:
                dist = np.sqrt(((pts[near] - pts[i]) ** 2).sum(axis=1))
                covered[near[dist < r]] = True
        nets[k] = np.array(net, dtype=np.intp)
    return nets


def voronoi_assign(net_points, support):
    """Nearest net point of every support point, ties to the lowest net index."""
    net_points = np.asarray(net_points, dtype=np.float64)
    support = np.asarray(support, dtype=np.float64)
    if len(net_points) == 0:
        raise InvalidParameterError("net is empty")
    tree = cKDTree(net_points)
    dist, _ = tree.query(support)
    ties = _tie_relation(tree, net_points, support, dist)
    first = np.full(len(support), len(net_points), dtype=np.intp)
    np.minimum.at(first, ties.row, ties.col)
    return first


def _tie_relation(tree, net_points, support, dmin):
    """Sparse ``(support point, net point)`` relation of the multi-valued Voronoi cells."""
    rows, cols = [], []
    radius = dmin + TIE_SLACK * np.maximum(1.0, dmin)
    for i, (x, r) in enumerate(zip(support, radius)):
        cand = tree.query_ball_point(x, r)
        if len(cand) <= 1:
            cols.extend(cand)
            rows.extend([i] * len(cand))
            continue
        cand = np.asarray(cand, dtype=np.intp)
        dist = np.sqrt(((net_points[cand] - x) ** 2).sum(axis=1))
        keep = np.sort(cand[dist <= r])
        cols.extend(keep.tolist())
        rows.extend([i] * keep.size)
    data = np.ones(len(rows), dtype=np.int64)
    return sparse.coo_matrix(
        (data, (np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp))),
        shape=(len(support), len(net_points)),
    )


def _lex_rank(coords):
    """Rank of each row under lexicographic order of coordinates (0 = lowest)."""
    order = np.lexsort(coords.T[::-1])
    rank = np.empty(len(coords), dtype=np.intp)
    rank[order] = np.arange(len(coords))
    return rank


@dataclass(frozen=True, eq=False)
class Cell:
    """One David-Semmes cell ``E_z``.

    ``center`` is the support index of ``z_Q``; ``members`` are the support
    indices of ``E_z`` in increasing order.
    """

    id: int
    k: int
    center: int
    members: np.ndarray
    parent: int = None
    children: tuple = ()

    @property
    def scale(self):
        return scale_of(self.k)

    def to_dict(self):
        return {"id": self.id, "k": self.k, "center": int(self.center),
                "members": [int(i) for i in self.members], "parent": self.parent,
                "children": list(self.children)}


class Lattice:
    """Finite David-Semmes lattice over levels ``k_min..k_max``.

    Attributes
    ----------
    cells : list of Cell, indexed by id
    levels : dict, level -> list of cell ids ordered by nobility (lowest first)
    nets : dict, level -> net support indices
    labels : dict, level -> array mapping support index to cell id
    """

    def __init__(self, mu, k_min, k_max, cells, nets, rank=None, check=True):
        self.mu = mu
        self.k_min = k_min
        self.k_max = k_max
        self.cells = list(cells)
        self.nets = {k: np.asarray(v, dtype=np.intp) for k, v in nets.items()}
        self.levels = {k: [] for k in range(k_min, k_max + 1)}
        for c in self.cells:
            self.levels[c.k].append(c.id)
        self.rank = dict(rank) if rank is not None else {c.id: i for k in self.levels
                                                         for i, c in enumerate(self.cells_at(k))}
        for k in self.levels:
            self.levels[k].sort(key=lambda cid: self.rank[cid])
        self.labels = {}
        for k, ids in self.levels.items():
            lab = np.full(len(mu), -1, dtype=np.intp)
            for cid in ids:
                lab[self.cells[cid].members] = cid
            self.labels[k] = lab
        self._mass = {}
        self._exact = {}
        if check:
            certify(self)

    def __len__(self):
        return len(self.cells)

    def cells_at(self, k):
        return [self.cells[i] for i in self.levels.get(k, [])]

    def mass(self, cid):
        if cid not in self._mass:
            self._mass[cid] = math.fsum(self.mu.weights[self.cells[cid].members])
        return self._mass[cid]

    def exact_mass(self, cid):
        """Cell mass as an exact rational (sum of the binary weights)."""
        if cid not in self._exact:
            self._exact[cid] = sum((Fraction(float(w)) for w in self.mu.weights[self.cells[cid].members]),
                                   Fraction(0))
        return self._exact[cid]

    def center_point(self, cid):
        return self.mu.points[self.cells[cid].center]

    def ancestors(self, cid):
        """Ids from the parent up to the top level."""
        out = []
        p = self.cells[cid].parent
        while p is not None:
            out.append(p)
            p = self.cells[p].parent
        return out

    def descendants(self, cid, depth):
        """Ids exactly ``depth`` levels below ``cid``."""
        layer = [cid]
        for _ in range(depth):
            layer = [ch for c in layer for ch in self.cells[c].children]
        return layer

    def is_interior(self, cid, factor=4.0):
        """True if ``B(z_Q, factor * l(Q))`` avoids the generator's domain edge."""
        c = self.cells[cid]
        return is_interior(self.mu, self.mu.points[c.center], factor * c.scale)

    def to_dict(self):
        levels = []
        for k in range(self.k_min, self.k_max + 1):
            levels.append({
                "k": k,
                "net": [int(i) for i in self.nets[k]],
                "order": list(self.levels[k]),
                "cells": [self.cells[cid].to_dict() for cid in sorted(self.levels[k])],
            })
        return {"k_min": self.k_min, "k_max": self.k_max, "n_points": len(self.mu),
                "levels": levels}

    def save_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)

    @classmethod
    def from_dict(cls, mu, data):
        """Rebuild from :meth:`to_dict` output, re-certifying against ``mu``."""
        try:
            if data["n_points"] != len(mu):
                raise InvalidParameterError(
                    f"lattice was built on {data['n_points']} points, measure has {len(mu)}"
                )
            cells, nets, rank = [], {}, {}
            for lev in data["levels"]:
                nets[lev["k"]] = lev["net"]
                for pos, cid in enumerate(lev["order"]):
                    rank[cid] = pos
                for c in lev["cells"]:
                    cells.append(Cell(c["id"], c["k"], c["center"],
                                      np.asarray(c["members"], dtype=np.intp),
                                      c["parent"], tuple(c["children"])))
        except (KeyError, TypeError) as exc:
            raise InvalidParameterError(f"malformed lattice data: {exc}") from None
        cells.sort(key=lambda c: c.id)
        if [c.id for c in cells] != list(range(len(cells))):
            raise InvalidParameterError("cell ids must be 0..n-1")
        return cls(mu, data["k_min"], data["k_max"], cells, nets, rank)

    @classmethod
    def load_json(cls, mu, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(mu, json.load(fh))


def build_lattice(mu, k_min=None, k_max=None, strict_window=True):
    """Construct and certify the David-Semmes lattice of ``mu``.

    Parameters
    ----------
    mu : DiscreteMeasure
    k_min, k_max : int, optional
        Level range; defaults to :func:`default_levels`.
    strict_window : bool
        Reject levels outside ``4*mesh <= 16^-k <= diam``. Toy constructions
        may switch this off.

    Raises
    ------
    ConstructionInvariantError
        If any certificate fails (this indicates a bug).
    """
    k_min, k_max = _check_levels(mu, k_min, k_max, strict_window)
    nets = build_nets(mu, k_min, k_max, strict_window=False)
    pts = mu.points
    n = len(mu)

    # multi-valued Voronoi relations T_k (support x net) and single-valued assignment
    ties = {}
    for k in range(k_min, k_max + 1):
        net_pts = pts[nets[k]]
        tree = cKDTree(net_pts)
        dmin, _ = tree.query(pts)
        ties[k] = _tie_relation(tree, net_pts, pts, dmin).tocsr()

    # links L_k: level k+1 net x level k net, V_z meets V_w
    links = {}
    for k in range(k_min, k_max):
        links[k] = ((ties[k + 1].T @ ties[k]) > 0).astype(np.int64).tocsr()

    # A_k: support x level-k net, x in ~V_z; built bottom-up
    reach = {k_max: ties[k_max]}
    for k in range(k_max - 1, k_min - 1, -1):
        reach[k] = ((ties[k] + reach[k + 1] @ links[k]) > 0).astype(np.int64).tocsr()

    # nobility ranks, top-down
    rank = {k_min: _lex_rank(pts[nets[k_min]])}
    top_parent = {}
    for k in range(k_min, k_max):
        lk = links[k]
        parent_rank = rank[k]
        wz = np.empty(lk.shape[0], dtype=np.intp)
        for z in range(lk.shape[0]):
            cand = lk.indices[lk.indptr[z]:lk.indptr[z + 1]]
            if cand.size == 0:
                raise ConstructionInvariantError(
                    f"level {k + 1} net point {z} meets no level {k} Voronoi cell", witness=z
                )
            wz[z] = cand[np.argmax(parent_rank[cand])]
        top_parent[k + 1] = wz
        lex = _lex_rank(pts[nets[k + 1]])
        order = np.lexsort((lex, parent_rank[wz]))
        r = np.empty(len(order), dtype=np.intp)
        r[order] = np.arange(len(order))
        rank[k + 1] = r

    # cells E_z: each point joins the top-ranked z with x in ~V_z
    cells = []
    cell_id = {}
    for k in range(k_min, k_max + 1):
        a = reach[k]
        owner = np.empty(n, dtype=np.intp)
        rk = rank[k]
        for i in range(n):
            cand = a.indices[a.indptr[i]:a.indptr[i + 1]]
            owner[i] = cand[np.argmax(rk[cand])]
        members = np.argsort(owner, kind="stable")
        bounds = np.searchsorted(owner[members], np.arange(len(nets[k]) + 1))
        for z in range(len(nets[k])):
            mem = members[bounds[z]:bounds[z + 1]]
            cid = len(cells)
            cell_id[(k, z)] = cid
            parent = None if k == k_min else cell_id[(k - 1, int(top_parent[k][z]))]
            cells.append([cid, k, int(nets[k][z]), np.sort(mem), parent, []])
    for c in cells:
        if c[4] is not None:
            cells[c[4]][5].append(c[0])
    final = [Cell(cid, k, z, mem, parent, tuple(ch)) for cid, k, z, mem, parent, ch in cells]
    ranks = {cell_id[(k, z)]: int(rank[k][z]) for k in rank for z in range(len(nets[k]))}
    lat = Lattice(mu, k_min, k_max, final, nets, ranks, check=False)
    lat.top_parent = top_parent
    lat.links = links
    certify(lat)
    return lat


def certify(lat):
    """Check every structural and geometric lattice invariant.

    Raises :class:`ConstructionInvariantError` naming the first violation.
    """
    mu = lat.mu
    pts = mu.points
    n = len(mu)
    tree = mu.tree
    for k in range(lat.k_min, lat.k_max + 1):
        r = scale_of(k)
        net = lat.nets[k]
        ids = lat.levels[k]
        if len(ids) != len(net):
            raise ConstructionInvariantError(f"level {k}: {len(ids)} cells for {len(net)} net points")
        # net separation and covering
        if len(net) > 1:
            dist, _ = cKDTree(pts[net]).query(pts[net], k=2)
            if dist[:, 1].min() < r:
                raise ConstructionInvariantError(f"level {k}: net is not {r:.6g}-separated")
        dcov, _ = cKDTree(pts[net]).query(pts)
        if dcov.max() >= r:
            raise ConstructionInvariantError(
                f"level {k}: support point {int(dcov.argmax())} is not covered by the net",
                witness=int(dcov.argmax()),
            )
        # partition
        count = np.zeros(n, dtype=np.intp)
        centers = set()
        for cid in ids:
            c = lat.cells[cid]
            count[c.members] += 1
            centers.add(c.center)
        if not np.all(count == 1):
            bad = int(np.flatnonzero(count != 1)[0])
            raise ConstructionInvariantError(f"level {k}: support point {bad} is covered {count[bad]} times",
                                             witness=bad)
        if centers != set(int(i) for i in net):
            raise ConstructionInvariantError(f"level {k}: cell centres are not the net points")
        # sandwich on support points
        for cid in ids:
            c = lat.cells[cid]
            z = pts[c.center]
            inner = np.asarray(tree.query_ball_point(z, r / 4.0), dtype=np.intp)
            if inner.size:
                dz = np.sqrt(((pts[inner] - z) ** 2).sum(axis=1))
                inner = inner[dz < r / 4.0]
            if inner.size and not np.all(lat.labels[k][inner] == cid):
                raise ConstructionInvariantError(f"cell {cid}: inner ball point is not a member", witness=cid)
            dm = np.sqrt(((pts[c.members] - z) ** 2).sum(axis=1))
            if c.members.size and dm.max() >= 2.0 * r:
                raise ConstructionInvariantError(f"cell {cid}: member beyond 2*l(Q)", witness=cid)
            if lat.labels[k][c.center] != cid:
                raise ConstructionInvariantError(f"cell {cid}: centre is not a member", witness=cid)
        # nesting and order consistency
        if k > lat.k_min:
            prev = lat.labels[k - 1]
            for cid in ids:
                c = lat.cells[cid]
                if c.parent is None or lat.cells[c.parent].k != k - 1:
                    raise ConstructionInvariantError(f"cell {cid}: missing parent", witness=cid)
                if not np.all(prev[c.members] == c.parent):
                    raise ConstructionInvariantError(f"cell {cid}: not nested in its parent", witness=cid)
                if cid not in lat.cells[c.parent].children:
                    raise ConstructionInvariantError(f"cell {cid}: parent does not list it", witness=cid)
            parent_ranks = [lat.rank[lat.cells[cid].parent] for cid in ids]
            if any(a > b for a, b in zip(parent_ranks, parent_ranks[1:])):
                raise ConstructionInvariantError(f"level {k}: nobility order inconsistent with level {k - 1}")
        elif any(lat.cells[cid].parent is not None for cid in ids):
            raise ConstructionInvariantError("top-level cells must not have parents")
    return True


def spatial_member(lat, x, k):
    """Id of the level-``k`` spatial cell containing ``x``, or ``None``.

    A support point belongs to its own cell ``E_z``; any other point to the
    cell of its nearest support point when that distance is below ``16^-k``.
    """
    if k not in lat.levels:
        raise InvalidParameterError(f"level {k} is outside {lat.k_min}..{lat.k_max}")
    mu = lat.mu
    x = check_vector(x, mu.ambient_dim)
    dist, idx = mu.tree.query(x)
    if dist > 0:
        # ties go to the lowest index, matching the single-valued conventions elsewhere
        near = mu.tree.query_ball_point(x, dist * (1 + TIE_SLACK) + 1e-300)
        idx = min(near) if near else idx
    if dist >= scale_of(k):
        return None
    return int(lat.labels[k][idx])


def foreign_distance(lat, k):
    """Distance from every support point to the nearest point of another level-``k`` cell.

    ``inf`` where the level has a single cell.
    """
    cache = lat.__dict__.setdefault("_foreign", {})
    if k in cache:
        return cache[k]
    mu = lat.mu
    lab = lat.labels[k]
    n = len(mu)
    out = np.full(n, np.inf)
    kq = min(n, 16)
    if kq > 1:
        dist, idx = mu.tree.query(mu.points, k=kq)
        other = lab[idx] != lab[:, None]
        hit = other.any(axis=1)
        first = other.argmax(axis=1)
        out[hit] = dist[hit, first[hit]]
        # points whose 16 neighbours share their cell: search the foreign set directly
        for cid in np.unique(lab[~hit]) if kq < n else []:
            todo = np.flatnonzero((~hit) & (lab == cid))
            rest = np.flatnonzero(lab != cid)
            if rest.size:
                out[todo] = cKDTree(mu.points[rest]).query(mu.points[todo])[0]
    cache[k] = out
    return out


def boundary_distance(lat, cid):
    """Distance from each member to the complement of its spatial cell.

    For a member ``x`` with nearest foreign support point at distance ``b``,
    the open segment towards that point leaves the spatial cell at ``b/2``
    (where it stops being strictly closer to ``E_z``), while every point of
    ``B(x, min(b/2, l))`` stays inside. Values are capped at ``l``.
    """
    c = lat.cells[cid]
    b = foreign_distance(lat, c.k)[c.members]
    return np.minimum(c.scale, 0.5 * b)


def boundary_mass(lat, cid, eps):
    """``mu{x in Q : dist(x, complement of Q) < eps * l(Q)}``."""
    eps = check_positive(eps, "eps")
    if eps > 1:
        raise InvalidParameterError(f"eps must be in (0, 1], got {eps}")
    c = lat.cells[cid]
    dist = boundary_distance(lat, cid)
    return math.fsum(lat.mu.weights[c.members[dist < eps * c.scale]])


def small_boundary_profile(lat, cell_ids=None, ms=(1, 2, 3, 4), interior_only=True):
    """Boundary-mass ratios ``boundary_mass(Q, 2^(-2m))/mu(Q)`` per cell and ``m``.

    Returns a dict with the ratio table, the fraction of cells whose ratios
    are nonincreasing in ``m``, and a least-squares fit
    ``ratio ~ C eps^gamma`` of the mean ratio over cells (``gamma`` is
    ``nan`` when fewer than two means are positive).
    """
    if cell_ids is None:
        cell_ids = list(range(len(lat)))
    if interior_only:
        cell_ids = [cid for cid in cell_ids if lat.is_interior(cid)]
    table = {}
    for cid in cell_ids:
        dist = boundary_distance(lat, cid)
        c = lat.cells[cid]
        w = lat.mu.weights[c.members]
        tot = math.fsum(w)
        table[cid] = [math.fsum(w[dist < 2.0 ** (-2 * m) * c.scale]) / tot for m in ms]
    mono = [all(a >= b for a, b in zip(row, row[1:])) for row in table.values()]
    means = np.array([np.mean([row[j] for row in table.values()]) for j in range(len(ms))]) \
        if table else np.zeros(len(ms))
    eps = np.array([2.0 ** (-2 * m) for m in ms])
    pos = means > 0
    if pos.sum() >= 2:
        gamma, logc = np.polyfit(np.log(eps[pos]), np.log(means[pos]), 1)
    else:
        gamma, logc = float("nan"), float("nan")
    return {"cells": len(table), "ratios": table,
            "monotone_fraction": float(np.mean(mono)) if mono else float("nan"),
            "mean_ratio": means.tolist(), "gamma": float(gamma), "C": float(np.exp(logc))}
