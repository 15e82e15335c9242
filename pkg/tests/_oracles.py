"""Brute-force oracles shared by the unit and acceptance tests."""

from fractions import Fraction

import numpy as np
from scipy.spatial.distance import cdist

from rieszlab.lattice import scale_of


def _greedy_net(pts, r):
    net = []
    for i, p in enumerate(pts):
        if all(np.linalg.norm(p - pts[j]) >= r for j in net):
            net.append(i)
    return net


def brute_certify(lat):
    """Recheck every lattice invariant from full distance matrices."""
    mu = lat.mu
    pts = mu.points
    dist = cdist(pts, pts)
    for k in range(lat.k_min, lat.k_max + 1):
        r = scale_of(k)
        net = list(lat.nets[k])
        assert net == _greedy_net(pts, r)
        sub = dist[np.ix_(net, net)] + np.eye(len(net)) * 1e9
        assert sub.min() >= r
        assert dist[:, net].min(axis=1).max() < r
        owner = {}
        for c in lat.cells_at(k):
            for i in c.members:
                assert i not in owner
                owner[int(i)] = c.id
            z = c.center
            assert set(np.flatnonzero(dist[z] < r / 4)) <= set(c.members.tolist())
            assert np.all(dist[z, c.members] < 2 * r)
            if k > lat.k_min:
                assert set(c.members.tolist()) <= set(lat.cells[c.parent].members.tolist())
        assert sorted(owner) == list(range(len(mu)))
        assert sorted(c.center for c in lat.cells_at(k)) == sorted(net)
    # order consistency from brute-force multi-valued Voronoi cells
    for k in range(lat.k_min, lat.k_max):
        fine, coarse = list(lat.nets[k + 1]), list(lat.nets[k])
        df, dc = dist[:, fine], dist[:, coarse]
        vf = df <= df.min(axis=1, keepdims=True) * (1 + 1e-12)
        vc = dc <= dc.min(axis=1, keepdims=True) * (1 + 1e-12)
        meets = (vf.T.astype(int) @ vc.astype(int)) > 0
        rank_c = {int(c.center): lat.rank[c.id] for c in lat.cells_at(k)}
        w = {}
        for a, z in enumerate(fine):
            w[z] = max(rank_c[coarse[b]] for b in np.flatnonzero(meets[a]))
        order = [lat.cells[cid].center for cid in lat.levels[k + 1]]
        assert all(w[a] <= w[b] for a, b in zip(order, order[1:]))


def members_of(lat, c):
    return frozenset(lat.cells[c].members.tolist())


def exact_mass(lat, c):
    return sum((Fraction(float(w)) for w in lat.mu.weights[lat.cells[c].members]), Fraction(0))


def contains(lat, p, q):
    """Set containment with the level convention: q inside p iff members nest and q is not coarser."""
    return members_of(lat, q) <= members_of(lat, p) and lat.cells[q].k >= lat.cells[p].k


def brute_constant(lat, family):
    best = Fraction(0)
    for p in range(len(lat)):
        s = sum((exact_mass(lat, q) for q in family if contains(lat, p, q)), Fraction(0))
        best = max(best, s / exact_mass(lat, p))
    return best


def layer_violations(lat, root, layers, family):
    fam = set(family)
    out = []
    if list(layers[0]) != [root]:
        out.append("L0")
    flat = [c for layer in layers for c in layer]
    if len(flat) != len(set(flat)):
        out.append("repeat")
    for m, layer in enumerate(layers):
        for c in layer:
            if c not in fam or not contains(lat, root, c):
                out.append(f"outside {c}")
        for i, a in enumerate(layer):
            for b in layer[i + 1:]:
                if members_of(lat, a) & members_of(lat, b):
                    out.append(f"overlap {a} {b}")
        if m:
            for c in layer:
                hosts = [p for p in layers[m - 1] if contains(lat, p, c) and lat.cells[p].k < lat.cells[c].k]
                if len(hosts) != 1:
                    out.append(f"host {c}")
    return out


def alternating_violations(lat, root, P, Q, family, flat):
    out = []
    if list(P[0]) != [root]:
        out.append("P0")
    for k, layer in enumerate(P):
        if any(c not in family or not contains(lat, root, c) for c in layer):
            out.append(f"P{k} outside")
    for k, layer in enumerate(Q):
        if not all(flat(c) for c in layer):
            out.append(f"Q{k} not flat")
    for group in (P, Q):
        for layer in group:
            for i, a in enumerate(layer):
                for b in layer[i + 1:]:
                    if members_of(lat, a) & members_of(lat, b):
                        out.append("overlap")
    for k in range(len(Q)):
        for q in Q[k]:
            if not any(contains(lat, p, q) for p in P[k]):
                out.append(f"Q{k} loose")
    for k in range(1, len(P)):
        for p in P[k]:
            if not any(contains(lat, q, p) for q in Q[k - 1]):
                out.append(f"P{k} loose")
    return out
