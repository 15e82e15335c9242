"""delta-non-BAUP cells and their Vitali rarefication.

A cell ``P`` is delta-non-BAUP when some support point ``x`` in it defeats
every hyperplane ``L`` through ``x``: each such ``L`` carries a point ``y``
with ``|y - x| < l(P)`` whose ball ``B(y, delta l(P))`` misses the support.
The quantifiers are discretised: ``x`` over (sampled) members, ``L`` over a
direction grid and ``y`` over a grid of ``L``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive
from .exceptions import InvalidParameterError, ScaleWindowError
from .flatness import plane_grid
from .riesz.kernels import Hyperplane

DIRECTION_STEP = math.pi / 32
MAX_SAMPLES = 64


def direction_grid(dim, step=DIRECTION_STEP):
    """Quasi-uniform unit normals on the projective sphere of ``R^dim``.

    In the plane the normals are at angles ``k * step`` in ``[0, pi)``, so
    halving ``step`` refines the grid. In ``R^3`` they lie on latitude rings
    of spacing ``step`` over the upper hemisphere.
    """
    step = check_positive(step, "step")
    if dim == 2:
        n = max(1, int(round(math.pi / step)))
        ang = np.arange(n) * (math.pi / n)
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 3:
        out = [np.array([0.0, 0.0, 1.0])]
        n_rings = max(1, int(round((math.pi / 2) / step)))
        for i in range(1, n_rings + 1):
            pol = i * (math.pi / 2) / n_rings
            span = math.pi if i == n_rings else 2 * math.pi
            m = max(1, int(round(span * math.sin(pol) / step)))
            az = np.arange(m) * (span / m)
            out.extend(np.stack([math.sin(pol) * np.cos(az), math.sin(pol) * np.sin(az),
                                 np.full(m, math.cos(pol))], axis=1))
        return np.array(out)
    # higher dimensions: seeded sample of comparable density
    rng = np.random.default_rng(0)
    m = int(math.ceil((math.pi / step) ** (dim - 1)))
    v = rng.standard_normal((m, dim))
    v /= np.linalg.norm(v, axis=1)[:, None]
    v[v[:, -1] < 0] *= -1
    return v


@dataclass(frozen=True)
class BaupVerdict:
    cell: int
    delta: float
    non_baup: bool
    witness_x: int = None
    best_plane_hole: dict = field(default_factory=dict)
    samples: int = 0
    n_directions: int = 0

    def to_dict(self):
        return {"id": self.cell, "delta": self.delta, "non_baup": self.non_baup,
                "witness": self.witness_x}


def _sample(members, max_samples, rng):
    if max_samples is None or members.size <= max_samples:
        return members
    return np.sort(rng.choice(members, max_samples, replace=False))


def baup_test(mu, lattice, cid, delta, direction_step=DIRECTION_STEP, max_samples=MAX_SAMPLES,
              seed=0, y_step=None, early_exit=None):
    """Decide whether a cell is delta-non-BAUP.

    Parameters
    ----------
    delta : float
        Hole radius as a fraction of ``l(P)``; needs ``delta l(P) >= 4 mesh``.
    direction_step : float
        Angular step of the plane-normal grid.
    max_samples : int or None
        Members tested as ``x`` (seeded subsample); ``None`` tests all.
    y_step : float, optional
        Step of the grid on ``L`` (default ``delta l(P) / 2``).
    early_exit : bool, optional
        Stop scanning planes for ``x`` once one survives; then the hole
        diagnostic of that ``x`` is the surviving plane's value rather than
        the minimum. Defaults to True when ``d >= 2``.

    Returns
    -------
    BaupVerdict
        ``best_plane_hole[x]`` is the minimum over tested planes of the
        largest empty-ball radius found on the plane.
    """
    delta = check_positive(delta, "delta")
    c = lattice.cells[cid]
    ell = c.scale
    if delta * ell < 4.0 * mu.mesh * (1 - 1e-12):
        raise ScaleWindowError(
            f"cell {cid}: delta*l={delta * ell:.6g} is below 4*mesh={4 * mu.mesh:.6g}"
        )
    if early_exit is None:
        early_exit = mu.d >= 2
    ystep = delta * ell / 2.0 if y_step is None else check_positive(y_step, "y_step")
    normals = direction_grid(mu.ambient_dim, direction_step)
    rng = np.random.default_rng([seed, cid])
    xs = _sample(c.members, max_samples, rng)
    # offsets of the y-grid relative to x, per plane
    grids = [plane_grid(Hyperplane(n), np.zeros(mu.ambient_dim), ell, ystep) for n in normals]
    holes = {}
    witness = None
    for i in xs:
        x = mu.points[i]
        best = math.inf
        for g in grids:
            nn, _ = mu.tree.query(x + g)
            hole = float(nn.max())
            best = min(best, hole)
            if early_exit and best < delta * ell:
                break
        holes[int(i)] = best
        if witness is None and best >= delta * ell:
            witness = int(i)
    return BaupVerdict(cid, delta, witness is not None, witness, holes, len(xs), len(normals))


def eligible_cells(mu, lattice, delta, interior_only=False):
    """Cells with ``delta l(P) >= 4 mesh`` (and away from the domain edge if asked)."""
    out = []
    for cid in range(len(lattice)):
        if delta * lattice.cells[cid].scale < 4.0 * mu.mesh * (1 - 1e-12):
            continue
        if interior_only and not lattice.is_interior(cid):
            continue
        out.append(cid)
    return out


def nonbaup_family(mu, lattice, delta, rarefied=False, cells=None, interior_only=False, **kw):
    """Ids of cells testing delta-non-BAUP, in increasing order.

    Cells whose ``delta l(P)`` is below ``4 mesh`` are skipped, as are cells
    whose ``B(z_P, 4 l(P))`` leaves the generator's domain when
    ``interior_only`` is set (the edge of a finite sheet is a genuine hole).
    With ``rarefied=True`` the family is thinned by :func:`rarefy`.
    """
    out = []
    ok = set(eligible_cells(mu, lattice, delta, interior_only))
    ids = range(len(lattice)) if cells is None else cells
    for cid in ids:
        if cid not in ok:
            continue
        if baup_test(mu, lattice, cid, delta, **kw).non_baup:
            out.append(cid)
    return rarefy(lattice, out) if rarefied else out


def rarefy(lattice, ids, factor=10.0):
    """Greedy Vitali selection: larger cells first, keep a cell iff its ball misses the kept ones.

    The ball of ``P`` is ``B(z_P, factor * l(P))``; two open balls are
    disjoint iff the centre distance is at least the sum of the radii.
    """
    if factor <= 0:
        raise InvalidParameterError("factor must be positive")
    order = sorted(ids, key=lambda cid: (lattice.cells[cid].k, cid))
    kept, centres, radii = [], [], []
    for cid in order:
        z = lattice.center_point(cid)
        r = factor * lattice.cells[cid].scale
        if centres:
            dist = np.sqrt(((np.array(centres) - z) ** 2).sum(axis=1))
            if np.any(dist < np.array(radii) + r):
                continue
        kept.append(cid)
        centres.append(z)
        radii.append(r)
    return sorted(kept)
