"""Geometric and analytic flatness of a measure at a point and scale.

A measure is flat at ``z`` on scale ``l`` (window factor ``A``) when inside
``B(z, A l)`` it looks like a multiple of the Lebesgue measure on the plane
``L`` through ``z`` parallel to a linear hyperplane ``H``. The geometric
defect is the two-sided Hausdorff distance between support and ``L`` in the
ball, over ``l``. The analytic defect is the largest ``|int f dmu| / l^d``
over ``1/l``-Lipschitz ``f`` vanishing off the ball with ``int f dm_L = 0``,
computed as a linear program on a finite node set.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from ._lipschitz import neighbour_pairs, solve_lipschitz_lp
from ._validation import check_positive, check_vector
from .exceptions import DegenerateInputError, DomainError, InvalidParameterError, ScaleWindowError
from .lattice import foreign_distance
from .measure import ball_indices
from .riesz.kernels import Hyperplane, truncated_kernel

DIRECTION_STEP = math.pi / 64
MIN_DIRECTION_STEP = math.pi / 4096
PSI0 = "cosine ramp: 1 on [0,1], (1+cos(pi(t-1)))/2 on [1,2], 0 beyond"


@dataclass(frozen=True, eq=False)
class FlatnessQuery:
    """Point ``z``, scale ``ell``, window factor ``A > 5`` and optional plane ``H``."""

    z: np.ndarray
    ell: float
    A: float = 6.0
    H: Hyperplane = None

    def __post_init__(self):
        z = np.asarray(self.z, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(z)):
            raise InvalidParameterError("z contains non-finite values")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "ell", check_positive(self.ell, "ell"))
        A = check_positive(self.A, "A")
        if not A > 5:
            raise InvalidParameterError(f"A must exceed 5, got {A}")
        object.__setattr__(self, "A", A)

    @property
    def radius(self):
        return self.A * self.ell

    def plane(self):
        if self.H is None:
            raise InvalidParameterError("this operation needs a candidate plane H")
        return self.H.through(self.z)


@dataclass(frozen=True, eq=False)
class FlatnessReport:
    alpha_geo: float
    alpha_an: float
    plane: Hyperplane
    witnesses: dict = field(default_factory=dict)
    lp_size: int = 0
    slack: float = 0.0

    def to_dict(self):
        return {"alpha_geo": self.alpha_geo, "alpha_an": self.alpha_an,
                "normal": self.plane.normal.tolist(), "lp_size": self.lp_size,
                "slack": self.slack}


def check_window(mu, scale, name="A*ell"):
    """Reject ``scale`` outside ``4*mesh <= scale <= diam/4``."""
    if scale < 4.0 * mu.mesh * (1 - 1e-12):
        raise ScaleWindowError(f"{name}={scale:.6g} is below 4*mesh={4 * mu.mesh:.6g}")
    if scale > mu.diameter / 4.0 * (1 + 1e-12):
        raise ScaleWindowError(f"{name}={scale:.6g} exceeds diameter/4={mu.diameter / 4:.6g}")


def plane_grid(plane, center, radius, step):
    """Nodes ``center + step * i @ basis`` of ``L`` inside the open ball ``B(center, radius)``."""
    basis = plane.basis()
    d = basis.shape[0]
    n = int(math.floor(radius / step + 1e-9))
    axis = np.arange(-n, n + 1)
    idx = np.stack([m.reshape(-1) for m in np.meshgrid(*([axis] * d), indexing="ij")], axis=1)
    idx = idx[np.sqrt((idx.astype(np.float64) ** 2).sum(axis=1)) * step < radius]
    return center + (idx * step) @ basis


def _ball(mu, query):
    if query.z.size != mu.ambient_dim:
        raise InvalidParameterError(f"z must have {mu.ambient_dim} coordinates")
    idx = ball_indices(mu, query.z, query.radius)
    if idx.size == 0:
        raise DomainError("no support point in B(z, A*ell)")
    return idx


def _geometric(mu, idx, plane, query, step):
    dev = np.abs(plane.signed_distance(mu.points[idx]))
    grid = plane_grid(plane, query.z, query.radius, step)
    gap, _ = mu.tree.query(grid) if len(grid) else (np.zeros(1), None)
    i_sup = int(np.argmax(dev))
    i_grid = int(np.argmax(gap))
    val = max(float(dev[i_sup]), float(gap[i_grid])) / query.ell
    return val, {"support_point": int(idx[i_sup]), "support_dev": float(dev[i_sup]) / query.ell,
                 "grid_point": grid[i_grid].tolist() if len(grid) else None,
                 "grid_dev": float(gap[i_grid]) / query.ell}


def geometric_defect(mu, query, step=None, check_scale=True, return_witness=False):
    """Smallest ``alpha`` making ``mu`` geometrically ``(H, A, alpha)``-flat at ``z``.

    Support points in ``B(z, A l)`` are compared with ``L`` and a grid of
    ``L`` inside the ball (step ``mesh`` unless given) with the support.
    """
    if check_scale:
        check_window(mu, query.radius)
    idx = _ball(mu, query)
    step = mu.mesh if step is None else check_positive(step, "step")
    val, wit = _geometric(mu, idx, query.plane(), query, step)
    return (val, wit) if return_witness else val


def _canonical(normal):
    normal = normal / np.linalg.norm(normal)
    nz = np.flatnonzero(np.abs(normal) > 1e-15)
    if nz.size and normal[nz[-1]] < 0:
        normal = -normal
    return normal


def _rotate(normal, axis, angle):
    """Rotate ``normal`` by ``angle`` in the plane spanned by ``normal`` and unit ``axis`` (orthogonal)."""
    return math.cos(angle) * normal + math.sin(angle) * axis


def best_plane(mu, z, ell, A=6.0, step=None, direction_step=DIRECTION_STEP,
               min_direction_step=MIN_DIRECTION_STEP, check_scale=True, return_trace=False,
               candidates=()):
    """Plane through ``z`` minimising the geometric defect.

    Starts from the least-variance principal axis of the weighted support in
    ``B(z, A l)`` (or from the best of ``candidates``, extra normals such as
    user-supplied planes, when one of them does better) and hill-climbs over
    normals, rotating by ``direction_step`` towards each tangent axis and
    accepting strict improvements only. When no move helps the step is
    halved, down to ``min_direction_step``. The result is never worse than
    the start.

    Returns
    -------
    (Hyperplane, float)
    """
    query = FlatnessQuery(z, ell, A)
    if check_scale:
        check_window(mu, query.radius)
    idx = _ball(mu, query)
    d = mu.d
    if idx.size < d + 1:
        raise DegenerateInputError(f"only {idx.size} support points in B(z, A*ell); need {d + 1}")
    step = mu.mesh if step is None else step
    pts = mu.points[idx]
    w = mu.weights[idx]
    mean = (w[:, None] * pts).sum(axis=0) / w.sum()
    cov = ((pts - mean).T * w) @ (pts - mean) / w.sum()
    _, vecs = np.linalg.eigh(cov)
    normal = _canonical(vecs[:, 0])

    def cost(nv):
        return _geometric(mu, idx, Hyperplane(nv, query.z), query, step)[0]

    best = cost(normal)
    for cand in candidates:
        cand = _canonical(check_vector(cand, mu.ambient_dim, "candidate normal"))
        c = cost(cand)
        if c < best:
            best, normal = c, cand
    start = best
    trace = [best]
    angle = direction_step
    while True:
        tangents = Hyperplane(normal).basis()
        improved = False
        for t in tangents:
            for sgn in (1.0, -1.0):
                cand = _canonical(_rotate(normal, t, sgn * angle))
                c = cost(cand)
                if c < best - 1e-15:
                    best, normal, improved = c, cand, True
                    break
            if improved:
                break
        if improved:
            trace.append(best)
        elif angle / 2 >= min_direction_step * (1 - 1e-12):
            angle /= 2
        else:
            break
    plane = Hyperplane(normal, query.z)
    if return_trace:
        return plane, best, {"initial": start, "trace": trace}
    return plane, best


def _weighted_median(values, weights):
    order = np.argsort(values)
    cw = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cw, 0.5 * cw[-1])])


def analytic_defect(mu, query, step=None, k=12, seed=0, validate=True, full_pairs=False,
                    check_scale=True, return_report=False):
    """Lower bound for the analytic flatness defect via a Lipschitz LP.

    Nodes are the support points in ``B(z, A l)`` and the grid of ``L``
    inside the ball (step ``mesh`` unless given). Constraints: Lipschitz
    bound ``1/l`` on a sparse graph (``k`` nearest neighbours, ``3N`` random
    pairs, each support point with its nearest grid node), caps
    ``|f(p)| <= dist(p, boundary)/l``, and ``sum_grid f * step^d = 0``.
    ``full_pairs=True`` imposes every pairwise constraint (oracle mode).

    The report's ``slack`` bounds the value attainable by a measure equal to
    a multiple of ``m_L`` up to the given discretization: for the LP's own
    constraints, ``l^d * value <= sum_p w_p |p - g(p)| / l +
    sum_g cap_g |M_g - c step^d|`` where ``g(p)`` is the grid node nearest
    to ``p``, ``M_g`` the support mass sent to ``g`` and ``c`` the best
    density.
    """
    if check_scale:
        check_window(mu, query.radius)
    idx = _ball(mu, query)
    plane = query.plane()
    step = mu.mesh if step is None else check_positive(step, "step")
    grid = plane_grid(plane, query.z, query.radius, step)
    sup = mu.points[idx]
    nodes = np.vstack([sup, grid])
    ns, ng = len(sup), len(grid)
    ell = query.ell
    caps = np.maximum(0.0, query.radius - np.sqrt(((nodes - query.z) ** 2).sum(axis=1))) / ell
    objective = np.concatenate([mu.weights[idx], np.zeros(ng)])
    eq = np.concatenate([np.zeros(ns), np.full(ng, step ** mu.d)])[None, :]
    gd, gi = cKDTree(grid).query(sup)
    link = np.stack([np.arange(ns), ns + gi], axis=1)
    if full_pairs:
        from ._lipschitz import all_pairs
        pairs = all_pairs(len(nodes))
    else:
        pairs = neighbour_pairs(nodes, k=k, seed=seed, extra=link)
    res = solve_lipschitz_lp(nodes, objective, caps, 1.0 / ell, pairs, eq, seed=seed,
                             validate=validate and not full_pairs)
    value = max(0.0, res.value) / ell ** mu.d
    mass = np.bincount(gi, weights=mu.weights[idx], minlength=ng)
    cell = step ** mu.d
    gcaps = caps[ns:]
    c = _weighted_median(mass / cell, gcaps * cell + 1e-300)
    slack = (float((mu.weights[idx] * gd).sum()) / ell + float((gcaps * np.abs(mass - c * cell)).sum())) / ell ** mu.d
    if not return_report:
        return value
    return value, {"lp_size": res.n_vars, "constraints": res.n_constraints, "rounds": res.rounds,
                   "slack": slack, "f": res.f, "nodes": nodes, "n_support": ns}


def flatness_report(mu, query, analytic=True, **kw):
    """Geometric and analytic defects at the supplied plane, or at the best plane."""
    if query.H is None:
        plane, _ = best_plane(mu, query.z, query.ell, query.A)
        query = FlatnessQuery(query.z, query.ell, query.A, Hyperplane(plane.normal))
    geo, wit = geometric_defect(mu, query, return_witness=True)
    an, lp_size, slack = 0.0, 0, 0.0
    if analytic:
        an, info = analytic_defect(mu, query, return_report=True, **kw)
        lp_size, slack = info["lp_size"], info["slack"]
        wit["lp_rounds"] = info["rounds"]
    return FlatnessReport(geo, an, query.plane(), wit, lp_size, slack)


def flat_predicate(lattice, planes, A=6.0, alpha=0.1, analytic=False):
    """``cell id -> bool``: some plane of ``planes`` makes the cell ``(H, A, alpha)``-flat.

    Cells whose window ``A l(Q)`` leaves the valid scale range are not flat.
    """
    mu = lattice.mu
    planes = [p if isinstance(p, Hyperplane) else Hyperplane(p) for p in planes]
    cache = {}

    def pred(cid):
        if cid in cache:
            return cache[cid]
        c = lattice.cells[cid]
        ok = False
        for H in planes:
            q = FlatnessQuery(mu.points[c.center], c.scale, A, H)
            try:
                ok = geometric_defect(mu, q) <= alpha
                if ok and analytic:
                    ok = analytic_defect(mu, q) <= alpha
            except ScaleWindowError:
                ok = False
            if ok:
                break
        cache[cid] = ok
        return ok

    return pred


def psi0(t):
    """Cosine ramp: 1 on ``[0, 1]``, 0 on ``[2, inf)``, C^1 in between."""
    t = np.asarray(t, dtype=np.float64)
    mid = 0.5 * (1.0 + np.cos(np.pi * np.clip(t - 1.0, 0.0, 1.0)))
    return np.where(t <= 1.0, 1.0, np.where(t >= 2.0, 0.0, mid))


def annulus_weight(mu, z, r, R):
    """``psi_{z,r,R}(x) = psi0(|x-z|/R) - psi0(|x-z|/r)`` at the support points."""
    dist = np.sqrt(((mu.points - z) ** 2).sum(axis=1))
    return psi0(dist / R) - psi0(dist / r)


def annular_riesz(mu, z, delta, Delta, R):
    """``R(psi_{z, delta R, Delta R} mu)(z)`` with the untruncated kernel.

    The weight vanishes on ``B(z, delta R)``, so the sum has no singular term.
    """
    z = check_vector(z, mu.ambient_dim, "z")
    R = check_positive(R, "R")
    if not 0 < delta < Delta < 0.5:
        raise InvalidParameterError(f"need 0 < delta < Delta < 1/2, got {delta}, {Delta}")
    dz, _ = mu.tree.query(z)
    if not dz < delta * R / 4.0:
        raise DomainError(f"z is {dz:.6g} from the support; need < delta*R/4={delta * R / 4:.6g}")
    psi = annulus_weight(mu, z, delta * R, Delta * R)
    keep = np.flatnonzero(psi != 0)
    if keep.size == 0:
        return np.zeros(mu.ambient_dim)
    kv = truncated_kernel(z - mu.points[keep], mu.d, 0.0)
    q = psi[keep] * mu.weights[keep]
    return np.array([math.fsum(kv[:, c] * q) for c in range(mu.ambient_dim)])


@dataclass(frozen=True, eq=False)
class CellApprox:
    """Plane approximation ``nu_Q = a_Q phi_Q m_L(Q)`` of a cell."""

    cell: int
    plane: Hyperplane
    grid: np.ndarray
    phi_grid: np.ndarray
    phi_support: np.ndarray
    support: np.ndarray
    a: float
    eps: float
    step: float

    @property
    def nu_mass(self):
        return self.a * math.fsum(self.phi_grid * self.step ** (self.grid.shape[1] - 1))


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def spatial_depth(lattice, cid, x):
    """Lower bound for ``dist(x, complement of Q) / l(Q)`` at arbitrary points ``x``.

    With ``a = dist(x, E_Q)`` and ``b`` the distance to the nearest foreign
    support point, ``x`` lies in ``Q`` iff ``a < b`` and ``a < l``; moving by
    ``t`` keeps it inside while ``a + t < b - t`` and ``a + t < l``. On
    members this equals the exact boundary distance ``min(b/2, l)``.
    """
    c = lattice.cells[cid]
    mu = lattice.mu
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    a, _ = cKDTree(mu.points[c.members]).query(x)
    foreign = np.flatnonzero(lattice.labels[c.k] != cid)
    b = cKDTree(mu.points[foreign]).query(x)[0] if foreign.size else np.full(len(x), np.inf)
    depth = np.minimum(0.5 * (b - a), c.scale - a)
    return np.maximum(depth, 0.0) / c.scale * ((a < b) & (a < c.scale))


def cell_approx(lattice, cid, eps, A=6.0):
    """Mollified cutoff ``phi_Q`` and normalised plane measure ``nu_Q`` of a cell.

    ``phi_Q`` is a C^1 smoothstep of the depth ``t = dist(x, complement)/l``:
    0 for ``t <= eps`` and 1 for ``t >= 3 eps``. The plane ``L(Q)`` is
    :func:`best_plane` at ``(z_Q, l(Q), A)`` and ``a_Q`` matches
    ``nu_Q(R^(d+1))`` with ``int phi_Q dmu``.
    """
    eps = check_positive(eps, "eps")
    if eps > 1.0 / 48.0 + 1e-15:
        raise InvalidParameterError(f"eps must be at most 1/48, got {eps}")
    c = lattice.cells[cid]
    mu = lattice.mu
    z = mu.points[c.center]
    plane, _ = best_plane(mu, z, c.scale, A)
    step = min(mu.mesh, eps * c.scale / 4.0)
    grid = plane_grid(plane, z, 4.0 * c.scale, step)
    if len(grid) == 0:
        raise DegenerateInputError("cell too thin for the plane grid")
    phi_grid = _smoothstep((spatial_depth(lattice, cid, grid) - eps) / (2.0 * eps))
    sup = c.members
    depth = np.minimum(c.scale, 0.5 * foreign_distance(lattice, c.k)[sup]) / c.scale
    phi_sup = _smoothstep((depth - eps) / (2.0 * eps))
    mu_mass = math.fsum(phi_sup * mu.weights[sup])
    plane_mass = math.fsum(phi_grid * step ** mu.d)
    if plane_mass <= 0 or mu_mass <= 0:
        raise DegenerateInputError("cutoff has empty support on the plane or the measure")
    return CellApprox(cid, plane, grid, phi_grid, phi_sup, sup, mu_mass / plane_mass, eps, step)
