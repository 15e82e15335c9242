"""Discrete d-dimensional measures in R^(d+1).

A measure is a finite weighted point cloud; its support is the point set
itself. Generators emit near-uniform weights on a grid of nominal spacing
``mesh``, and every scale-sensitive routine downstream compares its scales
against that spacing.
"""

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from ._validation import check_int, check_points, check_positive, check_vector
from .exceptions import InvalidParameterError, ResourceLimitError

_MAX_CANTOR_DEPTH = 12
_EXACT_DIAMETER_LIMIT = 6000


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point cloud approximating a d-dimensional measure in R^(d+1).

    Parameters
    ----------
    d : int
        Intrinsic dimension; points carry ``d + 1`` coordinates.
    points : array of shape (n, d + 1)
    weights : array of shape (n,)
        Strictly positive point masses.
    mesh : float
        Nominal spacing of the discretization.
    provenance : dict
        Generator tag and parameters.
    domain : tuple of arrays, optional
        ``(lo, hi)`` box in the first ``d`` coordinates outside of which the
        generator emitted nothing. ``None`` when the support has no parameter
        domain (e.g. the Cantor set).
    """

    d: int
    points: np.ndarray
    weights: np.ndarray
    mesh: float
    provenance: dict = field(default_factory=dict)
    domain: tuple = None

    def __post_init__(self):
        d = check_int(self.d, "d", minimum=1)
        pts = check_points(self.points, dim=d + 1) if len(self.points) else np.zeros((0, d + 1))
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64).reshape(-1))
        if w.shape[0] != pts.shape[0]:
            raise InvalidParameterError(
                f"got {pts.shape[0]} points but {w.shape[0]} weights"
            )
        if w.size and not (np.all(np.isfinite(w)) and np.all(w > 0)):
            raise InvalidParameterError("all weights must be finite and strictly positive")
        mesh = check_positive(self.mesh, "mesh")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "mesh", mesh)
        object.__setattr__(self, "provenance", dict(self.provenance))
        if self.domain is not None:
            lo, hi = (np.asarray(b, dtype=np.float64).reshape(d) for b in self.domain)
            object.__setattr__(self, "domain", (lo, hi))

    def __len__(self):
        return self.points.shape[0]

    @property
    def ambient_dim(self):
        return self.d + 1

    @cached_property
    def total_mass(self):
        return math.fsum(self.weights)

    @cached_property
    def tree(self):
        return cKDTree(self.points)

    @cached_property
    def diameter(self):
        """Diameter of the support (exact up to a few thousand points)."""
        pts = self.points
        n = len(pts)
        if n < 2:
            return 0.0
        if n > _EXACT_DIAMETER_LIMIT:
            # extreme points along a fixed direction fan; diameter is attained there
            rng = np.random.default_rng(0)
            dirs = rng.standard_normal((256, pts.shape[1]))
            proj = pts @ dirs.T
            idx = np.unique(np.concatenate([proj.argmax(0), proj.argmin(0)]))
            pts = pts[idx]
        best = 0.0
        for start in range(0, len(pts), 512):
            block = pts[start:start + 512]
            dist2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
            best = max(best, float(dist2.max()))
        return math.sqrt(best)

    def with_points(self, mask):
        """Restriction of the measure to the points selected by ``mask``."""
        mask = np.asarray(mask)
        return DiscreteMeasure(
            self.d, self.points[mask], self.weights[mask], self.mesh,
            {**self.provenance, "restricted": True}, self.domain,
        )

    @classmethod
    def from_points(cls, points, weights=None, mesh=None, d=None):
        """Wrap a raw point cloud, estimating ``mesh`` when not given.

        The estimate is the median nearest-neighbour distance.
        """
        pts = check_points(points)
        if d is None:
            d = pts.shape[1] - 1
        if weights is None:
            weights = np.ones(len(pts))
        if mesh is None:
            mesh = estimate_mesh(pts)
        return cls(d, pts, weights, mesh, {"generator": "points"})


def estimate_mesh(points):
    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return 1.0
    dist, _ = cKDTree(pts).query(pts, k=2)
    nn = dist[:, 1]
    nn = nn[nn > 0]
    return float(np.median(nn)) if nn.size else 1.0


@dataclass(frozen=True)
class RegularityEstimate:
    c_low: float
    C_high: float
    samples: int
    r_range: tuple


def _grid_axes(d, extent, h):
    n = int(math.floor(2.0 * extent / h + 1e-9)) + 1
    axis = -extent + h * np.arange(n)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def gen_hyperplane(d, extent, h):
    """Grid on ``[-extent, extent]^d x {0}`` with weight ``h^d`` per node."""
    d = check_int(d, "d", minimum=1)
    extent = check_positive(extent, "extent")
    h = check_positive(h, "h")
    if h > extent:
        raise InvalidParameterError(f"spacing h={h} exceeds extent={extent}")
    base = _grid_axes(d, extent, h)
    pts = np.hstack([base, np.zeros((len(base), 1))])
    w = np.full(len(pts), h ** d)
    lo, hi = np.full(d, -extent), np.full(d, extent)
    prov = {"generator": "plane", "d": d, "extent": extent, "h": h}
    return DiscreteMeasure(d, pts, w, h, prov, (lo, hi))


def gen_lipschitz_graph(d, amplitude, frequency, extent, h):
    """Graph of ``u -> amplitude * sin(frequency * u_1)`` over the plane grid.

    Weights carry the surface-element factor so the total mass approximates
    the d-dimensional area of the graph.
    """
    d = check_int(d, "d", minimum=1)
    amplitude = check_positive(amplitude, "amplitude", allow_zero=True)
    frequency = float(frequency)
    extent = check_positive(extent, "extent")
    h = check_positive(h, "h")
    if h > extent:
        raise InvalidParameterError(f"spacing h={h} exceeds extent={extent}")
    base = _grid_axes(d, extent, h)
    u1 = base[:, 0]
    height = amplitude * np.sin(frequency * u1)
    slope = amplitude * frequency * np.cos(frequency * u1)
    pts = np.hstack([base, height[:, None]])
    w = h ** d * np.sqrt(1.0 + slope ** 2)
    lo, hi = np.full(d, -extent), np.full(d, extent)
    prov = {"generator": "lipschitz", "d": d, "amplitude": amplitude,
            "frequency": frequency, "extent": extent, "h": h}
    return DiscreteMeasure(d, pts, w, h, prov, (lo, hi))


def gen_cantor(depth):
    """Cell centres of the four-corner Cantor construction in the unit square."""
    depth = check_int(depth, "depth", minimum=0)
    if depth > _MAX_CANTOR_DEPTH:
        raise ResourceLimitError(
            f"depth={depth} would create 4**{depth} points (limit depth {_MAX_CANTOR_DEPTH})"
        )
    centers = np.array([[0.5, 0.5]])
    side = 1.0
    corners = np.array([[-1, -1], [1, -1], [-1, 1], [1, 1]], dtype=np.float64)
    for _ in range(depth):
        centers = (centers[:, None, :] + 0.375 * side * corners[None, :, :]).reshape(-1, 2)
        side /= 4.0
    scale = 4.0 ** (-depth)
    w = np.full(len(centers), scale)
    return DiscreteMeasure(1, centers, w, scale, {"generator": "cantor", "depth": depth})


def ball_indices(mu, x, r):
    """Sorted indices of support points in the open ball ``B(x, r)``."""
    x = check_vector(x, mu.ambient_dim)
    if len(mu) == 0:
        return np.zeros(0, dtype=np.intp)
    cand = np.asarray(mu.tree.query_ball_point(x, r), dtype=np.intp)
    if cand.size == 0:
        return cand
    cand.sort()
    dist = np.sqrt(((mu.points[cand] - x) ** 2).sum(axis=1))
    return cand[dist < r]


def ball_mass(mu, x, r):
    """``mu(B(x, r))`` for the open ball."""
    r = check_positive(r, "r")
    idx = ball_indices(mu, x, r)
    return math.fsum(mu.weights[idx])


def ad_regularity(mu, r_min, r_max, n_samples, seed, window=None):
    """Sampled lower/upper Ahlfors-David constants of ``mu``.

    Pairs ``(x, r)`` are drawn with ``x`` uniform over support points and
    ``r`` log-uniform in ``[r_min, r_max]``. If ``window=(center, radius)`` is
    given, ``x`` is restricted to the window and ``r`` to balls contained in
    it (AD regularity in an open set).
    """
    r_min = check_positive(r_min, "r_min")
    r_max = check_positive(r_max, "r_max")
    n_samples = check_int(n_samples, "n_samples", minimum=1)
    if len(mu) == 0:
        raise InvalidParameterError("measure is empty")
    if r_min < 4.0 * mu.mesh * (1 - 1e-12):
        raise InvalidParameterError(
            f"r_min={r_min:.6g} is below 4*mesh={4 * mu.mesh:.6g}; discretization dominates"
        )
    if not r_min < r_max:
        raise InvalidParameterError(f"need r_min < r_max, got {r_min} >= {r_max}")
    if r_max > mu.diameter * (1 + 1e-12):
        raise InvalidParameterError(
            f"r_max={r_max:.6g} exceeds the support diameter {mu.diameter:.6g}"
        )
    rng = np.random.default_rng(seed)
    if window is None:
        eligible = np.arange(len(mu))
        room = np.full(len(mu), np.inf)
    else:
        center = check_vector(window[0], mu.ambient_dim, "window center")
        radius = check_positive(window[1], "window radius")
        gap = radius - np.sqrt(((mu.points - center) ** 2).sum(axis=1))
        eligible = np.flatnonzero(gap >= r_min)
        room = gap
        if eligible.size == 0:
            raise InvalidParameterError("no support point leaves room for r_min inside the window")
    lo, hi = math.log(r_min), math.log(r_max)
    ratios = []
    for _ in range(n_samples):
        for _attempt in range(64):
            i = int(eligible[rng.integers(eligible.size)])
            r = math.exp(rng.uniform(lo, hi))
            if r <= room[i]:
                break
        else:
            continue
        ratios.append(ball_mass(mu, mu.points[i], r) / r ** mu.d)
    if not ratios:
        raise InvalidParameterError("no admissible (x, r) pair was drawn")
    return RegularityEstimate(min(ratios), max(ratios), len(ratios), (r_min, r_max))


def blow_up(mu, z, lam):
    """``nu(E) = lam^(-d) mu(z + lam E)``: points ``(p - z)/lam``, weights ``w lam^(-d)``."""
    lam = check_positive(lam, "lambda")
    z = check_vector(z, mu.ambient_dim, "z")
    pts = (mu.points - z) / lam
    w = mu.weights * lam ** (-mu.d)
    domain = None
    if mu.domain is not None:
        lo = (mu.domain[0] - z[:mu.d]) / lam
        hi = (mu.domain[1] - z[:mu.d]) / lam
        domain = (lo, hi)
    prov = {**mu.provenance, "blow_up": {"z": z.tolist(), "lambda": lam}}
    return DiscreteMeasure(mu.d, pts, w, mu.mesh / lam, prov, domain)


def translate(mu, v):
    v = check_vector(v, mu.ambient_dim, "v")
    domain = None
    if mu.domain is not None:
        domain = (mu.domain[0] + v[:mu.d], mu.domain[1] + v[:mu.d])
    return DiscreteMeasure(mu.d, mu.points + v, mu.weights, mu.mesh, mu.provenance, domain)


def is_interior(mu, x, radius):
    """True if the ball ``B(x, radius)`` stays inside the generator's domain box.

    Measures without a domain (closed supports such as the Cantor set) have
    no parameter boundary, so every ball counts as interior.
    """
    if mu.domain is None:
        return True
    u = np.asarray(x, dtype=np.float64)[:mu.d]
    lo, hi = mu.domain
    return bool(np.all(u - radius >= lo - 1e-12) and np.all(u + radius <= hi + 1e-12))


def save_csv(mu, path):
    header = [f"x{i}" for i in range(mu.ambient_dim)] + ["w"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for p, w in zip(mu.points, mu.weights):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(w))])


def load_csv(path, mesh=None):
    """Read a ``x0,...,xd,w`` point-cloud file.

    The file format has no mesh field; when ``mesh`` is omitted it is
    estimated as the median nearest-neighbour distance.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidParameterError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        ncol = len(header)
        expected = [f"x{i}" for i in range(ncol - 1)] + ["w"]
        if ncol < 3 or header != expected:
            raise InvalidParameterError(
                f"{path}: header must be x0,...,xd,w with d >= 1, got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != ncol:
                raise InvalidParameterError(
                    f"{path}:{lineno}: expected {ncol} columns (d+2), got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise InvalidParameterError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise InvalidParameterError(f"{path}: no data rows")
    data = np.asarray(rows)
    pts, w = data[:, :-1], data[:, -1]
    if mesh is None:
        mesh = estimate_mesh(pts)
    return DiscreteMeasure(ncol - 2, pts, w, mesh, {"generator": "csv", "path": str(path)})
