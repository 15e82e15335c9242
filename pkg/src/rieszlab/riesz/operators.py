"""Riesz operators ``R_{mu,delta}``, their adjoints and norm estimates."""

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .._validation import check_int, check_points, check_positive
from ..exceptions import InvalidParameterError, ScaleWindowError
from ..measure import gen_hyperplane
from .kernels import Hyperplane, KernelSpec, check_side, kernel_block
from .tree import ORDERS, KernelTree, direct_sum

_NAIVE_BLOCK = 1 << 21
_TREE_BLOCK = 512
_DENSE_LIMIT = 16_000_000


@dataclass(frozen=True)
class Naive:
    """Direct ``O(NM)`` summation."""

    def to_dict(self):
        return {"name": "naive"}


@dataclass(frozen=True)
class Tree:
    """Treecode summation with monopole or dipole far field."""

    theta: float = 0.2
    order: str = "dipole"
    leaf_size: int = 32

    def __post_init__(self):
        if self.order not in ORDERS:
            raise InvalidParameterError(f"tree order must be one of {ORDERS}, got {self.order!r}")
        check_positive(self.theta, "theta")
        check_int(self.leaf_size, "leaf_size", minimum=1)

    def to_dict(self):
        return {"name": "tree", "theta": self.theta, "order": self.order}


def resolve_threads(threads=None):
    """Thread count from the argument, else ``RIESZLAB_THREADS``, else 1."""
    if threads is None:
        env = os.environ.get("RIESZLAB_THREADS", "").strip()
        if not env:
            return 1
        try:
            threads = int(env)
        except ValueError:
            raise InvalidParameterError(f"RIESZLAB_THREADS must be an integer, got {env!r}") from None
    return check_int(threads, "threads", minimum=1)


@dataclass(frozen=True, eq=False)
class FieldSample:
    """Values of a Riesz transform at a list of targets."""

    targets: np.ndarray
    values: np.ndarray
    kernel: KernelSpec
    method: object

    def __post_init__(self):
        if len(self.targets) != len(self.values):
            raise InvalidParameterError("values count must equal targets count")

    def to_csv(self, path):
        dim = self.targets.shape[1]
        header = [f"x{i}" for i in range(dim)] + [f"v{i}" for i in range(self.values.shape[1])]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for x, v in zip(self.targets, self.values):
                writer.writerow([repr(float(c)) for c in x] + [repr(float(c)) for c in v])


def _blocks(n, size):
    return [(s, min(n, s + size)) for s in range(0, n, size)]


def _run_blocks(fn, blocks, threads):
    if threads == 1 or len(blocks) == 1:
        return [fn(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, blocks))


def _full_sum(sources, charges, targets, d, delta, method, threads):
    """``sum_j K_delta(x - y_j) q_j`` for every target, in a fixed per-target order."""
    m = len(targets)
    out = np.zeros((m, targets.shape[1]))
    if m == 0 or len(sources) == 0:
        return out
    if isinstance(method, Tree):
        tree = KernelTree(sources, leaf_size=method.leaf_size)
        blocks = _blocks(m, _TREE_BLOCK)

        def work(b):
            return tree.evaluate(charges, targets[b[0]:b[1]], d, delta, method.theta, method.order)
    else:
        # the block size depends only on the source count, never on threads
        blocks = _blocks(m, max(1, _NAIVE_BLOCK // max(1, len(sources) * targets.shape[1])))

        def work(b):
            return direct_sum(targets[b[0]:b[1]], sources, charges, d, delta)

    for (s, e), part in zip(blocks, _run_blocks(work, blocks, threads)):
        out[s:e] = part
    return out


def _apply(mu, charges, spec, targets, method, threads):
    d = mu.d
    pts = mu.points
    if spec.variant == "full":
        return _full_sum(pts, charges, targets, d, spec.delta, method, threads)
    if spec.variant == "restricted":
        return spec.plane.project_vectors(_full_sum(pts, charges, targets, d, spec.delta, method, threads))
    check_side(spec, pts, "support point")
    check_side(spec, targets, "target")
    L = spec.boundary
    direct = _full_sum(pts, charges, targets, d, spec.delta, method, threads)
    image_t = _full_sum(pts, charges, L.reflect(targets), d, spec.delta, method, threads)
    image_s = _full_sum(L.reflect(pts), charges, targets, d, spec.delta, method, threads)
    return spec.plane.project_vectors(direct - 0.5 * (image_t + image_s))


def _targets(mu, targets):
    if targets is None:
        return mu.points
    return check_points(targets, dim=mu.ambient_dim, name="targets")


def riesz_transform(mu, f, spec, targets=None, method=None, threads=None):
    """Sample ``R_{mu,delta} f(x) = sum_y K(x, y) f(y) w(y)`` at ``targets``.

    Parameters
    ----------
    mu : DiscreteMeasure
    f : array of shape (n,)
        Values at the support points.
    spec : KernelSpec
    targets : array of shape (m, d + 1), optional
        Defaults to the support points.
    method : Naive or Tree, optional
        Defaults to :class:`Naive`.
    threads : int, optional
        Worker threads; each target's sum is computed in the same order
        whatever the thread count.

    Returns
    -------
    FieldSample
    """
    method = Naive() if method is None else method
    f = np.asarray(f, dtype=np.float64).reshape(-1)
    if f.shape[0] != len(mu):
        raise InvalidParameterError(f"f has {f.shape[0]} values for {len(mu)} support points")
    tg = _targets(mu, targets)
    values = _apply(mu, f * mu.weights, spec, tg, method, resolve_threads(threads))
    return FieldSample(tg, values, spec, method)


def _basis(spec, dim):
    if spec.variant == "full":
        return np.eye(dim)
    return spec.plane.basis()


def contracted_transform(mu, g, spec, targets=None, method=None, threads=None):
    """``sum_j <e_j, R <g, e_j>>`` over an orthonormal basis.

    The basis spans the whole space for the full kernel and ``H`` for the
    restricted and reflected ones. By antisymmetry of the kernel,
    ``<R f, g>_mu + <f, contracted_transform(g)>_mu = 0``.
    """
    method = Naive() if method is None else method
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (len(mu), mu.ambient_dim):
        raise InvalidParameterError(f"g must have shape {(len(mu), mu.ambient_dim)}, got {g.shape}")
    tg = _targets(mu, targets)
    threads = resolve_threads(threads)
    out = np.zeros(len(tg))
    for e in _basis(spec, mu.ambient_dim):
        out += _apply(mu, (g @ e) * mu.weights, spec, tg, method, threads) @ e
    return out


def adjoint_apply(mu, g, spec, targets=None, method=None, threads=None):
    """Hilbert-space adjoint ``R*_{mu,delta} g = -sum_j <e_j, R <g, e_j>>`` in L^2(mu)."""
    return -contracted_transform(mu, g, spec, targets, method, threads)


def inner(mu, a, b):
    """``<a, b>_mu`` for scalar or vector fields on the support."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    prod = a * b
    if prod.ndim == 2:
        prod = prod.sum(axis=1)
    return math.fsum(prod * mu.weights)


@dataclass(frozen=True)
class OpNormEstimate:
    value: float
    delta: float
    iters: int
    converged: bool

    def to_dict(self):
        return {"value": self.value, "delta": self.delta, "iters": self.iters,
                "converged": self.converged}


def op_norm(mu, spec, max_iters=300, tol=1e-8, seed=0, method=None, threads=None,
            strict_window=True):
    """Power iteration for ``||R_{mu,delta}||`` on L^2(mu).

    Iterates ``v <- R* R v`` with the weighted inner product and stops when
    ``|lambda_k - lambda_{k-1}| <= tol * lambda_k``. The Rayleigh quotients
    increase monotonically, so an unconverged value is still a lower bound.

    ``strict_window=False`` lifts the ``delta >= 4*mesh`` requirement, for
    scans that deliberately probe the discretization scale.

    With ``method=None`` and a kernel matrix of at most 16 million entries,
    the iteration runs on :func:`dense_matrix` (whose transpose is the
    adjoint); otherwise it is matrix-free through :func:`riesz_transform`
    and :func:`adjoint_apply`.
    """
    check_int(max_iters, "max_iters", minimum=1)
    tol = check_positive(tol, "tol")
    if len(mu) == 0:
        raise InvalidParameterError("measure is empty")
    if strict_window and spec.delta < 4.0 * mu.mesh * (1 - 1e-12):
        raise ScaleWindowError(
            f"delta={spec.delta:.6g} is below 4*mesh={4 * mu.mesh:.6g}; use strict_window=False to override"
        )
    if spec.delta == 0:
        raise ScaleWindowError("op_norm needs a positive truncation on the support")
    if len(mu) == 1:
        return OpNormEstimate(0.0, spec.delta, 0, True)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(len(mu))
    if method is None and len(mu) ** 2 * mu.ambient_dim <= _DENSE_LIMIT:
        return _dense_power(dense_matrix(mu, spec), v, spec.delta, max_iters, tol)
    v /= math.sqrt(inner(mu, v, v))
    lam_prev = None
    lam = 0.0
    for it in range(1, max_iters + 1):
        rv = riesz_transform(mu, v, spec, method=method, threads=threads).values
        lam = inner(mu, rv, rv)
        if lam == 0:
            return OpNormEstimate(0.0, spec.delta, it, True)
        w = adjoint_apply(mu, rv, spec, method=method, threads=threads)
        if lam_prev is not None and abs(lam - lam_prev) <= tol * lam:
            return OpNormEstimate(math.sqrt(lam), spec.delta, it, True)
        lam_prev = lam
        v = w / math.sqrt(inner(mu, w, w))
    return OpNormEstimate(math.sqrt(lam), spec.delta, max_iters, False)


def _dense_power(a, v, delta, max_iters, tol):
    v = v / np.linalg.norm(v)
    lam_prev = None
    lam = 0.0
    for it in range(1, max_iters + 1):
        av = a @ v
        lam = float(av @ av)
        if lam == 0:
            return OpNormEstimate(0.0, delta, it, True)
        if lam_prev is not None and abs(lam - lam_prev) <= tol * lam:
            return OpNormEstimate(math.sqrt(lam), delta, it, True)
        lam_prev = lam
        w = a.T @ av
        v = w / np.linalg.norm(w)
    return OpNormEstimate(math.sqrt(lam), delta, max_iters, False)


def dense_matrix(mu, spec):
    """Matrix of ``f -> R_{mu,delta} f`` in L^2(mu)-orthonormal coordinates.

    Row ``(i, c)`` and column ``j`` hold ``sqrt(w_i) K_c(x_i, x_j) sqrt(w_j)``,
    so the spectral norm equals the operator norm.
    """
    if spec.variant == "reflected":
        check_side(spec, mu.points, "support point")
    sw = np.sqrt(mu.weights)
    block = kernel_block(spec, mu.points, mu.points, mu.d)
    a = block * sw[:, None, None] * sw[None, :, None]
    return np.ascontiguousarray(a.transpose(0, 2, 1).reshape(-1, len(mu)))


def dense_op_norm(mu, spec):
    """Largest singular value of :func:`dense_matrix` (oracle for small N)."""
    if len(mu) > 4000:
        raise InvalidParameterError("dense oracle is limited to 4000 points")
    return float(np.linalg.norm(dense_matrix(mu, spec), 2))


def plane_multiplier(d):
    """``|c|`` for the Riesz transform on R^d with kernel ``x / |x|^(d+1)``.

    The Fourier multiplier is ``-i pi^((d+1)/2) / Gamma((d+1)/2) xi/|xi|``
    (``-i pi sgn`` for d = 1), so ``R* R = c Id`` with
    ``c = pi^(d+1) / Gamma((d+1)/2)^2``.
    """
    return math.exp((d + 1) * math.log(math.pi) - 2.0 * gammaln((d + 1) / 2.0))


@dataclass(frozen=True)
class IsometryFit:
    value: float
    dispersion: float
    per_function: tuple
    discretization_limited: bool
    h: float
    delta: float
    n_points: int


def _bumps(base, h, d, n):
    """Odd Gaussian-derivative bumps at grid nodes, varying centre and width."""
    centres = np.linspace(-0.3, 0.3, n)
    widths = np.linspace(0.05, 0.09, n)[::-1]
    out = []
    for a, s in zip(centres, widths):
        c = np.zeros(d)
        c[0] = round(a / h) * h
        u = base[:, :d] - c
        out.append(u[:, 0] * np.exp(-(u * u).sum(axis=1) / (2 * s * s)))
    return out


def plane_isometry_constant(d, resolution, n_bumps=5, method=None, threads=None):
    """Fit ``|c|`` in ``(R^H)* R^H = c Id`` on a discretized plane.

    The plane ``[-1, 1]^d x {0}`` is sampled with ``resolution`` points per
    axis and ``delta = 2h``. Each bump ``f`` gives ``c_f = <R*R f, f>/<f, f>``;
    the fitted value is the mean and the dispersion is
    ``(max - min)/mean``.
    """
    d = check_int(d, "d", minimum=1)
    resolution = check_int(resolution, "resolution", minimum=2)
    if resolution ** d < 1000:
        raise InvalidParameterError(f"resolution {resolution} gives fewer than 1000 grid points")
    h = 2.0 / (resolution - 1)
    mu = gen_hyperplane(d, 1.0, h)
    normal = np.zeros(d + 1)
    normal[-1] = 1.0
    spec = KernelSpec("restricted", 2.0 * h, Hyperplane(normal))
    vals = []
    for f in _bumps(mu.points, h, d, check_int(n_bumps, "n_bumps", minimum=1)):
        rf = riesz_transform(mu, f, spec, method=method, threads=threads).values
        g = adjoint_apply(mu, rf, spec, method=method, threads=threads)
        vals.append(inner(mu, g, f) / inner(mu, f, f))
    vals = np.array(vals)
    mean = float(vals.mean())
    disp = float((vals.max() - vals.min()) / abs(mean))
    return IsometryFit(abs(mean), disp, tuple(float(v) for v in vals), disp > 0.10,
                       h, 2.0 * h, len(mu))
