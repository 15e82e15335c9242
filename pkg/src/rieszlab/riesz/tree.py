"""Bounding-volume treecode for truncated Riesz kernel sums.

Sources are split recursively at the median of the widest bounding-box
axis. A node is summarised by its total charge and dipole moment about the
box centre; a target uses that expansion when

    |x - c| >= size / theta   and   |x - c| - size / 2 > delta,

where ``size`` is the box diagonal. The second condition keeps every source
of the node outside the truncation radius, where ``K_delta = K`` is smooth
and the Taylor remainder is controlled by the derivative bounds
``|D^k K(x)| <= C_k |x|^(-d-k)``; see :func:`rel_tol`.
"""

import math

import numpy as np

from ..exceptions import InvalidParameterError
from .kernels import truncated_kernel


def direct_sum(targets, sources, charges, d, delta):
    """``sum_j K_delta(x_i - y_j) q_j`` by brute force.

    Each component is reduced along a contiguous row, so the result for a
    target does not depend on which other targets share the call.
    """
    diff = targets[:, None, :] - sources[None, :, :]
    r = np.sqrt((diff * diff).sum(axis=-1))
    if delta == 0 and np.any(r == 0):
        truncated_kernel(diff, d, delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(r == 0, 0.0, charges[None, :] / np.maximum(delta, r) ** (d + 1))
    out = np.empty((len(targets), targets.shape[1]))
    for c in range(targets.shape[1]):
        out[:, c] = (diff[:, :, c] * scale).sum(axis=1)
    return out

ORDERS = ("monopole", "dipole")


def derivative_constant(k, d):
    """``C_k`` with ``|D^k K(x)[u, ..., u]| <= C_k |x|^(-d-k)`` for unit ``u``, k = 1, 2."""
    n = d + 1
    if k == 1:
        return float(max(1, n - 1))
    if k == 2:
        return float(max(n, n * (n - 1)))
    raise InvalidParameterError("only first and second derivative constants are tabulated")


def rel_tol(theta, order, d):
    """A priori error factor of one accepted node.

    For an accepted node with charges ``q_j`` the expansion error at ``x`` is
    at most ``rel_tol * sum_j |q_j| / |x - c|^d``. With ``rho <= size/2`` and
    ``|x - c| >= size/theta`` the ratio ``t = rho/|x - c|`` is at most
    ``theta/2`` and the Taylor remainder of order ``p`` gives
    ``C_p t^p / (p! (1 - t)^(d+p))``.
    """
    if order not in ORDERS:
        raise InvalidParameterError(f"tree order must be one of {ORDERS}, got {order!r}")
    p = 1 if order == "monopole" else 2
    t = 0.5 * theta
    if t >= 1:
        return math.inf
    return derivative_constant(p, d) * t ** p / (math.factorial(p) * (1 - t) ** (d + p))


class KernelTree:
    def __init__(self, points, leaf_size=32):
        points = np.ascontiguousarray(points, dtype=np.float64)
        self.points = points
        self.leaf_size = int(leaf_size)
        n = len(points)
        perm = np.arange(n)
        lo, hi, start, end, left, right = [], [], [], [], [], []

        def build(idx_start, idx_end):
            node = len(lo)
            block = points[perm[idx_start:idx_end]]
            lo.append(block.min(axis=0))
            hi.append(block.max(axis=0))
            start.append(idx_start)
            end.append(idx_end)
            left.append(-1)
            right.append(-1)
            count = idx_end - idx_start
            if count > self.leaf_size:
                axis = int(np.argmax(hi[node] - lo[node]))
                if hi[node][axis] > lo[node][axis]:
                    mid = count // 2
                    seg = perm[idx_start:idx_end]
                    order = np.argsort(points[seg, axis], kind="stable")
                    perm[idx_start:idx_end] = seg[order]
                    left[node] = build(idx_start, idx_start + mid)
                    right[node] = build(idx_start + mid, idx_end)
            return node

        if n:
            build(0, n)
        self.perm = perm
        self.lo = np.array(lo).reshape(-1, points.shape[1])
        self.hi = np.array(hi).reshape(-1, points.shape[1])
        self.start = np.array(start, dtype=np.intp)
        self.end = np.array(end, dtype=np.intp)
        self.left = np.array(left, dtype=np.intp)
        self.right = np.array(right, dtype=np.intp)
        self.center = 0.5 * (self.lo + self.hi)
        self.size = np.sqrt(((self.hi - self.lo) ** 2).sum(axis=1))
        self.sorted_points = points[perm]

    def __len__(self):
        return len(self.start)

    def moments(self, charges):
        """Per-node total charge and dipole moment about the box centre."""
        q = np.asarray(charges, dtype=np.float64)[self.perm]
        y = self.sorted_points
        nn = len(self)
        total = np.zeros(nn)
        first = np.zeros((nn, y.shape[1]))
        # children are created after their parent, so a reverse sweep is bottom-up
        for node in range(nn - 1, -1, -1):
            a, b = self.left[node], self.right[node]
            if a < 0:
                s, e = self.start[node], self.end[node]
                total[node] = q[s:e].sum()
                first[node] = (q[s:e, None] * y[s:e]).sum(axis=0)
            else:
                total[node] = total[a] + total[b]
                first[node] = first[a] + first[b]
        dipole = first - total[:, None] * self.center
        return total, dipole

    def evaluate(self, charges, targets, d, delta, theta=0.2, order="dipole"):
        """``sum_j K_delta(x_i - y_j) q_j`` for each target ``x_i``."""
        if order not in ORDERS:
            raise InvalidParameterError(f"tree order must be one of {ORDERS}, got {order!r}")
        if not theta > 0:
            raise InvalidParameterError(f"theta must be > 0, got {theta}")
        targets = np.ascontiguousarray(targets, dtype=np.float64)
        out = np.zeros((len(targets), targets.shape[1]))
        if len(self) == 0 or len(targets) == 0:
            return out
        q_sorted = np.asarray(charges, dtype=np.float64)[self.perm]
        total, dipole = self.moments(charges)
        use_dipole = order == "dipole"
        stack = [(0, np.arange(len(targets)))]
        while stack:
            node, idx = stack.pop()
            rvec = targets[idx] - self.center[node]
            r = np.sqrt((rvec * rvec).sum(axis=1))
            size = self.size[node]
            far = (r * theta >= size) & (r - 0.5 * size > delta)
            if np.any(far):
                fi = idx[far]
                rv, rr = rvec[far], r[far]
                inv = rr ** (-(d + 1))
                field = total[node] * rv * inv[:, None]
                if use_dipole:
                    p = dipole[node]
                    rp = rv @ p
                    field -= p[None, :] * inv[:, None]
                    field += (d + 1) * rv * (rp * inv / (rr * rr))[:, None]
                out[fi] += field
            near = idx[~far]
            if near.size == 0:
                continue
            if self.left[node] < 0:
                s, e = self.start[node], self.end[node]
                out[near] += direct_sum(targets[near], self.sorted_points[s:e],
                                        q_sorted[s:e], d, delta)
            else:
                stack.append((self.right[node], near))
                stack.append((self.left[node], near))
        return out
