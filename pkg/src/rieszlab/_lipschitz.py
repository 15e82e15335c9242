"""Linear programs over Lipschitz test functions sampled on a node set."""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from .exceptions import ConstructionInvariantError

_FULL_CHECK_LIMIT = 3000
_CHECK_SAMPLE = 2000
_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class LipschitzLPResult:
    value: float
    f: np.ndarray
    n_vars: int
    n_constraints: int
    rounds: int
    validated_pairs: int


def neighbour_pairs(nodes, k=12, n_random=None, seed=0, extra=None):
    """Sparse constraint graph: ``k`` nearest neighbours plus random long-range pairs."""
    n = len(nodes)
    pairs = []
    if n > 1:
        kk = min(k + 1, n)
        _, idx = cKDTree(nodes).query(nodes, k=kk)
        idx = idx.reshape(n, kk)
        for j in range(1, kk):
            pairs.append(np.stack([np.arange(n), idx[:, j]], axis=1))
        rng = np.random.default_rng(seed)
        m = 3 * n if n_random is None else n_random
        a = rng.integers(0, n, m)
        b = rng.integers(0, n, m)
        pairs.append(np.stack([a, b], axis=1))
    if extra is not None and len(extra):
        pairs.append(np.asarray(extra, dtype=np.intp).reshape(-1, 2))
    if not pairs:
        return np.zeros((0, 2), dtype=np.intp)
    p = np.concatenate(pairs).astype(np.intp)
    p = p[p[:, 0] != p[:, 1]]
    p = np.sort(p, axis=1)
    return np.unique(p, axis=0)


def all_pairs(n):
    i, j = np.triu_indices(n, k=1)
    return np.stack([i, j], axis=1).astype(np.intp)


def _violations(nodes, f, lip, sample):
    """Pairs among ``sample`` violating ``|f_i - f_j| <= lip |x_i - x_j|``."""
    out = []
    pts = nodes[sample]
    fv = f[sample]
    for s in range(0, len(sample), 256):
        blk = slice(s, s + 256)
        dist = np.sqrt(((pts[blk, None, :] - pts[None, :, :]) ** 2).sum(-1))
        gap = np.abs(fv[blk, None] - fv[None, :]) - lip * dist
        bi, bj = np.nonzero(gap > _FEAS_TOL * max(1.0, np.abs(fv).max()))
        if bi.size:
            # keep the worst violation per row to grow the LP gently
            worst = {}
            for a, b, g in zip(bi, bj, gap[bi, bj]):
                if a + s not in worst or g > worst[a + s][1]:
                    worst[a + s] = (b, g)
            out.extend((sample[a], sample[b]) for a, (b, _) in worst.items())
    if not out:
        return np.zeros((0, 2), dtype=np.intp)
    p = np.sort(np.asarray(out, dtype=np.intp), axis=1)
    return np.unique(p, axis=0)


def solve_lipschitz_lp(nodes, objective, caps, lip, pairs, eq_rows=(), seed=0,
                       validate=True, max_rounds=20):
    """Maximise ``objective @ f`` over ``f`` on ``nodes``.

    Constraints are ``|f_i - f_j| <= lip |x_i - x_j|`` on ``pairs``,
    ``|f_i| <= caps_i`` and ``row @ f = 0`` for each row of ``eq_rows``.
    With ``validate`` the optimum is checked against every pair (or against
    all pairs of a seeded subsample of 2000 nodes for larger sets); violated
    pairs join the LP and it is solved again.
    """
    nodes = np.asarray(nodes, dtype=np.float64)
    n = len(nodes)
    caps = np.asarray(caps, dtype=np.float64)
    if n == 0:
        return LipschitzLPResult(0.0, np.zeros(0), 0, 0, 0, 0)
    pairs = np.asarray(pairs, dtype=np.intp).reshape(-1, 2)
    a_eq = np.asarray(eq_rows, dtype=np.float64).reshape(-1, n) if len(eq_rows) else None
    b_eq = np.zeros(len(a_eq)) if a_eq is not None else None
    rng = np.random.default_rng(seed)
    if n <= _FULL_CHECK_LIMIT:
        sample = np.arange(n)
    else:
        sample = np.sort(rng.choice(n, _CHECK_SAMPLE, replace=False))
    rounds = 0
    while True:
        rounds += 1
        m = len(pairs)
        rows = np.repeat(np.arange(2 * m), 2)
        cols = np.concatenate([pairs, pairs]).reshape(-1)
        vals = np.concatenate([np.tile([1.0, -1.0], m), np.tile([-1.0, 1.0], m)])
        a_ub = sparse.csr_matrix((vals, (rows, cols)), shape=(2 * m, n)) if m else None
        dist = np.sqrt(((nodes[pairs[:, 0]] - nodes[pairs[:, 1]]) ** 2).sum(axis=1))
        b_ub = np.concatenate([lip * dist, lip * dist]) if m else None
        res = linprog(-np.asarray(objective, dtype=np.float64), A_ub=a_ub, b_ub=b_ub,
                      A_eq=a_eq, b_eq=b_eq, bounds=np.stack([-caps, caps], axis=1),
                      method="highs")
        if res.status == 3:
            raise ConstructionInvariantError("Lipschitz LP is unbounded; the constraint graph is broken")
        if res.status != 0:
            raise ConstructionInvariantError(f"Lipschitz LP failed: {res.message}")
        f = res.x
        if not validate:
            break
        bad = _violations(nodes, f, lip, sample)
        if len(bad) == 0 or rounds >= max_rounds:
            if len(bad):
                raise ConstructionInvariantError(
                    f"Lipschitz LP still violates {len(bad)} pairs after {rounds} rounds"
                )
            break
        pairs = np.unique(np.concatenate([pairs, bad]), axis=0)
    return LipschitzLPResult(float(-res.fun), f, n, int(2 * len(pairs) + (0 if a_eq is None else len(a_eq))),
                             rounds, int(len(sample) * (len(sample) - 1) // 2) if validate else 0)
