"""scikit-learn style wrappers over the functional core.

Each estimator is fitted on a support (a :class:`DiscreteMeasure` or an
``(n, d + 1)`` point array with unit weights) and exposes its results as
trailing-underscore attributes.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .baup import eligible_cells, nonbaup_family
from .carleson import carleson_constant
from .exceptions import NotFittedError, ScaleWindowError
from .flatness import FlatnessQuery, analytic_defect, best_plane, geometric_defect
from .lattice import build_lattice, spatial_member
from .measure import DiscreteMeasure
from .riesz.kernels import Hyperplane, KernelSpec
from .riesz.operators import Naive, Tree, op_norm, riesz_transform


def as_measure(X, d=None, mesh=None):
    """Accept a measure or a point array; arrays get unit weights."""
    if isinstance(X, DiscreteMeasure):
        return X
    return DiscreteMeasure.from_points(np.asarray(X, dtype=np.float64), mesh=mesh, d=d)


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class RieszOperator(BaseEstimator, TransformerMixin):
    """Truncated Riesz transform of a discrete measure.

    Parameters
    ----------
    delta : float, optional
        Truncation radius; ``None`` uses ``4 * mesh``.
    method : {"naive", "tree"}
    theta, order : treecode opening angle and expansion order.
    threads : int, optional
    """

    def __init__(self, delta=None, method="naive", theta=0.2, order="dipole", threads=None):
        self.delta = delta
        self.method = method
        self.theta = theta
        self.order = order
        self.threads = threads

    def _method(self):
        return Tree(self.theta, self.order) if self.method == "tree" else Naive()

    def fit(self, X, y=None):
        self.measure_ = as_measure(X)
        delta = 4.0 * self.measure_.mesh if self.delta is None else self.delta
        self.spec_ = KernelSpec("full", delta)
        return self

    def transform(self, f):
        """``R_{mu,delta} f`` at the support points, shape ``(n, d + 1)``."""
        _check_fitted(self, "measure_")
        return riesz_transform(self.measure_, f, self.spec_, method=self._method(),
                               threads=self.threads).values

    def operator_norm(self, **kw):
        _check_fitted(self, "measure_")
        self.norm_ = op_norm(self.measure_, self.spec_, threads=self.threads, **kw)
        return self.norm_.value


class DavidSemmesLattice(BaseEstimator, TransformerMixin):
    """Nested cell partitions of the support on scales ``16^-k``.

    ``transform`` maps points to the ids of their cells, one column per level.
    """

    def __init__(self, k_min=None, k_max=None):
        self.k_min = k_min
        self.k_max = k_max

    def fit(self, X, y=None):
        self.measure_ = as_measure(X)
        self.lattice_ = build_lattice(self.measure_, self.k_min, self.k_max)
        self.levels_ = list(range(self.lattice_.k_min, self.lattice_.k_max + 1))
        return self

    def transform(self, X):
        _check_fitted(self, "lattice_")
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty((len(X), len(self.levels_)), dtype=np.intp)
        for j, k in enumerate(self.levels_):
            for i, x in enumerate(X):
                out[i, j] = spatial_member(self.lattice_, x, k)
        return out


class FlatnessEstimator(BaseEstimator):
    """Per-cell flatness defects at the best plane.

    Cells whose window ``A l`` leaves the scale range get ``nan``.
    ``predict`` returns the cell ids with geometric (and, if requested,
    analytic) defect at most ``alpha``.
    """

    def __init__(self, A=6.0, alpha=0.1, analytic=False, levels=None, lattice=None):
        self.A = A
        self.alpha = alpha
        self.analytic = analytic
        self.levels = levels
        self.lattice = lattice

    def fit(self, X, y=None):
        self.measure_ = as_measure(X)
        lat = self.lattice if self.lattice is not None else build_lattice(self.measure_)
        self.lattice_ = lat
        levels = self.levels if self.levels is not None else range(lat.k_min, lat.k_max + 1)
        geo, an, normals = {}, {}, {}
        for k in levels:
            for cid in lat.levels[k]:
                c = lat.cells[cid]
                z = lat.center_point(cid)
                try:
                    plane, g = best_plane(self.measure_, z, c.scale, self.A)
                except ScaleWindowError:
                    geo[cid] = an[cid] = float("nan")
                    continue
                geo[cid] = g
                normals[cid] = plane.normal
                if self.analytic:
                    q = FlatnessQuery(z, c.scale, self.A, Hyperplane(plane.normal))
                    an[cid] = analytic_defect(self.measure_, q)
        self.geometric_ = geo
        self.analytic_ = an
        self.normals_ = normals
        return self

    def predict(self, X=None):
        _check_fitted(self, "geometric_")
        out = []
        for cid, g in sorted(self.geometric_.items()):
            ok = g <= self.alpha
            if ok and self.analytic:
                ok = self.analytic_[cid] <= self.alpha
            if ok:
                out.append(cid)
        return np.array(out, dtype=np.intp)

    def defect_at(self, z, ell, normal):
        _check_fitted(self, "measure_")
        return geometric_defect(self.measure_, FlatnessQuery(z, ell, self.A, Hyperplane(normal)))


class BaupDetector(BaseEstimator):
    """delta-non-BAUP cells of the lattice and the Carleson constant of their family."""

    def __init__(self, delta=0.1, interior_only=False, rarefied=False, max_samples=64, seed=0,
                 lattice=None):
        self.delta = delta
        self.interior_only = interior_only
        self.rarefied = rarefied
        self.max_samples = max_samples
        self.seed = seed
        self.lattice = lattice

    def fit(self, X, y=None):
        self.measure_ = as_measure(X)
        lat = self.lattice if self.lattice is not None else build_lattice(self.measure_)
        self.lattice_ = lat
        self.eligible_ = eligible_cells(self.measure_, lat, self.delta, self.interior_only)
        self.family_ = nonbaup_family(self.measure_, lat, self.delta, rarefied=self.rarefied,
                                      cells=self.eligible_, max_samples=self.max_samples,
                                      seed=self.seed)
        self.fraction_ = len(self.family_) / len(self.eligible_) if self.eligible_ else 0.0
        self.carleson_ = carleson_constant(lat, self.family_)
        return self

    def predict(self, X=None):
        _check_fitted(self, "family_")
        return np.array(self.family_, dtype=np.intp)
