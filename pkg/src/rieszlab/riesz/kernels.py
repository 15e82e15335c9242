"""Riesz kernel family: full, hyperplane-restricted and reflected variants."""

from dataclasses import dataclass

import numpy as np

from .._validation import check_positive, check_vector
from ..exceptions import DomainError, InvalidParameterError, SingularityError

VARIANTS = ("full", "restricted", "reflected")


@dataclass(frozen=True, eq=False)
class Hyperplane:
    """Affine hyperplane ``{x : <x - anchor, normal> = 0}``.

    For a linear hyperplane the anchor is the origin. The normal orientation
    matters only for reflection boundaries, where it points into the
    admissible half-space.
    """

    normal: np.ndarray
    anchor: np.ndarray = None

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(-1)
        norm = np.linalg.norm(n)
        if not np.isfinite(norm) or norm == 0:
            raise InvalidParameterError("hyperplane normal must be a nonzero finite vector")
        if abs(norm - 1.0) > 1e-12:
            n = n / norm
        a = np.zeros_like(n) if self.anchor is None else check_vector(self.anchor, n.size, "anchor")
        n.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "normal", n)
        object.__setattr__(self, "anchor", a)

    @property
    def dim(self):
        return self.normal.size

    def through(self, point):
        """Parallel hyperplane passing through ``point``."""
        return Hyperplane(self.normal, point)

    def project_vectors(self, v):
        """Orthogonal projection of vectors onto the linear part ``H``."""
        v = np.asarray(v, dtype=np.float64)
        return v - (v @ self.normal)[..., None] * self.normal

    def signed_distance(self, x):
        return (np.asarray(x, dtype=np.float64) - self.anchor) @ self.normal

    def reflect(self, x):
        x = np.asarray(x, dtype=np.float64)
        return x - 2.0 * self.signed_distance(x)[..., None] * self.normal

    def basis(self):
        """Orthonormal basis of the linear part, shape ``(dim - 1, dim)``.

        Built from the Householder reflector sending the last axis to the
        normal, so it is a deterministic function of the normal.
        """
        n = self.normal
        e = np.zeros_like(n)
        e[-1] = 1.0
        s = 1.0 if n[-1] >= 0 else -1.0
        v = n + s * e
        q = np.eye(n.size) - 2.0 * np.outer(v, v) / (v @ v)
        return q[:, :-1].T.copy()

    def to_dict(self):
        return {"normal": self.normal.tolist(), "anchor": self.anchor.tolist()}


@dataclass(frozen=True, eq=False)
class KernelSpec:
    """Which Riesz kernel to evaluate and at what truncation.

    ``plane`` is the hyperplane ``H`` whose linear part receives the
    projection (restricted and reflected variants). ``boundary`` is the
    reflecting hyperplane ``L`` of the reflected variant; it must be parallel
    to ``H`` and its normal points into the admissible side.
    """

    variant: str = "full"
    delta: float = 0.0
    plane: Hyperplane = None
    boundary: Hyperplane = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        object.__setattr__(self, "delta", check_positive(self.delta, "delta", allow_zero=True))
        if self.variant in ("restricted", "reflected") and self.plane is None:
            if self.variant == "reflected" and self.boundary is not None:
                object.__setattr__(self, "plane", Hyperplane(self.boundary.normal))
            else:
                raise InvalidParameterError(f"{self.variant} kernel needs a hyperplane H")
        if self.variant == "reflected":
            if self.boundary is None:
                raise InvalidParameterError("reflected kernel needs a boundary hyperplane")
            if abs(abs(self.plane.normal @ self.boundary.normal) - 1.0) > 1e-9:
                raise InvalidParameterError("reflection boundary must be parallel to H")

    def with_delta(self, delta):
        return KernelSpec(self.variant, delta, self.plane, self.boundary)

    def value_dim(self, ambient):
        return ambient

    def to_dict(self):
        out = {"variant": self.variant, "delta": self.delta}
        if self.plane is not None:
            out["plane"] = self.plane.to_dict()
        if self.boundary is not None:
            out["boundary"] = self.boundary.to_dict()
        return out


def truncated_kernel(diff, d, delta):
    """``K_delta(v) = v / max(delta, |v|)^(d+1)`` applied along the last axis."""
    diff = np.asarray(diff, dtype=np.float64)
    r = np.sqrt((diff * diff).sum(axis=-1))
    denom = np.maximum(delta, r)
    if delta == 0 and np.any(r == 0):
        raise SingularityError("untruncated kernel evaluated at (or underflowing to) zero separation")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = diff / (denom ** (d + 1))[..., None]
    # K_delta(0) = 0 even when delta^(d+1) underflows
    return np.where((r == 0)[..., None], 0.0, out)


def check_side(spec, x, name="point"):
    """Raise unless every point of ``x`` lies on the boundary's admissible side."""
    s = spec.boundary.signed_distance(x)
    if np.any(s < 0):
        raise DomainError(f"{name} lies on the wrong side of the reflection boundary")


def kernel_eval(spec, x, y):
    """Kernel value ``K_spec(x, y)`` for single points ``x, y`` in R^(d+1)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape or x.size < 2:
        raise InvalidParameterError("x and y must be points of the same dimension >= 2")
    d = x.size - 1
    if spec.variant == "full":
        return truncated_kernel(x - y, d, spec.delta)
    if spec.variant == "restricted":
        return spec.plane.project_vectors(truncated_kernel(x - y, d, spec.delta))
    check_side(spec, x, "x")
    check_side(spec, y, "y")
    return reflected_values(spec, x[None, None, :], y[None, None, :], d)[0, 0]


def reflected_values(spec, x, y, d):
    """Reflected kernel ``K^H(x-y) - K^H(x*-y)`` in a bit-exact antisymmetric form.

    ``K^H(x* - y) = K^H(x - y*)`` for a boundary parallel to ``H``; averaging
    the two makes swapping ``x`` and ``y`` negate the result exactly.
    """
    L = spec.boundary
    xs, ys = L.reflect(x), L.reflect(y)
    direct = truncated_kernel(x - y, d, spec.delta)
    image = truncated_kernel(xs - y, d, spec.delta) + truncated_kernel(x - ys, d, spec.delta)
    return spec.plane.project_vectors(direct - 0.5 * image)


def kernel_block(spec, targets, sources, d):
    """Kernel values for all target/source pairs, shape ``(M, N, d+1)``."""
    t = targets[:, None, :]
    s = sources[None, :, :]
    if spec.variant == "full":
        return truncated_kernel(t - s, d, spec.delta)
    if spec.variant == "restricted":
        return spec.plane.project_vectors(truncated_kernel(t - s, d, spec.delta))
    return reflected_values(spec, t, s, d)
