"""Riesz kernels, operators and the treecode."""

from .kernels import Hyperplane, KernelSpec, kernel_block, kernel_eval, truncated_kernel
from .operators import (
    FieldSample, IsometryFit, Naive, OpNormEstimate, Tree, adjoint_apply,
    contracted_transform, dense_matrix, dense_op_norm, inner, op_norm,
    plane_isometry_constant, plane_multiplier, riesz_transform,
)
from .tree import KernelTree, rel_tol

__all__ = [
    "FieldSample", "Hyperplane", "IsometryFit", "KernelSpec", "KernelTree", "Naive",
    "OpNormEstimate", "Tree", "adjoint_apply", "contracted_transform", "dense_matrix",
    "dense_op_norm", "inner", "kernel_block", "kernel_eval", "op_norm",
    "plane_isometry_constant", "plane_multiplier", "rel_tol", "riesz_transform",
    "truncated_kernel",
]
