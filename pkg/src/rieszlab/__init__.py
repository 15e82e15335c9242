"""Executable diagnostics for discrete d-dimensional measures in R^(d+1).

Lattices of nested cells, truncated Riesz transforms, flatness and
non-BAUP tests, and Carleson packing of cell families.
"""

from .baup import baup_test, eligible_cells, nonbaup_family, rarefy
from .carleson import (
    CarlesonReport, CellFamily, LayerStack, Refusal, alternating_layers, bessel_check,
    carleson_constant, non_carleson_layers, xi_statistic,
)
from .estimators import BaupDetector, DavidSemmesLattice, FlatnessEstimator, RieszOperator
from .exceptions import (
    ConstructionInvariantError, DegenerateInputError, DomainError, InvalidParameterError,
    NotFittedError, ResourceLimitError, RieszLabError, ScaleWindowError, SingularityError,
)
from .flatness import (
    FlatnessQuery, analytic_defect, annular_riesz, best_plane, cell_approx, flat_predicate,
    flatness_report, geometric_defect,
)
from .lattice import Lattice, boundary_mass, build_lattice, certify, small_boundary_profile
from .measure import (
    DiscreteMeasure, ad_regularity, ball_mass, blow_up, gen_cantor, gen_hyperplane,
    gen_lipschitz_graph, load_csv, save_csv, translate,
)
from .riesz import Hyperplane, KernelSpec, Naive, Tree, op_norm, riesz_transform

__version__ = "0.1.0"

__all__ = [
    "BaupDetector", "CarlesonReport", "CellFamily", "ConstructionInvariantError",
    "DavidSemmesLattice", "DegenerateInputError", "DiscreteMeasure", "DomainError",
    "FlatnessEstimator", "FlatnessQuery", "Hyperplane", "InvalidParameterError", "KernelSpec",
    "Lattice", "LayerStack", "Naive", "NotFittedError", "Refusal", "ResourceLimitError",
    "RieszLabError", "RieszOperator", "ScaleWindowError", "SingularityError", "Tree",
    "ad_regularity", "alternating_layers", "analytic_defect", "annular_riesz", "ball_mass",
    "baup_test", "bessel_check", "best_plane", "blow_up", "boundary_mass", "build_lattice",
    "carleson_constant", "cell_approx", "certify", "eligible_cells", "flat_predicate",
    "flatness_report", "gen_cantor", "gen_hyperplane", "gen_lipschitz_graph",
    "geometric_defect", "load_csv", "non_carleson_layers", "nonbaup_family", "op_norm",
    "rarefy", "riesz_transform", "save_csv", "small_boundary_profile", "translate",
    "xi_statistic",
]
