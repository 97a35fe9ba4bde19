"""Structure invariants of coframes, classifying Lie algebroids and their realizations."""

from .algebroid import (Certificate, FlatAlgebroid, anchor_morphism_residual, certify, isotropy_at,
                        jacobi_residual, same_orbit)
from .coframe import (Coframe, derive_classifying_algebroid, invariant_tower, structure_functions,
                      verify_classifying_data)
from .gstruct import GRealizationData, build_gstructure_algebroid, verify_g_realization
from .liealg import MatrixLieAlgebra, classify_3d, killing_form, make_algebra, preset, prolongation_tower
from .mcform import AValuedOneForm, Connection, mc_check, mc_residual
from .realize import RealizationCandidate, realize_bundle_fiber, verify_realization_numeric
from .symexpr import Chart, Expr, parse_expr

__version__ = "0.1.0"

__all__ = [
    "Certificate", "FlatAlgebroid", "anchor_morphism_residual", "certify", "isotropy_at", "jacobi_residual",
    "same_orbit", "Coframe", "derive_classifying_algebroid", "invariant_tower", "structure_functions",
    "verify_classifying_data", "GRealizationData", "build_gstructure_algebroid", "verify_g_realization",
    "MatrixLieAlgebra", "classify_3d", "killing_form", "make_algebra", "preset", "prolongation_tower",
    "AValuedOneForm", "Connection", "mc_check", "mc_residual", "RealizationCandidate", "realize_bundle_fiber",
    "verify_realization_numeric", "Chart", "Expr", "parse_expr",
]
