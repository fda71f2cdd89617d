"""Nilpotent constants of motion, flow polynomials and matrix Calogero-Moser reductions."""

from .errors import (
    CoordinateMismatchError,
    DimensionMismatchError,
    NilflowError,
    NotNilpotentError,
    SingularityError,
    SpecError,
    UnknownCoordinateError,
)
from .linear import (
    RationalMatrix,
    commutant,
    commutant_chain,
    jordan_chevalley,
    linear_vector_field,
    nilpotent_matrix_flow,
)
from .nilpotent import (
    compute_tower,
    filtration_basis,
    flow_polynomial,
    strict_integrability_report,
)
from .poly import Polynomial, VectorField, dilation, lie_bracket, lie_derivative, variables

__version__ = "0.1.0"
