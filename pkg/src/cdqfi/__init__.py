"""Counter-diabatic control synthesis maximizing quantum Fisher information.

A dual-branch feed-forward network emits a constrained scheduling function
and the Pauli-string coefficients of an adiabatic gauge potential; windowed
Magnus propagation drives the dynamics, and a physics-informed loss trains
the protocol toward the metrological bound.
"""

__version__ = "0.1.0"

from .config import RunConfig
from .magnus import TimeGrid, WindowPlan
from .metrics import MetricsReport
from .models import ModelSpec
from .pauli import (
    OperatorBasis,
    OperatorCoeffs,
    PauliTerm,
    build_basis,
    commutator_in_basis,
    el_residual_coeffs,
    letter_product,
    to_dense,
)
from .physloss import LossWeights

__all__ = [
    "LossWeights",
    "MetricsReport",
    "ModelSpec",
    "OperatorBasis",
    "OperatorCoeffs",
    "PauliTerm",
    "RunConfig",
    "TimeGrid",
    "WindowPlan",
    "build_basis",
    "commutator_in_basis",
    "el_residual_coeffs",
    "letter_product",
    "to_dense",
    "__version__",
]
