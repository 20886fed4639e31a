"""Completely positive quantum stochastic cocycles over matrix algebras.

Validate stochastic form-generators (conditional complete positivity via the
dissipation kernel), dilate them to flow-equation coefficients and metric
representations, and integrate coherent matrix elements of the flow with
four mutually cross-checking solvers.
"""

from .dilation import (
    HPParams,
    NotCompletelyPositive,
    PreHilbertDilation,
    PseudoDilation,
    ResidualTooLarge,
    build_pre_hilbert,
    build_pseudo_dilation,
    extract_hp_params,
    kraus_from_exchange_block,
)
from .generator import (
    Dissipator,
    FormGenerator,
    assemble_from_hp,
    build_dissipator,
    check_conditionally_cp,
    sample_conditional_positivity,
    semigroup_generator,
)
from .ito import (
    IndexSet,
    PseudoMetric,
    StructureMatrix,
    flat,
    ito_product,
    metric_roundtrip,
    verify_ito_table,
)
from .kernels import BACKEND as KERNEL_BACKEND
from .linalg import SuperOperator
from .sim import (
    CoherentFunction,
    GridMismatch,
    MatrixElementTrace,
    ToyFockModel,
    VectorCocycleTrace,
    cocycle_residual,
    coherent_form_ode,
    gram_positivity_check,
    martingale_check,
    picard_solve,
    run_solver,
    semigroup_expm,
    semigroup_trace,
    simulate_transfer,
    vector_cocycle,
)

__version__ = "0.1.0"

__all__ = [
    "CoherentFunction",
    "Dissipator",
    "FormGenerator",
    "GridMismatch",
    "HPParams",
    "IndexSet",
    "KERNEL_BACKEND",
    "MatrixElementTrace",
    "NotCompletelyPositive",
    "PreHilbertDilation",
    "PseudoDilation",
    "PseudoMetric",
    "ResidualTooLarge",
    "StructureMatrix",
    "SuperOperator",
    "ToyFockModel",
    "VectorCocycleTrace",
    "assemble_from_hp",
    "build_dissipator",
    "build_pre_hilbert",
    "build_pseudo_dilation",
    "check_conditionally_cp",
    "cocycle_residual",
    "coherent_form_ode",
    "extract_hp_params",
    "flat",
    "gram_positivity_check",
    "ito_product",
    "kraus_from_exchange_block",
    "martingale_check",
    "metric_roundtrip",
    "picard_solve",
    "run_solver",
    "sample_conditional_positivity",
    "semigroup_expm",
    "semigroup_generator",
    "semigroup_trace",
    "simulate_transfer",
    "vector_cocycle",
    "verify_ito_table",
]
