"""Ground states of the sub-ohmic spin-boson model without Fock truncation.

The bath is mapped onto a bosonic chain and the ground state is searched
within a matrix product ansatz whose site tensors are matrices raised to the
occupation number, so arbitrarily high Fock states contribute with factorial
damping.  Energies, gradients, and observables all reduce to products of
chi^2-sized transfer matrices.
"""

__version__ = "0.1.0"

from .model import (
    LINEAR,
    LOGARITHMIC,
    ChainCoefficients,
    LogChainInputs,
    SbmParams,
    impurity_coupling,
    linear_chain_coefficients,
    log_chain_coefficients,
    q_lattice_log_provider,
    spectral_density,
)
from .state import (
    COMPLEX,
    DISPLACEMENT,
    HOP_LEFT,
    HOP_RIGHT,
    OCCUPATION,
    REAL,
    MpsState,
    NormUnderflowError,
    ScaleOverflowError,
    SiteInsertion,
    SPIN_IDENTITY,
    SPIN_SIGMA_X,
    SPIN_SIGMA_Z,
    StateFormatError,
    coefficient,
    fock_pair,
    matrix_element,
    norm_sq,
    spin_transfer,
    transfer_product,
)
from .energy import (
    EnergyBreakdown,
    energy,
    energy_and_gradient,
    energy_gradient,
    pack,
    unpack,
)
from .optimize import (
    AllRestartsFailedError,
    GroundState,
    MinimizeResult,
    OptimizerOptions,
    ground_state,
    minimize,
)
from .observables import (
    ObservableSet,
    RdmTailError,
    SpinBlock,
    observable_set,
    occupations,
    site_rdm,
    spin_block,
    von_neumann_entropy,
)
from .criticality import (
    BracketError,
    DetectionResult,
    FitResult,
    SweepPoint,
    SweepResult,
    bisect_threshold,
    build_chain,
    detect_alpha_c,
    extrapolate_alpha_c,
    fit_critical_exponent,
    polaron_alpha_c,
    sweep_alpha,
)
from .oracle import (
    AmplitudeBudgetError,
    BoundaryWeightError,
    DenseState,
    DiagonalizationBudgetError,
    dense_coefficients,
    dense_expectation,
    exact_ground_state,
    run_equivalence_suite,
)

__all__ = [
    "__version__",
    # model
    "LINEAR",
    "LOGARITHMIC",
    "ChainCoefficients",
    "LogChainInputs",
    "SbmParams",
    "impurity_coupling",
    "linear_chain_coefficients",
    "log_chain_coefficients",
    "q_lattice_log_provider",
    "spectral_density",
    # state
    "COMPLEX",
    "REAL",
    "MpsState",
    "SiteInsertion",
    "OCCUPATION",
    "DISPLACEMENT",
    "HOP_LEFT",
    "HOP_RIGHT",
    "SPIN_IDENTITY",
    "SPIN_SIGMA_X",
    "SPIN_SIGMA_Z",
    "NormUnderflowError",
    "ScaleOverflowError",
    "StateFormatError",
    "coefficient",
    "fock_pair",
    "matrix_element",
    "norm_sq",
    "spin_transfer",
    "transfer_product",
    # energy
    "EnergyBreakdown",
    "energy",
    "energy_and_gradient",
    "energy_gradient",
    "pack",
    "unpack",
    # optimizer
    "AllRestartsFailedError",
    "GroundState",
    "MinimizeResult",
    "OptimizerOptions",
    "ground_state",
    "minimize",
    # observables
    "ObservableSet",
    "RdmTailError",
    "SpinBlock",
    "observable_set",
    "occupations",
    "site_rdm",
    "spin_block",
    "von_neumann_entropy",
    # criticality
    "BracketError",
    "DetectionResult",
    "FitResult",
    "SweepPoint",
    "SweepResult",
    "bisect_threshold",
    "build_chain",
    "detect_alpha_c",
    "extrapolate_alpha_c",
    "fit_critical_exponent",
    "polaron_alpha_c",
    "sweep_alpha",
    # oracle
    "AmplitudeBudgetError",
    "BoundaryWeightError",
    "DenseState",
    "DiagonalizationBudgetError",
    "dense_coefficients",
    "dense_expectation",
    "exact_ground_state",
    "run_equivalence_suite",
]
