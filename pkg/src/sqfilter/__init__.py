"""Quantum filtering for homodyne detection with squeezed (quasi-free) input noise."""

from .bogoliubov import (
    BalancedCoeffs,
    TwoModeCoeffs,
    balanced_from_bv,
    balanced_from_hkkr,
    balanced_from_nm,
    correlations,
    invert,
    lift_balanced,
    marginals,
    verify_bogoliubov,
)
from .errors import (
    ConfigError,
    DegeneratePhaseError,
    DomainError,
    NearMaximalWarning,
    SingularParametrizationError,
    SingularTransferError,
    SqfilterError,
    StepFailure,
    ValidationError,
)
from .filtering import (
    FilterState,
    Trajectory,
    kushner_step,
    run_kushner_ensemble,
    run_zakai_ensemble,
    simulate_trajectory,
    simulate_zakai_reference,
    tilde_L,
    zakai_step,
)
from .config import RunConfig, default_config, load_config
from .gaussian import SqueezingParams, classify, quadrature_variance
from .quadrature import TransferCoeffs, independent_phase, transfer_for, transfer_matrix
from .system import SystemModel, lindblad_heisenberg, lindblad_schrodinger, master_equation_evolve

__version__ = "0.1.0"
