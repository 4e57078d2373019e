"""Optimal phase-covariant cloning and phase-conjugation channels for equatorial qudits."""
from .channels import (
    ChoiOperator,
    Direction,
    Isometry,
    apply_channel,
    check_covariance,
    choi_from_isometry,
    cloning_isometry,
    conjugation_isometry,
    economical_completion,
    reduced_single_site,
    shrink_factor,
)
from .fidelity import f_clone_single, f_conj_single, f_estimation
from .states import DensityMatrix, PhaseVector, SymState, equatorial_state, n_fold_equatorial

__version__ = "0.1.0"
