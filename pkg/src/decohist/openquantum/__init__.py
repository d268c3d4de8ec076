"""Open-system dynamics: Lindblad propagation, jump unraveling, relaxation."""

import numpy as np

from ..qops import lowering

from .lindblad import (
    DegenerateFixedPointError,
    IntegrationError,
    LindbladModel,
    channel_kraus,
    channel_superoperator,
    fixed_point,
    lindblad_rhs,
    liouvillian,
    propagate,
    relaxation_time,
    superoperator_to_kraus,
)
from .relaxation import (
    RelaxationReport,
    open_decoherence_matrix,
    relaxation_decoherence_experiment,
    stinespring_unitary,
)
from .thermal import (
    jump_rates,
    tail_weight,
    thermal_oscillator_model,
    thermal_state,
    truncation_for_tail,
)
from .unravel import (
    Dilation,
    EnsembleResult,
    JumpEvent,
    StepTooLargeError,
    Trajectory,
    averaged_step,
    dilate_to_projection,
    ensemble_average,
    iterate_averaged_step,
    jump_ensemble,
    jump_unravel,
    povm_feedback_step,
)


def qubit_damping(gamma=1.0, omega=0.0):
    """Amplitude damping |1> -> |0> at rate ``gamma``, optional H = omega |1><1|."""
    H = omega * np.diag([0.0, 1.0]).astype(complex)
    return LindbladModel(H, ((lowering(2), gamma),))
