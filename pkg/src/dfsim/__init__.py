"""dfsim: a two-spin NMR register simulator for decoherence-free-subspace
storage and universal encoded control under engineered and natural noise."""

from .channels import (
    KrausChannel,
    coherence_decay_factors,
    collective_dephasing,
    ensemble_channel,
    identity_channel,
    natural_relaxation_step,
    unitary_channel,
)
from .ensemble import (
    EnsembleSpec,
    GradientWaveform,
    ensemble_propagators,
    evolve_ensemble,
    gradient_diffusion_echo,
    member_positions,
    random_walk_waveform,
)
from .errors import ConfigError, DfsimError, NumericalContractError
from .experiments import ExperimentConfig, config_from_dict, fit_decay, run
from .hamiltonians import (
    RfParams,
    SpinSystem,
    gradient_hamiltonian,
    internal_hamiltonian,
    logical_decompose,
    rf_hamiltonian,
)
from .metrics import (
    FidelityReport,
    coherence_metric,
    entanglement_fidelity,
    gate_fidelity_from_states,
    induced_data_channel,
    pauli_expectations,
    process_tomography,
    state_tomography,
)
from .operators import (
    LogicalFrame,
    basis_ket,
    coherence_order,
    decoding_unitary,
    encoding_unitary,
    expm_hermitian,
    is_dfs_preserving,
    logical_frame,
    pauli_embed,
    zq_projectors,
)
from .pulses import (
    Delay,
    IdealRotation,
    PulseSequence,
    RfPulse,
    average_hamiltonian,
    build_sequence,
    composite_y90,
    dfs_residence_fraction,
    enc_x,
    enc_z,
    encoded_cp_train,
    propagator,
    sequence_from_text,
    sequence_to_text,
    toggling_frames,
    xx_train,
    xy_train,
)

__version__ = "0.1.0"
