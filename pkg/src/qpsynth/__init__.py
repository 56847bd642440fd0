"""qpsynth: sparse probabilistic synthesis of quantum operations.

Builds libraries of natively implementable gates (Clifford+T words,
discrete-angle grids, optimized control pulses), expresses a desired
operation as the minimal-L1 solution of the resulting underdetermined
linear system via a homotopy path solver, and realizes the solution as an
unbiased sign-weighted sampling scheme with certified variance bounds.
"""

from ._accel import ACTIVE_BACKEND, NUMBA_ENABLED
from .design import (
    DesignProblem,
    build_band_selective,
    build_broadband,
    build_single_target,
    diagnostics,
    matrix_from_binary,
    matrix_to_binary,
)
from .errors import (
    DimensionMismatchError,
    EmptyLibraryError,
    ExactSolutionUnavailableError,
    InvalidStateError,
    L1NotAttainedError,
    QpsynthError,
    UnitarityError,
)
from .libraries import (
    GateLibrary,
    LibraryEntry,
    append_clifford_recovery,
    build_pulse_library,
    clifford_group_1q,
    clifford_recovery_library,
    clifford_recovery_words,
    clifford_words_1q,
    enumerate_clifford_t,
    pai_library,
    word_to_ptm,
)
from .ptm import (
    PauliObservable,
    PauliTransferMatrix,
    apply_to_state,
    compose,
    hs_distance,
    identity_ptm,
    pauli_strings,
    ptm_from_unitary,
    rotation_gate,
    rotation_unitary,
    unitary_from_ptm,
)
from .pulses import (
    PulseOptimizationResult,
    PulseSequence,
    optimize_pulse,
    phase_shift_pulse,
    propagate_pulse,
    pulse_unitary,
)
from .sampler import (
    EstimatorResult,
    NmrSignalEstimate,
    QuasiprobabilityScheme,
    estimate_expectation,
    nmr_estimate_signal,
    nmr_ideal_signal,
    sample_gate,
    scheme_from_coeffs,
    shot_bound,
)
from .solver import (
    IncrementalQR,
    Solution,
    SolutionPath,
    exact_solution,
    interpolate_solutions,
    kkt_report,
    solution_at_l1,
    solve_path,
    tradeoff_curve,
)

__version__ = "0.1.0"
