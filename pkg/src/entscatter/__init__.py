"""entscatter: entanglement of polarization Bell pairs after random
multi-mode scattering.

The package builds the reduced two-qubit density matrix of a scattered,
multi-mode-detected Bell pair from random-matrix ensembles of scattering
amplitudes, computes its concurrence / maximal CHSH value /
pseudo-concurrence, averages them by Monte Carlo as a function of the number
of detected modes N, and provides the analytic decay laws (exponential for
polarization-mixing disorder, algebraic for polarization-conserving
disorder) those averages follow.
"""

__version__ = "0.1.0"

from .asymptotics import (
    ALPHA_OPT_A,
    ALPHA_OPT_B,
    DECAY_CONSTANT_A,
    DECAY_CONSTANT_B,
    TWO_BEAM_RATE_EMPIRICAL,
    AsymptotePrediction,
    OptimalFluctuation,
    asymptote,
    decay_constant_A,
    decay_constant_B,
    exact_mean_concurrence_single_conserving,
    gaussian_fluctuation_mean_conserving_both,
    max_concurrence_over_unitaries,
    max_pseudo_concurrence_over_unitaries,
    rate_function,
)
from .ensembles import (
    GAUSSIAN_COMPONENT_VARIANCE,
    LAGUERRE_EXPONENT_C,
    RngStream,
    assemble_gram,
    gram,
    sample_amplitudes,
    sample_haar_unitary,
    sample_laguerre_eigenvalues,
)
from .errors import (
    ConfigError,
    ConvergenceFailure,
    DegenerateNormalization,
    DomainError,
    EntScatterError,
    InsufficientData,
    NotHermitian,
    NotPSD,
    NotSymmetric,
    OrderViolation,
    SingularInput,
)
from .montecarlo import (
    DecayFit,
    MCEstimate,
    Scenario,
    SweepRow,
    estimate,
    fit_decay,
    sweep,
)
from .qstate import (
    Measures,
    check_density_matrix,
    chsh_max,
    concurrence,
    concurrence_pol_closed_form,
    concurrence_pol_single_beam,
    correlation_matrix,
    measures,
    pseudo_concurrence,
    pseudo_from_chsh,
    rho_pol_conserving,
    rho_single_beam,
    rho_two_beam,
    unscattered_gram,
    wootters_sqrt_spectrum,
)
from .smallalg import (
    PAULIS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_YY,
    SIGMA_Z,
    HermitianEigen,
    hermitian_eigen,
    hermitian_sqrt,
    sym3_eigenvalues,
    unitarize,
)
