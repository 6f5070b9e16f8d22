"""Multi-time Markov renewal chains.

Matrix-sequence convolution algebra with an FFT fast path, four
convolutional-inversion routes, semi-Markov kernel analysis through
renewal equations and ergodic moment formulas, and a seeded Monte Carlo
simulator that serves as an independent cross-check.
"""

from .convolution import (
    convolve,
    convolve_direct,
    convolve_fft,
    dft,
    idft,
    nfold,
)
from .errors import (
    ArgumentError,
    DimensionMismatchError,
    IrreducibilityError,
    KernelValidationError,
    MtmrcError,
    NotInvertibleError,
    NumericalError,
)
from .inversion import (
    ElementaryOp,
    GaussFactorization,
    apply_elementary,
    elementary_seq,
    inverse,
    inverse_gauss_jordan,
    inverse_newton,
    inverse_recurrence,
    inverse_series,
)
from .kernel import (
    ParametricKernelSpec,
    SemiMarkovKernel,
    SojournDistributions,
    bivariate_poisson_pmf,
    build_bpoisson_kernel,
    coordinate_product,
    coordinate_projection,
    cumulated_kernel,
    embedded_chain,
    kernel_from_dict,
    kernel_to_dict,
    load_kernel,
    marginal_kernel,
    phi_kernel,
    save_kernel,
    sojourn_distributions,
    survival_kernel,
    total_time,
    validate_kernel,
)
from .renewal import (
    MrcAnalysis,
    MreProblem,
    RecurrenceMoments,
    SojournMoments,
    analyze,
    first_hitting,
    first_passage_means,
    markov_renewal_function,
    product_moment_survival,
    recover_kernel,
    recurrence_cross_moments,
    renewal_u,
    smc_transition,
    sojourn_moments,
    sojourn_moments_closed_form,
    solve_mre,
    stationary_distribution,
)
from .seqcore import (
    Grid,
    MatrixSeq,
    add,
    cumulative,
    embed,
    load_seq,
    make_identity,
    make_ones_diag,
    real_seq,
    restrict,
    save_seq,
    scale,
    seq_from_dict,
    seq_to_dict,
    sub,
    zeros_seq,
)
from .simulate import (
    CountingSnapshot,
    EstimatorReport,
    PathSample,
    Target,
    counting,
    estimate,
    estimate_many,
    sample_path,
)

__version__ = "0.1.0"
