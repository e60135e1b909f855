"""Communication-efficient one-shot distributed sparse regression.

Local l1-penalized fits are debiased with estimated precision-matrix
rows, averaged across shards in one or two communication rounds, and
sparsified by thresholding. The package also ships the solver, the
synthetic benchmark generator, and a CLI (``distlasso``) that drives
the simulation studies.
"""

from .core import (
    CovarianceSpec,
    Dataset,
    ErrorReport,
    GroundTruth,
    empirical_covariance,
    error_norms,
    generalized_coherence,
    norm_inf_l,
)
from .debias import (
    BiasDiagnostics,
    DebiasedEstimate,
    PrecisionEstimate,
    debias,
    decompose_error,
    precision_jm,
    precision_nodewise,
)
from .distributed import (
    AggregateEstimate,
    CommLedger,
    Shard,
    averaged_debiased,
    distributed_debias,
    naive_average,
    split,
)
from .errors import (
    DegenerateColumnError,
    DistLassoError,
    InfeasibleRowError,
    InvalidCovarianceError,
    InvalidInputError,
    InvalidLossError,
    NonConvergenceError,
)
from .glm import (
    LossModel,
    WeightedDesign,
    average_glm,
    logistic_loss,
    solve_l1_mestimator,
    squared_loss,
    weighted_design,
)
from .qls import (
    LassoFit,
    SolverConfig,
    kkt_residual,
    solve_lasso,
    solve_penalized_quadratic,
)
from .synth import SynthConfig, gen_design, gen_response, gen_sparse_beta, make_dataset
from .threshold import (
    ThresholdRule,
    empirical_sparsity,
    hard_threshold,
    soft_threshold,
    topk_threshold,
)

__version__ = "0.1.0"
