"""Grey-box polynomial NARX structure selection with multi-objective evolutionary search."""

from .decision import PreferenceSpec, mmd_select, mtd_select, priority_weights
from .errors import (
    ArchiveTooSmall,
    ConfigError,
    DataError,
    DegenerateStaticGain,
    Diverged,
    IdentificationError,
    NotStaticPolynomial,
    NumericalError,
    RankDeficient,
    SeriesTooShort,
    SplitTooSmall,
)
from .estimation import (
    PENALTY,
    DatasetBundle,
    Evaluator,
    IOSeries,
    ObjectiveVector,
    StaticCurve,
    dynamic_error,
    estimate,
    evaluate,
    free_run,
    static_error,
)
from .model import (
    ClusterLabel,
    ModelStructure,
    PoolConfig,
    TermPool,
    TermSpec,
    buck_static_reference,
    cluster_coefficients,
    eval_static,
    generate_term_pool,
    prune_pool,
    prune_to_linear,
    static_polynomial,
    term,
    term_count,
)
from .validation import residuals, validity_tests

__version__ = "0.1.0"
