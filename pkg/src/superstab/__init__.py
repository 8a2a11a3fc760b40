"""superstab: constructive superstability analysis for f(xy) = f(y)^g(x).

Reconstructs the exact solution hiding behind approximately exponential
data on a commutative semigroup via an anchored contraction iteration,
certifies the contraction and error bounds at runtime, and ships the
classical residual baselines alongside.
"""

from .baselines import (
    SandwichCheck,
    baker_residual,
    ger_residual,
    jung_alpha,
    jung_alpha_terms,
    jung_sandwich,
)
from .engine import (
    ContractionCertificate,
    IterationTrace,
    LogFunction,
    apply_contraction,
    contraction_probe,
    generalized_distance,
    iterate_fixed_point,
    verify_unique_limit,
)
from .errors import (
    AnchorError,
    CoverageError,
    DomainMismatchError,
    OrbitRangeError,
    PipelineStageError,
    SeriesDivergenceError,
    SuperstabError,
)
from .instance import (
    BoundedSin,
    ConstantBound,
    ExactExponential,
    IdentityMap,
    Instance,
    LinearForm,
    MultiplicativeForm,
    Perturbed,
    SeparableBound,
    TableBound,
    TableExponent,
    TableFunction,
    ValidationReport,
    anchor_candidates,
    eval_g,
    eval_log_f,
    eval_psi,
    instance_from_obj,
    validate_instance,
)
from .pipeline import (
    BoundCheck,
    GClassification,
    LimitFunction,
    PipelineConfig,
    TheoremReport,
    Verdict,
    check_anchor_independence,
    check_conclusion,
    check_partial_bound,
    classify_g,
    final_error_bound,
    run_superstability,
)
from .semigroup import (
    FREE_MONOID,
    POS_REAL,
    Element,
    SemigroupDescriptor,
    canonical_key,
    combine,
    orbit_elements,
    power,
)

__version__ = "0.1.0"
