"""Fixed-radius biometric identification on matrix-masked templates."""

from .matcore import (
    ConditioningError,
    Permutation,
    apply_permutation,
    rand_invertible,
    rand_orthogonal,
    rand_unit_lower_triangular,
    trace_product,
)
from .scheme import (
    EncryptedTemplate,
    MatchResult,
    PlainTemplate,
    QueryToken,
    RandomnessConfig,
    SecretKey,
    SystemParams,
    TransformTrace,
    evaluate,
    extend_enroll,
    extend_query,
    identify,
    keygen,
    setup,
    token_gen,
    transform,
)

__all__ = [
    "ConditioningError",
    "EncryptedTemplate",
    "MatchResult",
    "Permutation",
    "PlainTemplate",
    "QueryToken",
    "RandomnessConfig",
    "SecretKey",
    "SystemParams",
    "TransformTrace",
    "apply_permutation",
    "evaluate",
    "extend_enroll",
    "extend_query",
    "identify",
    "keygen",
    "rand_invertible",
    "rand_orthogonal",
    "rand_unit_lower_triangular",
    "setup",
    "token_gen",
    "trace_product",
    "transform",
]

__version__ = "0.1.0"
