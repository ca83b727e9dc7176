"""Fixed-radius identification on masked templates.

The data owner extends each length-n template to n+5 slots (carrying the
squared norm, the squared radius, and padding), permutes the slots, splits
the result into two random diagonal parts, and hides each part inside a
sandwich of secret matrices. A query travels the inverse sandwich, so the
evaluator can recover exactly one number per stored record:

    I = alpha * beta * (||x - y||^2 - theta^2)

where alpha and beta are one-time positive scalars. Only the sign of I is
meaningful to the evaluator: I <= 0 means the record lies within radius
theta of the query. Everything else (distances, orderings, the templates
themselves) stays hidden behind the masks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matcore import (
    Permutation,
    check_finite,
    rand_invertible,
    rand_orthogonal,
    rand_unit_lower_triangular,
    trace_product,
)

EXTRA_SLOTS = 5


@dataclass(frozen=True)
class SystemParams:
    """Public system parameters: template length and matching radius."""

    n: int
    theta: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("template dimension n must be >= 1")
        if not np.isfinite(self.theta) or self.theta < 0:
            raise ValueError("radius theta must be finite and non-negative")

    @property
    def ext_dim(self) -> int:
        return self.n + EXTRA_SLOTS


def setup(n: int, theta: float) -> SystemParams:
    return SystemParams(n=n, theta=float(theta))


@dataclass(frozen=True)
class RandomnessConfig:
    """Toggles and bounds for the three kinds of one-time randomness.

    type1 are the result-disguising scalars alpha/beta (they survive into
    the evaluation result), type2 is the padding slot and the additive
    split of the permuted vector (cancels exactly), type3 are the
    unit-lower-triangular factors (cancel exactly). ``scalar_log_uniform``
    switches the alpha/beta draw from uniform to log-uniform over the same
    bounds, which spreads magnitudes evenly across decades.
    """

    type1_enabled: bool = True
    type2_enabled: bool = True
    type3_enabled: bool = True
    scalar_low: float = 1.0
    scalar_high: float = 1024.0
    pad_bound: float = 1024.0
    scalar_log_uniform: bool = False

    def __post_init__(self):
        if not 0.0 < self.scalar_low <= self.scalar_high:
            raise ValueError("scalar bounds must satisfy 0 < scalar_low <= scalar_high")
        if self.pad_bound <= 0:
            raise ValueError("pad_bound must be positive")

    def draw_scalar(self, rng: np.random.Generator) -> float:
        if not self.type1_enabled:
            return 1.0
        if self.scalar_log_uniform:
            return float(np.exp(rng.uniform(np.log(self.scalar_low), np.log(self.scalar_high))))
        return float(rng.uniform(self.scalar_low, self.scalar_high))

    def draw_pad(self, rng: np.random.Generator) -> float:
        if not self.type2_enabled:
            return 0.0
        return float(rng.uniform(-self.pad_bound, self.pad_bound))


@dataclass(frozen=True)
class SecretKey:
    """Masking key: two invertible matrices with stored inverses, one permutation."""

    m1: np.ndarray
    m2: np.ndarray
    m1_inv: np.ndarray
    m2_inv: np.ndarray
    pi: Permutation

    def __post_init__(self):
        dim = self.pi.size
        for name in ("m1", "m2", "m1_inv", "m2_inv"):
            a = check_finite(getattr(self, name), name)
            if a.shape != (dim, dim):
                raise ValueError(f"{name} has shape {a.shape}, expected {(dim, dim)}")
            object.__setattr__(self, name, a)

    @property
    def ext_dim(self) -> int:
        return self.pi.size


@dataclass(frozen=True)
class PlainTemplate:
    id: int
    features: np.ndarray

    def __post_init__(self):
        if not 0 <= int(self.id) < 2**64:
            raise ValueError("template id must fit in an unsigned 64-bit integer")
        f = check_finite(self.features, "features")
        if f.ndim != 1 or f.size < 1:
            raise ValueError("features must be a non-empty 1-d vector")
        object.__setattr__(self, "features", f)


@dataclass(frozen=True)
class EncryptedTemplate:
    id: int
    c_p: np.ndarray
    c_q: np.ndarray

    @property
    def ext_dim(self) -> int:
        return self.c_p.shape[0]


@dataclass(frozen=True)
class QueryToken:
    c_y: np.ndarray

    @property
    def ext_dim(self) -> int:
        return self.c_y.shape[0]


@dataclass(frozen=True)
class MatchResult:
    """Per-record decision; raw_value is filled only in debug/attack mode."""

    id: int
    matched: bool
    raw_value: float | None = None


@dataclass(frozen=True)
class TransformTrace:
    """Test-mode view of the one-time randomness consumed by a transform.

    Never serialized; exists so tests and attack harnesses can relate an
    observed evaluation value back to the scalars that produced it.
    """

    scalar: float
    pad: float
    extended: np.ndarray


def keygen(
    params: SystemParams,
    rng: np.random.Generator,
    mask_style: str = "orthogonal",
    min_rcond: float = 1e-6,
) -> SecretKey:
    """Generate the masking key for ``params``.

    ``mask_style="orthogonal"`` (default) draws Haar-random orthogonal
    masks whose inverses are exact transposes; this keeps the trace
    cancellation numerically clean at any template length. ``"uniform"``
    draws dense uniform [-1, 1] masks conditioned by rejection; fine for
    short templates but the extra condition number costs several digits of
    evaluation accuracy at large n.
    """
    dim = params.ext_dim
    if mask_style == "orthogonal":
        m1, m1_inv = rand_orthogonal(dim, rng)
        m2, m2_inv = rand_orthogonal(dim, rng)
    elif mask_style == "uniform":
        m1, m1_inv = rand_invertible(dim, rng, min_rcond=min_rcond)
        m2, m2_inv = rand_invertible(dim, rng, min_rcond=min_rcond)
    else:
        raise ValueError(f"unknown mask_style {mask_style!r}")
    return SecretKey(m1=m1, m2=m2, m1_inv=m1_inv, m2_inv=m2_inv, pi=Permutation.random(dim, rng))


def extend_enroll(x: np.ndarray, theta: float, beta: float, r_x: float) -> np.ndarray:
    """Extend an enrolled template to n+5 slots:

    (-2*beta*x_1, ..., -2*beta*x_n, beta*sum(x^2), beta, -beta*theta^2, r_x, 0)
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    x = check_finite(x, "template")
    tail = [beta * float(np.dot(x, x)), beta, -beta * float(theta) ** 2, r_x, 0.0]
    return np.concatenate([-2.0 * beta * x, tail])


def extend_query(y: np.ndarray, alpha: float, r_y: float) -> np.ndarray:
    """Extend a query template to n+5 slots:

    (alpha*y_1, ..., alpha*y_n, alpha, alpha*sum(y^2), alpha, 0, r_y)

    The two padding slots are position-disjoint from the enrolled side, so
    r_x and r_y never multiply anything but zero.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    y = check_finite(y, "template")
    tail = [alpha, alpha * float(np.dot(y, y)), alpha, 0.0, r_y]
    return np.concatenate([alpha * y, tail])


def split_exact(v: np.ndarray, noise: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split v into (p, q) with p + q == v exact entrywise and p ~ noise.

    q = v - p alone does not guarantee exact reconstruction in floats, so p
    is refitted once against the rounded q; entries that still disagree
    fall back to the trivial split p = 0, q = v.
    """
    q = v - noise
    p = v - q
    bad = p + q != v
    if np.any(bad):
        p[bad] = 0.0
        q[bad] = v[bad]
    return p, q


def _mask_enroll(sk: SecretKey, diag: np.ndarray, s: np.ndarray) -> np.ndarray:
    # M1 @ S @ diag(d) @ M2, with the diagonal factor folded into S columnwise.
    return sk.m1 @ (s * diag[None, :]) @ sk.m2


def transform(
    sk: SecretKey,
    params: SystemParams,
    template: PlainTemplate,
    rng: np.random.Generator,
    cfg: RandomnessConfig = RandomnessConfig(),
    with_trace: bool = False,
):
    """Mask one enrolled template into the ciphertext pair (C_p, C_q)."""
    if template.features.size != params.n:
        raise ValueError(
            f"template {template.id} has length {template.features.size}, expected {params.n}"
        )
    dim = params.ext_dim
    if sk.ext_dim != dim:
        raise ValueError(f"key dimension {sk.ext_dim} does not match params {dim}")

    beta = cfg.draw_scalar(rng)
    r_x = cfg.draw_pad(rng)
    extended = extend_enroll(template.features, params.theta, beta, r_x)
    permuted = sk.pi.apply(extended)

    if cfg.type2_enabled:
        p, q = split_exact(permuted, rng.uniform(-cfg.pad_bound, cfg.pad_bound, dim))
    else:
        p, q = permuted, np.zeros(dim)
    if cfg.type3_enabled:
        s_p = rand_unit_lower_triangular(dim, rng)
        s_q = rand_unit_lower_triangular(dim, rng)
    else:
        s_p = s_q = np.eye(dim)

    ct = EncryptedTemplate(
        id=template.id,
        c_p=_mask_enroll(sk, p, s_p),
        c_q=_mask_enroll(sk, q, s_q),
    )
    if with_trace:
        return ct, TransformTrace(scalar=beta, pad=r_x, extended=extended)
    return ct


def token_gen(
    sk: SecretKey,
    params: SystemParams,
    query: PlainTemplate,
    rng: np.random.Generator,
    cfg: RandomnessConfig = RandomnessConfig(),
    with_trace: bool = False,
):
    """Mask one query template into a single-use token C_y."""
    if query.features.size != params.n:
        raise ValueError(f"query has length {query.features.size}, expected {params.n}")
    dim = params.ext_dim
    if sk.ext_dim != dim:
        raise ValueError(f"key dimension {sk.ext_dim} does not match params {dim}")

    alpha = cfg.draw_scalar(rng)
    r_y = cfg.draw_pad(rng)
    extended = extend_query(query.features, alpha, r_y)
    permuted = sk.pi.apply(extended)
    if cfg.type3_enabled:
        s_y = rand_unit_lower_triangular(dim, rng)
    else:
        s_y = np.eye(dim)

    # M2^-1 @ diag(y'') @ S_y @ M1^-1, diagonal folded into S rowwise.
    tok = QueryToken(c_y=sk.m2_inv @ (permuted[:, None] * s_y) @ sk.m1_inv)
    if with_trace:
        return tok, TransformTrace(scalar=alpha, pad=r_y, extended=extended)
    return tok


def evaluate(ct: EncryptedTemplate, tok: QueryToken, debug: bool = False) -> MatchResult:
    """Decide whether the record behind ``ct`` lies within the query radius.

    I = Tr(C_p C_y) + Tr(C_q C_y), computed through the quadratic trace
    kernel; the record matches iff I <= 0 (the exact boundary counts as a
    match). The raw value is only surfaced when ``debug`` is set.
    """
    value = trace_product(ct.c_p, tok.c_y) + trace_product(ct.c_q, tok.c_y)
    return MatchResult(id=ct.id, matched=value <= 0.0, raw_value=value if debug else None)


def identify(db, tok: QueryToken, debug: bool = False) -> list[MatchResult]:
    """Linear scan: every record within the radius, in storage order."""
    matches = []
    for ct in db:
        if ct.ext_dim != tok.ext_dim:
            raise ValueError(
                f"record {ct.id}: dimension {ct.ext_dim} does not match token {tok.ext_dim}"
            )
        res = evaluate(ct, tok, debug=debug)
        if res.matched:
            matches.append(res)
    return matches
