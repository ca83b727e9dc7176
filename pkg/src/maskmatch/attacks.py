"""Adversary harnesses against the masking scheme.

Three experiments, each phrased as an oracle the adversary may query:

* enrollment attack: the adversary injects chosen templates into the
  database and watches the raw evaluation values of a hidden query against
  them, then solves for the query entries. Succeeds exactly when the
  result-disguising scalars are disabled.
* distinguishability game: the adversary picks two candidate queries,
  observes some chosen-plaintext tokens for calibration, then has to tell
  which candidate a fresh token encodes. Ships with a small battery of
  magnitude heuristics; none of them should beat coin flipping against the
  full scheme.
* leakage rank test: with many enrolled records, how much of the distance
  ORDER can a debug-mode evaluator reconstruct from |I| alone?

These are statistical checks, not proofs: a passing battery is evidence
that the masking hides what it claims to hide, and the deliberately
weakened configurations demonstrate which randomness carries which defense.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .scheme import (
    PlainTemplate,
    QueryToken,
    RandomnessConfig,
    SecretKey,
    SystemParams,
    evaluate,
    keygen,
    token_gen,
    transform,
)


@dataclass
class AttackTranscript:
    """What the enrollment adversary saw and what it reconstructed."""

    injected: list[tuple[PlainTemplate, float]]
    query_truth: np.ndarray | None
    recovered: np.ndarray


@dataclass(frozen=True)
class GameResult:
    trials: int
    successes: int

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    @property
    def ci95_halfwidth(self) -> float:
        return 1.96 * (0.25 / self.trials) ** 0.5


class EnrollmentOracle:
    """Data owner plus a debug-mode evaluator, from the adversary's seat.

    The oracle holds the secret key and a hidden query template. The
    adversary submits templates for enrollment and receives the raw
    evaluation value of the hidden query's token against each one.
    """

    def __init__(
        self,
        params: SystemParams,
        hidden_query: np.ndarray,
        rng: np.random.Generator,
        cfg: RandomnessConfig = RandomnessConfig(),
        sk: SecretKey | None = None,
    ):
        self.params = params
        self.cfg = cfg
        self._rng = rng
        self._sk = sk if sk is not None else keygen(params, rng)
        self._hidden = np.asarray(hidden_query, dtype=np.float64)
        if self._hidden.size != params.n:
            raise ValueError(f"hidden query has length {self._hidden.size}, expected {params.n}")
        self._token = token_gen(self._sk, params, PlainTemplate(0, self._hidden), rng, cfg)

    @property
    def query_truth(self) -> np.ndarray:
        return self._hidden

    def evaluations(self, templates: Sequence[np.ndarray]) -> list[float]:
        """Enroll each injected template; reveal the raw evaluation values."""
        values = []
        for i, feats in enumerate(templates):
            ct = transform(self._sk, self.params, PlainTemplate(i, feats), self._rng, self.cfg)
            values.append(evaluate(ct, self._token, debug=True).raw_value)
        return values


def enrollment_attack(oracle: EnrollmentOracle, delta: float = 1.0) -> AttackTranscript:
    """Inject the origin plus delta-scaled unit vectors and solve for the query.

    With I_i the value observed for the i-th unit probe and I_0 for the
    origin, each query entry satisfies y_i = (delta^2 - (I_i - I_0)) / (2 delta)
    whenever the per-record and per-query scalars are all 1. With the
    scalars enabled, every observation carries its own unknown factor and
    the same formula returns garbage.
    """
    if delta <= 0:
        raise ValueError("probe spacing delta must be positive")
    n = oracle.params.n
    probes = [np.zeros(n)]
    for i in range(n):
        e = np.zeros(n)
        e[i] = delta
        probes.append(e)
    values = oracle.evaluations(probes)
    base = values[0]
    recovered = np.array([(delta**2 - (values[i + 1] - base)) / (2.0 * delta) for i in range(n)])
    injected = [
        (PlainTemplate(i, probes[i]), values[i]) for i in range(len(probes))
    ]
    return AttackTranscript(injected=injected, query_truth=oracle.query_truth, recovered=recovered)


def recovery_errors(transcript: AttackTranscript) -> np.ndarray:
    """Per-entry relative recovery error |y_hat - y| / (1 + |y|)."""
    truth = transcript.query_truth
    if truth is None:
        raise ValueError("transcript carries no ground truth")
    return np.abs(transcript.recovered - truth) / (1.0 + np.abs(truth))


def enrollment_report_csv(transcript: AttackTranscript) -> str:
    buf = io.StringIO()
    buf.write("trial,estimate,truth,error\n")
    truth = transcript.query_truth
    for i, est in enumerate(transcript.recovered):
        t = truth[i] if truth is not None else float("nan")
        buf.write(f"{i},{est!r},{t!r},{est - t!r}\n")
    return buf.getvalue()


# -- distinguishability game --------------------------------------------------

Observation = tuple[np.ndarray, QueryToken]
Distinguisher = Callable[[QueryToken], int]
DistinguisherFactory = Callable[
    [SystemParams, np.ndarray, np.ndarray, list[Observation]], Distinguisher
]


def _calibrated(statistic: Callable[[QueryToken], float]) -> DistinguisherFactory:
    """Threshold ``statistic`` at its median over the observed token pairs and
    guess the larger-norm candidate above the threshold."""

    def factory(params, y0, y1, observed):
        if observed:
            threshold = float(np.median([statistic(tok) for _, tok in observed]))
        else:
            threshold = 0.0
        bigger = 1 if np.dot(y1, y1) > np.dot(y0, y0) else 0
        return lambda tok: bigger if statistic(tok) > threshold else 1 - bigger

    return factory


def constant_distinguisher(params, y0, y1, observed) -> Distinguisher:
    """Null control: always guesses 0, so its rate estimates the coin."""
    return lambda tok: 0


token_norm_distinguisher = _calibrated(lambda tok: float(np.linalg.norm(tok.c_y)))
max_entry_distinguisher = _calibrated(lambda tok: float(np.abs(tok.c_y).max()))
token_trace_distinguisher = _calibrated(lambda tok: abs(float(np.trace(tok.c_y))))


def battery() -> list[tuple[str, DistinguisherFactory]]:
    return [
        ("constant", constant_distinguisher),
        ("token_norm", token_norm_distinguisher),
        ("max_entry", max_entry_distinguisher),
        ("token_trace", token_trace_distinguisher),
    ]


def distinguish_game(
    params: SystemParams,
    cfg: RandomnessConfig,
    factory: DistinguisherFactory,
    trials: int,
    rng: np.random.Generator,
    candidates: tuple[np.ndarray, np.ndarray] | None = None,
    observe_count: int = 32,
) -> GameResult:
    """Run the chosen-plaintext distinguishing experiment.

    A fresh key is drawn for the game. The adversary first observes
    ``observe_count`` (template, token) pairs for random templates of its
    choice, then for each trial receives the token of candidate y_b for a
    fair hidden coin b and guesses. Candidates default to two independent
    random templates with entries in [0, 255].
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    sk = keygen(params, rng)
    if candidates is None:
        y0 = rng.uniform(0.0, 255.0, params.n)
        y1 = rng.uniform(0.0, 255.0, params.n)
    else:
        y0, y1 = (np.asarray(c, dtype=np.float64) for c in candidates)

    observed = []
    for _ in range(observe_count):
        y = rng.uniform(0.0, 255.0, params.n)
        observed.append((y, token_gen(sk, params, PlainTemplate(0, y), rng, cfg)))

    guess = factory(params, y0, y1, observed)
    successes = 0
    pair = (PlainTemplate(0, y0), PlainTemplate(1, y1))
    for _ in range(trials):
        b = int(rng.integers(2))
        tok = token_gen(sk, params, pair[b], rng, cfg)
        if guess(tok) == b:
            successes += 1
    return GameResult(trials=trials, successes=successes)


def game_report_csv(results: dict[str, GameResult]) -> str:
    buf = io.StringIO()
    buf.write("distinguisher,trials,successes,success_rate,ci95_halfwidth\n")
    for name, res in results.items():
        buf.write(
            f"{name},{res.trials},{res.successes},{res.success_rate:.6f},{res.ci95_halfwidth:.6f}\n"
        )
    return buf.getvalue()


# -- leakage rank test ---------------------------------------------------------

@dataclass(frozen=True)
class LeakageStats:
    rho: float
    distances: np.ndarray
    abs_values: np.ndarray


def leakage_rank_test(
    db_plaintexts: Sequence[PlainTemplate],
    query: PlainTemplate,
    params: SystemParams,
    cfg: RandomnessConfig,
    rng: np.random.Generator,
) -> LeakageStats:
    """Spearman rank correlation between |I| and the true distances.

    A fixed-radius evaluator is supposed to learn the matching bit and
    nothing about distance order; a per-record scalar spread over decades
    should therefore push the correlation toward zero. With the scalars
    disabled and radius 0, |I| is the squared distance itself and the
    correlation is exactly 1.
    """
    if len(db_plaintexts) < 2:
        raise ValueError("leakage test needs at least 2 records")
    sk = keygen(params, rng)
    tok = token_gen(sk, params, query, rng, cfg)
    distances = np.array(
        [float(np.linalg.norm(t.features - query.features)) for t in db_plaintexts]
    )
    values = np.empty(len(db_plaintexts))
    for i, t in enumerate(db_plaintexts):
        ct = transform(sk, params, t, rng, cfg)
        values[i] = abs(evaluate(ct, tok, debug=True).raw_value)
    rho = float(spearmanr(values, distances).statistic)
    return LeakageStats(rho=rho, distances=distances, abs_values=values)
