"""Timing sweeps over the template length, with log-log slope fits.

Token generation is dominated by two dense matrix products and should scale
cubically; evaluation runs through the quadratic trace kernel and should
scale quadratically. The sweep pins the BLAS to one thread so the fitted
slopes measure the algorithm, not the thread scheduler.
"""

from __future__ import annotations

import io
import platform
import statistics
import time
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from .scheme import (
    PlainTemplate,
    RandomnessConfig,
    evaluate,
    identify,
    keygen,
    setup,
    token_gen,
    transform,
)

DEFAULT_OPS = ("transform", "token_gen", "evaluate")


@dataclass(frozen=True)
class BenchRow:
    n: int
    op_name: str
    reps: int
    median_seconds: float
    mean_seconds: float
    stddev_seconds: float

    def __post_init__(self):
        if self.reps < 3:
            raise ValueError("reps must be >= 3 for a meaningful median")
        for v in (self.median_seconds, self.mean_seconds):
            if not (v > 0 and np.isfinite(v)):
                raise ValueError("timings must be positive and finite")


def _time_op(fn, reps: int) -> tuple[float, float, float]:
    fn()  # warm-up, excluded
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return (
        statistics.median(times),
        statistics.fmean(times),
        statistics.stdev(times) if reps > 1 else 0.0,
    )


def sweep(
    ns: list[int],
    reps: int = 5,
    rng: np.random.Generator | None = None,
    ops: tuple[str, ...] = DEFAULT_OPS,
    cfg: RandomnessConfig = RandomnessConfig(),
    identify_records: int = 16,
) -> list[BenchRow]:
    """One fresh key, template, and token per n; median wall time per op."""
    if not ns or any(n < 1 for n in ns):
        raise ValueError("ns must be non-empty with every dimension >= 1")
    if reps < 3:
        raise ValueError("reps must be >= 3")
    unknown = set(ops) - {"transform", "token_gen", "evaluate", "identify"}
    if unknown:
        raise ValueError(f"unknown ops: {sorted(unknown)}")
    rng = rng if rng is not None else np.random.default_rng()

    rows = []
    with threadpool_limits(limits=1):
        for n in ns:
            params = setup(n, theta=100.0)
            sk = keygen(params, rng)
            x = PlainTemplate(0, rng.uniform(0.0, 255.0, n))
            y = PlainTemplate(1, rng.uniform(0.0, 255.0, n))
            ct = transform(sk, params, x, rng, cfg)
            tok = token_gen(sk, params, y, rng, cfg)
            timers = {
                "transform": lambda: transform(sk, params, x, rng, cfg),
                "token_gen": lambda: token_gen(sk, params, y, rng, cfg),
                "evaluate": lambda: evaluate(ct, tok),
            }
            if "identify" in ops:
                db = [transform(sk, params, x, rng, cfg) for _ in range(identify_records)]
                timers["identify"] = lambda: identify(db, tok)
            for op in ops:
                med, mean, std = _time_op(timers[op], reps)
                rows.append(
                    BenchRow(
                        n=n,
                        op_name=op,
                        reps=reps,
                        median_seconds=med,
                        mean_seconds=mean,
                        stddev_seconds=std,
                    )
                )
    return rows


def fit_loglog_slope(rows: list[BenchRow]) -> float:
    """Least-squares slope of log(median time) against log(n) for one op."""
    ops = {r.op_name for r in rows}
    if len(ops) != 1:
        raise ValueError(f"slope fit wants rows for exactly one op, got {sorted(ops)}")
    if len(rows) < 4:
        raise ValueError("slope fit needs at least 4 rows")
    ns = [r.n for r in rows]
    if max(ns) < 8 * min(ns):
        raise ValueError("slope fit needs the dimensions to span at least a factor of 8")
    return float(np.polyfit(np.log(ns), np.log([r.median_seconds for r in rows]), 1)[0])


def machine_comments() -> list[str]:
    return [
        f"# machine: {platform.machine()} {platform.processor() or 'unknown-cpu'}",
        f"# platform: {platform.platform()}",
        f"# python: {platform.python_version()} numpy: {np.__version__}",
        "# blas_threads: 1",
    ]


def emit_csv(rows: list[BenchRow], comments: list[str] | None = None) -> str:
    buf = io.StringIO()
    for line in comments or []:
        buf.write(line.rstrip("\n") + "\n")
    buf.write("n,op,reps,median_s,mean_s,stddev_s\n")
    for r in sorted(rows, key=lambda r: (r.op_name, r.n)):
        buf.write(
            f"{r.n},{r.op_name},{r.reps},{r.median_seconds!r},{r.mean_seconds!r},{r.stddev_seconds!r}\n"
        )
    return buf.getvalue()


def parse_csv(text: str) -> list[BenchRow]:
    rows = []
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    if not lines or lines[0] != "n,op,reps,median_s,mean_s,stddev_s":
        raise ValueError("not a bench CSV: missing header")
    for ln in lines[1:]:
        n, op, reps, med, mean, std = ln.split(",")
        rows.append(
            BenchRow(
                n=int(n),
                op_name=op,
                reps=int(reps),
                median_seconds=float(med),
                mean_seconds=float(mean),
                stddev_seconds=float(std),
            )
        )
    return rows
