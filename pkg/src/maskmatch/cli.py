"""Operator command surface: keygen, enroll, tokenize, identify, attacks, bench.

Exit codes: 0 success, 1 usage error, 2 data or file-integrity error,
3 identify found nothing and --strict was given. Every randomized command
takes --seed and is bit-reproducible given one.
"""

from __future__ import annotations

import argparse
import csv
import struct
import sys
from concurrent.futures import ThreadPoolExecutor
from itertools import islice

import numpy as np

from . import attacks, bench, store
from .scheme import (
    PlainTemplate,
    RandomnessConfig,
    evaluate,
    keygen,
    setup,
    token_gen,
    transform,
)

USAGE_EXIT = 1
DATA_EXIT = 2
NO_MATCH_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def _rng(seed: int | None) -> np.random.Generator:
    return np.random.default_rng(seed)


def _read_templates_csv(path: str, n: int) -> list[PlainTemplate]:
    """Plaintext interchange format: header ``id,f1,...,fn``, one row per template."""
    out = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or len(header) < 2 or header[0].strip().lower() != "id":
            raise ValueError(f"{path}: expected CSV header 'id,f1,...,fn'")
        if len(header) - 1 != n:
            raise ValueError(f"{path}: header has {len(header) - 1} features, key expects {n}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != n + 1:
                raise ValueError(f"{path}:{lineno}: expected {n + 1} fields, got {len(row)}")
            out.append(PlainTemplate(int(row[0]), np.array([float(v) for v in row[1:]])))
    return out


def _cmd_keygen(args) -> int:
    params = setup(args.n, args.theta)
    sk = keygen(params, _rng(args.seed), mask_style=args.mask_style)
    store.write_key(args.out, sk)
    print(f"wrote key for n={args.n} (ext dim {params.ext_dim}) to {args.out}")
    return 0


def _cmd_enroll(args) -> int:
    sk = store.read_key(args.key)
    n = sk.ext_dim - 5
    params = setup(n, args.theta)
    templates = _read_templates_csv(args.infile, n)
    rng = _rng(args.seed)
    try:
        info = store.database_info(args.db)
        if info["n"] != n:
            raise ValueError(f"database {args.db} is for n={info['n']}, key expects n={n}")
    except FileNotFoundError:
        store.create_database(args.db, n, test_mode=args.test_mode)
    for t in templates:
        store.append_record(args.db, transform(sk, params, t, rng))
    print(f"enrolled {len(templates)} templates into {args.db}")
    return 0


def _cmd_tokenize(args) -> int:
    sk = store.read_key(args.key)
    n = sk.ext_dim - 5
    templates = _read_templates_csv(args.infile, n)
    if len(templates) != 1:
        raise ValueError(f"{args.infile}: tokenize expects exactly one query row, got {len(templates)}")
    # The radius was fixed at enrollment; tokens carry none.
    params = setup(n, 0.0)
    tok = token_gen(sk, params, templates[0], _rng(args.seed))
    store.write_token(args.out, tok)
    print(f"wrote token to {args.out}", file=sys.stderr)
    return 0


def _eval_checked(ct, tok, debug):
    if ct.ext_dim != tok.ext_dim:
        raise ValueError(
            f"record {ct.id}: dimension {ct.ext_dim} does not match token {tok.ext_dim}"
        )
    return evaluate(ct, tok, debug=debug)


def _cmd_identify(args) -> int:
    info = store.database_info(args.db)
    if args.unsafe_debug and not info["test_mode"]:
        raise ValueError(
            f"{args.db} carries no test-mode marker; refusing to expose raw evaluation values"
        )
    tok = store.read_token(args.token, expect_n=info["n"])
    records = store.scan(args.db)
    found = 0
    if args.jobs > 1:
        def results():
            with ThreadPoolExecutor(max_workers=args.jobs) as ex:
                while chunk := list(islice(records, 256)):
                    yield from ex.map(lambda ct: _eval_checked(ct, tok, args.unsafe_debug), chunk)
    else:
        def results():
            for ct in records:
                yield _eval_checked(ct, tok, args.unsafe_debug)
    for res in results():
        if args.unsafe_debug:
            print(f"{res.id},{res.raw_value!r},{int(res.matched)}")
        if res.matched:
            found += 1
            if not args.unsafe_debug:
                print(res.id)
    if found == 0 and args.strict:
        return NO_MATCH_EXIT
    return 0


def _cmd_attack_enroll(args) -> int:
    params = setup(args.n, args.theta)
    cfg = RandomnessConfig(type1_enabled=not args.disable_type1, pad_bound=args.pad_bound)
    rng = _rng(args.seed)
    mean_errors = []
    last = None
    for trial in range(args.trials):
        hidden = rng.uniform(0.0, 255.0, args.n)
        oracle = attacks.EnrollmentOracle(params, hidden, rng, cfg)
        last = attacks.enrollment_attack(oracle, delta=args.delta)
        errs = attacks.recovery_errors(last)
        mean_errors.append(float(errs.mean()))
        print(f"trial {trial}: mean relative recovery error {errs.mean():.3g} (max {errs.max():.3g})")
    print(
        f"type1 {'disabled' if args.disable_type1 else 'enabled'}: "
        f"mean recovery error over {args.trials} trials = {np.mean(mean_errors):.3g}"
    )
    if args.csv:
        with open(args.csv, "w") as f:
            f.write(attacks.enrollment_report_csv(last))
        print(f"wrote last-trial transcript to {args.csv}", file=sys.stderr)
    return 0


def _cmd_attack_distinguish(args) -> int:
    params = setup(args.n, 100.0)
    rng = _rng(args.seed)
    if args.ablation:
        cfg = RandomnessConfig(type1_enabled=False, type3_enabled=False)
        y0 = rng.uniform(0.1, 0.25, args.n)
        candidates = (y0, 1000.0 * y0)
    else:
        cfg = RandomnessConfig(scalar_log_uniform=True)
        candidates = None
    results = {}
    for name, factory in attacks.battery():
        results[name] = attacks.distinguish_game(
            params, cfg, factory, args.trials, rng,
            candidates=candidates, observe_count=args.observe,
        )
        res = results[name]
        print(
            f"{name:12s} success {res.success_rate:.4f} "
            f"(+/- {res.ci95_halfwidth:.4f} at 95%, {res.trials} trials)"
        )
    print(attacks.game_report_csv(results), end="")
    return 0


def _cmd_bench(args) -> int:
    ns = [int(v) for v in args.ns.split(",") if v]
    ops = tuple(args.ops.split(","))
    rows = bench.sweep(ns, reps=args.reps, rng=_rng(args.seed), ops=ops)
    comments = bench.machine_comments()
    for op in ops:
        op_rows = [r for r in rows if r.op_name == op]
        try:
            comments.append(f"# slope {op}: {bench.fit_loglog_slope(op_rows):.3f}")
        except ValueError:
            pass
    text = bench.emit_csv(rows, comments)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        print(text, end="")
    return 0


def _cmd_inspect(args) -> int:
    with open(args.path, "rb") as f:
        magic = f.read(4)
    if magic == store.KEY_MAGIC:
        sk = store.read_key(args.path)
        print(f"key file: n={sk.ext_dim - 5} ext_dim={sk.ext_dim}")
    elif magic == store.DB_MAGIC:
        info = store.database_info(args.path)
        print(
            f"database file: n={info['n']} records={info['record_count']} "
            f"test_mode={info['test_mode']}"
        )
    elif magic == store.TOKEN_MAGIC:
        tok = store.read_token(args.path)
        print(f"token file: n={tok.ext_dim - 5} ext_dim={tok.ext_dim}")
    else:
        raise store.BadMagicError(f"{args.path}: unrecognized magic {magic!r}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="maskmatch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("keygen", help="generate a masking key file")
    p.add_argument("--n", type=int, required=True, help="template length")
    p.add_argument("--theta", type=float, default=0.0,
                   help="matching radius (informational here; it binds at enroll time)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-style", choices=("orthogonal", "uniform"), default="orthogonal")
    p.set_defaults(fn=_cmd_keygen)

    p = sub.add_parser("enroll", help="encrypt templates from CSV into a database")
    p.add_argument("--key", required=True)
    p.add_argument("--db", required=True)
    p.add_argument("--in", dest="infile", required=True, help="CSV with header id,f1,...,fn")
    p.add_argument("--theta", type=float, required=True, help="matching radius")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--test-mode", action="store_true",
                   help="mark the database as experiment data (enables --unsafe-debug later)")
    p.set_defaults(fn=_cmd_enroll)

    p = sub.add_parser("tokenize", help="build a query token from a one-row CSV")
    p.add_argument("--key", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(fn=_cmd_tokenize)

    p = sub.add_parser("identify", help="scan a database with a token; print matching ids")
    p.add_argument("--db", required=True)
    p.add_argument("--token", required=True)
    p.add_argument("--strict", action="store_true", help="exit 3 when nothing matches")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--unsafe-debug", action="store_true",
                   help="print raw evaluation values (test-mode databases only)")
    p.set_defaults(fn=_cmd_identify)

    p = sub.add_parser("attack-enroll", help="run the template-injection recovery attack")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--theta", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--pad-bound", type=float, default=1024.0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--disable-type1", action="store_true",
                   help="ablate the result-disguising scalars (makes the attack succeed)")
    p.add_argument("--csv", default=None, help="write the last trial's transcript CSV here")
    p.set_defaults(fn=_cmd_attack_enroll)

    p = sub.add_parser("attack-distinguish", help="run the token distinguishing game battery")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--observe", type=int, default=32)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ablation", action="store_true",
                   help="disable type1+type3 randomness and use norm-separated candidates")
    p.set_defaults(fn=_cmd_attack_distinguish)

    p = sub.add_parser("bench", help="time the scheme operations and emit CSV")
    p.add_argument("--ns", default="100,200,400,800,1600")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--ops", default="transform,token_gen,evaluate")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("inspect", help="print the header of a key, database, or token file")
    p.add_argument("path")
    p.set_defaults(fn=_cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (store.StoreError, ValueError, OSError, struct.error) as e:
        print(f"maskmatch: {e}", file=sys.stderr)
        return DATA_EXIT


if __name__ == "__main__":
    sys.exit(main())
