import numpy as np
import pytest

from maskmatch.cli import main


def write_templates(path, rows, n):
    header = "id," + ",".join(f"f{i + 1}" for i in range(n))
    lines = [header] + [f"{rid}," + ",".join(repr(float(v)) for v in feats) for rid, feats in rows]
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture
def pipeline(tmp_path):
    """keygen + enroll three templates at staged distances from a base point."""
    n, theta = 3, 10.0
    base = np.array([100.0, 120.0, 140.0])
    rows = [
        (1, base),
        (2, base + np.array([4.0, 0.0, 0.0])),      # inside the radius
        (3, base + np.array([50.0, 0.0, 0.0])),     # far outside
    ]
    key, db, tin, tok = (tmp_path / f for f in ("k.key", "d.db", "q.csv", "q.tok"))
    templates = tmp_path / "templates.csv"
    write_templates(templates, rows, n)
    assert main(["keygen", "--n", "3", "--theta", str(theta), "--seed", "7",
                 "--out", str(key)]) == 0
    assert main(["enroll", "--key", str(key), "--db", str(db), "--in", str(templates),
                 "--theta", str(theta), "--seed", "8"]) == 0
    return tmp_path, key, db, tin, tok, base, n


def test_keygen_deterministic_with_seed(tmp_path):
    a, b = tmp_path / "a.key", tmp_path / "b.key"
    for out in (a, b):
        assert main(["keygen", "--n", "4", "--theta", "10", "--seed", "7",
                     "--out", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_end_to_end_identify_finds_nearby(pipeline, capsys):
    tmp, key, db, tin, tok, base, n = pipeline
    write_templates(tin, [(0, base)], n)
    assert main(["tokenize", "--key", str(key), "--in", str(tin), "--out", str(tok),
                 "--seed", "9"]) == 0
    capsys.readouterr()
    assert main(["identify", "--db", str(db), "--token", str(tok)]) == 0
    out = capsys.readouterr().out
    assert out.split() == ["1", "2"]


def test_identify_no_match_plain_and_strict(pipeline, capsys):
    tmp, key, db, tin, tok, base, n = pipeline
    write_templates(tin, [(0, base + 500.0)], n)
    assert main(["tokenize", "--key", str(key), "--in", str(tin), "--out", str(tok)]) == 0
    capsys.readouterr()
    assert main(["identify", "--db", str(db), "--token", str(tok)]) == 0
    assert capsys.readouterr().out == ""
    assert main(["identify", "--db", str(db), "--token", str(tok), "--strict"]) == 3


def test_identify_parallel_matches_serial(pipeline, capsys):
    tmp, key, db, tin, tok, base, n = pipeline
    write_templates(tin, [(0, base)], n)
    main(["tokenize", "--key", str(key), "--in", str(tin), "--out", str(tok), "--seed", "3"])
    capsys.readouterr()
    main(["identify", "--db", str(db), "--token", str(tok)])
    serial = capsys.readouterr().out
    main(["identify", "--db", str(db), "--token", str(tok), "--jobs", "4"])
    assert capsys.readouterr().out == serial


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["keygen", "--out", "x.key"])  # missing --n
    assert exc.value.code == 1


def test_corrupt_key_exits_2(tmp_path, capsys):
    key = tmp_path / "k.key"
    main(["keygen", "--n", "2", "--out", str(key), "--seed", "1"])
    key.write_bytes(key.read_bytes()[:-7])
    csvf = tmp_path / "t.csv"
    write_templates(csvf, [(1, np.zeros(2))], 2)
    assert main(["enroll", "--key", str(key), "--db", str(tmp_path / "d.db"),
                 "--in", str(csvf), "--theta", "1"]) == 2


def test_enroll_header_mismatch_exits_2(pipeline):
    tmp, key, db, tin, tok, base, n = pipeline
    bad = tmp / "bad.csv"
    write_templates(bad, [(9, np.zeros(2))], 2)
    assert main(["enroll", "--key", str(key), "--db", str(db), "--in", str(bad),
                 "--theta", "10"]) == 2


def test_tokenize_requires_single_row(pipeline):
    tmp, key, db, tin, tok, base, n = pipeline
    write_templates(tin, [(0, base), (1, base)], n)
    assert main(["tokenize", "--key", str(key), "--in", str(tin), "--out", str(tok)]) == 2


def test_token_database_dimension_mismatch_exits_2(pipeline, tmp_path):
    tmp, key, db, tin, tok, base, n = pipeline
    key2, tin2, tok2 = tmp / "k2.key", tmp / "q2.csv", tmp / "q2.tok"
    main(["keygen", "--n", "2", "--out", str(key2), "--seed", "4"])
    write_templates(tin2, [(0, np.zeros(2))], 2)
    main(["tokenize", "--key", str(key2), "--in", str(tin2), "--out", str(tok2)])
    assert main(["identify", "--db", str(db), "--token", str(tok2)]) == 2


def test_unsafe_debug_refused_on_production_db(pipeline, capsys):
    tmp, key, db, tin, tok, base, n = pipeline
    write_templates(tin, [(0, base)], n)
    main(["tokenize", "--key", str(key), "--in", str(tin), "--out", str(tok)])
    assert main(["identify", "--db", str(db), "--token", str(tok), "--unsafe-debug"]) == 2
    assert "test-mode" in capsys.readouterr().err


def test_unsafe_debug_on_test_mode_db(tmp_path, capsys):
    n = 2
    key, db, csvf, tokf = (tmp_path / f for f in ("k.key", "d.db", "t.csv", "q.tok"))
    main(["keygen", "--n", str(n), "--out", str(key), "--seed", "5"])
    write_templates(csvf, [(1, np.array([10.0, 10.0]))], n)
    assert main(["enroll", "--key", str(key), "--db", str(db), "--in", str(csvf),
                 "--theta", "5", "--test-mode"]) == 0
    write_templates(csvf, [(0, np.array([10.0, 10.0]))], n)
    main(["tokenize", "--key", str(key), "--in", str(csvf), "--out", str(tokf)])
    capsys.readouterr()
    assert main(["identify", "--db", str(db), "--token", str(tokf), "--unsafe-debug"]) == 0
    out = capsys.readouterr().out.strip()
    rec_id, raw, matched = out.split(",")
    assert rec_id == "1" and matched == "1" and float(raw) <= 0


def test_inspect_reports_headers(pipeline, capsys):
    tmp, key, db, tin, tok, base, n = pipeline
    capsys.readouterr()
    assert main(["inspect", str(key)]) == 0
    assert "n=3" in capsys.readouterr().out
    assert main(["inspect", str(db)]) == 0
    assert "records=3" in capsys.readouterr().out
    junk = tmp / "junk.bin"
    junk.write_bytes(b"JUNKJUNKJUNK")
    assert main(["inspect", str(junk)]) == 2


def test_attack_enroll_command(tmp_path, capsys):
    csv_out = tmp_path / "rep.csv"
    assert main(["attack-enroll", "--n", "4", "--trials", "2", "--seed", "0",
                 "--disable-type1", "--pad-bound", "4", "--csv", str(csv_out)]) == 0
    out = capsys.readouterr().out
    assert "mean recovery error" in out
    assert csv_out.read_text().startswith("trial,estimate,truth,error")


def test_attack_distinguish_command(capsys):
    assert main(["attack-distinguish", "--n", "8", "--trials", "40",
                 "--observe", "8", "--seed", "0"]) == 0
    out = capsys.readouterr().out
    assert "token_norm" in out and "distinguisher,trials," in out


def test_bench_command(tmp_path):
    out = tmp_path / "bench.csv"
    assert main(["bench", "--ns", "4,8,16,32", "--reps", "3", "--seed", "0",
                 "--ops", "evaluate", "--out", str(out)]) == 0
    text = out.read_text()
    assert "n,op,reps,median_s,mean_s,stddev_s" in text
    assert "# slope evaluate:" in text
