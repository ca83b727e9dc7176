import numpy as np
import pytest

from maskmatch.attacks import (
    EnrollmentOracle,
    GameResult,
    battery,
    constant_distinguisher,
    distinguish_game,
    enrollment_attack,
    enrollment_report_csv,
    game_report_csv,
    leakage_rank_test,
    recovery_errors,
    token_norm_distinguisher,
)
from maskmatch.scheme import PlainTemplate, RandomnessConfig, setup

TYPE1_OFF = RandomnessConfig(type1_enabled=False, pad_bound=4.0)


def test_enrollment_attack_recovers_known_small_query():
    params = setup(2, 1.0)
    oracle = EnrollmentOracle(params, np.array([7.0, 3.0]), np.random.default_rng(0), TYPE1_OFF)
    transcript = enrollment_attack(oracle, delta=1.0)
    values = [v for _, v in transcript.injected]
    # I_i - I_0 = delta^2 - 2*delta*y_i when no scalars disguise the result.
    assert values[1] - values[0] == pytest.approx(-13.0, abs=1e-6)
    assert values[2] - values[0] == pytest.approx(-5.0, abs=1e-6)
    assert transcript.recovered == pytest.approx([7.0, 3.0], abs=1e-6)


def test_enrollment_attack_zero_query():
    params = setup(3, 1.0)
    oracle = EnrollmentOracle(params, np.zeros(3), np.random.default_rng(1), TYPE1_OFF)
    transcript = enrollment_attack(oracle)
    assert transcript.recovered == pytest.approx([0.0, 0.0, 0.0], abs=1e-6)


def test_enrollment_attack_exact_under_type1_off():
    rng = np.random.default_rng(2)
    params = setup(64, 1.0)
    for _ in range(10):
        y = rng.uniform(0, 255, 64)
        oracle = EnrollmentOracle(params, y, rng, TYPE1_OFF)
        errs = recovery_errors(enrollment_attack(oracle))
        assert errs.max() <= 1e-6


def test_enrollment_attack_scrambled_under_type1_on():
    rng = np.random.default_rng(3)
    params = setup(16, 1.0)
    means = []
    for _ in range(20):
        y = rng.uniform(0, 255, 16)
        oracle = EnrollmentOracle(params, y, rng, RandomnessConfig())
        means.append(float(recovery_errors(enrollment_attack(oracle)).mean()))
    assert np.mean(means) > 0.5


def test_observed_signs_always_match_radius_predicate():
    rng = np.random.default_rng(4)
    n, theta = 8, 300.0
    params = setup(n, theta)
    y = rng.uniform(0, 255, n)
    for cfg in (RandomnessConfig(), TYPE1_OFF):
        oracle = EnrollmentOracle(params, y, rng, cfg)
        probes = [rng.uniform(0, 255, n) for _ in range(12)]
        for probe, value in zip(probes, oracle.evaluations(probes)):
            assert (value <= 0) == (np.linalg.norm(probe - y) <= theta)


def test_enrollment_attack_rejects_bad_delta():
    params = setup(2, 1.0)
    oracle = EnrollmentOracle(params, np.zeros(2), np.random.default_rng(5))
    with pytest.raises(ValueError):
        enrollment_attack(oracle, delta=0.0)


def test_oracle_rejects_wrong_query_length():
    with pytest.raises(ValueError):
        EnrollmentOracle(setup(4, 1.0), np.zeros(3), np.random.default_rng(6))


def test_enrollment_report_csv_shape():
    params = setup(2, 1.0)
    oracle = EnrollmentOracle(params, np.array([7.0, 3.0]), np.random.default_rng(7), TYPE1_OFF)
    text = enrollment_report_csv(enrollment_attack(oracle))
    lines = text.strip().splitlines()
    assert lines[0] == "trial,estimate,truth,error"
    assert len(lines) == 3


def test_game_result_statistics():
    res = GameResult(trials=2000, successes=1000)
    assert res.success_rate == 0.5
    assert res.ci95_halfwidth == pytest.approx(1.96 * (0.25 / 2000) ** 0.5)


def test_constant_distinguisher_hits_coin_rate():
    params = setup(8, 100.0)
    res = distinguish_game(
        params, RandomnessConfig(), constant_distinguisher, 400, np.random.default_rng(8)
    )
    assert abs(res.success_rate - 0.5) <= 3 * res.ci95_halfwidth


def test_norm_distinguisher_beats_crippled_scheme():
    params = setup(16, 100.0)
    rng = np.random.default_rng(9)
    y0 = rng.uniform(0.1, 0.25, 16)
    res = distinguish_game(
        params,
        RandomnessConfig(type1_enabled=False, type3_enabled=False),
        token_norm_distinguisher,
        200,
        rng,
        candidates=(y0, 1000.0 * y0),
    )
    assert res.success_rate > 0.9


def test_norm_distinguisher_near_coin_against_full_scheme():
    params = setup(64, 100.0)
    res = distinguish_game(
        params,
        RandomnessConfig(scalar_log_uniform=True),
        token_norm_distinguisher,
        500,
        np.random.default_rng(10),
    )
    assert 0.4 <= res.success_rate <= 0.6


def test_game_rejects_zero_trials():
    with pytest.raises(ValueError):
        distinguish_game(
            setup(2, 1.0), RandomnessConfig(), constant_distinguisher, 0,
            np.random.default_rng(11),
        )


def test_battery_names():
    assert [name for name, _ in battery()] == [
        "constant", "token_norm", "max_entry", "token_trace",
    ]


def test_game_report_csv_roundtrip_fields():
    results = {"constant": GameResult(100, 52)}
    lines = game_report_csv(results).strip().splitlines()
    assert lines[0].startswith("distinguisher,")
    assert lines[1].startswith("constant,100,52,0.52")


def test_leakage_perfect_rank_without_disguise():
    rng = np.random.default_rng(12)
    n = 16
    params = setup(n, 0.0)
    db = [PlainTemplate(i, rng.uniform(0, 255, n)) for i in range(50)]
    query = PlainTemplate(0, rng.uniform(0, 255, n))
    stats = leakage_rank_test(db, query, params, RandomnessConfig(type1_enabled=False), rng)
    assert stats.rho == pytest.approx(1.0)


def test_leakage_scrambled_by_log_uniform_scalars():
    rng = np.random.default_rng(13)
    n = 128
    params = setup(n, 0.0)
    db = [PlainTemplate(i, rng.uniform(0, 255, n)) for i in range(120)]
    query = PlainTemplate(0, rng.uniform(0, 255, n))
    cfg = RandomnessConfig(scalar_low=1.0, scalar_high=1000.0, scalar_log_uniform=True)
    stats = leakage_rank_test(db, query, params, cfg, rng)
    assert abs(stats.rho) < 0.45


def test_leakage_needs_two_records():
    params = setup(2, 0.0)
    rng = np.random.default_rng(14)
    with pytest.raises(ValueError):
        leakage_rank_test([PlainTemplate(0, np.zeros(2))], PlainTemplate(1, np.zeros(2)),
                          params, RandomnessConfig(), rng)
