import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from oracles import expectile_quad
from reer.simulation import (
    ErrorDist,
    SimConfig,
    distribution_expectile,
    generate_batch,
    generate_stream,
    partial_moment,
    run_experiment,
    run_method,
    true_coefficients,
)

LEVELS = [round(0.05 * k, 2) for k in range(1, 20)]

# bisection on adaptive-quadrature partial moments (tests/oracles.py), frozen
FROZEN = {
    ErrorDist.STD_NORMAL: [
        -1.140171145836, -0.861592112416, -0.68447589944, -0.549155821099, -0.436326563794,
        -0.337119881548, -0.246607221357, -0.161657506746, -0.080043923198, 0.0,
        0.080043923198, 0.161657506746, 0.246607221357, 0.337119881548, 0.436326563794,
        0.549155821099, 0.68447589944, 0.861592112416, 1.140171145836,
    ],
    ErrorDist.STUDENT_T3: [
        -1.890352363541, -1.319786991337, -1.009073823535, -0.791044622139, -0.618946342367,
        -0.473199515922, -0.343652447281, -0.224206387588, -0.110715711772, 0.0,
        0.110715711772, 0.224206387588, 0.343652447281, 0.473199515922, 0.618946342367,
        0.791044622139, 1.009073823535, 1.319786991337, 1.890352363541,
    ],
}
ORACLE_NAME = {ErrorDist.STD_NORMAL: "normal", ErrorDist.STUDENT_T3: "t3"}


@pytest.mark.parametrize("dist", list(ErrorDist))
def test_expectile_matches_frozen_values(dist):
    got = [distribution_expectile(dist, t) for t in LEVELS]
    assert_allclose(got, FROZEN[dist], rtol=0, atol=1e-11)


@pytest.mark.parametrize("dist", list(ErrorDist))
@pytest.mark.parametrize("tau", [0.05, 0.25, 0.7])
def test_expectile_matches_live_oracle(dist, tau):
    assert distribution_expectile(dist, tau) == pytest.approx(expectile_quad(ORACLE_NAME[dist], tau), abs=1e-8)


@pytest.mark.parametrize("dist", list(ErrorDist))
def test_expectile_median_and_antisymmetry(dist):
    assert abs(distribution_expectile(dist, 0.5)) <= 1e-12
    for t in LEVELS:
        assert distribution_expectile(dist, t) == pytest.approx(-distribution_expectile(dist, 1 - t), abs=1e-9)


@pytest.mark.parametrize("dist", list(ErrorDist))
def test_expectile_strictly_increasing(dist):
    grid = np.linspace(0.02, 0.98, 17)
    assert np.all(np.diff([distribution_expectile(dist, t) for t in grid]) > 0)


@pytest.mark.parametrize("dist", list(ErrorDist))
def test_partial_moment_matches_quadrature(dist):
    from scipy import integrate, stats

    pdf = stats.norm.pdf if dist is ErrorDist.STD_NORMAL else stats.t(3).pdf
    for theta in (-2.0, -0.3, 0.0, 1.1):
        ref = integrate.quad(lambda x: (x - theta) * pdf(x), theta, np.inf, epsabs=1e-13)[0]
        assert partial_moment(dist, theta) == pytest.approx(ref, abs=1e-10)


def test_true_coefficients():
    assert_array_equal(true_coefficients(SimConfig(case=1, tau=0.5)), [2.0, 1.0, 2.0])
    assert_allclose(true_coefficients(SimConfig(case=3, tau=0.5)), [2.0, 1.0, 2.0], atol=1e-12)
    e = FROZEN[ErrorDist.STD_NORMAL][4]
    assert_allclose(true_coefficients(SimConfig(case=1, tau=0.25)), [2.0 + e, 1.0, 2.0], atol=1e-11)
    assert_allclose(true_coefficients(SimConfig(case=4, tau=0.25)),
                    [2.0 + FROZEN[ErrorDist.STUDENT_T3][4], 1.0 + 0.25 * FROZEN[ErrorDist.STUDENT_T3][4], 2.0],
                    atol=1e-11)


def test_generate_batch_deterministic():
    cfg = SimConfig(case=4, n_k=50, seed=123)
    a, b = generate_batch(cfg, 3, 7), generate_batch(cfg, 3, 7)
    assert_array_equal(a.x, b.x)
    assert_array_equal(a.y, b.y)
    assert not np.array_equal(a.y, generate_batch(cfg, 4, 7).y)
    assert not np.array_equal(a.y, generate_batch(cfg, 3, 8).y)


def test_generate_batch_design():
    cfg = SimConfig(case=1, n_k=500)
    b = generate_batch(cfg, 0, 0)
    assert_array_equal(b.x[:, 0], 1.0)
    assert np.all((b.x[:, 1:] >= 0) & (b.x[:, 1:] <= 1))
    # homogeneous case: scale x^T gamma is the constant 1
    assert_array_equal(b.x @ np.asarray(cfg.gamma), 1.0)


def test_heterogeneous_scale():
    cfg = SimConfig(case=3, n_k=500)
    b = generate_batch(cfg, 0, 0)
    scale = b.x @ np.asarray(cfg.gamma)
    assert np.ptp(scale) > 0.1


def test_noiseless_recovery():
    cfg = SimConfig(case=1, tau=0.3, n_k=100, num_batches=5, gamma=(0.0, 0.0, 0.0), reps=1)
    batches = generate_stream(cfg, 0)
    for m in ("oracle", "reer", "paer"):
        assert_allclose(run_method(m, batches, cfg.tau), cfg.beta_star, atol=1e-10)


def test_noiseless_experiment_table():
    cfg = SimConfig(case=1, tau=0.3, n_k=100, num_batches=5, gamma=(0.0, 0.0, 0.0), reps=1)
    table = run_experiment(cfg, ("oracle", "reer", "paer"), workers=1)
    for m in table.methods:
        assert np.all(table.mse[m] <= 1e-16)
        assert np.all(np.abs(table.bias[m]) <= 1e-8)


def test_failed_replications_are_recorded():
    # 3-row batches are too small for a DCER local fit with 3 coefficients
    cfg = SimConfig(case=1, tau=0.3, n_k=3, num_batches=5, reps=2)
    table = run_experiment(cfg, ("oracle", "dcer"), workers=1)
    assert table.reps == 0
    assert [f[:2] for f in table.failures] == [(0, "dcer"), (1, "dcer")]


def test_mse_dominates_bias_squared():
    table = run_experiment(SimConfig(case=4, n_k=100, num_batches=10, reps=8, seed=2), workers=1)
    for m in table.methods:
        assert np.all(table.mse[m] >= table.bias[m] ** 2 - 1e-15)


def _strip_times(csv_text):
    out = []
    for line in csv_text.splitlines():
        if line.startswith("#") or line.startswith("method,"):
            out.append(line)
        else:
            fields = line.split(",")
            del fields[4]
            out.append(",".join(fields))
    return out


def test_seed_contract_and_worker_independence():
    cfg = SimConfig(case=2, n_k=100, num_batches=8, reps=6, seed=9)
    a = run_experiment(cfg, ("oracle", "reer"), workers=1)
    b = run_experiment(cfg, ("oracle", "reer"), workers=2)
    assert _strip_times(a.to_csv()) == _strip_times(b.to_csv())
    for m in a.methods:
        assert_array_equal(a.estimates[m], b.estimates[m])


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(case=5)
    with pytest.raises(ValueError):
        SimConfig(tau=0.0)
    with pytest.raises(ValueError):
        SimConfig(n_k=0)


def test_table3_point_within_factor_two_of_oracle():
    # Case 1, S2, n_k=300, K=100, tau=0.25; reported Oracle/ReER beta_1 MSE 0.407e-3, beta_2 0.480e-3
    cfg = SimConfig(case=1, tau=0.25, n_k=300, num_batches=100, reps=200, seed=3)
    table = run_experiment(cfg, ("oracle", "reer"))
    for j in (1, 2):
        assert table.mse["reer"][j] <= 2 * table.mse["oracle"][j]
        assert 0.2e-3 <= table.mse["reer"][j] <= 0.8e-3


@pytest.mark.slow
def test_more_batches_lower_mse():
    for case in (1, 2):
        small = run_experiment(SimConfig(case=case, n_k=300, num_batches=100, reps=40, seed=8), ("oracle", "reer", "paer"))
        large = run_experiment(SimConfig(case=case, n_k=300, num_batches=2000, reps=40, seed=8), ("oracle", "reer", "paer"))
        for m in small.methods:
            assert np.all(large.mse[m][1:] < small.mse[m][1:])
