import dataclasses
import math

import numpy as np
import pytest

from ergodiff.diffusion import DiffusionModel, brownian, ou
from ergodiff.errors import (ConfigError, DomainError, ExcessCensoringError,
                             InsufficientCyclesError)
from ergodiff.simulator import (InitialLaw, SimConfig, estimate_constants,
                                estimate_deviation_prob,
                                estimate_hitting_moment,
                                estimate_hitting_moments, nu_moment_estimate,
                                simulate_path, simulate_paths,
                                write_samples_csv)

INDICATOR = lambda x: np.where(np.abs(np.asarray(x)) <= 0.5, 1.0, 0.0)


def _cfg(**kw):
    base = dict(step=1e-3, horizon=20.0, replicas=200, seed=9,
                a=-0.5, b=0.5, initial=0.0)
    base.update(kw)
    return SimConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(step=-1.0)
    with pytest.raises(ConfigError):
        _cfg(a=1.0, b=0.0)
    with pytest.raises(ConfigError):
        _cfg(replicas=0)
    with pytest.raises(ConfigError):
        _cfg(crossing="teleport")


def test_initial_law_coercion_and_sampling():
    cfg = _cfg(initial=0.25)
    assert isinstance(cfg.initial, InitialLaw)
    gen = np.random.default_rng(0)
    assert np.all(cfg.initial.sample(gen, 5) == 0.25)
    uni = InitialLaw.uniform(-1.0, 1.0)
    xs = uni.sample(np.random.default_rng(0), 1000)
    assert np.all((xs >= -1) & (xs <= 1))
    rej = InitialLaw.rejection(lambda x: np.exp(-np.asarray(x) ** 2),
                               -3.0, 3.0, 1.1)
    xs = rej.sample(np.random.default_rng(0), 2000)
    assert abs(float(np.mean(xs))) < 0.1


def test_additive_integral_of_one_is_time():
    m = ou(1.0)
    s = simulate_path(m, _cfg(horizon=5.0), lambda x: np.ones_like(x))
    assert s.additive_integral == pytest.approx(5.0, abs=1e-9)


def test_inverse_process_identity_every_sample():
    m = ou(1.0)
    batch = simulate_paths(m, _cfg(replicas=40, horizon=30.0), INDICATOR)
    probes = np.linspace(0.5, 30.0, 13)
    for s in batch.samples:
        assert s.inverse_identity_holds(probes)
        assert s.n_t == len(s.r_times)


def test_cycle_structure_interleaves():
    # every return to a is preceded by a visit to b after the previous return
    m = ou(1.0)
    batch = simulate_paths(m, _cfg(replicas=25, horizon=40.0), INDICATOR)
    for s in batch.samples:
        n = len(s.r_times)
        assert len(s.s_times) >= n
        for i in range(n):
            assert s.s_times[i] <= s.r_times[i]
            if i:
                assert s.r_times[i - 1] <= s.s_times[i]


def test_degenerate_sigma_raises_domain_error():
    bad = DiffusionModel(lambda x: np.zeros_like(x),
                         lambda x: np.zeros_like(x), label="flat")
    with pytest.raises(DomainError):
        simulate_path(bad, _cfg(horizon=1.0), INDICATOR)


def test_hitting_trivial_at_target():
    m = ou(1.0)
    est = estimate_hitting_moment(m, _cfg(replicas=50), 0.5, 0.5, 1)
    assert est.estimate == 0.0 and est.stderr == 0.0


def test_excess_censoring():
    m = ou(1.0)
    with pytest.raises(ExcessCensoringError):
        estimate_hitting_moment(m, _cfg(horizon=0.05, replicas=100),
                                0.0, 3.5, 1)


def test_brownian_exit_moments_vs_closed_forms():
    bm = brownian()
    cfg = _cfg(replicas=4000, horizon=15.0, a=0.0, b=1.0, crossing="bridge")
    e1, e2 = estimate_hitting_moments(bm, cfg, 0.5, 0.0, (1, 2),
                                      second_target=1.0)
    assert abs(e1.estimate - 0.25) <= 3.5 * e1.stderr
    assert abs(e2.estimate - 5.0 / 48.0) <= 3.5 * e2.stderr
    assert e1.censored_fraction == 0.0


def test_ou_exit_mean_vs_quadrature():
    from ergodiff.kac import mean_exit_time
    m = ou(1.0)
    cfg = _cfg(replicas=4000, horizon=15.0, a=-1.0, b=1.0, initial=0.0,
               crossing="bridge", seed=13)
    est = estimate_hitting_moment(m, cfg, 0.0, -1.0, 1, second_target=1.0)
    assert abs(est.estimate - mean_exit_time(m, -1.0, 1.0, 0.0)) \
        <= 3.0 * est.stderr


def test_step_halving_stability():
    # with bridge crossings, halving h moves the estimate by less than the
    # combined statistical resolution
    m = ou(1.0)
    kw = dict(replicas=4000, horizon=15.0, crossing="bridge", initial=0.5)
    e1 = estimate_hitting_moment(m, _cfg(step=2e-3, **kw), 0.5, 0.0, 1)
    e2 = estimate_hitting_moment(m, _cfg(step=1e-3, **kw), 0.5, 0.0, 1)
    assert abs(e1.estimate - e2.estimate) <= 2.0 * (e1.stderr + e2.stderr)


def test_shared_sample_orders_consistent():
    m = ou(1.0)
    ests = estimate_hitting_moments(m, _cfg(replicas=500, initial=1.0),
                                    1.0, 0.0, (1, 2))
    assert ests[0].order == 1 and ests[1].order == 2
    # Jensen: E T^2 >= (E T)^2 on the same sample
    assert ests[1].estimate >= ests[0].estimate ** 2 - 1e-9


def test_counting_self_consistency():
    # N_T / T from a batch matches the cycle rate from an independent,
    # longer run within 3 combined standard errors
    m = ou(1.0)
    short = estimate_constants(m, _cfg(replicas=120, horizon=60.0),
                               INDICATOR, 2.0)
    long_ = estimate_constants(m, _cfg(replicas=60, horizon=150.0, seed=77),
                               INDICATOR, 2.0)
    se = math.hypot(short.l_hat.se, long_.l_hat.se)
    assert abs(short.l_hat.value - long_.l_hat.value) <= 3.0 * se


def test_insufficient_cycles():
    m = ou(1.0)
    with pytest.raises(InsufficientCyclesError):
        estimate_constants(m, _cfg(replicas=30, horizon=1.0), INDICATOR, 2.0)


def test_constants_trivial_f_zero():
    m = ou(1.0)
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    est = estimate_constants(m, _cfg(replicas=60, horizon=60.0), zero, 2.0)
    assert est.mu_f_hat.value == 0.0
    assert est.c_f_hat.value == 0.0


def test_cycle_moment_growth_bound():
    # empirical first-block moments obey E(int_0^R1 |f|)^n <= n! c_f^n
    # up to statistical slack
    m = ou(1.0)
    cfg = _cfg(replicas=400, horizon=60.0, initial=0.0)
    batch = simulate_paths(m, cfg, INDICATOR)
    fb = np.array([s.first_block_abs for s in batch.samples])
    fb = fb[np.isfinite(fb)]
    est = estimate_constants(m, cfg, INDICATOR, 2.0)
    c_f = est.c_f_hat.value + 3.0 * est.c_f_hat.se
    for n in (1, 2, 3):
        mean_n = float(np.mean(fb ** n))
        se_n = float(np.std(fb ** n) / math.sqrt(fb.size))
        assert mean_n - 3 * se_n <= math.factorial(n) * c_f ** n


def test_numerical_blowup_guard():
    outward = DiffusionModel(lambda x: np.asarray(x, dtype=float),
                             lambda x: np.ones_like(np.asarray(x, dtype=float)),
                             label="outward")
    from ergodiff.errors import NumericalBlowupError
    with pytest.raises(NumericalBlowupError):
        simulate_path(outward, _cfg(horizon=20.0, initial=5.0,
                                    blowup_guard=1e4), INDICATOR)


def test_monte_carlo_matches_recursion_fifth_point():
    # one more grid point for the analytic-vs-simulated agreement, at
    # desk scale (the four heavy points live in the acceptance suite)
    from ergodiff.kac import hitting_moment_table
    m = ou(1.0)
    x0 = 0.75
    tbl = hitting_moment_table(m, 0.0, "from_above", np.array([x0]), 2)
    cfg = _cfg(replicas=20000, horizon=25.0, initial=x0, crossing="bridge",
               seed=31)
    ests = estimate_hitting_moments(m, cfg, x0, 0.0, (1, 2))
    for k, est in zip((1, 2), ests):
        assert abs(est.estimate - tbl.order(k)[0]) <= 3.0 * est.stderr


def test_deviation_prob_trend_in_t():
    # empirical deviation frequencies fall with t, up to confidence slack
    m = ou(1.0)
    cfg = _cfg(replicas=400, horizon=60.0)
    emp = estimate_deviation_prob(m, cfg, INDICATOR, [10.0, 60.0], [0.1],
                                  mu_f=0.5205)
    slack = emp.halfwidth[0, 0] + emp.halfwidth[1, 0]
    assert emp.freq[1, 0] <= emp.freq[0, 0] + slack


def test_deviation_prob_impossible_epsilon():
    m = ou(1.0)
    cfg = _cfg(replicas=120, horizon=10.0)
    emp = estimate_deviation_prob(m, cfg, INDICATOR, [5.0, 10.0],
                                  [0.5, 2.5], mu_f=0.5205)
    assert np.all(emp.freq[:, 1] == 0.0)  # eps > 2 sup|f| is impossible


def test_deviation_prob_validation():
    m = ou(1.0)
    with pytest.raises(ConfigError):
        estimate_deviation_prob(m, _cfg(replicas=120), INDICATOR, [],
                                [0.1], 0.5)
    with pytest.raises(ConfigError):
        estimate_deviation_prob(m, _cfg(replicas=120, horizon=5.0), INDICATOR,
                                [10.0], [0.1], 0.5)
    with pytest.raises(ConfigError):
        estimate_deviation_prob(m, _cfg(replicas=10), INDICATOR, [5.0],
                                [0.1], 0.5)


def test_determinism_same_seed_and_threads():
    m = ou(1.0)
    cfg1 = _cfg(replicas=300, horizon=10.0)
    cfg8 = dataclasses.replace(cfg1, threads=8)
    b1 = simulate_paths(m, cfg1, INDICATOR, checkpoints=[5.0, 10.0])
    b2 = simulate_paths(m, cfg1, INDICATOR, checkpoints=[5.0, 10.0])
    b8 = simulate_paths(m, cfg8, INDICATOR, checkpoints=[5.0, 10.0])
    assert np.array_equal(b1.additive_at, b2.additive_at)
    assert np.array_equal(b1.additive_at, b8.additive_at)
    for s1, s8 in zip(b1.samples, b8.samples):
        assert np.array_equal(s1.r_times, s8.r_times)
        assert np.array_equal(s1.cycle_integrals, s8.cycle_integrals)


def test_replica_streams_are_prefix_stable():
    # replica r's path depends only on (seed, r): adding replicas must not
    # change existing ones
    m = ou(1.0)
    small = simulate_paths(m, _cfg(replicas=40, horizon=8.0), INDICATOR)
    large = simulate_paths(m, _cfg(replicas=90, horizon=8.0), INDICATOR)
    for s, l in zip(small.samples, large.samples[:40]):
        assert np.array_equal(s.r_times, l.r_times)
        assert s.additive_integral == l.additive_integral


def test_different_seed_changes_paths():
    m = ou(1.0)
    b1 = simulate_paths(m, _cfg(replicas=20, horizon=5.0), INDICATOR)
    b2 = simulate_paths(m, _cfg(replicas=20, horizon=5.0, seed=10), INDICATOR)
    assert not all(np.array_equal(x.r_times, y.r_times)
                   for x, y in zip(b1.samples, b2.samples))


def test_nu_moment_estimate():
    est = nu_moment_estimate(InitialLaw.uniform(-1.0, 1.0), 1.0, n=40000)
    assert est.value == pytest.approx(0.5, abs=4 * est.se + 1e-3)


def test_samples_csv(tmp_path):
    m = ou(1.0)
    batch = simulate_paths(m, _cfg(replicas=5, horizon=20.0), INDICATOR)
    path = tmp_path / "samples.csv"
    write_samples_csv(batch.samples, path, header_extra="unit test")
    lines = path.read_text().splitlines()
    assert lines[0] == "# unit test"
    assert lines[1].startswith("replica,cycle,")
    assert len(lines) > 3
