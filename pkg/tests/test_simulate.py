import math

import numpy as np
import pytest

from ehaoi.policy import MonotonicityError, SystemParams, ThresholdPolicy
from ehaoi.renewal import average_age
from ehaoi.simulate import SimulationConfig, replication_seed, simulate

B2 = SystemParams(1.0, 2)
B2_POLICY = ThresholdPolicy((1.5, 0.72))


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {},
            {"horizon": 1.0, "cycle_count": 5},
            {"horizon": -1.0},
            {"horizon": math.inf},
            {"cycle_count": 0},
            {"horizon": 10.0, "replications": 0},
            {"horizon": 10.0, "seed": -1},
            {"horizon": 10.0, "warmup": -1.0},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SimulationConfig(**kwargs)

    def test_zero_effective_horizon(self):
        with pytest.raises(ValueError, match="effective horizon"):
            simulate(B2, B2_POLICY, SimulationConfig(horizon=10.0, warmup=10.0))

    @pytest.mark.parametrize("level", [-1, 3])
    def test_initial_battery_range(self, level):
        with pytest.raises(ValueError):
            simulate(B2, B2_POLICY, SimulationConfig(horizon=10.0, initial_battery=level))

    def test_invalid_policy(self):
        with pytest.raises(MonotonicityError):
            simulate(B2, ThresholdPolicy((0.1, 0.5)), SimulationConfig(horizon=10.0))


def test_replication_seeds_are_distinct():
    seeds = {replication_seed(7, k) for k in range(1000)}
    assert len(seeds) == 1000
    assert replication_seed(7, 3) == replication_seed(7, 3)


class TestReproducibility:
    def test_same_seed_same_result(self):
        cfg = SimulationConfig(horizon=2e4, seed=11, replications=3)
        a = simulate(B2, B2_POLICY, cfg)
        b = simulate(B2, B2_POLICY, cfg)
        assert a == b

    def test_workers_do_not_change_the_answer(self):
        a = simulate(B2, B2_POLICY, SimulationConfig(horizon=2e4, seed=3, replications=4))
        b = simulate(B2, B2_POLICY, SimulationConfig(horizon=2e4, seed=3, replications=4, workers=4))
        assert a == b

    def test_seed_changes_the_answer(self):
        a = simulate(B2, B2_POLICY, SimulationConfig(horizon=2e4, seed=1))
        b = simulate(B2, B2_POLICY, SimulationConfig(horizon=2e4, seed=2))
        assert a.estimate != b.estimate
        assert math.isnan(a.std_error)


@pytest.fixture(scope="module")
def long_run():
    return simulate(B2, B2_POLICY, SimulationConfig(horizon=4e5, seed=2024, replications=6))


class TestConsistency:
    def test_estimate(self, long_run):
        exact = average_age(B2, B2_POLICY).avg_age
        assert abs(long_run.estimate - exact) <= 3 * long_run.std_error
        assert long_run.estimate == pytest.approx(0.72, abs=0.01)

    def test_state_frequencies(self, long_run):
        # about 2e6 pooled cycles, so sampling error is well under 1e-3
        pi = average_age(B2, B2_POLICY).stationary
        assert np.allclose(long_run.state_frequencies, pi, atol=5e-3)

    def test_transition_frequencies(self, long_run):
        p = average_age(B2, B2_POLICY).extras["transition"]
        counts = long_run.transition_counts
        emp = counts / counts.sum(axis=1, keepdims=True)
        assert np.max(np.abs(emp - p)) < 0.01

    def test_conditional_means(self, long_run):
        exact = average_age(B2, B2_POLICY)
        for j in range(2):
            n = long_run.state_counts[j]
            var = exact.cond_second[j] - exact.cond_mean[j] ** 2
            assert abs(long_run.cond_mean[j] - exact.cond_mean[j]) <= 4 * math.sqrt(var / n)

    def test_energy_balance(self, long_run):
        for initial, stored, fires, final in long_run.energy_balance:
            assert initial + stored - fires == final
            assert 0 <= final <= B2.battery


class TestModes:
    def test_fire_on_every_arrival(self):
        res = simulate(SystemParams(2.0, 1), ThresholdPolicy((0.0,)), SimulationConfig(horizon=1e5, replications=4))
        assert abs(res.estimate - 0.5) <= 4 * res.std_error
        assert res.lost_energy == 0

    def test_cycle_mode_matches_renewal_value(self):
        params, policy = SystemParams(1.0, 3), ThresholdPolicy((2.0, 1.0, 0.6))
        res = simulate(params, policy, SimulationConfig(cycle_count=100_000, seed=9, replications=4))
        exact = average_age(params, policy)
        assert abs(res.estimate - exact.avg_age) <= 4 * res.std_error
        assert sum(res.state_counts) >= 4 * 100_000 - 4

    def test_empty_start_waits_for_energy(self):
        res = simulate(B2, B2_POLICY, SimulationConfig(horizon=1e4, initial_battery=0, warmup=0.0))
        assert res.updates > 0
        initial, stored, fires, final = res.energy_balance[0]
        assert initial == 0 and stored - fires == final

    def test_standard_error_shrinks_with_horizon(self):
        short = simulate(B2, B2_POLICY, SimulationConfig(horizon=2e4, seed=5, replications=16))
        long = simulate(B2, B2_POLICY, SimulationConfig(horizon=8e4, seed=5, replications=16))
        # four times the horizon should roughly halve the error
        assert 0.3 < long.std_error / short.std_error < 0.8

    def test_result_serialises(self):
        d = simulate(B2, B2_POLICY, SimulationConfig(horizon=1e3)).to_dict()
        assert d["std_error"] is None and len(d["state_frequencies"]) == 2
