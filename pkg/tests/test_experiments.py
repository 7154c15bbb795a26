import io
import json
import math

import numpy as np
import pytest

from screenmatch import (
    ConfigError,
    ConstraintSpec,
    DistributionSpec,
    Instance,
    Item,
    ThresholdsPolicy,
    concentration_experiment,
    convergence_experiment,
    lower_bound_distribution,
    quantile_policy_net,
    run_trials,
    sample_instance,
)
from screenmatch.experiments import (
    CSV_COLUMNS,
    ExperimentConfig,
    _conv_trial_stats,
    _net_thresholds_1d,
    trial_stats_row,
    write_aggregates_csv,
    write_records_jsonl,
)

D1 = DistributionSpec("single-property-uniform", 1)


def greedy_cfg(**kw):
    base = dict(
        scenario="unit",
        dist=D1,
        spec=ConstraintSpec((2,)),
        n=100,
        delta=0.1,
        trials=10,
        seed=7,
        algorithm="greedy",
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfigValidation:
    def test_unknown_algorithm(self):
        with pytest.raises(ConfigError):
            greedy_cfg(algorithm="magic")

    def test_trials_positive(self):
        with pytest.raises(ConfigError):
            greedy_cfg(trials=0)

    def test_n_at_least_k(self):
        with pytest.raises(ConfigError):
            greedy_cfg(n=1)

    def test_policy_fixed_needs_policy(self):
        with pytest.raises(ConfigError):
            greedy_cfg(algorithm="policy-fixed")
        greedy_cfg(algorithm="policy-fixed", policy=ThresholdsPolicy((0.5,)))

    def test_policy_only_for_policy_fixed(self):
        with pytest.raises(ConfigError):
            greedy_cfg(policy=ThresholdsPolicy((0.5,)))

    def test_dimension_mismatch(self):
        with pytest.raises(ConfigError):
            greedy_cfg(dist=DistributionSpec("disjoint-properties-uniform", 2))

    def test_pipeline_needs_open_delta(self):
        with pytest.raises(ConfigError):
            greedy_cfg(algorithm="pipeline-exact-opt", delta=0.0)


class TestRunTrials:
    def test_deterministic_records(self):
        cfg = greedy_cfg(trials=5)
        assert run_trials(cfg) == run_trials(cfg)

    def test_aggregates_recomputable_from_records(self):
        stats = run_trials(greedy_cfg(trials=30))
        rs = stats.records
        agg = stats.aggregates
        retained = [r.retained for r in rs]
        assert agg.mean_retained == pytest.approx(np.mean(retained))
        assert agg.std_retained == pytest.approx(np.std(retained, ddof=1))
        assert agg.min_retained == min(retained)
        assert agg.max_retained == max(retained)
        assert agg.success_rate == pytest.approx(
            sum(r.success for r in rs) / len(rs)
        )
        assert 0.0 <= agg.success_rate <= 1.0

    def test_single_trial_std_is_zero(self):
        stats = run_trials(greedy_cfg(trials=1))
        assert stats.aggregates.std_retained == 0.0

    def test_worker_count_does_not_change_results(self, monkeypatch):
        import screenmatch.experiments as mod

        monkeypatch.setattr(mod, "_BLOCK", 7)
        cfg = greedy_cfg(trials=40)
        assert run_trials(cfg, workers=1) == run_trials(cfg, workers=4)

    def test_greedy_mean_retention_matches_harmonic_sum(self):
        # k=1, warmup 0: expectation is H_n
        n, trials = 200, 400
        cfg = greedy_cfg(spec=ConstraintSpec((1,)), n=n, delta=0.0, trials=trials, seed=29)
        stats = run_trials(cfg)
        h_n = sum(1 / i for i in range(1, n + 1))
        assert stats.aggregates.mean_retained == pytest.approx(h_n, abs=0.5)

    def test_pipeline_keeps_fewer_than_greedy(self):
        spec = ConstraintSpec((5,))
        shared = dict(dist=D1, spec=spec, n=1000, delta=0.01, trials=60, seed=88)
        g = run_trials(ExperimentConfig(scenario="g", algorithm="greedy", **shared))
        p = run_trials(
            ExperimentConfig(scenario="p", algorithm="pipeline-exact-opt", **shared)
        )
        assert p.aggregates.mean_retained < g.aggregates.mean_retained
        assert p.records[0].retained_after_policy is not None

    def test_policy_fixed_algorithm(self):
        cfg = greedy_cfg(
            algorithm="policy-fixed", policy=ThresholdsPolicy((0.8,)), trials=20
        )
        stats = run_trials(cfg)
        # uniform values: about a fifth of the stream passes t=0.8
        assert 0.1 * cfg.n < stats.aggregates.mean_retained < 0.3 * cfg.n


class TestConcentration:
    def test_degenerate_single_item(self):
        # k=1, n=1: OPT is one uniform draw; std must match 1/sqrt(12)
        stats = concentration_experiment(D1, ConstraintSpec((1,)), 1, 2000, 5)
        assert stats.std == pytest.approx(1 / math.sqrt(12), abs=0.01)
        assert stats.mean == pytest.approx(0.5, abs=0.03)

    def test_tail_rows_dominated_by_bound(self):
        stats = concentration_experiment(D1, ConstraintSpec((3,)), 60, 800, 6)
        for row in stats.tail:
            se = math.sqrt(row.bound * (1 - row.bound) / stats.trials)
            assert row.exceed_rate <= row.bound + 3 * max(se, 1e-3)
            assert row.bound == pytest.approx(row.delta_prime)

    def test_trials_validated(self):
        with pytest.raises(ConfigError):
            concentration_experiment(D1, ConstraintSpec((1,)), 5, 0, 1)


class TestConvergence:
    def _uniform_train(self, n, seed):
        rng = np.random.default_rng(seed)
        return Instance(tuple(Item(i, {0: float(v)}) for i, v in enumerate(rng.random(n))))

    def test_columnar_route_matches_generic_route(self):
        spec = ConstraintSpec((2,))
        train = self._uniform_train(300, 13)
        net = quantile_policy_net(train, spec, 300, spec.k)
        thr = _net_thresholds_1d(net)
        for t in range(6):
            fast = _conv_trial_stats(D1, spec, 120, 31, "conv-cal", t, net, thr)
            slow = _conv_trial_stats(D1, spec, 120, 31, "conv-cal", t, net, None)
            assert np.array_equal(fast[0], slow[0])
            assert np.array_equal(fast[1], slow[1])
            np.testing.assert_allclose(fast[2], slow[2], rtol=0, atol=1e-9)

    def test_single_policy_net(self):
        net = [ThresholdsPolicy((0.0,))]
        stats = convergence_experiment(D1, ConstraintSpec((2,)), 50, 40, net, 3)
        # the zero policy keeps the whole stream, so counts never deviate
        assert stats.count_dev["max"] == 0.0
        assert stats.all_zero_retained_mean == 50.0
        assert stats.net_size == 1

    def test_estimator_sanity_vs_concentration(self):
        # the all-zero policy's expected value equals E[OPT]
        spec = ConstraintSpec((3,))
        n, trials = 100, 1500
        conc = concentration_experiment(D1, spec, n, trials, 41)
        train = self._uniform_train(400, 42)
        net = quantile_policy_net(train, spec, n, spec.k)
        conv = convergence_experiment(D1, spec, n, trials, net, 43)
        se = math.sqrt(
            (conc.std / math.sqrt(trials)) ** 2
            + (conv.all_zero_value_std / math.sqrt(trials)) ** 2
        )
        assert abs(conv.all_zero_value_mean - conc.mean) <= 2 * se

    def test_empty_net_rejected(self):
        with pytest.raises(ConfigError):
            convergence_experiment(D1, ConstraintSpec((1,)), 10, 5, [], 1)

    def test_net_dimension_checked(self):
        with pytest.raises(ConfigError):
            convergence_experiment(
                D1, ConstraintSpec((1,)), 10, 5, [ThresholdsPolicy((0.0, 0.0))], 1
            )


class TestLowerBound:
    def test_d1_has_single_class(self):
        dist = lower_bound_distribution(1)
        inst = sample_instance(dist, 500, 9)
        assert all(set(item.props) == {0} for item in inst)
        mean = np.mean([item.props[0] for item in inst])
        assert mean == pytest.approx(0.5, abs=0.06)

    def test_class_frequencies(self):
        dist = lower_bound_distribution(4)
        inst = sample_instance(dist, 100_000, 9)
        freq = sum(1 for item in inst if 0 in item.props) / inst.n
        assert freq == pytest.approx(0.25, abs=0.01)

    def test_section_scenario_config_is_valid(self):
        d = 3
        cfg = ExperimentConfig(
            scenario="lb",
            dist=lower_bound_distribution(d),
            spec=ConstraintSpec((1,) * d),
            n=30,
            delta=0.1,
            trials=2,
            seed=1,
        )
        run_trials(cfg)


class TestEmission:
    def test_csv_header_and_blank_cells(self):
        cfg = greedy_cfg(trials=3)
        stats = run_trials(cfg)
        buf = io.StringIO()
        write_aggregates_csv(buf, [trial_stats_row(cfg, stats)])
        lines = buf.getvalue().splitlines()
        assert lines[0] == (
            "scenario,n,k,d,delta,trials,mean_retained,std_retained,"
            "success_rate,mean_opt,std_opt,max_dev_count,max_dev_value"
        )
        cells = lines[1].split(",")
        assert len(cells) == len(CSV_COLUMNS)
        assert cells[-2:] == ["", ""]

    def test_records_jsonl_parses(self):
        stats = run_trials(greedy_cfg(trials=4))
        buf = io.StringIO()
        write_records_jsonl(buf, stats.records)
        rows = [json.loads(line) for line in buf.getvalue().splitlines()]
        assert [r["trial"] for r in rows] == [0, 1, 2, 3]
        assert all(isinstance(r["success"], bool) for r in rows)
