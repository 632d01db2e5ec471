"""Tests for the replication harness, aggregates, and file exports."""

import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dnnate import (
    AteResult,
    ClipSpec,
    DgpConfig,
    ExperimentConfig,
    InvalidInputError,
    ReplicationError,
    TrainConfig,
    aggregate,
    coverage,
    default_outcome_arch,
    default_propensity_arch,
    kde,
    ks_normality,
    make_provenance,
    normal_quantile,
    run_experiment,
    run_oracle_replications,
    write_aggregate_csv,
    write_kde_csv,
    write_replications_jsonl,
)
from dnnate.checks import asymptotic_variance_mc


def tiny_config(replications=3, estimators=("split", "dr_split"), seed=404,
                activation="sigmoid"):
    p = 3
    return ExperimentConfig(
        dgp=DgpConfig(n=2, p=p),
        inference_n=10,
        train_ratio=1,
        estimators=tuple(estimators),
        outcome_arch=default_outcome_arch(p, activation),
        outcome_cfg=TrainConfig(epochs=2, batch_size=8),
        propensity_arch=default_propensity_arch(p, activation),
        propensity_cfg=TrainConfig(epochs=2, batch_size=8),
        replications=replications,
        master_seed=seed,
    )


class TestDefaultArchs:
    def test_outcome_arch_includes_treatment_input(self):
        arch = default_outcome_arch(50)
        assert arch.input_dim == 51
        assert arch.hidden == (51, 51, 51)

    def test_propensity_arch_covariates_only(self):
        arch = default_propensity_arch(50)
        assert arch.input_dim == 50
        assert arch.hidden == (51, 51, 51)

    def test_activation_passthrough(self):
        assert default_outcome_arch(3, "relu").activation == "relu"


class TestExperimentConfigValidation:
    def test_valid_config_accepted(self):
        tiny_config()

    def test_inference_n_bounds(self):
        with pytest.raises(InvalidInputError):
            ExperimentConfig(DgpConfig(n=2, p=3), 1, 1, ("split",),
                             default_outcome_arch(3), TrainConfig(epochs=1))

    def test_unknown_estimator(self):
        with pytest.raises(InvalidInputError):
            ExperimentConfig(DgpConfig(n=2, p=3), 10, 1, ("plugin",),
                             default_outcome_arch(3), TrainConfig(epochs=1))

    def test_dr_split_needs_propensity_arch(self):
        with pytest.raises(InvalidInputError):
            ExperimentConfig(DgpConfig(n=2, p=3), 10, 1, ("dr_split",),
                             default_outcome_arch(3), TrainConfig(epochs=1),
                             propensity_arch=None)

    def test_ci_level_range(self):
        with pytest.raises(InvalidInputError):
            ExperimentConfig(DgpConfig(n=2, p=3), 10, 1, ("split",),
                             default_outcome_arch(3), TrainConfig(epochs=1),
                             ci_level=1.5)


class TestAggregate:
    def test_goldens(self):
        agg = aggregate([0.0, 1.0, 2.0, 3.0], tau_true=1.0)
        assert agg["mean"] == 1.5
        assert agg["median"] == 1.5
        assert_allclose(agg["sd"], math.sqrt(5.0 / 3.0), rtol=1e-15)
        assert agg["mse"] == 1.5

    def test_single_estimate_has_zero_sd(self):
        agg = aggregate([2.0], tau_true=1.0)
        assert agg["sd"] == 0.0
        assert agg["mse"] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            aggregate([], 1.0)


class TestCoverage:
    def _result(self, lo, hi):
        return AteResult(0.5 * (lo + hi), 1.0, 10, "dr", 0.95, lo, hi)

    def test_fraction(self):
        results = [self._result(0.5, 1.5), self._result(2.0, 3.0),
                   self._result(0.9, 1.1), self._result(-1.0, 0.5)]
        assert coverage(results, 1.0) == 0.5

    def test_boundary_counts_as_covered(self):
        assert coverage([self._result(1.0, 2.0)], 1.0) == 1.0

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            coverage([], 1.0)


class TestKsNormality:
    def test_normal_quantile_sample_has_tiny_statistic(self):
        n = 1000
        probs = (np.arange(1, n + 1) - 0.5) / n
        sample = np.array([normal_quantile(p) for p in probs])
        ks = ks_normality(sample, center=0.0, scale=1.0)
        assert ks["statistic"] < 0.01
        assert ks["p_value"] > 0.5

    def test_shifted_sample_rejected(self):
        rng = np.random.default_rng(10)
        sample = rng.normal(loc=3.0, size=500)
        ks = ks_normality(sample, center=0.0, scale=1.0)
        assert ks["p_value"] < 1e-6

    def test_size_under_null(self):
        """With true center/scale the test should reject ~1% at p > 0.01."""
        rng = np.random.default_rng(2024)
        passes = sum(
            ks_normality(rng.normal(size=100), 0.0, 1.0)["p_value"] > 0.01
            for _ in range(100)
        )
        assert passes >= 95

    def test_needs_twenty_estimates(self):
        with pytest.raises(InvalidInputError):
            ks_normality(np.zeros(19), 0.0, 1.0)

    def test_positive_scale_required(self):
        with pytest.raises(InvalidInputError):
            ks_normality(np.zeros(25), 0.0, 0.0)


class TestKde:
    def test_shape_and_grid_span(self):
        v = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        out = kde(v, grid_points=101)
        assert out.shape == (101, 2)
        h = 1.06 * np.std(v, ddof=1) * 5 ** (-0.2)
        assert_allclose(out[0, 0], -2.0 - 3 * h, rtol=1e-12)
        assert_allclose(out[-1, 0], 2.0 + 3 * h, rtol=1e-12)

    def test_density_integrates_to_one(self):
        rng = np.random.default_rng(11)
        out = kde(rng.normal(size=400), grid_points=512)
        mass = np.trapezoid(out[:, 1], out[:, 0])
        assert abs(mass - 1.0) < 1e-3

    def test_symmetric_sample_gives_symmetric_density(self):
        v = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        out = kde(v, grid_points=101)
        assert_allclose(out[:, 1], out[::-1, 1], rtol=1e-10)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(InvalidInputError):
            kde([1.0])
        with pytest.raises(InvalidInputError):
            kde(np.full(10, 3.0))
        with pytest.raises(InvalidInputError):
            kde([0.0, 1.0], grid_points=1)


class TestOracleReplications:
    def test_split_oracle_is_exact(self):
        results = run_oracle_replications(n=50, replications=5, master_seed=1,
                                          estimator="split", p=3)
        assert len(results) == 5
        for res in results:
            assert res.estimate == 1.0
            assert res.variance == 0.0
            assert res.method == "split"

    def test_dr_oracle_determinism(self):
        a = run_oracle_replications(n=100, replications=4, master_seed=2,
                                    estimator="dr", p=3)
        b = run_oracle_replications(n=100, replications=4, master_seed=2,
                                    estimator="dr", p=3)
        assert [r.estimate for r in a] == [r.estimate for r in b]
        c = run_oracle_replications(n=100, replications=4, master_seed=3,
                                    estimator="dr", p=3)
        assert [r.estimate for r in a] != [r.estimate for r in c]

    def test_dr_oracle_varies_across_replications(self):
        results = run_oracle_replications(n=100, replications=6, master_seed=4,
                                          estimator="dr", p=3)
        assert len({r.estimate for r in results}) == 6

    def test_dr_oracle_mean_and_coverage(self):
        results = run_oracle_replications(n=500, replications=200,
                                          master_seed=5, estimator="dr", p=5)
        estimates = np.array([r.estimate for r in results])
        assert abs(estimates.mean() - 1.0) < 0.035
        assert 0.88 <= coverage(results, 1.0) <= 1.0

    def test_dr_oracle_matches_asymptotic_variance(self):
        results = run_oracle_replications(n=500, replications=400,
                                          master_seed=6, estimator="dr", p=5)
        empirical = np.var([r.estimate for r in results], ddof=1) * 500
        formula = asymptotic_variance_mc(draws=200_000, seed=7)["dr"]
        assert abs(empirical / formula - 1.0) < 0.2

    def test_unknown_estimator_rejected(self):
        with pytest.raises(InvalidInputError):
            run_oracle_replications(n=50, replications=2, master_seed=0,
                                    estimator="plugin")


class TestRunExperiment:
    def test_report_structure(self):
        cfg = tiny_config(replications=3)
        report = run_experiment(cfg)
        assert set(report.results) == {"split", "dr_split"}
        for est in cfg.estimators:
            assert len(report.results[est]) == 3
            agg = report.aggregates[est]
            assert set(agg) == {"mean", "median", "sd", "mse", "coverage",
                                "ks_stat", "ks_p"}
            assert agg["ks_p"] is None  # fewer than 20 replications

    def test_replication_methods_are_labeled(self):
        report = run_experiment(tiny_config(replications=2))
        assert all(r.method == "split" for r in report.results["split"])
        assert all(r.method == "dr_split" for r in report.results["dr_split"])

    def test_deterministic_across_runs(self):
        cfg = tiny_config(replications=3)
        a = run_experiment(cfg)
        b = run_experiment(cfg)
        for est in cfg.estimators:
            assert ([r.estimate for r in a.results[est]]
                    == [r.estimate for r in b.results[est]])

    def test_worker_count_does_not_change_results(self):
        cfg = tiny_config(replications=3)
        serial = run_experiment(cfg, workers=1)
        parallel = run_experiment(cfg, workers=2)
        for est in cfg.estimators:
            assert ([r.estimate for r in serial.results[est]]
                    == [r.estimate for r in parallel.results[est]])
            assert serial.aggregates[est] == parallel.aggregates[est]

    def test_master_seed_changes_results(self):
        a = run_experiment(tiny_config(replications=2, seed=1))
        b = run_experiment(tiny_config(replications=2, seed=2))
        assert ([r.estimate for r in a.results["split"]]
                != [r.estimate for r in b.results["split"]])

    def test_single_replication_degenerates_gracefully(self):
        report = run_experiment(tiny_config(replications=1))
        agg = report.aggregates["split"]
        assert agg["sd"] == 0.0
        assert agg["ks_p"] is None

    def test_replication_failures_carry_index(self):
        cfg = tiny_config(replications=2)
        # propensity arch with the wrong input width fails inside the rep
        bad = ExperimentConfig(
            dgp=cfg.dgp, inference_n=cfg.inference_n, train_ratio=cfg.train_ratio,
            estimators=("dr_split",), outcome_arch=cfg.outcome_arch,
            outcome_cfg=cfg.outcome_cfg,
            propensity_arch=default_propensity_arch(7),
            propensity_cfg=cfg.propensity_cfg, replications=2, master_seed=0)
        with pytest.raises(ReplicationError) as err:
            run_experiment(bad)
        assert err.value.replication == 0

    def test_split_only_config_skips_propensity(self):
        p = 3
        cfg = ExperimentConfig(
            dgp=DgpConfig(n=2, p=p), inference_n=10, train_ratio=1,
            estimators=("split",), outcome_arch=default_outcome_arch(p),
            outcome_cfg=TrainConfig(epochs=1, batch_size=8), replications=2,
            master_seed=7)
        report = run_experiment(cfg)
        assert set(report.results) == {"split"}


class TestExports:
    def _report(self, replications=25):
        return run_experiment(tiny_config(replications=replications))

    def test_aggregate_csv_layout(self, tmp_path):
        report = run_experiment(tiny_config(replications=3))
        path = tmp_path / "aggregate.csv"
        write_aggregate_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# tool=dnnate/")
        assert "rng=" in lines[0] and "config_sha256=" in lines[0]
        assert lines[1] == "n1,estimator,activation,mean,median,sd,mse,coverage,ks_p"
        assert len(lines) == 2 + len(report.config.estimators)
        row = lines[2].split(",")
        assert row[0] == "10"  # train_ratio * inference_n
        assert row[1] == "split"
        assert row[2] == "sigmoid"
        assert float(row[3]) == report.aggregates["split"]["mean"]
        assert row[8] == ""  # no KS p-value below 20 replications

    def test_aggregate_csv_provenance_override(self, tmp_path):
        report = run_experiment(tiny_config(replications=2))
        path = tmp_path / "agg.csv"
        prov = make_provenance(99, "f" * 64)
        write_aggregate_csv(report, path, provenance=prov)
        assert path.read_text().splitlines()[0] == f"# {prov}"

    def test_replications_jsonl_records(self, tmp_path):
        report = run_experiment(tiny_config(replications=3))
        path = tmp_path / "reps.jsonl"
        write_replications_jsonl(report, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1 + 3 * 2
        head = json.loads(lines[0])
        assert "provenance" in head
        rec = json.loads(lines[1])
        assert rec["replication"] == 0
        assert rec["estimator"] in ("split", "dr_split")
        for key in ("estimate", "variance", "ci_lo", "ci_hi", "flags"):
            assert key in rec

    def test_kde_csv_layout(self, tmp_path):
        report = run_experiment(tiny_config(replications=5))
        path = tmp_path / "kde.csv"
        write_kde_csv(report, "split", path, grid_points=64)
        lines = path.read_text().splitlines()
        assert lines[1] == "x,density"
        assert len(lines) == 2 + 64

    def test_exports_are_byte_deterministic(self, tmp_path):
        report = run_experiment(tiny_config(replications=3))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_aggregate_csv(report, a)
        write_aggregate_csv(report, b)
        assert a.read_bytes() == b.read_bytes()
        ja, jb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_replications_jsonl(report, ja)
        write_replications_jsonl(report, jb)
        assert ja.read_bytes() == jb.read_bytes()

    def test_float_formatting_round_trips(self, tmp_path):
        report = run_experiment(tiny_config(replications=3))
        path = tmp_path / "agg.csv"
        write_aggregate_csv(report, path)
        for line, est in zip(path.read_text().splitlines()[2:],
                             report.config.estimators):
            cells = line.split(",")
            agg = report.aggregates[est]
            assert float(cells[3]) == agg["mean"]
            assert float(cells[6]) == agg["mse"]
