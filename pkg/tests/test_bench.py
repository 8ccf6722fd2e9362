import json
from pathlib import Path

import numpy as np
import pytest

from moqubo import (
    BenchConfigError,
    ExperimentConfig,
    Method,
    ReferencePoint,
    RunReport,
    ScalariseConfig,
    SolverParams,
    derive_reference_point,
    export_eaf,
    run_experiment,
    save_instance,
    summarize,
)
from moqubo.bench import method_label, scalarise_config_for

from conftest import random_instance


def params(seed=0, **overrides):
    defaults = dict(iterations=300, replicas=2, top_k=4, seed=seed)
    defaults.update(overrides)
    return SolverParams(**defaults)


def report(method="uniform", run_index=0, hv=1.0, nd=None, fronts=((1.0, 3.0),),
           cost_max=None, instance="toy", weights=((1.0, 0.0),)):
    fronts = tuple(tuple(f) for f in fronts)
    if cost_max is None:
        cost_max = tuple(np.max(fronts, axis=0))
    from moqubo import WeightVector

    return RunReport(
        instance=instance,
        method=method,
        run_index=run_index,
        seed=0,
        weights=tuple(WeightVector(w) for w in weights),
        front_costs=fronts,
        front_bits=tuple("0" * 4 for _ in fronts),
        cost_max=cost_max,
        hv=hv,
        nd_count=nd if nd is not None else len(fronts),
        wall_ms=1,
    )


@pytest.fixture
def tiny_instance_path(tmp_path):
    inst = random_instance(8, 2, seed=30, coeff_range=20)
    path = tmp_path / "toy.dat"
    save_instance(inst, path)
    return path


class TestDeriveReferencePoint:
    def test_max_plus_margin(self):
        r = report(fronts=((1.0, 3.0), (2.0, 2.0)))
        assert derive_reference_point([r]).bounds == (3.0, 4.0)

    def test_uses_prefilter_union(self):
        # cost_max may exceed the filtered front's maxima
        r = report(fronts=((1.0, 3.0),), cost_max=(10.0, 12.0))
        assert derive_reference_point([r]).bounds == (11.0, 13.0)

    def test_across_runs(self):
        runs = [
            report(run_index=0, fronts=((1.0, 5.0),)),
            report(run_index=1, fronts=((4.0, 2.0),)),
        ]
        assert derive_reference_point(runs).bounds == (5.0, 6.0)

    def test_empty_is_error(self):
        with pytest.raises(ValueError):
            derive_reference_point([])


class TestRunExperiment:
    def test_single_uniform_run(self, tiny_instance_path, tmp_path):
        config = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(ScalariseConfig(Method.UNIFORM, 10, params()),),
            runs=1,
            base_seed=7,
            output_dir=tmp_path / "out",
        )
        result = run_experiment(config)
        assert len(result.reports) == 1
        assert len(result.reports[0].weights) == 10
        assert result.reports[0].nd_count == len(result.reports[0].front_costs)
        assert (tmp_path / "out" / "reports.jsonl").exists()
        assert (tmp_path / "out" / "fronts" / "uniform_run000.csv").exists()

    def test_shared_reference_across_methods(self, tiny_instance_path, tmp_path):
        config = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(
                ScalariseConfig(Method.UNIFORM, 10, params()),
                ScalariseConfig(Method.AVERAGES, 10, params()),
                ScalariseConfig(Method.DICHOTOMIC, 10, params()),
            ),
            runs=2,
            base_seed=1,
            output_dir=tmp_path / "out",
        )
        result = run_experiment(config)
        assert len(result.reports) == 6
        lines = (tmp_path / "out" / "reports.jsonl").read_text().splitlines()
        meta = json.loads(lines[0])
        assert meta["type"] == "meta"
        assert tuple(meta["reference"]) == result.reference.bounds
        # reference derived from uniform runs only
        uniform_max = np.max(
            [r.cost_max for r in result.reports if r.method == "uniform"], axis=0
        )
        assert result.reference.bounds == tuple(uniform_max + 1.0)

    def test_explicit_reference_passthrough(self, tiny_instance_path, tmp_path):
        ref = ReferencePoint((5000.0, 5000.0))
        config = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(ScalariseConfig(Method.AVERAGES, 4, params()),),
            runs=1,
            base_seed=2,
            output_dir=tmp_path / "out",
            reference=ref,
        )
        result = run_experiment(config)
        assert result.reference.bounds == ref.bounds

    def test_derives_from_all_methods_without_uniform(self, tiny_instance_path, tmp_path):
        config = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(ScalariseConfig(Method.AVERAGES, 4, params()),),
            runs=2,
            base_seed=3,
            output_dir=tmp_path / "out",
        )
        result = run_experiment(config)
        all_max = np.max([r.cost_max for r in result.reports], axis=0)
        assert result.reference.bounds == tuple(all_max + 1.0)

    def test_determinism_byte_identical(self, tiny_instance_path, tmp_path):
        def once(tag):
            config = ExperimentConfig(
                instance_path=tiny_instance_path,
                methods=(
                    ScalariseConfig(Method.UNIFORM, 10, params()),
                    ScalariseConfig(Method.AVERAGES, 10, params()),
                ),
                runs=2,
                base_seed=99,
                output_dir=tmp_path / tag,
            )
            return config.output_dir, run_experiment(config)

        dir_a, res_a = once("a")
        dir_b, res_b = once("b")
        fronts_a = sorted((dir_a / "fronts").glob("*.csv"))
        fronts_b = sorted((dir_b / "fronts").glob("*.csv"))
        assert [p.name for p in fronts_a] == [p.name for p in fronts_b]
        for pa, pb in zip(fronts_a, fronts_b):
            assert pa.read_bytes() == pb.read_bytes()
        assert [r.hv for r in res_a.reports] == [r.hv for r in res_b.reports]

    def test_resume_skips_completed_cells(self, tiny_instance_path, tmp_path):
        config = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(ScalariseConfig(Method.UNIFORM, 10, params()),),
            runs=2,
            base_seed=5,
            output_dir=tmp_path / "out",
        )
        first = run_experiment(config)
        reports_file = tmp_path / "out" / "reports.jsonl"
        before = reports_file.read_bytes()
        second = run_experiment(config)
        assert reports_file.read_bytes() == before  # nothing re-executed
        assert len(second.reports) == len(first.reports)

    def test_resume_after_partial_completion(self, tiny_instance_path, tmp_path):
        out = tmp_path / "out"
        config1 = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(ScalariseConfig(Method.UNIFORM, 10, params()),),
            runs=1,
            base_seed=5,
            output_dir=out,
        )
        run_experiment(config1)
        config2 = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(ScalariseConfig(Method.UNIFORM, 10, params()),),
            runs=3,
            base_seed=5,
            output_dir=out,
        )
        result = run_experiment(config2)
        assert {r.run_index for r in result.reports} == {0, 1, 2}
        lines = [
            json.loads(line)
            for line in (out / "reports.jsonl").read_text().splitlines()
        ]
        assert sum(1 for rec in lines if rec["type"] == "run") == 3

    def test_resume_rejects_changed_base_seed(self, tiny_instance_path, tmp_path):
        out = tmp_path / "out"
        config = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(ScalariseConfig(Method.UNIFORM, 10, params()),),
            runs=1,
            base_seed=5,
            output_dir=out,
        )
        run_experiment(config)
        bad = ExperimentConfig(
            instance_path=tiny_instance_path,
            methods=(ScalariseConfig(Method.UNIFORM, 10, params()),),
            runs=1,
            base_seed=6,
            output_dir=out,
        )
        with pytest.raises(BenchConfigError, match="base_seed"):
            run_experiment(bad)

    def test_dichotomic_on_three_objectives_rejected(self, tmp_path):
        inst = random_instance(6, 3, seed=31)
        path = tmp_path / "m3.dat"
        save_instance(inst, path)
        config = ExperimentConfig(
            instance_path=path,
            methods=(ScalariseConfig(Method.DICHOTOMIC, 10, params()),),
            runs=1,
            base_seed=0,
            output_dir=tmp_path / "out",
        )
        with pytest.raises(BenchConfigError, match="m=2"):
            run_experiment(config)

    def test_runs_validated(self, tiny_instance_path, tmp_path):
        with pytest.raises(BenchConfigError, match="runs"):
            ExperimentConfig(
                instance_path=tiny_instance_path,
                methods=(ScalariseConfig(Method.UNIFORM, 10, params()),),
                runs=0,
                base_seed=0,
                output_dir=tmp_path / "out",
            )


class TestSummarize:
    def test_identical_sets_both_best(self):
        reports = [
            report(method="a", run_index=i, hv=float(v))
            for i, v in enumerate([10, 12, 11])
        ] + [
            report(method="b", run_index=i, hv=float(v))
            for i, v in enumerate([10, 12, 11])
        ]
        rows = {r.method: r for r in summarize(reports).rows}
        assert rows["a"].verdict == "best"
        assert rows["b"].verdict == "best"

    def test_degenerate_variance_significantly_worse(self):
        reports = [
            report(method="hi", run_index=i, hv=100.0) for i in range(20)
        ] + [
            report(method="lo", run_index=i, hv=50.0) for i in range(20)
        ]
        rows = {r.method: r for r in summarize(reports).rows}
        assert rows["hi"].verdict == "best"
        assert rows["lo"].verdict == "worse"
        assert rows["lo"].p_value == 0.0

    def test_table3_style_direction(self):
        # synthetic samples shaped like the first published comparison row:
        # N(1.73e11, 4.01e8^2) against N(1.74e11, 2.31e8^2), 20 draws each
        rng = np.random.default_rng(404)
        uniform_hv = rng.normal(1.73e11, 4.01e8, size=20)
        averages_hv = rng.normal(1.74e11, 2.31e8, size=20)
        reports = [
            report(method="uniform", run_index=i, hv=float(v))
            for i, v in enumerate(uniform_hv)
        ] + [
            report(method="avg-manhattan", run_index=i, hv=float(v))
            for i, v in enumerate(averages_hv)
        ]
        rows = {r.method: r for r in summarize(reports).rows}
        assert rows["avg-manhattan"].verdict == "best"
        assert rows["uniform"].verdict == "worse"
        assert rows["uniform"].p_value < 0.05

    def test_close_samples_not_worse(self):
        rng = np.random.default_rng(7)
        a = rng.normal(100.0, 5.0, size=20)
        b = a + rng.normal(0.0, 0.5, size=20)
        reports = [
            report(method="a", run_index=i, hv=float(v)) for i, v in enumerate(a)
        ] + [
            report(method="b", run_index=i, hv=float(v)) for i, v in enumerate(b)
        ]
        rows = {r.method: r for r in summarize(reports).rows}
        verdicts = {rows["a"].verdict, rows["b"].verdict}
        assert "best" in verdicts
        assert verdicts <= {"best", "not-worse"}

    def test_single_run_marks_suppressed(self):
        reports = [
            report(method="a", run_index=0, hv=10.0),
            report(method="b", run_index=0, hv=5.0),
        ]
        rows = {r.method: r for r in summarize(reports).rows}
        assert rows["a"].verdict == "best"
        assert rows["b"].verdict == "n/a"

    def test_mixed_instances_rejected(self):
        reports = [report(instance="x"), report(instance="y", run_index=1)]
        with pytest.raises(ValueError, match="mix"):
            summarize(reports)

    def test_statistics_match_recomputation(self):
        values = [3.5, 4.25, 1.75, 9.0]
        reports = [
            report(method="a", run_index=i, hv=v) for i, v in enumerate(values)
        ]
        row = summarize(reports).rows[0]
        mean = sum(values) / len(values)
        var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
        assert row.mean_hv == pytest.approx(mean, rel=1e-9)
        assert row.std_hv == pytest.approx(var**0.5, rel=1e-9)

    def test_csv_export(self, tmp_path):
        reports = [report(method="a", run_index=i, hv=float(i)) for i in range(3)]
        summary = summarize(reports)
        out = tmp_path / "summary.csv"
        summary.to_csv(out)
        lines = out.read_text().splitlines()
        assert lines[0].startswith("method,runs,mean_hv")
        assert len(lines) == 2


class TestExportEaf:
    def test_single_run_levels_identical(self, tmp_path):
        r = report(fronts=((1.0, 3.0), (2.0, 2.0)))
        paths = export_eaf([r], tmp_path)
        contents = {label: paths[label].read_text() for label in paths}
        assert contents["best"] == contents["median"] == contents["worst"]

    def test_two_disjoint_fronts(self, tmp_path):
        reports = [
            report(run_index=0, fronts=((1.0, 3.0),)),
            report(run_index=1, fronts=((3.0, 1.0),)),
        ]
        paths = export_eaf(reports, tmp_path)
        best = np.loadtxt(paths["best"], delimiter=",", skiprows=1, ndmin=2)
        worst = np.loadtxt(paths["worst"], delimiter=",", skiprows=1, ndmin=2)
        assert {tuple(p) for p in best} == {(1.0, 3.0), (3.0, 1.0)}
        assert {tuple(p) for p in worst} == {(3.0, 3.0)}

    def test_empty_reports_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="empty"):
            export_eaf([], tmp_path)

    def test_mixed_methods_rejected(self, tmp_path):
        reports = [report(method="a"), report(method="b", run_index=1)]
        with pytest.raises(ValueError, match="one method"):
            export_eaf(reports, tmp_path)

    def test_three_objectives_rejected(self, tmp_path):
        r = report(fronts=((1.0, 2.0, 3.0),), cost_max=(1.0, 2.0, 3.0),
                   weights=((1.0, 0.0, 0.0),))
        with pytest.raises(ValueError, match="2 objectives"):
            export_eaf([r], tmp_path)


class TestMethodLabels:
    def test_labels_round_trip(self):
        p = params()
        for label in ("uniform", "dichotomic", "avg-manhattan", "avg-euclidean"):
            cfg = scalarise_config_for(label, 10, p)
            assert method_label(cfg) == label

    def test_unknown_label(self):
        with pytest.raises(BenchConfigError, match="unknown method"):
            scalarise_config_for("simplex", 10, params())
