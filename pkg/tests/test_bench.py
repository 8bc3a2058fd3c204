"""Benchmark harness: metrics, aggregation, CSV output, and task runs."""

import shutil

import pytest

from specdiag.bench import (
    AGGREGATE_COLUMNS,
    RAW_COLUMNS,
    THREADS_ENV_VAR,
    BenchConfig,
    BenchInputError,
    BenchRecord,
    MaxGccPolicy,
    aggregate,
    efficiency,
    emit_csv,
    render_aggregate_csv,
    render_records_csv,
    resolve_workers,
    run_bench,
    run_bench_tasks,
    speedup,
)
from specdiag.model import Constraint, ConstraintSet


def _record(card, cores, run, wall, task="t", calls=0, hits=0, diagnosis=()):
    return BenchRecord(
        task=task,
        card=card,
        cores=cores,
        maxgcc=0 if cores == 1 else cores - 1,
        run=run,
        wall_s=wall,
        solver_calls=calls,
        lookup_hits=hits,
        diagnosis=tuple(diagnosis),
    )


# published single-run walls for cardinality 1, used as the S fixture
R_BY_CORES = {1: 4.56, 4: 3.08, 8: 2.77, 16: 2.63, 32: 3.29}


class TestMaxGccPolicy:
    def test_cores_minus_one(self):
        policy = MaxGccPolicy.parse("cores-1")
        assert policy.resolve(8) == 7
        assert policy.resolve(2) == 1
        assert policy.resolve(1) == 0
        assert str(policy) == "cores-1"

    def test_fixed(self):
        policy = MaxGccPolicy.parse("fixed:7")
        assert policy.resolve(1) == 7
        assert policy.resolve(32) == 7
        assert str(policy) == "fixed:7"
        assert MaxGccPolicy.parse("fixed:0").resolve(16) == 0

    @pytest.mark.parametrize(
        "text,message",
        [
            ("7", "unknown maxgcc policy"),
            ("cores+1", "unknown maxgcc policy"),
            ("fixed:x", "bad maxgcc policy"),
            ("fixed:-1", "must be non-negative"),
        ],
    )
    def test_rejects_bad_policies(self, text, message):
        with pytest.raises(BenchInputError, match=message):
            MaxGccPolicy.parse(text)


class TestResolveWorkers:
    def test_default_is_one_less_than_cores(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert resolve_workers(8) == 7
        assert resolve_workers(2) == 1
        assert resolve_workers(1) == 1

    def test_env_override_wins(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "3")
        assert resolve_workers(8) == 3
        assert resolve_workers(1) == 3

    def test_empty_override_falls_back(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "")
        assert resolve_workers(4) == 3

    @pytest.mark.parametrize("value", ["zero", "0", "-2"])
    def test_bad_override_rejected(self, monkeypatch, value):
        monkeypatch.setenv(THREADS_ENV_VAR, value)
        with pytest.raises(BenchInputError, match=THREADS_ENV_VAR):
            resolve_workers(4)


class TestMetrics:
    def test_speedup_matches_published_example(self):
        assert speedup(4.56, 2.77) == pytest.approx(1.6462, abs=1e-4)

    def test_speedup_rejects_nonpositive_times(self):
        with pytest.raises(ValueError, match="must be positive"):
            speedup(0.0, 1.0)
        with pytest.raises(ValueError, match="must be positive"):
            speedup(1.0, -0.5)

    def test_efficiency(self):
        assert efficiency(1.6462, 8) == pytest.approx(0.2058, abs=1e-4)
        with pytest.raises(ValueError, match="at least 1"):
            efficiency(1.0, 0)


class TestAggregate:
    def test_fixture_speedups(self):
        records = [
            _record(1, cores, 1, wall) for cores, wall in R_BY_CORES.items()
        ]
        rows = aggregate(records)
        assert [(r.card, r.cores) for r in rows] == [(1, c) for c in sorted(R_BY_CORES)]
        base = rows[0]
        assert base.speedup is None and base.efficiency is None and base.efficiency_alt is None
        expected_s = [1.48, 1.65, 1.74, 1.39]
        for row, want in zip(rows[1:], expected_s):
            assert row.speedup == pytest.approx(want, abs=0.01)
            assert row.efficiency == pytest.approx(row.speedup / row.cores)
            assert row.efficiency_alt == pytest.approx(row.speedup / (row.cores - 1))

    def test_groups_use_the_mean_over_runs(self):
        records = [
            _record(2, 1, 1, 4.0),
            _record(2, 1, 2, 6.0),
            _record(2, 4, 1, 2.0),
            _record(2, 4, 2, 3.0),
        ]
        rows = aggregate(records)
        assert rows[0].r_mean == pytest.approx(5.0)
        assert rows[1].r_mean == pytest.approx(2.5)
        assert rows[1].speedup == pytest.approx(2.0)

    def test_missing_single_core_baseline_leaves_blanks(self):
        rows = aggregate([_record(3, 8, 1, 1.5)])
        assert rows == [rows[0]]
        assert rows[0].speedup is None and rows[0].efficiency is None

    def test_cards_aggregate_independently(self):
        records = [
            _record(1, 1, 1, 4.0),
            _record(1, 2, 1, 2.0),
            _record(2, 1, 1, 9.0),
            _record(2, 2, 1, 3.0),
        ]
        rows = aggregate(records)
        assert [(r.card, r.cores) for r in rows] == [(1, 1), (1, 2), (2, 1), (2, 2)]
        assert rows[1].speedup == pytest.approx(2.0)
        assert rows[3].speedup == pytest.approx(3.0)


class TestCsvRendering:
    def test_raw_rows(self):
        text = render_records_csv(
            [_record(2, 4, 1, 0.123456789, task="w1", calls=9, hits=3, diagnosis=("c11", "c13"))]
        )
        lines = text.strip().splitlines()
        assert lines[0] == ",".join(RAW_COLUMNS)
        assert lines[1] == "w1,2,4,3,1,0.123457,9,3,c11 c13"

    def test_aggregate_rows_blank_out_single_core_ratios(self):
        records = [_record(1, 1, 1, 4.56), _record(1, 8, 1, 2.77)]
        lines = render_aggregate_csv(records).strip().splitlines()
        assert lines[0] == ",".join(AGGREGATE_COLUMNS)
        assert lines[1] == "1,1,4.560000,,,"
        assert lines[2] == "1,8,2.770000,1.6462,0.2058,0.2352"

    def test_rendering_nothing_is_an_error(self):
        with pytest.raises(ValueError, match="no records"):
            render_records_csv([])
        with pytest.raises(ValueError, match="no records"):
            render_aggregate_csv([])

    def test_emit_writes_raw_and_aggregate_side_by_side(self, tmp_path):
        records = [_record(1, 1, 1, 4.56), _record(1, 8, 1, 2.77)]
        raw, agg = emit_csv(records, str(tmp_path / "runs.csv"))
        assert raw == str(tmp_path / "runs.csv")
        assert agg == str(tmp_path / "runs_aggregate.csv")
        assert (tmp_path / "runs.csv").read_text().startswith(",".join(RAW_COLUMNS))
        assert (tmp_path / "runs_aggregate.csv").read_text().startswith(",".join(AGGREGATE_COLUMNS))

    def test_emit_defaults_the_suffix(self, tmp_path):
        emit_csv([_record(1, 1, 1, 1.0)], str(tmp_path / "runs"))
        assert (tmp_path / "runs_aggregate.csv").exists()

    def test_emit_refuses_empty_records(self, tmp_path):
        with pytest.raises(ValueError, match="refusing to write"):
            emit_csv([], str(tmp_path / "runs.csv"))


class TestRunBenchTasks:
    def test_smartwatch_sequential_records(self, smartwatch):
        table, background, requirements = smartwatch
        result = run_bench_tasks(
            table,
            background,
            [("watch", requirements)],
            cores=[1],
            policy=MaxGccPolicy.parse("cores-1"),
            repetitions=2,
        )
        assert result.errors == ()
        assert len(result.records) == 2
        for run_index, record in enumerate(result.records, start=1):
            assert record.task == "watch"
            assert record.card == 2
            assert record.cores == 1
            assert record.maxgcc == 0
            assert record.run == run_index
            assert record.solver_calls == 5
            assert record.lookup_hits == 0
            assert record.diagnosis == ("c11", "c13")

    def test_parallel_runs_agree_with_sequential(self, smartwatch):
        table, background, requirements = smartwatch
        result = run_bench_tasks(
            table,
            background,
            [("watch", requirements)],
            cores=[1, 2],
            policy=MaxGccPolicy.parse("fixed:3"),
            repetitions=1,
        )
        assert [r.cores for r in result.records] == [1, 2]
        sequential, parallel = result.records
        assert sequential.maxgcc == 0
        assert parallel.maxgcc == 3
        assert parallel.diagnosis == sequential.diagnosis == ("c11", "c13")
        assert parallel.lookup_hits > 0

    def test_consistent_requirements_become_an_error_record(self, smartwatch):
        table, background, _ = smartwatch
        fitting = ConstraintSet(
            [Constraint("r1", ((table.index_of("Cellular"),),), table=table)]
        )
        result = run_bench_tasks(
            table,
            background,
            [("fits", fitting)],
            cores=[1],
            policy=MaxGccPolicy.parse("cores-1"),
            repetitions=1,
        )
        assert result.records == ()
        assert len(result.errors) == 1
        assert result.errors[0].task == "fits"
        assert "consistent" in result.errors[0].message

    def test_id_collision_becomes_an_error_record(self, smartwatch):
        table, background, _ = smartwatch
        colliding = ConstraintSet(
            [Constraint("c0", ((table.index_of("Cellular"),),), table=table)]
        )
        result = run_bench_tasks(
            table,
            background,
            [("clash", colliding)],
            cores=[1],
            policy=MaxGccPolicy.parse("cores-1"),
            repetitions=1,
        )
        assert result.records == ()
        assert result.errors[0].task == "clash"

    def test_rejects_degenerate_configs(self, smartwatch):
        table, background, requirements = smartwatch
        with pytest.raises(BenchInputError, match="repetitions"):
            run_bench_tasks(table, background, [], [1], MaxGccPolicy.parse("cores-1"), 0)
        with pytest.raises(BenchInputError, match="core count"):
            run_bench_tasks(table, background, [], [], MaxGccPolicy.parse("cores-1"), 1)


class TestRunBench:
    def test_end_to_end_with_output_files(
        self, tmp_path, smartwatch_kb_path, smartwatch_reqs_path
    ):
        kb = tmp_path / "watch.kb"
        shutil.copy(smartwatch_kb_path, kb)
        reqs_dir = tmp_path / "reqs"
        reqs_dir.mkdir()
        shutil.copy(smartwatch_reqs_path, reqs_dir / "a_main.reqs")
        (reqs_dir / "b_fits.reqs").write_text("r1: Cellular=t\n")
        (reqs_dir / "c_bad.reqs").write_text("this is not a requirement\n")
        out = tmp_path / "runs.csv"
        config = BenchConfig(
            kb_path=str(kb),
            requirements_dir=str(reqs_dir),
            cores=(1,),
            maxgcc=MaxGccPolicy.parse("cores-1"),
            repetitions=2,
            output_path=str(out),
        )
        result = run_bench(config)
        assert len(result.records) == 2
        assert all(r.task == "a_main.reqs" for r in result.records)
        assert [e.task for e in result.errors] == ["c_bad.reqs", "b_fits.reqs"]
        raw_lines = out.read_text().strip().splitlines()
        assert raw_lines[0] == ",".join(RAW_COLUMNS)
        assert len(raw_lines) == 3
        agg_lines = (tmp_path / "runs_aggregate.csv").read_text().strip().splitlines()
        assert agg_lines[0] == ",".join(AGGREGATE_COLUMNS)
        assert agg_lines[1].startswith("2,1,")

    def test_missing_requirements_dir(self, tmp_path, smartwatch_kb_path):
        config = BenchConfig(
            kb_path=str(smartwatch_kb_path),
            requirements_dir=str(tmp_path / "nope"),
        )
        with pytest.raises(BenchInputError, match="requirements dir not found"):
            run_bench(config)

    def test_empty_requirements_dir(self, tmp_path, smartwatch_kb_path):
        (tmp_path / "reqs").mkdir()
        config = BenchConfig(
            kb_path=str(smartwatch_kb_path),
            requirements_dir=str(tmp_path / "reqs"),
        )
        with pytest.raises(BenchInputError, match="no requirement files"):
            run_bench(config)
