"""CSV formats, round-trips, summaries, and the resumable sweep sink."""

import json
import math
import os

import numpy as np
import pytest

from microsoc import metrics
from microsoc.engine import (
    FixedHorizon,
    ParameterPoint,
    SweepGrid,
    UntilConvergence,
    run_replicates,
    sweep,
)
from microsoc.errors import ConfigError, SchemaError
from microsoc.output import (
    CsvSweepSink,
    MemorySink,
    RUNS_HEADER,
    SUMMARY_HEADER,
    fmt_float,
    fmt_memory,
    read_runs,
    read_summary,
    records_from_result,
    runs_block,
    summarize_batch,
    write_runs,
    write_summary,
)
from microsoc.engine import iter_results
from microsoc.schedule import ConnectivityKind

MASTER = 20240101

SMALL_GRID = SweepGrid(
    coordination_bias_levels=(0.5,),
    content_bias_levels=(0.0, 0.8),
    memory_levels=(3.0, math.inf),
    connectivity=(ConnectivityKind.EARLY, ConnectivityKind.LATE),
    replicates=12,
)


class TestFieldFormats:
    def test_seventeen_digit_floats_round_trip(self):
        for x in (0.1, 1 / 3, 0.8112781244591328, 2.0**-53, 123456.75):
            assert float(fmt_float(x)) == x

    def test_integral_floats_stay_short(self):
        assert fmt_float(0.0) == "0"
        assert fmt_float(1.0) == "1"
        assert fmt_float(0.5) == "0.5"

    def test_memory_field(self):
        assert fmt_memory(3.0) == "3"
        assert fmt_memory(math.inf) == "inf"


class TestRunRecords:
    def make_records(self, point=None, replicates=3):
        point = point or ParameterPoint(content_sensitivity=0.4, quality_owner=1)
        batch = run_replicates(point, replicates, MASTER)
        records = []
        for run_id, result in enumerate(iter_results(batch)):
            records.extend(records_from_result(result, run_id))
        return records

    def test_one_row_per_round(self):
        records = self.make_records(replicates=2)
        assert len(records) == 2 * 7
        assert [r.round_no for r in records[:7]] == list(range(1, 8))

    def test_round_trip_through_file(self, tmp_path):
        records = self.make_records()
        path = tmp_path / "runs.csv"
        write_runs(records, path)
        assert read_runs(path) == records

    def test_empty_write_is_header_only(self, tmp_path):
        path = tmp_path / "runs.csv"
        write_runs([], path)
        assert path.read_text() == RUNS_HEADER + "\n"
        assert read_runs(path) == []

    def test_external_ids_are_one_based(self):
        records = self.make_records()
        assert records[0].quality_owner == 2  # internal owner 1

    def test_converged_flag_marks_unanimous_rounds(self):
        point = ParameterPoint(
            content_sensitivity=1.0, mutation_rate=0.0, quality_owner=0
        )
        records = self.make_records(point, replicates=1)
        assert [r.converged_flag for r in records] == [0, 0, 0, 1, 1, 1, 1]
        assert records[3].entropy == 0.0

    def test_runs_block_equals_rowwise_serialization(self):
        point = ParameterPoint(content_sensitivity=0.4, quality_owner=1)
        batch = run_replicates(point, 3, MASTER)
        from microsoc.output import run_row

        expected = "".join(
            run_row(rec) + "\n"
            for run_id, result in enumerate(iter_results(batch))
            for rec in records_from_result(result, run_id)
        )
        assert runs_block(batch) == expected

    def test_schema_error_on_wrong_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("nope,nope\n")
        with pytest.raises(SchemaError):
            read_runs(path)

    def test_schema_error_on_short_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(RUNS_HEADER + "\n1,2,3\n")
        with pytest.raises(SchemaError):
            read_runs(path)

    def test_schema_error_on_non_numeric_value(self, tmp_path):
        records = self.make_records(replicates=1)
        path = tmp_path / "runs.csv"
        write_runs(records, path)
        text = path.read_text().splitlines()
        parts = text[1].split(",")
        parts[10] = "three"
        text[1] = ",".join(parts)
        path.write_text("\n".join(text) + "\n")
        with pytest.raises(SchemaError):
            read_runs(path)


class TestSummaries:
    def test_fixed_horizon_row_count(self):
        batch = run_replicates(ParameterPoint(), 10, MASTER)
        rows = summarize_batch(batch)
        assert len(rows) == 4 * 7
        assert all(r.censored_n == 0 for r in rows)
        assert all(r.n == 10 for r in rows)

    def test_summary_file_round_trip(self, tmp_path):
        rows = summarize_batch(run_replicates(ParameterPoint(), 10, MASTER))
        path = tmp_path / "summary.csv"
        write_summary(rows, path)
        assert read_summary(path) == rows

    def test_empty_summary_is_header_only(self, tmp_path):
        path = tmp_path / "summary.csv"
        write_summary([], path)
        assert path.read_text() == SUMMARY_HEADER + "\n"
        assert read_summary(path) == []

    def test_missing_column_rejected(self, tmp_path):
        path = tmp_path / "summary.csv"
        path.write_text(SUMMARY_HEADER.rsplit(",", 1)[0] + "\n")
        with pytest.raises(SchemaError):
            read_summary(path)

    def test_recompute_from_raw_matches_exactly(self, tmp_path):
        # The emitted summary must equal an aggregate recomputed from the
        # per-run rows, to the last bit, for every metric and round.
        point = ParameterPoint(content_sensitivity=0.6, memory_window=3.0)
        batch = run_replicates(point, 40, MASTER)
        rows = summarize_batch(batch)

        path = tmp_path / "runs.csv"
        write_runs(
            [
                rec
                for run_id, result in enumerate(iter_results(batch))
                for rec in records_from_result(result, run_id)
            ],
            path,
        )
        raw = read_runs(path)
        by_metric = {
            "entropy": lambda r: r.entropy,
            "entropy_norm": lambda r: r.entropy_norm,
            "adaptiveness": lambda r: r.adaptiveness,
            "delta_adaptiveness": lambda r: r.delta_adaptiveness,
        }
        for row in rows:
            values = [
                by_metric[row.metric](r) for r in raw if r.round_no == row.round_no
            ]
            stats = metrics.aggregate(values)
            assert stats.mean == row.mean
            assert stats.sd == row.sd
            assert stats.ci95 == row.ci95
            assert stats.n == row.n

    def test_open_ended_batches_add_convergence_row(self):
        batch = run_replicates(
            ParameterPoint(content_sensitivity=0.8),
            15,
            MASTER,
            horizon=UntilConvergence(100),
        )
        rows = summarize_batch(batch)
        tc = [r for r in rows if r.metric == "time_to_convergence"]
        assert len(tc) == 1
        assert tc[0].round_no == 0
        assert tc[0].n + tc[0].censored_n == 15
        conv = batch.convergence_rounds[batch.convergence_rounds > 0]
        assert tc[0].mean == metrics.aggregate(conv.astype(float)).mean

    def test_no_convergence_row_when_none_converged(self):
        batch = run_replicates(
            ParameterPoint(),  # drift rarely converges in 12 rounds
            5,
            MASTER,
            horizon=UntilConvergence(12),
        )
        if (batch.convergence_rounds > 0).any():
            pytest.skip("seed produced an early convergence")
        rows = summarize_batch(batch)
        assert all(r.metric != "time_to_convergence" for r in rows)

    def test_fixed_horizon_has_no_convergence_row(self):
        batch = run_replicates(
            ParameterPoint(content_sensitivity=1.0, quality_owner=0), 5, MASTER
        )
        rows = summarize_batch(batch)
        assert all(r.metric != "time_to_convergence" for r in rows)


class TestCsvSweepSink:
    def run_to_dir(self, out_dir, grid=SMALL_GRID, interrupt_after=None):
        """Run the sweep into out_dir, optionally dying after k points."""
        sink = CsvSweepSink(out_dir, "digest-1")
        if interrupt_after is None:
            sweep(grid, MASTER, sink)
            return
        points = grid.points()
        from microsoc.engine import _sweep_point

        for idx in range(interrupt_after):
            _, payload = _sweep_point(
                (idx, points[idx], MASTER, grid.replicates, FixedHorizon(), True)
            )
            sink.write_point(idx, payload[0], payload[1])
        # Simulate a torn write from a crash mid-point.
        sink._runs.write(b"1,2,3,partial")
        sink._runs.flush()
        sink._runs.close()
        sink._summary.close()

    def test_fresh_run_writes_files_and_checkpoint(self, tmp_path):
        out = tmp_path / "out"
        self.run_to_dir(out)
        runs = (out / "runs.csv").read_text().splitlines()
        summary = (out / "summary.csv").read_text().splitlines()
        n_points = len(SMALL_GRID.points())
        assert runs[0] == RUNS_HEADER
        assert len(runs) == 1 + n_points * SMALL_GRID.replicates * 7
        assert summary[0] == SUMMARY_HEADER
        assert len(summary) == 1 + n_points * 28
        state = json.loads((out / "checkpoint.json").read_text())
        assert state["complete"] is True
        assert state["last_point"] == n_points - 1

    def test_resume_after_interruption_is_byte_identical(self, tmp_path):
        clean, broken = tmp_path / "clean", tmp_path / "broken"
        self.run_to_dir(clean)
        self.run_to_dir(broken, interrupt_after=3)
        resumed = CsvSweepSink(broken, "digest-1", resume=True)
        assert resumed.start_index() == 3
        sweep(SMALL_GRID, MASTER, resumed)
        assert (broken / "runs.csv").read_bytes() == (clean / "runs.csv").read_bytes()
        assert (
            broken / "summary.csv"
        ).read_bytes() == (clean / "summary.csv").read_bytes()

    def test_resume_requires_matching_digest(self, tmp_path):
        out = tmp_path / "out"
        self.run_to_dir(out, interrupt_after=2)
        with pytest.raises(ConfigError):
            CsvSweepSink(out, "some-other-digest", resume=True)

    def test_resume_of_complete_sweep_rejected(self, tmp_path):
        out = tmp_path / "out"
        self.run_to_dir(out)
        with pytest.raises(ConfigError):
            CsvSweepSink(out, "digest-1", resume=True)

    def test_resume_without_checkpoint_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            CsvSweepSink(tmp_path / "missing", "digest-1", resume=True)

    def test_out_of_order_points_rejected(self, tmp_path):
        sink = CsvSweepSink(tmp_path / "out", "digest-1")
        with pytest.raises(ConfigError):
            sink.write_point(5, "", [])

    def test_worker_count_leaves_files_identical(self, tmp_path):
        solo, multi = tmp_path / "solo", tmp_path / "multi"
        sweep(SMALL_GRID, MASTER, CsvSweepSink(solo, "d"), workers=1)
        sweep(SMALL_GRID, MASTER, CsvSweepSink(multi, "d"), workers=4)
        assert (solo / "runs.csv").read_bytes() == (multi / "runs.csv").read_bytes()
        assert (
            solo / "summary.csv"
        ).read_bytes() == (multi / "summary.csv").read_bytes()


class TestMemorySink:
    def test_collects_in_point_order(self):
        sink = MemorySink()
        sweep(SMALL_GRID, MASTER, sink, workers=1)
        assert sink.finalized
        keys = [
            (r.connectivity, r.coordination_bias, r.content_bias, r.memory)
            for r in sink.summaries
        ]
        assert keys == sorted(keys, key=lambda k: (k[0] != "early", k))
