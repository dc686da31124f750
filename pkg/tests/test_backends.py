from __future__ import annotations

import csv
import json
import sys

import pytest

from selfai.manager.backends import (
    BenchmarkTable,
    MissingEntry,
    MissingSentinel,
    NonZeroExit,
    RetryVerdict,
    SubprocessBackend,
    TabulatedBackend,
    TrialTimeout,
    load_table,
    retry_policy,
)
from selfai.model import Direction, SearchSpace


class TestTableLoader:
    def test_boston_lookup_matches_direct_csv_read(self, bench_dir):
        table = load_table(bench_dir / "boston_random_forest.csv")
        config = {
            "n-estimators": 300,
            "max-depth": "None",
            "min-samples-split": 2,
            "min-samples-leaf": 1,
            "max-features": "sqrt",
        }
        # oracle: scan the CSV by hand
        expected = None
        with (bench_dir / "boston_random_forest.csv").open() as f:
            for row in csv.DictReader(f):
                if (
                    row["n-estimators"] == "300"
                    and row["max-depth"] == "None"
                    and row["min-samples-split"] == "2"
                    and row["min-samples-leaf"] == "1"
                    and row["max-features"] == "sqrt"
                ):
                    expected = float(row["value"])
        assert expected is not None
        assert table.lookup(config) == expected

    def test_every_shipped_table_loads_and_verifies(self, bench_dir):
        paths = sorted(bench_dir.glob("*.csv"))
        assert len(paths) == 12
        for path in paths:
            table = load_table(path)
            meta = json.loads(path.with_suffix(".json").read_text())
            assert table.space.cardinality == meta["count"]

    def test_declared_count_mismatch_rejected(self, tmp_path):
        (tmp_path / "t.csv").write_text("a,value\n1,0.5\n2,0.7\n")
        (tmp_path / "t.json").write_text(json.dumps(
            {"name": "t", "direction": "maximize", "metric": "m", "count": 3,
             "dimensions": {"a": [1, 2]}}))
        with pytest.raises(ValueError, match="declared count"):
            load_table(tmp_path / "t.csv")

    def test_incomplete_coverage_rejected(self, tmp_path):
        (tmp_path / "t.csv").write_text("a,value\n1,0.5\n")
        (tmp_path / "t.json").write_text(json.dumps(
            {"name": "t", "direction": "maximize", "metric": "m", "count": 2,
             "dimensions": {"a": [1, 2]}}))
        with pytest.raises(ValueError, match="cover"):
            load_table(tmp_path / "t.csv")

    def test_duplicate_rows_rejected(self, tmp_path):
        (tmp_path / "t.csv").write_text("a,value\n1,0.5\n1,0.6\n")
        (tmp_path / "t.json").write_text(json.dumps(
            {"name": "t", "direction": "maximize", "metric": "m", "count": 2,
             "dimensions": {"a": [1, 2]}}))
        with pytest.raises(ValueError, match="duplicate"):
            load_table(tmp_path / "t.csv")

    def test_dimension_order_from_sidecar_fixes_numbering(self, tmp_path):
        # rows deliberately shuffled; sidecar ordering defines config numbers
        (tmp_path / "t.csv").write_text("a,value\n2,0.7\n1,0.5\n")
        (tmp_path / "t.json").write_text(json.dumps(
            {"name": "t", "direction": "maximize", "metric": "m", "count": 2,
             "dimensions": {"a": [1, 2]}}))
        table = load_table(tmp_path / "t.csv")
        assert table.lookup({"a": 1}) == 0.5
        assert table.values == (0.5, 0.7)


class TestTabulatedBackend:
    def test_lookup_is_pure(self):
        space = SearchSpace.from_dict({"a": [1, 2]})
        table = BenchmarkTable("t", space, Direction.MAXIMIZE, "m", (0.1, 0.9))
        backend = TabulatedBackend(table)
        assert backend.run({"a": 2}, trial_id=0, attempt=1) == 0.9
        assert backend.run({"a": 2}, trial_id=5, attempt=2) == 0.9

    def test_constant_table_returns_constant(self):
        space = SearchSpace.from_dict({"a": [1, 2]})
        table = BenchmarkTable("t", space, Direction.MAXIMIZE, "m", (3.0, 3.0))
        assert TabulatedBackend(table).run({"a": 1}, 0, 1) == 3.0

    def test_missing_entry_raises(self):
        space = SearchSpace.from_dict({"a": [1, 2]})
        table = BenchmarkTable("t", space, Direction.MAXIMIZE, "m", (0.1, 0.9))
        with pytest.raises(MissingEntry):
            table.lookup({"a": 3})


SPACE = SearchSpace.from_dict({"x": [1, 2], "y": [3, 4]})


def backend_for(tmp_path, command: str, timeout: float = 20.0) -> SubprocessBackend:
    return SubprocessBackend(command_template=command, space=SPACE, workdir=tmp_path, timeout=timeout)


class TestSubprocessBackend:
    def test_sentinel_line_on_stdout(self, tmp_path):
        backend = backend_for(
            tmp_path, f"{sys.executable} -c \"print('SELFAI_RESULT value=0.93')\""
        )
        assert backend.run({"x": 1, "y": 3}, 0, 1) == 0.93

    def test_last_sentinel_line_wins(self, tmp_path):
        code = "print('SELFAI_RESULT value=0.1'); print('SELFAI_RESULT value=0.2')"
        backend = backend_for(tmp_path, f'{sys.executable} -c "{code}"')
        assert backend.run({"x": 1, "y": 3}, 0, 1) == 0.2

    def test_result_file_fallback(self, tmp_path):
        code = (
            "import json, pathlib; "
            "pathlib.Path('selfai_result').write_text(json.dumps(dict(value=0.55)))"
        )
        backend = backend_for(tmp_path, f'{sys.executable} -c "{code}"')
        assert backend.run({"x": 1, "y": 3}, 1, 1) == 0.55

    def test_nonzero_exit_raises(self, tmp_path):
        backend = backend_for(tmp_path, f'{sys.executable} -c "import sys; sys.exit(1)"')
        with pytest.raises(NonZeroExit):
            backend.run({"x": 1, "y": 3}, 2, 1)

    def test_missing_sentinel_raises(self, tmp_path):
        backend = backend_for(tmp_path, f"{sys.executable} -c \"print('hello')\"")
        with pytest.raises(MissingSentinel):
            backend.run({"x": 1, "y": 3}, 3, 1)

    def test_timeout_raises(self, tmp_path):
        backend = backend_for(
            tmp_path, f'{sys.executable} -c "import time; time.sleep(5)"', timeout=0.3
        )
        with pytest.raises(TrialTimeout):
            backend.run({"x": 1, "y": 3}, 4, 1)

    def test_dimension_values_substituted_into_command(self, tmp_path):
        backend = backend_for(
            tmp_path,
            f"{sys.executable} -c \"print('SELFAI_RESULT value=' + str({{x}} + {{y}}))\"",
        )
        assert backend.run({"x": 2, "y": 4}, 5, 1) == 6.0

    def test_scratch_dir_survives_retries(self, tmp_path):
        code = (
            "import pathlib; p = pathlib.Path('count.txt'); "
            "n = int(p.read_text()) if p.exists() else 0; "
            "p.write_text(str(n + 1)); "
            "print('SELFAI_RESULT value=' + str(n + 1))"
        )
        backend = backend_for(tmp_path, f'{sys.executable} -c "{code}"')
        assert backend.run({"x": 1, "y": 3}, 7, 1) == 1.0
        assert backend.run({"x": 1, "y": 3}, 7, 2) == 2.0  # same scratch, resumed

    def test_undeclared_template_names_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="undeclared"):
            backend_for(tmp_path, "train --lr {learning_rate}")


class TestRetryPolicy:
    def test_first_timeout_retries(self):
        assert retry_policy(TrialTimeout("t"), attempts=1) is RetryVerdict.RETRY

    def test_exhausted_attempts_give_up(self):
        assert retry_policy(NonZeroExit(1), attempts=2) is RetryVerdict.GIVE_UP
        assert retry_policy(NonZeroExit(1), attempts=3) is RetryVerdict.GIVE_UP

    def test_missing_entry_gives_up_immediately(self):
        assert retry_policy(MissingEntry("gone"), attempts=0) is RetryVerdict.GIVE_UP

    def test_missing_sentinel_not_transient(self):
        assert retry_policy(MissingSentinel("no line"), attempts=1) is RetryVerdict.GIVE_UP
