from __future__ import annotations

from pathlib import Path

import pytest

from selfai.model import Direction, SearchSpace, Study

REPO_ROOT = Path(__file__).resolve().parent.parent
BENCH_DIR = REPO_ROOT / "benchmarks"


@pytest.fixture(scope="session")
def bench_dir() -> Path:
    return BENCH_DIR


@pytest.fixture
def boston_space() -> SearchSpace:
    return SearchSpace.from_dict(
        {
            "n-estimators": [100, 200, 300],
            "max-depth": ["None", 10, 20],
            "min-samples-split": [2, 5, 10],
            "min-samples-leaf": [1, 2, 5],
            "max-features": ["sqrt", "log2"],
        }
    )


@pytest.fixture
def tiny_space() -> SearchSpace:
    return SearchSpace.from_dict({"a": [1, 2], "b": ["x", "y"]})


@pytest.fixture
def tiny_study(tiny_space: SearchSpace) -> Study:
    return Study(id="tiny", space=tiny_space, direction=Direction.MAXIMIZE, max_trials=4)


def make_study(space: SearchSpace, **kwargs) -> Study:
    defaults = dict(id="study", space=space, direction=Direction.MAXIMIZE, max_trials=space.cardinality)
    defaults.update(kwargs)
    return Study(**defaults)
