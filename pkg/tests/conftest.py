from __future__ import annotations

from pathlib import Path

import pytest

from apitrail.explore import ExploreConfig
from apitrail.pipeline import RunConfig

REPO_ROOT = Path(__file__).parent.parent
FIXTURES = REPO_ROOT / "fixtures"


def golden_config(output_dir, **overrides) -> RunConfig:
    """RunConfig pointing at the shipped fixture benchmark and mock script."""
    kwargs = dict(
        doc_pool=str(FIXTURES / "doc_pool.jsonl"),
        benchmark_dir=str(FIXTURES / "benchmark"),
        library_overview=str(FIXTURES / "library_overview.md"),
        planner_examples=str(FIXTURES / "planner_examples.json"),
        backend="mock",
        mock_script=str(FIXTURES / "mock_script.json"),
        output_dir=str(output_dir),
        samples=2,
        k_list=(1, 2),
        seed=7,
        embed_pool_cache=False,
    )
    kwargs.update(overrides)
    return RunConfig(**kwargs)


def selfdebug_config(output_dir, self_debug: bool, **overrides) -> RunConfig:
    return golden_config(
        output_dir,
        mock_script=str(FIXTURES / "mock_script_selfdebug.json"),
        samples=1,
        k_list=(1,),
        seed=11,
        explore=ExploreConfig(candidates_per_subtask=2, self_debug=self_debug),
        **overrides,
    )


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
