"""Benchmark problems: loading, validation, statistics, verification.

A benchmark directory holds one JSON record per problem under
``problems/`` and the problems' resource files under
``resources/<problem_id>/`` (``resources/shared/`` for files many problems
declare, referenced with a ``shared/`` manifest prefix). Every problem
carries a natural-language description, example inputs, a code context
prepended at test time, a canonical solution, and test code; the canonical
solution is expected to pass its own tests, which ``verify`` checks by
actually running them.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .docstore import DocPool
from .errors import BenchmarkError
from .sandbox import SandboxConfig, execute_snippet, prepare_workspace, remove_workspace

logger = logging.getLogger(__name__)

REQUIRED_TEXT_FIELDS = ("description", "canonical_solution", "test_code")


@dataclass
class Problem:
    problem_id: str
    description: str
    code_context: str
    canonical_solution: str
    test_code: str
    example_inputs: str = ""
    resource_manifest: list[str] = field(default_factory=list)
    api_ids: list[str] | None = None

    def __post_init__(self):
        for name in REQUIRED_TEXT_FIELDS:
            if not getattr(self, name).strip():
                raise BenchmarkError(f"problem {self.problem_id!r}: field {name!r} is empty")


def _problem_from_record(record: dict, source: Path) -> Problem:
    if not isinstance(record, dict):
        raise BenchmarkError(f"{source}: record must be a JSON object")
    problem_id = record.get("problem_id")
    if not problem_id:
        raise BenchmarkError(f"{source}: missing problem_id")
    for name in REQUIRED_TEXT_FIELDS:
        if not str(record.get(name, "")).strip():
            raise BenchmarkError(f"problem {problem_id!r}: field {name!r} missing or empty")
    return Problem(
        problem_id=str(problem_id),
        description=str(record["description"]),
        code_context=str(record.get("code_context", "")),
        canonical_solution=str(record["canonical_solution"]),
        test_code=str(record["test_code"]),
        example_inputs=str(record.get("example_inputs", "")),
        resource_manifest=[str(p) for p in record.get("resource_manifest", [])],
        api_ids=[str(a) for a in record["api_ids"]] if record.get("api_ids") else None,
    )


def load_benchmark(directory: str | Path) -> list[Problem]:
    """Load and schema-validate every problem record in a benchmark dir.

    Problems live in ``<dir>/problems/*.json`` (falling back to
    ``<dir>/*.json``), sorted by filename for a stable order. An empty
    directory yields an empty list with a warning.
    """
    directory = Path(directory)
    problems_dir = directory / "problems"
    if not problems_dir.is_dir():
        problems_dir = directory
    paths = sorted(problems_dir.glob("*.json"))
    problems = []
    for path in paths:
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise BenchmarkError(f"{path}: invalid JSON: {exc}") from exc
        problems.append(_problem_from_record(record, path))
    if not problems:
        logger.warning("no problem records found under %s", directory)
    seen: dict[str, str] = {}
    for prob in problems:
        if prob.problem_id in seen:
            raise BenchmarkError(f"duplicate problem_id {prob.problem_id!r}")
        seen[prob.problem_id] = prob.problem_id
    return problems


def save_benchmark(problems: list[Problem], directory: str | Path) -> None:
    """Write problem records back out in the loadable format."""
    problems_dir = Path(directory) / "problems"
    problems_dir.mkdir(parents=True, exist_ok=True)
    for prob in problems:
        record = {
            "problem_id": prob.problem_id,
            "description": prob.description,
            "example_inputs": prob.example_inputs,
            "code_context": prob.code_context,
            "canonical_solution": prob.canonical_solution,
            "test_code": prob.test_code,
            "resource_manifest": prob.resource_manifest,
            "api_ids": prob.api_ids,
        }
        path = problems_dir / f"{prob.problem_id}.json"
        path.write_text(
            json.dumps(record, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )


def resources_root(directory: str | Path) -> Path:
    return Path(directory) / "resources"


_IDENTIFIER_BOUNDARY = r"(?<![A-Za-z0-9_]){}(?![A-Za-z0-9_])"


def count_invocations(code: str, pool: DocPool) -> tuple[int, int]:
    """(distinct APIs, total invocations) in a piece of code.

    Matching reuses the exploration-stage rule (import path's final segment
    as a whole token, or the full path), applied with multiplicity.
    """
    distinct = 0
    total = 0
    for doc in pool:
        last_segment = doc.import_path.rsplit(".", 1)[-1]
        hits = len(re.findall(_IDENTIFIER_BOUNDARY.format(re.escape(last_segment)), code))
        if hits == 0:
            hits = code.count(doc.import_path)
        if hits:
            distinct += 1
            total += hits
    return distinct, total


@dataclass
class BenchmarkStats:
    n_problems: int
    min_apis: int
    max_apis: int
    avg_apis: float
    min_invocations: int
    max_invocations: int
    avg_invocations: float


def stats(problems: list[Problem], pool: DocPool) -> BenchmarkStats:
    """Table-style statistics: distinct APIs and invocation counts.

    Declared ``api_ids`` take precedence for the distinct-API count;
    invocations always come from counting pool tokens in the canonical
    solution.
    """
    if not problems:
        raise BenchmarkError("cannot compute statistics for an empty benchmark")
    api_counts = []
    invocation_counts = []
    for prob in problems:
        distinct, total = count_invocations(prob.canonical_solution, pool)
        if prob.api_ids is not None:
            distinct = len(set(prob.api_ids))
        api_counts.append(distinct)
        invocation_counts.append(total)
    return BenchmarkStats(
        n_problems=len(problems),
        min_apis=min(api_counts),
        max_apis=max(api_counts),
        avg_apis=sum(api_counts) / len(api_counts),
        min_invocations=min(invocation_counts),
        max_invocations=max(invocation_counts),
        avg_invocations=sum(invocation_counts) / len(invocation_counts),
    )


@dataclass
class VerifyResult:
    problem_id: str
    status: str  # "pass" | "fail" | "environment"
    detail: str = ""


_MISSING_MODULE = re.compile(r"\b(ModuleNotFoundError|ImportError)\b")


def verify(
    problems: list[Problem],
    benchmark_dir: str | Path,
    sandbox: SandboxConfig,
) -> list[VerifyResult]:
    """Run every canonical solution against its own tests.

    A missing library (import machinery errors) is reported on the
    environment channel, not as a benchmark failure.
    """
    root = resources_root(benchmark_dir)
    results = []
    for prob in problems:
        program = prob.code_context + "\n" + prob.canonical_solution + "\n\n" + prob.test_code + "\n"
        ws = prepare_workspace(prob.problem_id, prob.resource_manifest, root,
                               base_dir=sandbox.workspace_root)
        try:
            obs = execute_snippet(sandbox.request(program, ws), sandbox.runner_cmd)
        finally:
            remove_workspace(ws)
        if obs.executable:
            results.append(VerifyResult(prob.problem_id, "pass"))
        elif _MISSING_MODULE.search(obs.error_message):
            results.append(VerifyResult(prob.problem_id, "environment", detail=obs.error_message))
        else:
            results.append(VerifyResult(prob.problem_id, "fail", detail=obs.error_message))
    return results
