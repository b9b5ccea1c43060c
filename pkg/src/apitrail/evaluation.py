"""Execution-based scoring: per-sample outcomes and pass@k / success@k.

A sample is *succeeded* when the solution body runs without a runtime error
inside the timeout (test assertions excluded, so a wrong answer is not a
crash), and *passed* when the full program including the problem's test
code runs clean. Both rates use the unbiased estimator over n samples with
c hits: 1 - C(n-c, k) / C(n, k), computed with exact integer combinatorics
so the only rounding is a single float division.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from .bench import Problem
from .errors import EvalError, InfrastructureError, SandboxEnvironmentError
from .sandbox import SandboxConfig, execute_snippet, prepare_workspace, remove_workspace

logger = logging.getLogger(__name__)

DEFAULT_K_LIST = (1, 5, 10, 20)


@dataclass
class TestOutcome:
    __test__ = False  # not a pytest class, despite the name

    problem_id: str
    sample_index: int
    passed: bool
    succeeded: bool
    wall_time: float = 0.0

    def __post_init__(self):
        if self.passed and not self.succeeded:
            raise ValueError("an outcome cannot pass tests without succeeding")


@dataclass
class EvalReport:
    """Per-problem outcome vectors plus the k-indexed aggregate rates."""

    n_by_problem: dict[str, int]
    passed_by_problem: dict[str, int]
    succeeded_by_problem: dict[str, int]
    pass_at: dict[int, float] = field(default_factory=dict)
    success_at: dict[int, float] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "problems": {
                pid: {
                    "n": self.n_by_problem[pid],
                    "passed": self.passed_by_problem[pid],
                    "succeeded": self.succeeded_by_problem[pid],
                }
                for pid in sorted(self.n_by_problem)
            },
            "pass_at": {str(k): v for k, v in sorted(self.pass_at.items())},
            "success_at": {str(k): v for k, v in sorted(self.success_at.items())},
        }


def pass_at_k(n: int, c: int, k: int) -> float:
    """Unbiased probability that at least one of k draws from n samples hits
    one of the c passing ones: 1 - C(n-c, k) / C(n, k).

    Exact integer combinatorics; the single division is the only float op.
    """
    if not 0 <= c <= n:
        raise EvalError(f"need 0 <= c <= n, got c={c}, n={n}")
    if not 1 <= k <= n:
        raise EvalError(f"need 1 <= k <= n, got k={k}, n={n}")
    return 1.0 - math.comb(n - c, k) / math.comb(n, k)


def success_at_k(n: int, s: int, k: int) -> float:
    """Same estimator over runtime-clean samples instead of passing ones."""
    return pass_at_k(n, s, k)


def run_tests(
    problem: Problem,
    code: str,
    resources_root: str | Path,
    sandbox: SandboxConfig,
    sample_index: int = 0,
) -> TestOutcome | None:
    """Execute one solution sample against its problem.

    Two stages in fresh workspaces: the bare solution body decides
    ``succeeded``; context + solution + test code decides ``passed``. A
    blank solution is an immediate double failure (an empty program would
    otherwise exit clean). Returns None on an infrastructure error; the
    caller excludes the sample and shrinks n for that problem.
    """
    if not code.strip():
        return TestOutcome(problem.problem_id, sample_index, passed=False, succeeded=False)
    body = problem.code_context + "\n" + code + "\n"
    full = body + "\n" + problem.test_code + "\n"
    wall = 0.0
    try:
        ws = prepare_workspace(problem.problem_id, problem.resource_manifest, resources_root,
                               base_dir=sandbox.workspace_root)
        try:
            body_obs = execute_snippet(sandbox.request(body, ws), sandbox.runner_cmd)
            wall += body_obs.wall_time
        finally:
            remove_workspace(ws)
        succeeded = body_obs.executable
        passed = False
        if succeeded:
            ws = prepare_workspace(problem.problem_id, problem.resource_manifest, resources_root,
                                   base_dir=sandbox.workspace_root)
            try:
                full_obs = execute_snippet(sandbox.request(full, ws), sandbox.runner_cmd)
                wall += full_obs.wall_time
            finally:
                remove_workspace(ws)
            passed = full_obs.executable
    except (InfrastructureError, SandboxEnvironmentError) as exc:
        logger.warning("excluding sample of %s after infrastructure error: %s",
                       problem.problem_id, exc)
        return None
    return TestOutcome(problem.problem_id, sample_index, passed=passed, succeeded=succeeded,
                       wall_time=wall)


def aggregate(outcomes: list[TestOutcome], k_list: tuple[int, ...] = DEFAULT_K_LIST) -> EvalReport:
    """Macro-average pass@k / success@k across problems.

    k values exceeding some problem's sample count are skipped with a
    warning; the estimator is undefined there.
    """
    if not outcomes:
        raise EvalError("cannot aggregate an empty outcome set")
    n_by: dict[str, int] = {}
    c_by: dict[str, int] = {}
    s_by: dict[str, int] = {}
    for out in outcomes:
        n_by[out.problem_id] = n_by.get(out.problem_id, 0) + 1
        c_by[out.problem_id] = c_by.get(out.problem_id, 0) + int(out.passed)
        s_by[out.problem_id] = s_by.get(out.problem_id, 0) + int(out.succeeded)
    report = EvalReport(n_by_problem=n_by, passed_by_problem=c_by, succeeded_by_problem=s_by)
    min_n = min(n_by.values())
    for k in k_list:
        if k > min_n:
            logger.warning("skipping k=%d: only %d samples per problem", k, min_n)
            continue
        report.pass_at[k] = sum(
            pass_at_k(n_by[pid], c_by[pid], k) for pid in n_by
        ) / len(n_by)
        report.success_at[k] = sum(
            success_at_k(n_by[pid], s_by[pid], k) for pid in n_by
        ) / len(n_by)
    return report


def format_report(report: EvalReport) -> str:
    """Aligned human-readable table, one column pair per k."""
    ks = sorted(report.pass_at)
    header = ["metric"] + [f"k={k}" for k in ks]
    pass_row = ["pass"] + [f"{report.pass_at[k]:.4f}" for k in ks]
    succ_row = ["success"] + [f"{report.success_at[k]:.4f}" for k in ks]
    widths = [max(len(row[i]) for row in (header, pass_row, succ_row)) for i in range(len(header))]
    lines = []
    for row in (header, pass_row, succ_row):
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip())
    problems = sorted(report.n_by_problem)
    lines.append("")
    lines.append(f"problems: {len(problems)}  samples/problem: "
                 f"{sorted(set(report.n_by_problem.values()))}")
    return "\n".join(lines)
