from __future__ import annotations

import itertools
from pathlib import Path

import pytest

from apitrail.bench import load_benchmark, resources_root
from apitrail.errors import EvalError
from apitrail.evaluation import (
    TestOutcome,
    aggregate,
    format_report,
    pass_at_k,
    run_tests,
    success_at_k,
)
from apitrail.sandbox import SandboxConfig

FIXTURE_BENCH = Path(__file__).parent.parent / "fixtures" / "benchmark"


def oracle_enumerate(n, c, k):
    """Independent oracle: exhaustive subset enumeration."""
    total = 0
    miss = 0
    for combo in itertools.combinations(range(n), k):
        total += 1
        if not any(i < c for i in combo):
            miss += 1
    return 1.0 - miss / total


class TestEstimator:
    def test_saturation_single_sample(self):
        assert pass_at_k(1, 1, 1) == 1.0

    def test_frozen_derived_value(self):
        # enumeration over C(5,3)=10 subsets: exactly 1 has no passing sample
        assert pass_at_k(5, 2, 3) == 0.9

    def test_zero_correct_is_zero(self):
        for k in (1, 3, 7):
            assert pass_at_k(7, 0, k) == 0.0

    def test_success_variant_frozen_value(self):
        # enumeration over the 6 pairs from 4 samples: 3 contain the success
        assert success_at_k(4, 1, 2) == 0.5

    def test_all_succeed_is_one(self):
        for k in (1, 2, 3, 4):
            assert success_at_k(4, 4, k) == 1.0

    def test_matches_enumeration_exactly_for_all_small_cases(self):
        for n in range(1, 9):
            for c in range(0, n + 1):
                for k in range(1, n + 1):
                    assert pass_at_k(n, c, k) == oracle_enumerate(n, c, k), (n, c, k)

    def test_monotone_in_k_and_c(self):
        for n in (5, 8):
            for c in range(0, n + 1):
                values = [pass_at_k(n, c, k) for k in range(1, n + 1)]
                assert values == sorted(values)
            for k in (1, 3):
                values = [pass_at_k(n, c, k) for c in range(0, n + 1)]
                assert values == sorted(values)

    def test_pass_at_n_is_one_iff_any_pass(self):
        for n in (1, 4, 8):
            assert pass_at_k(n, 0, n) == 0.0
            for c in range(1, n + 1):
                assert pass_at_k(n, c, n) == 1.0

    def test_domain_errors(self):
        with pytest.raises(EvalError):
            pass_at_k(3, 1, 4)  # k > n
        with pytest.raises(EvalError):
            pass_at_k(3, 4, 1)  # c > n
        with pytest.raises(EvalError):
            pass_at_k(3, 1, 0)  # k < 1


class TestOutcomeInvariant:
    def test_passed_requires_succeeded(self):
        with pytest.raises(ValueError):
            TestOutcome("p", 0, passed=True, succeeded=False)


class TestAggregate:
    def outcome(self, pid, idx, passed, succeeded):
        return TestOutcome(pid, idx, passed=passed, succeeded=succeeded)

    def test_macro_average_two_problems(self):
        outcomes = []
        n = 4
        for i in range(n):
            outcomes.append(self.outcome("p1", i, True, True))
            outcomes.append(self.outcome("p2", i, False, False))
        report = aggregate(outcomes, k_list=(1, 2, 4))
        for k in (1, 2, 4):
            assert report.pass_at[k] == 0.5

    def test_column_structure(self):
        outcomes = [self.outcome("p1", i, i == 0, True) for i in range(20)]
        report = aggregate(outcomes, k_list=(1, 5, 10, 20))
        assert sorted(report.pass_at) == [1, 5, 10, 20]
        assert sorted(report.success_at) == [1, 5, 10, 20]

    def test_success_exceeds_pass_when_assertions_fail(self):
        outcomes = [self.outcome("p1", i, False, True) for i in range(4)]
        report = aggregate(outcomes, k_list=(1, 2))
        for k in (1, 2):
            assert report.success_at[k] > report.pass_at[k]
            assert report.pass_at[k] == 0.0

    def test_rates_nondecreasing_in_k_and_bounded(self):
        outcomes = [self.outcome("p1", i, i < 2, i < 3) for i in range(6)]
        report = aggregate(outcomes, k_list=(1, 2, 3, 4, 5, 6))
        ks = sorted(report.pass_at)
        pass_values = [report.pass_at[k] for k in ks]
        succ_values = [report.success_at[k] for k in ks]
        assert pass_values == sorted(pass_values)
        assert succ_values == sorted(succ_values)
        for p, s in zip(pass_values, succ_values):
            assert 0.0 <= p <= s <= 1.0

    def test_oversized_k_skipped_with_warning(self, caplog):
        outcomes = [self.outcome("p1", i, True, True) for i in range(2)]
        report = aggregate(outcomes, k_list=(1, 5))
        assert 1 in report.pass_at and 5 not in report.pass_at

    def test_empty_outcomes_rejected(self):
        with pytest.raises(EvalError):
            aggregate([])

    def test_report_formats(self):
        outcomes = [self.outcome("p1", i, i == 0, True) for i in range(4)]
        report = aggregate(outcomes, k_list=(1, 2))
        text = format_report(report)
        assert "k=1" in text and "k=2" in text and "pass" in text
        data = report.to_json_dict()
        assert data["problems"]["p1"]["n"] == 4
        assert data["pass_at"]["1"] == report.pass_at[1]


@pytest.fixture(scope="module")
def fixture_problems():
    return {p.problem_id: p for p in load_benchmark(FIXTURE_BENCH)}


class TestRunTests:
    def test_canonical_solution_passes(self, fixture_problems, tmp_path):
        prob = fixture_problems["fx-001"]
        sandbox = SandboxConfig(workspace_root=tmp_path)
        outcome = run_tests(prob, prob.canonical_solution, resources_root(FIXTURE_BENCH),
                            sandbox, sample_index=0)
        assert outcome.passed is True
        assert outcome.succeeded is True

    def test_empty_solution_double_failure(self, fixture_problems, tmp_path):
        prob = fixture_problems["fx-001"]
        sandbox = SandboxConfig(workspace_root=tmp_path)
        outcome = run_tests(prob, "", resources_root(FIXTURE_BENCH), sandbox)
        assert outcome.succeeded is False
        assert outcome.passed is False

    def test_wrong_value_succeeds_but_fails_tests(self, fixture_problems, tmp_path):
        prob = fixture_problems["fx-001"]
        wrong = "def solve():\n    return ['NOPE']\n"
        sandbox = SandboxConfig(workspace_root=tmp_path)
        outcome = run_tests(prob, wrong, resources_root(FIXTURE_BENCH), sandbox)
        assert outcome.succeeded is True
        assert outcome.passed is False

    def test_crashing_solution_fails_both(self, fixture_problems, tmp_path):
        prob = fixture_problems["fx-002"]
        crash = "def solve():\n    return 1\nraise RuntimeError('at import time')\n"
        sandbox = SandboxConfig(workspace_root=tmp_path)
        outcome = run_tests(prob, crash, resources_root(FIXTURE_BENCH), sandbox)
        assert outcome.succeeded is False
        assert outcome.passed is False
