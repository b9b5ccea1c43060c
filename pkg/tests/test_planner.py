from __future__ import annotations

import pytest

from apitrail.errors import ExemplarExtractionError, PlannerError, PlanParseError
from apitrail.llm import MockBackend, MockScript, ScriptEntry
from apitrail.planner import (
    LibrarySummary,
    Plan,
    PlannerExemplar,
    Subtask,
    extract_exemplars,
    parse_plan,
    plan_subtasks,
    render_plan,
    summarize_library,
)


def backend_with(*responses, match=None):
    entries = [ScriptEntry(responses=[r], match=list(match or [])) for r in responses]
    return MockBackend(MockScript(entries=entries))


SUMMARY = LibrarySummary(text="A small data pipeline library.")


class TestSummarize:
    def test_mock_summary_stored_verbatim(self):
        backend = backend_with("The library does X, Y and Z.")
        out = summarize_library("README text here", backend)
        assert out.text == "The library does X, Y and Z."

    def test_long_overview_truncated_before_call(self):
        captured = {}

        class SpyBackend:
            def complete_n(self, req):
                captured["prompt"] = req.messages[0][1]
                return ["short summary"]

        summarize_library("x" * 50_000, SpyBackend(), input_window=1000)
        # prompt = template + first 1000 chars of the overview, nothing more
        assert "x" * 1000 in captured["prompt"]
        assert "x" * 1001 not in captured["prompt"]

    def test_result_trimmed_to_cap(self):
        backend = backend_with("s" * 5000)
        out = summarize_library("readme", backend, length_cap=100)
        assert len(out.text) == 100

    def test_empty_completion_is_error(self):
        backend = backend_with("   ")
        with pytest.raises(PlannerError):
            summarize_library("readme", backend)

    def test_empty_overview_rejected(self):
        with pytest.raises(PlannerError):
            summarize_library("", backend_with("x"))


class TestExtractExemplars:
    def test_truncates_to_max_exemplars(self):
        examples = [(f"req {i}", f"code {i}") for i in range(7)]
        backend = MockBackend(
            MockScript(entries=[ScriptEntry(responses=["1. one step"], times=-1)])
        )
        out = extract_exemplars(examples, backend, max_exemplars=5)
        assert len(out) == 5
        assert [e.requirement for e in out] == [f"req {i}" for i in range(5)]

    def test_steps_parsed_per_invocation(self):
        backend = backend_with("1. load the file\n2. map the rows\n3. batch them")
        out = extract_exemplars([("req", "code")], backend)
        assert out[0].steps == ("load the file", "map the rows", "batch them")

    def test_zero_max_exemplars_gives_empty_list(self):
        out = extract_exemplars([("req", "code")], backend_with(), max_exemplars=0)
        assert out == []

    def test_unparseable_completion_raises_with_raw_text(self):
        backend = backend_with("no numbering whatsoever")
        with pytest.raises(ExemplarExtractionError) as err:
            extract_exemplars([("req", "code")], backend)
        assert err.value.raw_text == "no numbering whatsoever"

    def test_no_examples_rejected(self):
        with pytest.raises(PlannerError):
            extract_exemplars([], backend_with("x"))


class TestParsePlan:
    def test_numbered_lines_become_subtasks(self):
        plan = parse_plan("1. load csv\n2. parse rows\n3. batch", "p1")
        assert [s.text for s in plan.subtasks] == ["load csv", "parse rows", "batch"]
        assert [s.index for s in plan.subtasks] == [1, 2, 3]

    def test_prose_without_numbering_is_parse_error(self):
        with pytest.raises(PlanParseError):
            parse_plan("First do this, then do that.", "p1")

    def test_surrounding_prose_ignored(self):
        text = "Here is the plan:\n1. first step\n2. second step\nGood luck!"
        plan = parse_plan(text, "p1")
        assert len(plan) == 2

    def test_indices_renumbered_contiguously(self):
        plan = parse_plan("3. a\n7. b\n9. c", "p1")
        assert [s.index for s in plan.subtasks] == [1, 2, 3]

    def test_truncated_to_max_subtasks(self, caplog):
        text = "\n".join(f"{i}. step {i}" for i in range(1, 21))
        plan = parse_plan(text, "p1", max_subtasks=16)
        assert len(plan) == 16

    def test_round_trip(self):
        plan = Plan(
            problem_id="p1",
            subtasks=tuple(Subtask(i, f"step number {i}") for i in (1, 2, 3, 4)),
        )
        assert parse_plan(render_plan(plan), "p1") == plan

    def test_round_trip_random_texts(self):
        # property over a seeded batch of generated plans
        import random

        rng = random.Random(0)
        words = ["load", "rows", "batch", "filter", "join", "write", "csv", "zip"]
        for _ in range(50):
            n = rng.randint(1, 16)
            subtasks = tuple(
                Subtask(i, " ".join(rng.choices(words, k=rng.randint(1, 6))))
                for i in range(1, n + 1)
            )
            plan = Plan(problem_id="p", subtasks=subtasks)
            assert parse_plan(render_plan(plan), "p") == plan


class TestPlanSubtasks:
    def test_end_to_end_with_mock(self):
        backend = backend_with("1. load csv\n2. parse rows\n3. batch")
        plan = plan_subtasks("p1", "Load a CSV and batch it", [], SUMMARY, backend)
        assert plan.problem_id == "p1"
        assert len(plan) == 3

    def test_empty_problem_rejected(self):
        with pytest.raises(PlannerError):
            plan_subtasks("p1", " ", [], SUMMARY, backend_with("1. x"))

    def test_pure_function_of_inputs_under_mock(self):
        def run():
            backend = backend_with("1. a\n2. b")
            return plan_subtasks("p1", "prob", [], SUMMARY, backend)

        assert run() == run()

    def test_exemplars_rendered_into_prompt(self):
        captured = {}

        class SpyBackend:
            def complete_n(self, req):
                captured["prompt"] = req.messages[0][1]
                return ["1. step"]

        exemplar = PlannerExemplar(requirement="make a list", steps=("read", "collect"))
        plan_subtasks("p1", "prob", [exemplar], SUMMARY, SpyBackend())
        assert "make a list" in captured["prompt"]
        assert "1. read" in captured["prompt"]
        assert SUMMARY.text in captured["prompt"]


class TestPlanInvariants:
    def test_contiguity_enforced(self):
        with pytest.raises(PlannerError):
            Plan(problem_id="p", subtasks=(Subtask(2, "a"),))

    def test_empty_plan_rejected(self):
        with pytest.raises(PlannerError):
            Plan(problem_id="p", subtasks=())
