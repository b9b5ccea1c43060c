from __future__ import annotations

from apitrail.docstore import ApiDoc, DocPool
from apitrail.explore import ExperienceCandidate, ExperienceChain, SelectedExperience
from apitrail.generator import chain_fingerprint, generate_solutions
from apitrail.llm import MockBackend, MockScript, ScriptEntry
from apitrail.sandbox import Observation


def make_pool():
    return DocPool([
        ApiDoc("d0", "lib.alpha", "alpha()", "Alpha."),
        ApiDoc("d1", "lib.beta", "beta()", "Beta."),
    ])


def make_chain(executable=True):
    obs = Observation(
        executable=executable,
        error_message="" if executable else "BoomError: went wrong",
        output="42\n" if executable else "",
        exit_code=0 if executable else 1,
        wall_time=0.0,
        timed_out=False,
    )
    cand = ExperienceCandidate(1, 1, "print(42)", observation=obs)
    return ExperienceChain(
        entries=[SelectedExperience(1, cand, "success_random")],
        used_api_ids=["d0"],
        chain_success_rate=1.0 if executable else 0.0,
    )


def fenced(code):
    return f"```python\n{code}\n```"


def backend_with(*responses):
    return MockBackend(MockScript(entries=[ScriptEntry(responses=list(responses), times=-1)]))


class TestGenerateSolutions:
    def test_sample_count_exact(self):
        backend = backend_with(fenced("def solve():\n    return 1"))
        out = generate_solutions(
            "p1", "desc", "import lib", ["d0", "d1"], make_pool(), make_chain(),
            {1: "step"}, backend, sample_count=20,
        )
        assert len(out) == 20
        assert [s.sample_index for s in out] == list(range(20))

    def test_code_extracted_from_single_fence(self):
        backend = backend_with(fenced("x = 1"))
        out = generate_solutions(
            "p1", "desc", "", ["d0"], make_pool(), make_chain(), {}, backend, 1,
        )
        assert out[0].code == "x = 1"

    def test_no_fence_stored_as_empty_code(self):
        backend = backend_with("prose, no code at all")
        out = generate_solutions(
            "p1", "desc", "", ["d0"], make_pool(), make_chain(), {}, backend, 1,
        )
        assert out[0].code == ""

    def test_all_failed_chain_still_produces_solutions(self):
        backend = backend_with(fenced("y = 2"))
        out = generate_solutions(
            "p1", "desc", "", ["d0"], make_pool(), make_chain(executable=False),
            {1: "step"}, backend, 3,
        )
        assert len(out) == 3

    def test_failed_entries_rendered_with_error(self):
        captured = {}

        class SpyBackend:
            def complete_n(self, req):
                captured["prompt"] = req.messages[0][1]
                return [fenced("z = 3")] * req.sample_count

        generate_solutions(
            "p1", "desc", "ctx", ["d0"], make_pool(), make_chain(executable=False),
            {1: "step"}, SpyBackend(), 1,
        )
        assert "BoomError" in captured["prompt"]
        assert "ran successfully: no" in captured["prompt"]

    def test_inputs_are_read_only(self):
        chain = make_chain()
        final_ids = ["d0", "d1"]
        before = chain_fingerprint(chain)
        backend = backend_with(fenced("a = 1"))
        out = generate_solutions(
            "p1", "desc", "", final_ids, make_pool(), chain, {1: "s"}, backend, 2,
        )
        assert chain_fingerprint(chain) == before
        assert final_ids == ["d0", "d1"]
        assert out[0].provenance["chain_fingerprint"] == before
        assert out[0].provenance["recommended_ids"] == final_ids

    def test_prompt_contains_docs_context_and_problem(self):
        captured = {}

        class SpyBackend:
            def complete_n(self, req):
                captured["prompt"] = req.messages[0][1]
                return [fenced("ok = True")] * req.sample_count

        generate_solutions(
            "p9", "count the rows", "import lib", ["d1"], make_pool(), make_chain(),
            {1: "s"}, SpyBackend(), 1,
        )
        prompt = captured["prompt"]
        assert "lib.beta" in prompt
        assert "import lib" in prompt
        assert "count the rows" in prompt
        assert "problem id: p9" in prompt
