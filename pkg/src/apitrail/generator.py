"""Final solution generation from problem, recommended docs, and the chain.

A standalone generation pass, deliberately separate from the last chain
snippet: sampling several solutions against the full trace yields more
diverse candidates than promoting one experiment to an answer. The chain
and the recommended set are read-only inputs; failed chain entries are
rendered with their error messages so the generator can route around
known-bad usages.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .docstore import DocPool
from .explore import ExperienceChain, extract_snippet, render_observation
from .llm.backend import Backend, ChatRequest
from .prompting import load_template, render
from .retrieval import render_doc_rows

DEFAULT_TEMPERATURE = 0.8
DEFAULT_TOP_P = 0.95


@dataclass
class Solution:
    """One sampled solution plus provenance back to what produced it."""

    problem_id: str
    sample_index: int
    code: str
    provenance: dict = field(default_factory=dict)


def chain_fingerprint(chain: ExperienceChain) -> str:
    """Stable digest of the chain content (selected snippets + flags)."""
    payload = {
        "entries": [
            {
                "subtask_index": e.subtask_index,
                "snippet": e.candidate.snippet,
                "executable": bool(e.candidate.observation and e.candidate.observation.executable),
                "reason": e.selection_reason,
            }
            for e in chain.entries
        ],
        "used_api_ids": chain.used_api_ids,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def render_chain_for_solution(chain: ExperienceChain, subtask_texts: dict[int, str]) -> str:
    if not chain.entries:
        return "(no exploration was performed)"
    blocks = []
    for entry in chain.entries:
        text = subtask_texts.get(entry.subtask_index, "")
        block = [
            f"--- step {entry.subtask_index}: {text}",
            "```python",
            entry.candidate.snippet,
            "```",
        ]
        if entry.candidate.observation is not None:
            block.append(render_observation(entry.candidate.observation))
        blocks.append("\n".join(block))
    return "\n\n".join(blocks)


def generate_solutions(
    problem_id: str,
    problem_text: str,
    code_context: str,
    final_ids: list[str],
    pool: DocPool,
    chain: ExperienceChain,
    subtask_texts: dict[int, str],
    backend: Backend,
    sample_count: int,
    temperature: float = DEFAULT_TEMPERATURE,
    top_p: float = DEFAULT_TOP_P,
    templates_dir=None,
) -> list[Solution]:
    """Sample ``sample_count`` solutions in one batched completion call.

    A completion without a fenced code block becomes an empty solution,
    which simply fails its tests downstream.
    """
    prompt = render(
        load_template("solve", templates_dir),
        docs=render_doc_rows(final_ids, pool),
        experience=render_chain_for_solution(chain, subtask_texts),
        code_context=code_context or "(none)",
        problem_id=problem_id,
        problem=problem_text,
    )
    completions = backend.complete_n(
        ChatRequest(
            messages=[("user", prompt)],
            sample_count=sample_count,
            temperature=temperature,
            top_p=top_p,
        )
    )
    provenance = {
        "chain_fingerprint": chain_fingerprint(chain),
        "recommended_ids": list(final_ids),
    }
    return [
        Solution(
            problem_id=problem_id,
            sample_index=i,
            code=extract_snippet(text),
            provenance=dict(provenance),
        )
        for i, text in enumerate(completions)
    ]
