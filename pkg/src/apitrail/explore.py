"""Chained exploration of API usage, one subtask at a time.

For every planned subtask the engine samples a handful of small
experimental programs, runs each in a snapshot of the chain workspace,
optionally asks the model to repair when every attempt failed, then keeps
one experience (program + what actually happened) and carries it forward so
later subtasks can build on working code. The accumulated trace doubles as
the chain-of-thought instruction for the final generator, and the APIs the
selected programs actually used are recorded for the recommended set.

Subtasks run strictly in order; sibling candidates are independent. The
chain's randomness comes from one seeded generator, so a run is a pure
function of (problem, script, seed, config).
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field
from pathlib import Path

from .docstore import DocPool
from .errors import InfrastructureError, SandboxEnvironmentError
from .llm.backend import Backend, ChatRequest
from .planner import LibrarySummary, Plan, Subtask
from .prompting import load_template, render
from .retrieval import SubtaskRecommendation, render_doc_rows
from .sandbox import (
    Observation,
    SandboxConfig,
    clone_workspace,
    execute_snippet,
    remove_workspace,
)

logger = logging.getLogger(__name__)

DEFAULT_CANDIDATES_PER_SUBTASK = 5
VERBATIM_EXPERIENCE_WINDOW = 6

_FENCE = re.compile(r"```[a-zA-Z0-9_+-]*\n(.*?)```", re.DOTALL)


@dataclass
class ExploreConfig:
    """Exploration knobs.

    ``candidates_per_subtask`` is how many experimental programs are sampled
    per subtask. ``debug_threshold`` is the failure count that arms the
    repair step; repair only ever fires when no candidate succeeded.
    """

    candidates_per_subtask: int = DEFAULT_CANDIDATES_PER_SUBTASK
    self_debug: bool = False
    debug_threshold: int | None = None
    max_repairs_per_subtask: int = 1
    rng_seed: int = 0
    temperature: float = 0.8
    top_p: float = 0.95

    def __post_init__(self):
        if self.candidates_per_subtask < 1:
            raise ValueError("candidates_per_subtask must be >= 1")
        if self.debug_threshold is None:
            self.debug_threshold = self.candidates_per_subtask
        if self.debug_threshold > self.candidates_per_subtask:
            raise ValueError("debug_threshold cannot exceed candidates_per_subtask")
        if self.max_repairs_per_subtask < 0:
            raise ValueError("max_repairs_per_subtask must be >= 0")


@dataclass
class ExperienceCandidate:
    """One experimental program and its observation; all candidates run."""

    subtask_index: int
    candidate_index: int
    snippet: str
    observation: Observation | None = None
    repaired_from: int | None = None


@dataclass
class SelectedExperience:
    subtask_index: int
    candidate: ExperienceCandidate
    selection_reason: str  # success_random | all_failed_random | repaired_success


@dataclass
class SubtaskRecord:
    """Everything that happened for one subtask, for the persisted trace."""

    subtask_index: int
    subtask_text: str
    candidates: list[ExperienceCandidate] = field(default_factory=list)
    selected_candidate_index: int | None = None
    selection_reason: str = ""
    failed_repairs: int = 0


@dataclass
class ExperienceChain:
    """The selected experience trace plus the APIs it actually used."""

    entries: list[SelectedExperience] = field(default_factory=list)
    used_api_ids: list[str] = field(default_factory=list)
    chain_success_rate: float = 0.0


@dataclass
class ChainRunResult:
    chain: ExperienceChain
    records: list[SubtaskRecord]
    aborted: bool = False
    abort_reason: str = ""
    final_workspace: Path | None = None


def extract_snippet(completion: str) -> str:
    """First fenced code block of a completion; empty when there is none."""
    match = _FENCE.search(completion)
    return match.group(1).strip() if match else ""


def render_observation(obs: Observation) -> str:
    lines = [f"ran successfully: {'yes' if obs.executable else 'no'}"]
    if obs.error_message:
        lines.append(f"error: {obs.error_message}")
    lines.append("output:")
    lines.append(obs.output if obs.output else "(empty)")
    return "\n".join(lines)


def render_experience(entries: list[SelectedExperience], subtask_texts: dict[int, str]) -> str:
    """Prompt rendering of the chain so far.

    The most recent entries appear verbatim (program + observation); older
    ones are elided to program-only so prompt growth stays bounded.
    """
    if not entries:
        return "(no earlier steps)"
    blocks = []
    elide_before = len(entries) - VERBATIM_EXPERIENCE_WINDOW
    for pos, entry in enumerate(entries):
        text = subtask_texts.get(entry.subtask_index, "")
        block = [
            f"--- step {entry.subtask_index}: {text}",
            "```python",
            entry.candidate.snippet,
            "```",
        ]
        if pos >= elide_before and entry.candidate.observation is not None:
            block.append(render_observation(entry.candidate.observation))
        blocks.append("\n".join(block))
    return "\n\n".join(blocks)


def generate_candidates(
    subtask: Subtask,
    summary: LibrarySummary,
    refined_ids: list[str],
    pool: DocPool,
    prior: list[SelectedExperience],
    subtask_texts: dict[int, str],
    problem_id: str,
    example_inputs: str,
    backend: Backend,
    cfg: ExploreConfig,
    templates_dir=None,
) -> list[ExperienceCandidate]:
    """Sample the subtask's experimental programs in one batched call."""
    prompt = render(
        load_template("explore", templates_dir),
        summary=summary.text,
        docs=render_doc_rows(refined_ids, pool),
        experience=render_experience(prior, subtask_texts),
        example_inputs=example_inputs or "(none)",
        problem_id=problem_id,
        subtask_index=str(subtask.index),
        subtask=subtask.text,
    )
    completions = backend.complete_n(
        ChatRequest(
            messages=[("user", prompt)],
            sample_count=cfg.candidates_per_subtask,
            temperature=cfg.temperature,
            top_p=cfg.top_p,
        )
    )
    return [
        ExperienceCandidate(
            subtask_index=subtask.index, candidate_index=j, snippet=extract_snippet(text)
        )
        for j, text in enumerate(completions, start=1)
    ]


def _empty_snippet_observation() -> Observation:
    # An empty program would actually exit 0; synthesizing the failure keeps
    # "no code block" candidates observable without counting them as wins.
    return Observation(
        executable=False,
        error_message="empty snippet: completion contained no code block",
        output="",
        exit_code=1,
        wall_time=0.0,
        timed_out=False,
    )


def run_candidates(
    candidates: list[ExperienceCandidate],
    chain_workspace: Path,
    sandbox: SandboxConfig,
) -> dict[int, Path]:
    """Execute every candidate in its own snapshot of the chain workspace.

    Returns the candidate-index -> workspace mapping so the selected
    candidate's workspace can become the chain workspace going forward.
    """
    workspaces: dict[int, Path] = {}
    for cand in candidates:
        if not cand.snippet.strip():
            cand.observation = _empty_snippet_observation()
            continue
        ws = clone_workspace(chain_workspace, base_dir=sandbox.workspace_root)
        workspaces[cand.candidate_index] = ws
        cand.observation = execute_snippet(sandbox.request(cand.snippet, ws), sandbox.runner_cmd)
    return workspaces


def self_debug(
    failed: list[ExperienceCandidate],
    subtask: Subtask,
    chain_workspace: Path,
    sandbox: SandboxConfig,
    backend: Backend,
    cfg: ExploreConfig,
    record: SubtaskRecord,
    workspaces: dict[int, Path],
    templates_dir=None,
) -> ExperienceCandidate | None:
    """Try to repair the most informative failure; at most the configured
    number of rounds. Only a repair that actually runs joins the candidates."""
    template = load_template("repair", templates_dir)
    next_index = max(c.candidate_index for c in failed) + 1
    for _ in range(cfg.max_repairs_per_subtask):
        # Longest observed output first: richer signal for the repairer.
        target = min(
            failed,
            key=lambda c: (-(len(c.observation.output) if c.observation else 0), c.candidate_index),
        )
        prompt = render(
            template,
            subtask=subtask.text,
            snippet=target.snippet,
            error=target.observation.error_message if target.observation else "",
        )
        completion = backend.complete_n(
            ChatRequest(
                messages=[("user", prompt)],
                temperature=cfg.temperature,
                top_p=cfg.top_p,
            )
        )[0]
        snippet = extract_snippet(completion)
        if not snippet:
            record.failed_repairs += 1
            continue
        ws = clone_workspace(chain_workspace, base_dir=sandbox.workspace_root)
        observation = execute_snippet(sandbox.request(snippet, ws), sandbox.runner_cmd)
        repaired = ExperienceCandidate(
            subtask_index=subtask.index,
            candidate_index=next_index,
            snippet=snippet,
            observation=observation,
            repaired_from=target.candidate_index,
        )
        if observation.executable:
            workspaces[repaired.candidate_index] = ws
            return repaired
        record.failed_repairs += 1
        remove_workspace(ws)
        next_index += 1
    return None


def select_experience(
    candidates: list[ExperienceCandidate], rng: random.Random
) -> SelectedExperience:
    """Uniform random over successes; over everything when nothing ran."""
    successes = [c for c in candidates if c.observation and c.observation.executable]
    if successes:
        choice = rng.choice(successes)
        reason = "repaired_success" if choice.repaired_from is not None else "success_random"
    else:
        choice = rng.choice(candidates)
        reason = "all_failed_random"
    return SelectedExperience(
        subtask_index=choice.subtask_index, candidate=choice, selection_reason=reason
    )


_IDENTIFIER_BOUNDARY = r"(?<![A-Za-z0-9_]){}(?![A-Za-z0-9_])"


def record_used_apis(snippet: str, pool: DocPool, refined_ids: list[str]) -> list[str]:
    """APIs a snippet actually used, by lexical match against known docs.

    A doc matches when the snippet contains its import path's final segment
    as a whole identifier token, or the full import path as a substring.
    The subtask's own refined candidates are scanned first, then the rest
    of the pool in load order.
    """
    if not snippet.strip():
        return []
    found: list[str] = []
    seen = set()
    ordered_ids = list(refined_ids) + [d for d in pool.doc_ids if d not in set(refined_ids)]
    for doc_id in ordered_ids:
        if doc_id in seen:
            continue
        doc = pool.get(doc_id)
        last_segment = doc.import_path.rsplit(".", 1)[-1]
        if doc.import_path in snippet or re.search(
            _IDENTIFIER_BOUNDARY.format(re.escape(last_segment)), snippet
        ):
            found.append(doc_id)
            seen.add(doc_id)
    return found


def run_chain(
    problem_id: str,
    example_inputs: str,
    plan: Plan,
    recommendations: list[SubtaskRecommendation],
    pool: DocPool,
    summary: LibrarySummary,
    base_workspace: Path,
    backend: Backend,
    sandbox: SandboxConfig,
    cfg: ExploreConfig,
    templates_dir=None,
) -> ChainRunResult:
    """Explore all subtasks in order and accumulate the experience chain.

    ``base_workspace`` is consumed: the chain workspace starts there and
    moves to the selected candidate's snapshot after every subtask.
    Infrastructure failures abort the chain, returning the partial result
    for persistence rather than losing the trace.
    """
    rng = random.Random(cfg.rng_seed)
    refined_by_subtask = {rec.subtask_index: rec.refined for rec in recommendations}
    subtask_texts = {sub.index: sub.text for sub in plan.subtasks}
    chain = ExperienceChain()
    records: list[SubtaskRecord] = []
    used_seen: set[str] = set()
    chain_ws = base_workspace
    aborted = False
    abort_reason = ""

    for subtask in plan.subtasks:
        record = SubtaskRecord(subtask_index=subtask.index, subtask_text=subtask.text)
        records.append(record)
        refined = refined_by_subtask.get(subtask.index, [])
        candidates = generate_candidates(
            subtask,
            summary,
            refined,
            pool,
            chain.entries,
            subtask_texts,
            problem_id,
            example_inputs,
            backend,
            cfg,
            templates_dir,
        )
        record.candidates = candidates
        try:
            workspaces = run_candidates(candidates, chain_ws, sandbox)
            failures = [
                c for c in candidates if not (c.observation and c.observation.executable)
            ]
            if (
                cfg.self_debug
                and len(failures) == len(candidates)
                and len(failures) >= (cfg.debug_threshold or len(candidates))
            ):
                repaired = self_debug(
                    failures,
                    subtask,
                    chain_ws,
                    sandbox,
                    backend,
                    cfg,
                    record,
                    workspaces,
                    templates_dir,
                )
                if repaired is not None:
                    candidates.append(repaired)
        except (InfrastructureError, SandboxEnvironmentError) as exc:
            aborted = True
            abort_reason = f"{type(exc).__name__}: {exc}"
            logger.error("chain for %s aborted at subtask %d: %s", problem_id, subtask.index, exc)
            break

        selected = select_experience(candidates, rng)
        record.selected_candidate_index = selected.candidate.candidate_index
        record.selection_reason = selected.selection_reason
        chain.entries.append(selected)

        for doc_id in record_used_apis(selected.candidate.snippet, pool, refined):
            if doc_id not in used_seen:
                chain.used_api_ids.append(doc_id)
                used_seen.add(doc_id)

        # The selected candidate's workspace carries the chain forward.
        selected_ws = workspaces.get(selected.candidate.candidate_index)
        if not sandbox.keep_workspaces:
            for idx, ws in workspaces.items():
                if idx != selected.candidate.candidate_index:
                    remove_workspace(ws)
        if selected_ws is not None and selected_ws != chain_ws:
            if not sandbox.keep_workspaces:
                remove_workspace(chain_ws)
            chain_ws = selected_ws

    n = len(plan.subtasks)
    successes = sum(
        1
        for e in chain.entries
        if e.candidate.observation is not None and e.candidate.observation.executable
    )
    chain.chain_success_rate = successes / n if n else 0.0
    return ChainRunResult(
        chain=chain,
        records=records,
        aborted=aborted,
        abort_reason=abort_reason,
        final_workspace=chain_ws,
    )
