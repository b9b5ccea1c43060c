"""Task planning: library brief, worked exemplars, and subtask plans.

A problem is broken into a short ordered list of API-invocation subtasks,
each meant to need only one or two library calls. The planner sees only
high-level knowledge: a condensed library brief plus a handful of worked
examples explained step by step. No per-API documentation enters the
planning prompt.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .errors import ExemplarExtractionError, PlannerError, PlanParseError
from .llm.backend import Backend, ChatRequest
from .prompting import load_template, render

logger = logging.getLogger(__name__)

DEFAULT_SUMMARY_CAP = 2000
DEFAULT_OVERVIEW_WINDOW = 24000
DEFAULT_MAX_SUBTASKS = 16
DEFAULT_MAX_EXEMPLARS = 5

_PLAN_LINE = re.compile(r"^\s*(\d+)\.\s+(.+?)\s*$")


@dataclass(frozen=True)
class LibrarySummary:
    """Condensed library brief: purpose, key concepts, API division logic."""

    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise PlannerError("library summary must be non-empty")


@dataclass(frozen=True)
class PlannerExemplar:
    """A worked example: requirement plus one explanation step per API call."""

    requirement: str
    steps: tuple[str, ...]

    def __post_init__(self):
        if not self.steps:
            raise PlannerError("exemplar needs at least one step")


@dataclass(frozen=True)
class Subtask:
    index: int
    text: str

    def __post_init__(self):
        if self.index < 1:
            raise PlannerError("subtask index must be >= 1")
        if not self.text.strip():
            raise PlannerError("subtask text must be non-empty")


@dataclass(frozen=True)
class Plan:
    problem_id: str
    subtasks: tuple[Subtask, ...]

    def __post_init__(self):
        if not self.subtasks:
            raise PlannerError(f"plan for {self.problem_id!r} has no subtasks")
        for want, sub in enumerate(self.subtasks, start=1):
            if sub.index != want:
                raise PlannerError(
                    f"plan for {self.problem_id!r}: subtask indices must be 1..n contiguous"
                )

    def __len__(self) -> int:
        return len(self.subtasks)


def summarize_library(
    overview_text: str,
    backend: Backend,
    length_cap: int = DEFAULT_SUMMARY_CAP,
    input_window: int = DEFAULT_OVERVIEW_WINDOW,
    templates_dir=None,
) -> LibrarySummary:
    """Produce the condensed library brief from overview text (e.g. a README).

    One completion call at temperature 0; the overview is truncated to the
    input window before the call and the result is trimmed to the length cap.
    """
    if not overview_text.strip():
        raise PlannerError("library overview text is empty")
    prompt = render(
        load_template("summarize", templates_dir), overview=overview_text[:input_window]
    )
    req = ChatRequest(messages=[("user", prompt)], temperature=0.0)
    completion = backend.complete_n(req)[0].strip()
    if not completion:
        raise PlannerError("summary completion was empty")
    return LibrarySummary(text=completion[:length_cap])


def _parse_numbered_lines(text: str) -> list[str]:
    steps = []
    for line in text.splitlines():
        match = _PLAN_LINE.match(line)
        if match:
            steps.append(match.group(2))
    return steps


def extract_exemplars(
    code_examples: list[tuple[str, str]],
    backend: Backend,
    max_exemplars: int = DEFAULT_MAX_EXEMPLARS,
    templates_dir=None,
) -> list[PlannerExemplar]:
    """Turn (requirement, code) examples into step-by-step planner exemplars.

    At most ``max_exemplars`` are produced, taken in input order; each costs
    one completion call that explains the example's API invocations as a
    numbered list.

    Raises:
        ExemplarExtractionError: when a completion has no parseable steps
            (the raw text is attached for debugging).
    """
    if not code_examples:
        raise PlannerError("exemplar extraction needs at least one code example")
    template = load_template("extract_exemplar", templates_dir)
    exemplars = []
    for requirement, code in code_examples[:max_exemplars]:
        prompt = render(template, requirement=requirement, code=code)
        completion = backend.complete_n(
            ChatRequest(messages=[("user", prompt)], temperature=0.0)
        )[0]
        steps = _parse_numbered_lines(completion)
        if not steps:
            raise ExemplarExtractionError(
                f"no numbered steps in exemplar completion for {requirement[:60]!r}",
                raw_text=completion,
            )
        exemplars.append(PlannerExemplar(requirement=requirement, steps=tuple(steps)))
    return exemplars


def render_exemplars(exemplars: list[PlannerExemplar]) -> str:
    if not exemplars:
        return "(none)"
    blocks = []
    for ex in exemplars:
        lines = [f"Requirement: {ex.requirement}"]
        lines += [f"{i}. {step}" for i, step in enumerate(ex.steps, start=1)]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def render_plan(plan: Plan) -> str:
    """Plan list format: one "N. <text>" line per subtask."""
    return "\n".join(f"{sub.index}. {sub.text}" for sub in plan.subtasks)


def parse_plan(text: str, problem_id: str, max_subtasks: int = DEFAULT_MAX_SUBTASKS) -> Plan:
    """Parse a numbered-list completion into a plan.

    Only strict "N. <text>" lines count; other lines are not steps. No
    parseable line at all is an error rather than something to repair
    heuristically. More than ``max_subtasks`` lines are truncated with a
    warning. Indices are reassigned 1..n in order of appearance.
    """
    steps = _parse_numbered_lines(text)
    if not steps:
        raise PlanParseError(
            f"no parseable numbered plan lines for problem {problem_id!r}", raw_text=text
        )
    if len(steps) > max_subtasks:
        logger.warning(
            "plan for %s has %d steps, truncating to %d", problem_id, len(steps), max_subtasks
        )
        steps = steps[:max_subtasks]
    subtasks = tuple(Subtask(index=i, text=s) for i, s in enumerate(steps, start=1))
    return Plan(problem_id=problem_id, subtasks=subtasks)


def plan_subtasks(
    problem_id: str,
    problem_text: str,
    exemplars: list[PlannerExemplar],
    summary: LibrarySummary,
    backend: Backend,
    max_subtasks: int = DEFAULT_MAX_SUBTASKS,
    templates_dir=None,
) -> Plan:
    """Plan the ordered API-invocation subtasks for one problem."""
    if not problem_text.strip():
        raise PlannerError(f"problem {problem_id!r} has an empty description")
    prompt = render(
        load_template("plan", templates_dir),
        summary=summary.text,
        exemplars=render_exemplars(exemplars),
        problem_id=problem_id,
        problem=problem_text,
        max_subtasks=str(max_subtasks),
    )
    completion = backend.complete_n(ChatRequest(messages=[("user", prompt)], temperature=0.0))[0]
    return parse_plan(completion, problem_id, max_subtasks=max_subtasks)
