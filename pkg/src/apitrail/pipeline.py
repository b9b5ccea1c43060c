"""End-to-end orchestration: ingest, plan, recommend, explore, solve, eval.

Every stage persists one deterministic JSON artifact per problem under the
output directory, and every stage loads its predecessor's artifact from
disk, so a run is resumable: re-invocation skips work whose artifact is
already present. Artifacts carry no timestamps, wall-clock readings, or
absolute paths; two runs with the same inputs, seed, and scripted backend
produce byte-identical trees.

Layout under the output directory:

    manifest.json              effective config echo + hash + seed
    library/summary.txt        condensed library brief
    library/exemplars.json     worked planner exemplars
    plans/<id>.json            ordered subtasks
    recommend/<id>.json        initial + refined + global candidate sets
    traces/<id>.json           full exploration trace
    solutions/<id>/<n>.py      sampled solutions, one file per sample
    solutions/<id>/manifest.json   recommended-set snapshot + provenance
    eval/<id>.json             per-sample outcomes
    report.json / report.txt   aggregate metrics
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import bench
from .bench import Problem
from .docstore import DocPool, load_doc_pool
from .errors import ApitrailError, ArtifactNotFoundError, InfrastructureError
from .evaluation import DEFAULT_K_LIST, TestOutcome, aggregate, format_report, run_tests
from .explore import (
    ChainRunResult,
    ExperienceChain,
    ExperienceCandidate,
    ExploreConfig,
    SelectedExperience,
    run_chain,
)
from .generator import generate_solutions
from .llm import (
    Backend,
    BackendConfig,
    CachingBackend,
    MockBackend,
    RemoteBackend,
    load_mock_script,
)
from .planner import (
    LibrarySummary,
    Plan,
    PlannerExemplar,
    Subtask,
    extract_exemplars,
    plan_subtasks,
    summarize_library,
)
from .retrieval import (
    CorpusStats,
    PoolIndex,
    RetrievalConfig,
    ScoredDoc,
    SubtaskRecommendation,
    assemble_recommended_set,
    inter_task_rerank,
    intra_task_rerank,
    retrieve_for_subtask,
)
from .sandbox import Observation, SandboxConfig, prepare_workspace, remove_workspace

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Everything a run needs, aggregated in one place.

    Stage toggles make the framework variants pure configuration:
    ``coae_enabled=False`` degrades to plain retrieve-then-generate, and
    ``explore.self_debug=True`` adds the repair step.
    """

    doc_pool: str = ""
    benchmark_dir: str = ""
    output_dir: str = "out"
    library_overview: str = ""
    planner_examples: str = ""
    backend: str = "mock"  # "remote" | "mock"
    mock_script: str = ""
    cache_dir: str = ""
    backend_cfg: BackendConfig = field(default_factory=BackendConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    explore: ExploreConfig = field(default_factory=ExploreConfig)
    sandbox: SandboxConfig = field(default_factory=SandboxConfig)
    coae_enabled: bool = True
    samples: int = 5
    k_list: tuple[int, ...] = DEFAULT_K_LIST
    seed: int = 0
    jobs: int = 1
    max_subtasks: int = 16
    max_exemplars: int = 5
    summary_cap: int = 2000
    templates_dir: str = ""
    embed_pool_cache: bool = True

    def normalized(self) -> dict:
        """Config echo for provenance: location-independent fields only."""
        data = {
            "doc_pool": str(self.doc_pool),
            "benchmark_dir": str(self.benchmark_dir),
            "backend": self.backend,
            "mock_script": str(self.mock_script),
            "backend_cfg": asdict(self.backend_cfg),
            "retrieval": asdict(self.retrieval),
            "explore": asdict(self.explore),
            "sandbox": {
                "runner_cmd": list(self.sandbox.runner_cmd),
                "timeout": self.sandbox.timeout,
            },
            "coae_enabled": self.coae_enabled,
            "samples": self.samples,
            "k_list": list(self.k_list),
            "seed": self.seed,
            "max_subtasks": self.max_subtasks,
            "max_exemplars": self.max_exemplars,
            "summary_cap": self.summary_cap,
        }
        return data

    def config_hash(self) -> str:
        blob = json.dumps(self.normalized(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def load_config_file(path: str | Path) -> RunConfig:
    """Build a RunConfig from a JSON config file."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return config_from_dict(data)


def config_from_dict(data: dict) -> RunConfig:
    kwargs = dict(data)
    if "backend_cfg" in kwargs:
        kwargs["backend_cfg"] = BackendConfig(**kwargs["backend_cfg"])
    if "retrieval" in kwargs:
        kwargs["retrieval"] = RetrievalConfig(**kwargs["retrieval"])
    if "explore" in kwargs:
        kwargs["explore"] = ExploreConfig(**kwargs["explore"])
    if "sandbox" in kwargs:
        sandbox = dict(kwargs["sandbox"])
        if "workspace_root" in sandbox and sandbox["workspace_root"]:
            sandbox["workspace_root"] = Path(sandbox["workspace_root"])
        kwargs["sandbox"] = SandboxConfig(**sandbox)
    if "k_list" in kwargs:
        kwargs["k_list"] = tuple(kwargs["k_list"])
    return RunConfig(**kwargs)


def make_backend(cfg: RunConfig) -> Backend:
    """Instantiate the configured backend; NO_NETWORK=1 forces the mock."""
    kind = cfg.backend
    if os.environ.get("NO_NETWORK") == "1":
        kind = "mock"
    if kind == "mock":
        if not cfg.mock_script:
            raise ApitrailError("mock backend requires a mock_script path")
        backend: Backend = MockBackend(load_mock_script(cfg.mock_script))
    elif kind == "remote":
        backend = RemoteBackend(cfg=cfg.backend_cfg)
    else:
        raise ApitrailError(f"unknown backend kind {cfg.backend!r}")
    if cfg.cache_dir:
        backend = CachingBackend(backend, cfg.backend_cfg, cfg.cache_dir)
    return backend


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def _read_json(path: Path):
    if not path.exists():
        raise ArtifactNotFoundError(f"expected artifact {path} does not exist")
    return json.loads(path.read_text(encoding="utf-8"))


def _problem_seed(seed: int, problem_id: str) -> int:
    digest = hashlib.sha256(f"{seed}:{problem_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


class Pipeline:
    """Shared run state: pool, retrieval index, backend, library knowledge."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._validate_paths(cfg)
        self.out = Path(cfg.output_dir)
        self.backend = make_backend(cfg)
        self.pool: DocPool = load_doc_pool(cfg.doc_pool)
        self.stats = CorpusStats(self.pool, k1=cfg.retrieval.k1, b=cfg.retrieval.b)
        self.index: PoolIndex | None = None
        if cfg.retrieval.retriever == "dense":
            cache_path = None
            if cfg.embed_pool_cache:
                cache_path = Path(str(cfg.doc_pool) + ".emb.json")
            try:
                self.index = PoolIndex.build(
                    self.pool, self.backend, cache_path=cache_path,
                    model_name=cfg.backend_cfg.embed_model_name,
                )
            except OSError:
                logger.warning("embedding cache not writable; building in memory")
                self.index = PoolIndex.build(self.pool, self.backend)
        self.problems: list[Problem] = bench.load_benchmark(cfg.benchmark_dir)
        self.by_id = {p.problem_id: p for p in self.problems}
        self.summary: LibrarySummary | None = None
        self.exemplars: list[PlannerExemplar] = []
        self._templates_dir = cfg.templates_dir or None

    @staticmethod
    def _validate_paths(cfg: RunConfig) -> None:
        """Fail fast: every configured input path must resolve at startup."""
        required = {"doc_pool": cfg.doc_pool, "benchmark_dir": cfg.benchmark_dir}
        for name, value in required.items():
            if not value or not Path(value).exists():
                raise ApitrailError(f"configured {name} path {value!r} does not exist")
        optional = {
            "library_overview": cfg.library_overview,
            "planner_examples": cfg.planner_examples,
            "mock_script": cfg.mock_script,
            "templates_dir": cfg.templates_dir,
        }
        for name, value in optional.items():
            if value and not Path(value).exists():
                raise ApitrailError(f"configured {name} path {value!r} does not exist")

    def _stamp(self, payload: dict) -> dict:
        """Provenance carried by every artifact."""
        payload["config_hash"] = self.cfg.config_hash()
        payload["seed"] = self.cfg.seed
        return payload

    # --- ingest ------------------------------------------------------------

    def ingest(self) -> None:
        """Library-level knowledge: condensed brief plus worked exemplars.

        Reuses artifacts when they already exist, so resuming a run makes
        zero backend calls here.
        """
        summary_path = self.out / "library" / "summary.txt"
        exemplars_path = self.out / "library" / "exemplars.json"
        if summary_path.exists():
            self.summary = LibrarySummary(text=summary_path.read_text(encoding="utf-8"))
        else:
            overview = Path(self.cfg.library_overview).read_text(encoding="utf-8")
            self.summary = summarize_library(
                overview, self.backend, length_cap=self.cfg.summary_cap,
                templates_dir=self._templates_dir,
            )
            summary_path.parent.mkdir(parents=True, exist_ok=True)
            summary_path.write_text(self.summary.text, encoding="utf-8")
        if exemplars_path.exists():
            raw = _read_json(exemplars_path)["exemplars"]
            self.exemplars = [
                PlannerExemplar(requirement=e["requirement"], steps=tuple(e["steps"]))
                for e in raw
            ]
        else:
            examples = [
                (e["requirement"], e["code"])
                for e in json.loads(
                    Path(self.cfg.planner_examples).read_text(encoding="utf-8")
                )
            ]
            self.exemplars = extract_exemplars(
                examples, self.backend, max_exemplars=self.cfg.max_exemplars,
                templates_dir=self._templates_dir,
            )
            _write_json(
                exemplars_path,
                self._stamp({
                    "exemplars": [
                        {"requirement": e.requirement, "steps": list(e.steps)}
                        for e in self.exemplars
                    ]
                }),
            )

    def _require_ingest(self) -> None:
        if self.summary is None:
            self.ingest()

    # --- plan ---------------------------------------------------------------

    def plan_path(self, problem_id: str) -> Path:
        return self.out / "plans" / f"{problem_id}.json"

    def plan(self, problem_id: str) -> Plan:
        path = self.plan_path(problem_id)
        if path.exists():
            return self._load_plan(problem_id)
        self._require_ingest()
        problem = self.by_id[problem_id]
        plan = plan_subtasks(
            problem_id,
            problem.description,
            self.exemplars,
            self.summary,
            self.backend,
            max_subtasks=self.cfg.max_subtasks,
            templates_dir=self._templates_dir,
        )
        _write_json(path, self._stamp({
            "problem_id": plan.problem_id,
            "subtasks": [{"index": s.index, "text": s.text} for s in plan.subtasks],
        }))
        return plan

    def _load_plan(self, problem_id: str) -> Plan:
        data = _read_json(self.plan_path(problem_id))
        return Plan(
            problem_id=data["problem_id"],
            subtasks=tuple(Subtask(s["index"], s["text"]) for s in data["subtasks"]),
        )

    # --- recommend ----------------------------------------------------------

    def recommend_path(self, problem_id: str) -> Path:
        return self.out / "recommend" / f"{problem_id}.json"

    def recommend(self, problem_id: str) -> tuple[list[SubtaskRecommendation], list[str]]:
        path = self.recommend_path(problem_id)
        if path.exists():
            return self._load_recommendation(problem_id)
        self._require_ingest()
        plan = self.plan(problem_id)
        problem = self.by_id[problem_id]
        recommendations = []
        for subtask in plan.subtasks:
            initial = retrieve_for_subtask(
                subtask.text, self.pool, self.cfg.retrieval, self.backend,
                index=self.index, stats=self.stats,
            )
            refined = intra_task_rerank(
                subtask.text, initial, self.pool, self.backend,
                templates_dir=self._templates_dir,
            )
            recommendations.append(
                SubtaskRecommendation(
                    subtask_index=subtask.index, initial=initial, refined=refined
                )
            )
        global_ids = inter_task_rerank(
            problem_id,
            problem.description,
            recommendations,
            self.cfg.retrieval.global_k,
            self.pool,
            self.backend,
            templates_dir=self._templates_dir,
        )
        _write_json(path, self._stamp({
            "problem_id": problem_id,
            "subtasks": [
                {
                    "subtask_index": rec.subtask_index,
                    "initial": [
                        {"doc_id": sd.doc_id, "score": sd.score, "rank": sd.rank}
                        for sd in rec.initial
                    ],
                    "refined": rec.refined,
                }
                for rec in recommendations
            ],
            "global_ids": global_ids,
        }))
        return recommendations, global_ids

    def _load_recommendation(self, problem_id: str):
        data = _read_json(self.recommend_path(problem_id))
        recommendations = [
            SubtaskRecommendation(
                subtask_index=entry["subtask_index"],
                initial=[
                    ScoredDoc(doc_id=sd["doc_id"], score=sd["score"], rank=sd["rank"])
                    for sd in entry["initial"]
                ],
                refined=list(entry["refined"]),
            )
            for entry in data["subtasks"]
        ]
        return recommendations, list(data["global_ids"])

    # --- explore ------------------------------------------------------------

    def trace_path(self, problem_id: str) -> Path:
        return self.out / "traces" / f"{problem_id}.json"

    def explore(self, problem_id: str) -> dict:
        """Run the exploration chain (or record the disabled-stage trace)."""
        path = self.trace_path(problem_id)
        if path.exists():
            return _read_json(path)
        self._require_ingest()
        plan = self.plan(problem_id)
        problem = self.by_id[problem_id]
        if not self.cfg.coae_enabled:
            trace = self._stamp({
                "problem_id": problem_id,
                "plan": [{"index": s.index, "text": s.text} for s in plan.subtasks],
                "entries": [],
                "subtasks": [],
                "used_api_ids": [],
                "chain_success_rate": 0.0,
                "aborted": False,
                "abort_reason": "",
                "coae_enabled": False,
            })
            _write_json(path, trace)
            return trace
        recommendations, _ = self.recommend(problem_id)
        workspace = prepare_workspace(
            problem_id,
            problem.resource_manifest,
            bench.resources_root(self.cfg.benchmark_dir),
            base_dir=self.cfg.sandbox.workspace_root,
        )
        explore_cfg = replace(
            self.cfg.explore, rng_seed=_problem_seed(self.cfg.seed, problem_id)
        )
        result = run_chain(
            problem_id,
            problem.example_inputs,
            plan,
            recommendations,
            self.pool,
            self.summary,
            workspace,
            self.backend,
            self.cfg.sandbox,
            explore_cfg,
            templates_dir=self._templates_dir,
        )
        if result.final_workspace is not None and not self.cfg.sandbox.keep_workspaces:
            remove_workspace(result.final_workspace)
        trace = self._trace_payload(problem_id, plan, result)
        _write_json(path, trace)
        if result.aborted:
            raise InfrastructureError(
                f"exploration aborted for {problem_id}: {result.abort_reason}"
            )
        return trace

    @staticmethod
    def _candidate_payload(cand: ExperienceCandidate) -> dict:
        return {
            "candidate_index": cand.candidate_index,
            "snippet": cand.snippet,
            "repaired_from": cand.repaired_from,
            "observation": cand.observation.to_json_dict() if cand.observation else None,
        }

    def _trace_payload(self, problem_id: str, plan: Plan, result: ChainRunResult) -> dict:
        return self._stamp({
            "problem_id": problem_id,
            "plan": [{"index": s.index, "text": s.text} for s in plan.subtasks],
            "entries": [
                {
                    "subtask_index": e.subtask_index,
                    "selection_reason": e.selection_reason,
                    "candidate": self._candidate_payload(e.candidate),
                }
                for e in result.chain.entries
            ],
            "subtasks": [
                {
                    "subtask_index": rec.subtask_index,
                    "subtask_text": rec.subtask_text,
                    "candidates": [self._candidate_payload(c) for c in rec.candidates],
                    "selected_candidate_index": rec.selected_candidate_index,
                    "selection_reason": rec.selection_reason,
                    "failed_repairs": rec.failed_repairs,
                }
                for rec in result.records
            ],
            "used_api_ids": result.chain.used_api_ids,
            "chain_success_rate": result.chain.chain_success_rate,
            "aborted": result.aborted,
            "abort_reason": result.abort_reason,
            "coae_enabled": True,
        })

    def _chain_from_trace(self, trace: dict) -> ExperienceChain:
        entries = []
        for raw in trace["entries"]:
            cand_raw = raw["candidate"]
            obs_raw = cand_raw["observation"]
            observation = None
            if obs_raw is not None:
                observation = Observation(
                    executable=obs_raw["executable"],
                    error_message=obs_raw["error_message"],
                    output=obs_raw["output"],
                    exit_code=obs_raw["exit_code"],
                    wall_time=0.0,
                    timed_out=obs_raw["timed_out"],
                    output_truncated=obs_raw.get("output_truncated", False),
                )
            entries.append(
                SelectedExperience(
                    subtask_index=raw["subtask_index"],
                    candidate=ExperienceCandidate(
                        subtask_index=raw["subtask_index"],
                        candidate_index=cand_raw["candidate_index"],
                        snippet=cand_raw["snippet"],
                        observation=observation,
                        repaired_from=cand_raw["repaired_from"],
                    ),
                    selection_reason=raw["selection_reason"],
                )
            )
        chain = ExperienceChain(
            entries=entries,
            used_api_ids=list(trace["used_api_ids"]),
            chain_success_rate=trace["chain_success_rate"],
        )
        return chain

    # --- solve ---------------------------------------------------------------

    def solutions_dir(self, problem_id: str) -> Path:
        return self.out / "solutions" / problem_id

    def solve(self, problem_id: str, samples: int | None = None) -> list[Path]:
        sol_dir = self.solutions_dir(problem_id)
        manifest_path = sol_dir / "manifest.json"
        if manifest_path.exists():
            data = _read_json(manifest_path)
            return [sol_dir / name for name in data["files"]]
        self._require_ingest()
        samples = samples if samples is not None else self.cfg.samples
        problem = self.by_id[problem_id]
        plan = self.plan(problem_id)
        trace = self.explore(problem_id)
        _, global_ids = self.recommend(problem_id)
        chain = self._chain_from_trace(trace)
        recommended = assemble_recommended_set(chain.used_api_ids, global_ids, self.pool)
        subtask_texts = {s.index: s.text for s in plan.subtasks}
        solutions = generate_solutions(
            problem_id,
            problem.description,
            problem.code_context,
            recommended.final,
            self.pool,
            chain,
            subtask_texts,
            self.backend,
            sample_count=samples,
            templates_dir=self._templates_dir,
        )
        sol_dir.mkdir(parents=True, exist_ok=True)
        files = []
        for sol in solutions:
            name = f"{sol.sample_index:03d}.py"
            (sol_dir / name).write_text(sol.code, encoding="utf-8")
            files.append(name)
        _write_json(manifest_path, self._stamp({
            "problem_id": problem_id,
            "files": files,
            "recommended": {
                "used_in_exploration": recommended.used_in_exploration,
                "global_ids": recommended.global_ids,
                "final": recommended.final,
            },
            "provenance": solutions[0].provenance if solutions else {},
        }))
        return [sol_dir / name for name in files]

    # --- eval ----------------------------------------------------------------

    def eval_path(self, problem_id: str) -> Path:
        return self.out / "eval" / f"{problem_id}.json"

    def evaluate(self, problem_id: str) -> list[TestOutcome]:
        path = self.eval_path(problem_id)
        if path.exists():
            return self._load_outcomes(problem_id)
        problem = self.by_id[problem_id]
        files = self.solve(problem_id)
        outcomes = []
        for i, sol_path in enumerate(files):
            code = sol_path.read_text(encoding="utf-8")
            outcome = run_tests(
                problem,
                code,
                bench.resources_root(self.cfg.benchmark_dir),
                self.cfg.sandbox,
                sample_index=i,
            )
            if outcome is not None:
                outcomes.append(outcome)
        _write_json(path, self._stamp({
            "problem_id": problem_id,
            "outcomes": [
                {
                    "sample_index": o.sample_index,
                    "passed": o.passed,
                    "succeeded": o.succeeded,
                }
                for o in outcomes
            ],
        }))
        return outcomes

    def _load_outcomes(self, problem_id: str) -> list[TestOutcome]:
        data = _read_json(self.eval_path(problem_id))
        return [
            TestOutcome(
                problem_id=problem_id,
                sample_index=o["sample_index"],
                passed=o["passed"],
                succeeded=o["succeeded"],
            )
            for o in data["outcomes"]
        ]

    # --- run -----------------------------------------------------------------

    def run_problem(self, problem_id: str) -> list[TestOutcome]:
        return self.evaluate(problem_id)

    def run(self) -> bool:
        """Full pipeline over every problem; True iff no infrastructure errors."""
        self.out.mkdir(parents=True, exist_ok=True)
        _write_json(self.out / "manifest.json", {
            "config": self.cfg.normalized(),
            "config_hash": self.cfg.config_hash(),
            "seed": self.cfg.seed,
            "pool_size": len(self.pool),
            "problem_ids": [p.problem_id for p in self.problems],
        })
        self.ingest()
        ok = True
        all_outcomes: list[TestOutcome] = []
        problem_ids = [p.problem_id for p in self.problems]
        if self.cfg.jobs > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.jobs) as pool:
                futures = {pid: pool.submit(self.run_problem, pid) for pid in problem_ids}
                for pid in problem_ids:
                    try:
                        all_outcomes.extend(futures[pid].result())
                    except ApitrailError as exc:
                        logger.error("problem %s failed: %s", pid, exc)
                        ok = False
        else:
            for pid in problem_ids:
                try:
                    all_outcomes.extend(self.run_problem(pid))
                except ApitrailError as exc:
                    logger.error("problem %s failed: %s", pid, exc)
                    ok = False
        if all_outcomes:
            report = aggregate(all_outcomes, k_list=self.cfg.k_list)
            _write_json(self.out / "report.json", self._stamp(report.to_json_dict()))
            (self.out / "report.txt").write_text(
                format_report(report) + "\n", encoding="utf-8"
            )
        return ok
