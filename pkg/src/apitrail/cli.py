"""Command-line entry point wiring every stage.

One config file (JSON) plus flag overrides, flags winning. Subcommands:
``ingest``, ``plan``, ``recommend``, ``explore``, ``solve``, ``eval``,
``bench``, ``run``, ``inspect``. Setting ``NO_NETWORK=1`` in the
environment forces the mock backend regardless of configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__, bench
from .errors import ApitrailError, ArtifactNotFoundError
from .evaluation import aggregate, format_report, run_tests
from .pipeline import Pipeline, RunConfig, load_config_file

logger = logging.getLogger(__name__)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--doc-pool", help="path to the documentation pool (JSON lines)")
    parser.add_argument("--benchmark-dir", help="benchmark directory")
    parser.add_argument("--output-dir", "-o", help="artifact output directory")
    parser.add_argument("--library-overview", help="library overview text file")
    parser.add_argument("--planner-examples", help="JSON file of (requirement, code) examples")
    parser.add_argument("--backend", choices=["remote", "mock"], help="completion backend")
    parser.add_argument("--mock-script", help="scripted mock backend file")
    parser.add_argument("--cache-dir", help="response cache directory (enables caching)")
    parser.add_argument("--templates-dir", help="prompt template override directory")
    parser.add_argument("--runner-cmd", help="snippet runner command (shell-quoted)")
    parser.add_argument("--retriever", choices=["dense", "lexical"], help="retrieval method")
    parser.add_argument("--seed", type=int, help="run seed, recorded in every artifact")
    parser.add_argument("--samples", type=int, help="solution samples per problem")
    parser.add_argument("--jobs", type=int, help="problem-level parallelism")
    parser.add_argument("--k", help="comma-separated k values for evaluation")
    parser.add_argument("--timeout", type=float, help="per-snippet timeout in seconds")
    parser.add_argument("--self-debug", action="store_true", default=None,
                        help="repair a subtask when every candidate fails")
    parser.add_argument("--no-coae", action="store_true", default=None,
                        help="skip exploration: plain retrieve-then-generate")
    parser.add_argument("--keep-workspaces", action="store_true", default=None,
                        help="retain execution workspaces for debugging")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config_file(args.config) if args.config else RunConfig()
    simple = {
        "doc_pool": args.doc_pool,
        "benchmark_dir": args.benchmark_dir,
        "output_dir": args.output_dir,
        "library_overview": args.library_overview,
        "planner_examples": args.planner_examples,
        "backend": args.backend,
        "mock_script": args.mock_script,
        "cache_dir": args.cache_dir,
        "templates_dir": args.templates_dir,
        "seed": args.seed,
        "samples": args.samples,
        "jobs": args.jobs,
    }
    updates = {key: value for key, value in simple.items() if value is not None}
    if updates:
        cfg = replace(cfg, **updates)
    if args.retriever is not None:
        cfg = replace(cfg, retrieval=replace(cfg.retrieval, retriever=args.retriever))
    if args.k is not None:
        cfg = replace(cfg, k_list=tuple(int(x) for x in args.k.split(",") if x))
    if args.self_debug:
        cfg = replace(cfg, explore=replace(cfg.explore, self_debug=True))
    if args.no_coae:
        cfg = replace(cfg, coae_enabled=False)
    sandbox_updates = {}
    if args.runner_cmd is not None:
        sandbox_updates["runner_cmd"] = shlex.split(args.runner_cmd)
    if args.timeout is not None:
        sandbox_updates["timeout"] = args.timeout
    if args.keep_workspaces:
        sandbox_updates["keep_workspaces"] = True
    if sandbox_updates:
        cfg = replace(cfg, sandbox=replace(cfg.sandbox, **sandbox_updates))
    return cfg


def cmd_ingest(args) -> int:
    pipeline = Pipeline(build_config(args))
    pipeline.ingest()
    print(f"pool: {len(pipeline.pool)} docs")
    print(f"summary: {len(pipeline.summary.text)} chars")
    print(f"exemplars: {len(pipeline.exemplars)}")
    return 0


def cmd_plan(args) -> int:
    pipeline = Pipeline(build_config(args))
    plan = pipeline.plan(args.problem)
    for subtask in plan.subtasks:
        print(f"{subtask.index}. {subtask.text}")
    return 0


def cmd_recommend(args) -> int:
    pipeline = Pipeline(build_config(args))
    recommendations, global_ids = pipeline.recommend(args.problem)
    for rec in recommendations:
        print(f"subtask {rec.subtask_index}:")
        print(f"  initial: {', '.join(sd.doc_id for sd in rec.initial)}")
        print(f"  refined: {', '.join(rec.refined)}")
    print(f"global: {', '.join(global_ids)}")
    return 0


def cmd_explore(args) -> int:
    pipeline = Pipeline(build_config(args))
    trace = pipeline.explore(args.problem)
    rate = trace["chain_success_rate"]
    print(f"chain entries: {len(trace['entries'])}  success rate: {rate:.3f}")
    print(f"used APIs: {', '.join(trace['used_api_ids']) or '(none)'}")
    return 0


def cmd_solve(args) -> int:
    pipeline = Pipeline(build_config(args))
    files = pipeline.solve(args.problem, samples=args.samples)
    for path in files:
        print(path)
    return 0


def cmd_eval(args) -> int:
    cfg = build_config(args)
    solutions_dir = Path(args.solutions) if args.solutions else Path(cfg.output_dir) / "solutions"
    problems = {p.problem_id: p for p in bench.load_benchmark(cfg.benchmark_dir)}
    outcomes = []
    for problem_dir in sorted(p for p in solutions_dir.iterdir() if p.is_dir()):
        problem = problems.get(problem_dir.name)
        if problem is None:
            logger.warning("no benchmark problem for solutions dir %s", problem_dir.name)
            continue
        for i, sol_path in enumerate(sorted(problem_dir.glob("*.py"))):
            outcome = run_tests(
                problem,
                sol_path.read_text(encoding="utf-8"),
                bench.resources_root(cfg.benchmark_dir),
                cfg.sandbox,
                sample_index=i,
            )
            if outcome is not None:
                outcomes.append(outcome)
    report = aggregate(outcomes, k_list=cfg.k_list)
    print(format_report(report))
    return 0


def cmd_bench(args) -> int:
    cfg = build_config(args)
    directory = args.dir or cfg.benchmark_dir
    problems = bench.load_benchmark(directory)
    if args.bench_command == "load":
        print(f"{len(problems)} problems")
        for prob in problems:
            print(f"  {prob.problem_id}: {len(prob.resource_manifest)} resources")
        return 0
    if args.bench_command == "stats":
        from .docstore import load_doc_pool

        pool = load_doc_pool(cfg.doc_pool)
        result = bench.stats(problems, pool)
        print(f"problems: {result.n_problems}")
        print(f"APIs per problem: {result.min_apis}-{result.max_apis} "
              f"(avg {result.avg_apis:.2f})")
        print(f"invocations per problem: {result.min_invocations}-{result.max_invocations} "
              f"(avg {result.avg_invocations:.2f})")
        return 0
    if args.bench_command == "verify":
        results = bench.verify(problems, directory, cfg.sandbox)
        failures = [r for r in results if r.status != "pass"]
        for r in results:
            line = f"{r.problem_id}: {r.status}"
            if r.detail:
                line += f" ({r.detail.splitlines()[-1][:120]})"
            print(line)
        print(f"{len(results) - len(failures)}/{len(results)} canonical solutions pass")
        return 0 if not failures else 1
    raise ApitrailError(f"unknown bench command {args.bench_command!r}")


def cmd_run(args) -> int:
    pipeline = Pipeline(build_config(args))
    ok = pipeline.run()
    report = Path(pipeline.cfg.output_dir) / "report.txt"
    if report.exists():
        print(report.read_text(encoding="utf-8"))
    return 0 if ok else 1


def cmd_inspect(args) -> int:
    cfg = build_config(args)
    if args.what == "config":
        effective = cfg.normalized()
        effective["config_hash"] = cfg.config_hash()
        print(json.dumps(effective, indent=2, sort_keys=True))
        return 0
    if args.what == "trace":
        if args.problem:
            path = Path(cfg.output_dir) / "traces" / f"{args.problem}.json"
        elif args.path:
            path = Path(args.path)
        else:
            raise ApitrailError("inspect trace needs --problem or --path")
        if not path.exists():
            raise ArtifactNotFoundError(f"no trace at {path}")
        trace = json.loads(path.read_text(encoding="utf-8"))
        print(f"problem: {trace['problem_id']}")
        print(f"chain success rate: {trace['chain_success_rate']:.3f}")
        for entry in trace["entries"]:
            cand = entry["candidate"]
            obs = cand["observation"] or {}
            status = "ok" if obs.get("executable") else "FAILED"
            print(f"  step {entry['subtask_index']}: candidate "
                  f"{cand['candidate_index']} [{status}] ({entry['selection_reason']})")
            if obs.get("error_message"):
                print(f"    error: {obs['error_message'].splitlines()[-1][:120]}")
        print(f"used APIs: {', '.join(trace['used_api_ids']) or '(none)'}")
        return 0
    raise ApitrailError(f"unknown inspect target {args.what!r}")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="apitrail",
        description="Execution-driven, retrieval-augmented code generation "
                    "for multi-API problems over unfamiliar libraries.",
    )
    parser.add_argument("--version", action="version", version=f"apitrail {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        _add_common_flags(p)
        p.set_defaults(fn=fn)
        return p

    add("ingest", cmd_ingest, "validate the doc pool and build library knowledge")
    p = add("plan", cmd_plan, "plan API-invocation subtasks for one problem")
    p.add_argument("--problem", required=True)
    p = add("recommend", cmd_recommend, "retrieve and rerank APIs for one problem")
    p.add_argument("--problem", required=True)
    p = add("explore", cmd_explore, "run the exploration chain for one problem")
    p.add_argument("--problem", required=True)
    p = add("solve", cmd_solve, "generate final solutions for one problem")
    p.add_argument("--problem", required=True)
    p = add("eval", cmd_eval, "execute solutions against tests and report metrics")
    p.add_argument("--solutions", help="solutions directory (default: <output>/solutions)")
    p = add("bench", cmd_bench, "benchmark utilities")
    p.add_argument("bench_command", choices=["load", "stats", "verify"])
    p.add_argument("--dir", help="benchmark directory (default: configured)")
    add("run", cmd_run, "full pipeline over every problem")
    p = add("inspect", cmd_inspect, "pretty-print stored artifacts")
    p.add_argument("what", choices=["trace", "config"])
    p.add_argument("--problem")
    p.add_argument("--path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (ApitrailError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
