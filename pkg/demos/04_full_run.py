"""Full pipeline on the fixture benchmark with the scripted mock backend.

Runs plan -> recommend -> explore -> solve -> eval for six problems against
the bundled toy library, entirely offline, then walks through one problem's
artifacts. Writes to ./demo_out (resumable; delete to rerun from scratch).
"""

import json
from pathlib import Path

from apitrail.pipeline import Pipeline, RunConfig

FIXTURES = Path(__file__).parent.parent / "fixtures"
OUT = Path("demo_out")

cfg = RunConfig(
    doc_pool=str(FIXTURES / "doc_pool.jsonl"),
    benchmark_dir=str(FIXTURES / "benchmark"),
    library_overview=str(FIXTURES / "library_overview.md"),
    planner_examples=str(FIXTURES / "planner_examples.json"),
    backend="mock",
    mock_script=str(FIXTURES / "mock_script.json"),
    output_dir=str(OUT),
    samples=2,
    k_list=(1, 2),
    seed=7,
)

pipeline = Pipeline(cfg)
ok = pipeline.run()
print(f"run finished cleanly: {ok}")
print((OUT / "report.txt").read_text())

pid = "fx-003"
print(f"--- walking through {pid} ---")
plan = json.loads((OUT / "plans" / f"{pid}.json").read_text())
for step in plan["subtasks"]:
    print(f"  plan {step['index']}. {step['text']}")

trace = json.loads((OUT / "traces" / f"{pid}.json").read_text())
print(f"  chain success rate: {trace['chain_success_rate']:.2f}")
for sub in trace["subtasks"]:
    verdicts = [
        "ok" if c["observation"]["executable"] else "fail" for c in sub["candidates"]
    ]
    print(f"  step {sub['subtask_index']}: candidates [{', '.join(verdicts)}] "
          f"-> picked #{sub['selected_candidate_index']} ({sub['selection_reason']})")
print(f"  APIs actually used: {trace['used_api_ids']}")

manifest = json.loads((OUT / "solutions" / pid / "manifest.json").read_text())
print(f"  docs handed to the generator: {manifest['recommended']['final']}")
solution = (OUT / "solutions" / pid / "000.py").read_text()
print("  final solution sample 0:")
for line in solution.splitlines():
    print(f"    {line}")
