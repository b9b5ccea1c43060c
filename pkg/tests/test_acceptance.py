"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines; every tolerance is pinned here, not deferred.
"""

from __future__ import annotations

import itertools
import json
import math
import os
import random
import time
from pathlib import Path

import numpy as np
import pytest

from apitrail.docstore import ApiDoc, DocPool
from apitrail.evaluation import pass_at_k, success_at_k
from apitrail.explore import ExperienceCandidate, select_experience
from apitrail.llm import MockBackend, MockScript, ScriptEntry
from apitrail.pipeline import Pipeline
from apitrail.retrieval import (
    CorpusStats,
    PoolIndex,
    RetrievalConfig,
    SubtaskRecommendation,
    inter_task_rerank,
    lexical_score,
    retrieve_for_subtask,
)
from apitrail.sandbox import ExecutionRequest, Observation, execute_snippet

from conftest import golden_config, selfdebug_config


def report(name: str) -> None:
    print(f"ACCEPTANCE {name}: PASS")


# --------------------------------------------------------------------------
# Criterion: estimator oracle (exact match with enumeration, 0 tolerance)
# --------------------------------------------------------------------------


def enumeration_oracle(n: int, c: int, k: int) -> float:
    total = 0
    miss = 0
    for combo in itertools.combinations(range(n), k):
        total += 1
        if not any(i < c for i in combo):
            miss += 1
    return 1.0 - miss / total


def test_estimator_matches_enumeration_exactly():
    start = time.monotonic()
    checked = 0
    for n in range(1, 9):
        for c in range(0, n + 1):
            for k in range(1, n + 1):
                expected = enumeration_oracle(n, c, k)
                assert pass_at_k(n, c, k) == expected, (n, c, k)
                assert success_at_k(n, c, k) == expected, (n, c, k)
                checked += 1
    elapsed = time.monotonic() - start
    assert elapsed < 1.0, f"estimator oracle took {elapsed:.2f}s"
    assert checked == 240  # sum over n<=8 of (n+1) * n
    report(f"estimator-oracle ({checked} cases, 0 tolerance, {elapsed:.3f}s)")


# --------------------------------------------------------------------------
# Criterion: retrieval oracles (dense vs brute force; lexical vs hand Okapi)
# --------------------------------------------------------------------------


def brute_force_cosine_topk(query, matrix, k):
    def cosine(a, b):
        dot = sum(x * y for x, y in zip(a, b))
        norm_a = math.sqrt(sum(x * x for x in a))
        norm_b = math.sqrt(sum(y * y for y in b))
        if norm_a == 0 or norm_b == 0:
            return 0.0
        return dot / (norm_a * norm_b)

    scored = [(cosine(query, row), i) for i, row in enumerate(matrix)]
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return scored[:k]


def hand_okapi(query, index_texts, k1=1.2, b=0.75):
    import re

    def toks(text):
        return re.findall(r"[a-z0-9]+", text.lower())

    doc_tokens = [toks(t) for t in index_texts]
    n = len(index_texts)
    avgdl = sum(len(t) for t in doc_tokens) / n
    df = {}
    for dt in doc_tokens:
        for term in set(dt):
            df[term] = df.get(term, 0) + 1
    scores = []
    for dt in doc_tokens:
        norm = k1 * (1 - b + b * len(dt) / avgdl)
        score = 0.0
        for term in toks(query):
            f = dt.count(term)
            if f:
                idf = math.log(1 + (n - df[term] + 0.5) / (df[term] + 0.5))
                score += idf * f * (k1 + 1) / (f + norm)
        scores.append(score)
    return scores


def test_dense_topk_matches_brute_force_100_trials():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        n_docs = int(rng.integers(2, 51))
        dim = int(rng.integers(2, 17))
        matrix = rng.normal(size=(n_docs, dim))
        pool = DocPool([
            ApiDoc(f"d{i}", f"lib.d{i}", "f()", f"Doc {i}.") for i in range(n_docs)
        ])
        index = PoolIndex(pool, matrix)
        query = rng.normal(size=dim)
        k = int(rng.integers(1, n_docs + 1))
        got = index.query_topk(query, k)
        expected = brute_force_cosine_topk(list(query), [list(r) for r in matrix], k)
        assert [sd.doc_id for sd in got] == [f"d{i}" for _, i in expected], f"seed {seed}"
        for sd, (score, _) in zip(got, expected):
            assert abs(sd.score - score) <= 1e-9, f"seed {seed}"
        assert [sd.rank for sd in got] == list(range(1, k + 1))
    report("retrieval-oracle-dense (100 seeded trials, rank+score, tol 1e-9)")


def test_lexical_matches_hand_okapi():
    rng = random.Random(7)
    vocabulary = ["read", "lines", "map", "filter", "batch", "zip", "sort",
                  "count", "join", "write", "csv", "json"]
    for trial in range(50):
        n_docs = rng.randint(2, 10)
        texts = []
        docs = []
        for i in range(n_docs):
            words = rng.choices(vocabulary, k=rng.randint(2, 8))
            path = f"lib.{words[0]}{i}"
            desc = " ".join(words) + "."
            docs.append(ApiDoc(f"d{i}", path, "f()", desc))
            texts.append(f"{path} {desc}")
        pool = DocPool(docs)
        stats = CorpusStats(pool)
        query = " ".join(rng.choices(vocabulary, k=3))
        expected = hand_okapi(query, texts)
        got = [lexical_score(query, i, stats) for i in range(n_docs)]
        for g, e in zip(got, expected):
            assert abs(g - e) <= 1e-9, f"trial {trial}"
    report("retrieval-oracle-lexical (50 corpora <= 10 docs, tol 1e-9)")


# --------------------------------------------------------------------------
# Criterion: multi-task retrieval recall >= single-task recall
# --------------------------------------------------------------------------


def test_multitask_recall_dominates_single_task():
    start = time.monotonic()
    pool_size, dim, recall_k = 228, 32, 15
    pool = DocPool([
        ApiDoc(f"d{i:03d}", f"lib.mod{i}.Api{i}", "f()", f"Synthetic doc {i}.")
        for i in range(pool_size)
    ])
    mt_recalls, st_recalls = [], []
    for trial in range(50):
        rng = np.random.default_rng(1000 + trial)
        matrix = rng.normal(size=(pool_size, dim))
        n_sub = int(rng.integers(3, 9))
        planted = rng.choice(pool_size, size=n_sub, replace=False)
        subtask_texts = [f"trial {trial} subtask {i}" for i in range(n_sub)]
        single_text = f"trial {trial} whole problem"
        table = {}
        queries = []
        for text, doc_pos in zip(subtask_texts, planted):
            q = matrix[doc_pos] + 0.05 * rng.normal(size=dim)
            table[text] = list(q)
            queries.append(q)
        table[single_text] = list(np.mean(queries, axis=0))
        backend = MockBackend(MockScript(
            entries=[ScriptEntry(responses=["no ids here"], times=-1)],
            embedding_table=table,
            embedding_dim=dim,
        ))
        index = PoolIndex(pool, matrix)
        cfg = RetrievalConfig(k=20, global_k=recall_k)
        planted_ids = {f"d{i:03d}" for i in planted}

        recommendations = []
        for i, text in enumerate(subtask_texts):
            initial = retrieve_for_subtask(text, pool, cfg, backend, index=index)
            recommendations.append(SubtaskRecommendation(
                subtask_index=i + 1, initial=initial,
                refined=[sd.doc_id for sd in initial],
            ))
        global_ids = inter_task_rerank(
            "t", single_text, recommendations, recall_k, pool, backend
        )
        mt_recalls.append(len(planted_ids & set(global_ids)) / n_sub)

        single_hits = index.query_topk(np.asarray(table[single_text]), recall_k)
        st_recalls.append(
            len(planted_ids & {sd.doc_id for sd in single_hits}) / n_sub
        )
    elapsed = time.monotonic() - start
    mean_mt = sum(mt_recalls) / len(mt_recalls)
    mean_st = sum(st_recalls) / len(st_recalls)
    assert elapsed < 10.0, f"took {elapsed:.1f}s"
    assert mean_mt >= mean_st, (mean_mt, mean_st)
    report(
        f"multi-task-recall (mean recall@15 {mean_mt:.3f} >= {mean_st:.3f}, "
        f"{elapsed:.1f}s)"
    )


# --------------------------------------------------------------------------
# Criterion: selection strategy (uniformity within 3 sigma + dominance)
# --------------------------------------------------------------------------


def _candidate(j, ok):
    return ExperienceCandidate(
        subtask_index=1,
        candidate_index=j,
        snippet=f"snippet {j}",
        observation=Observation(
            executable=ok,
            error_message="" if ok else "failed",
            output="",
            exit_code=0 if ok else 1,
            wall_time=0.0,
            timed_out=False,
        ),
    )


def test_selection_uniform_and_dominant():
    pattern = [False, True, False, True, False]
    candidates = [_candidate(j + 1, ok) for j, ok in enumerate(pattern)]
    rng = random.Random(2024)
    draws = 10_000
    counts = {2: 0, 4: 0}
    for _ in range(draws):
        chosen = select_experience(candidates, rng)
        counts[chosen.candidate.candidate_index] += 1
    sigma = math.sqrt(draws * 0.5 * 0.5)
    for idx in (2, 4):
        assert abs(counts[idx] - draws / 2) <= 3 * sigma, counts

    vec_rng = random.Random(99)
    violations = 0
    for _ in range(1000):
        size = vec_rng.randint(1, 8)
        flags = [vec_rng.random() < 0.5 for _ in range(size)]
        cands = [_candidate(j + 1, ok) for j, ok in enumerate(flags)]
        chosen = select_experience(cands, random.Random(vec_rng.randint(0, 10**9)))
        if any(flags) and not chosen.candidate.observation.executable:
            violations += 1
    assert violations == 0
    report(
        f"selection-strategy (counts {counts[2]}/{counts[4]} within 3 sigma, "
        "0 dominance violations in 1000 vectors)"
    )


# --------------------------------------------------------------------------
# Criterion: sandbox contract (three shapes, kill window, canary)
# --------------------------------------------------------------------------


def test_sandbox_contract(tmp_path):
    canary = tmp_path / "canary.txt"
    canary.write_text("untouched", encoding="utf-8")

    ws = tmp_path / "hello"
    ws.mkdir()
    obs = execute_snippet(ExecutionRequest('print("42")', ws))
    assert obs.executable and obs.error_message == "" and obs.output == "42\n"

    ws = tmp_path / "boom"
    ws.mkdir()
    obs = execute_snippet(ExecutionRequest('print("pre")\nraise ValueError("x")', ws))
    assert not obs.executable
    assert "ValueError" in obs.error_message
    assert obs.output == "pre\n"

    ws = tmp_path / "sleepy"
    ws.mkdir()
    timeout = 1.5
    start = time.monotonic()
    obs = execute_snippet(
        ExecutionRequest("import time\ntime.sleep(60)", ws, timeout=timeout)
    )
    elapsed = time.monotonic() - start
    assert obs.timed_out and not obs.executable
    assert "timed out" in obs.error_message
    assert obs.wall_time <= timeout + 2.0, f"kill took {obs.wall_time:.2f}s"

    assert canary.read_text(encoding="utf-8") == "untouched"
    report(
        f"sandbox-contract (3 shapes, kill in {obs.wall_time:.2f}s <= "
        f"{timeout + 2.0:.1f}s, canary intact)"
    )


# --------------------------------------------------------------------------
# Criterion: end-to-end golden run (deterministic, invariants, < 60 s)
# --------------------------------------------------------------------------


def _tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*")) if p.is_file()
    }


def test_golden_run_end_to_end(tmp_path):
    out1 = tmp_path / "run1"
    start = time.monotonic()
    pipeline = Pipeline(golden_config(out1))
    assert pipeline.run() is True
    elapsed = time.monotonic() - start
    assert elapsed < 60.0, f"golden run took {elapsed:.1f}s"

    problem_ids = [p.problem_id for p in pipeline.problems]
    assert len(problem_ids) >= 5
    for pid in problem_ids:
        trace = json.loads((out1 / "traces" / f"{pid}.json").read_text())
        assert len(trace["entries"]) == len(trace["plan"]), pid
        manifest = json.loads((out1 / "solutions" / pid / "manifest.json").read_text())
        rec = manifest["recommended"]
        expected = list(dict.fromkeys(trace["used_api_ids"] + rec["global_ids"]))
        assert rec["final"] == expected, pid

    out2 = tmp_path / "run2"
    assert Pipeline(golden_config(out2)).run() is True
    assert _tree_bytes(out1) == _tree_bytes(out2)
    report(
        f"golden-run ({len(problem_ids)} problems, chain=plan, "
        f"final=dedup(used+global), byte-identical rerun, {elapsed:.1f}s)"
    )


# --------------------------------------------------------------------------
# Criterion: self-debug variant strictly dominates on the repairable script
# --------------------------------------------------------------------------


def test_self_debug_variant_dominates(tmp_path):
    on = Pipeline(selfdebug_config(tmp_path / "on", self_debug=True))
    outcomes_on = on.evaluate("fx-001")
    rate_on = json.loads(
        (tmp_path / "on" / "traces" / "fx-001.json").read_text()
    )["chain_success_rate"]

    off = Pipeline(selfdebug_config(tmp_path / "off", self_debug=False))
    outcomes_off = off.evaluate("fx-001")
    rate_off = json.loads(
        (tmp_path / "off" / "traces" / "fx-001.json").read_text()
    )["chain_success_rate"]

    assert rate_on > rate_off, (rate_on, rate_off)
    assert outcomes_on[0].passed is True
    assert outcomes_off[0].passed is False
    report(
        f"self-debug-dominance (rate {rate_on:.2f} > {rate_off:.2f}; "
        "repaired run passes, plain run fails)"
    )


# --------------------------------------------------------------------------
# Criterion: ablation toggles reproduce the no-exploration condition
# --------------------------------------------------------------------------


def test_ablation_toggles(tmp_path):
    off = Pipeline(golden_config(tmp_path / "off", coae_enabled=False))
    assert off.run() is True
    for pid in [p.problem_id for p in off.problems]:
        trace = json.loads((tmp_path / "off" / "traces" / f"{pid}.json").read_text())
        assert trace["entries"] == [] and trace["used_api_ids"] == []
        manifest = json.loads(
            (tmp_path / "off" / "solutions" / pid / "manifest.json").read_text()
        )
        assert manifest["recommended"]["final"] == manifest["recommended"]["global_ids"]

    on = Pipeline(golden_config(tmp_path / "on"))
    assert on.run() is True
    saw_used = False
    for pid in [p.problem_id for p in on.problems]:
        trace = json.loads((tmp_path / "on" / "traces" / f"{pid}.json").read_text())
        manifest = json.loads(
            (tmp_path / "on" / "solutions" / pid / "manifest.json").read_text()
        )
        assert set(trace["used_api_ids"]) <= set(manifest["recommended"]["final"])
        saw_used = saw_used or bool(trace["used_api_ids"])
    assert saw_used
    report("ablation-toggles (no-coae: empty trace, final==global; coae adds used ids)")


# --------------------------------------------------------------------------
# Optional, environment-gated: verify a real benchmark end to end
# --------------------------------------------------------------------------


@pytest.mark.skipif(
    not os.environ.get("APITRAIL_VERIFY_BENCH_DIR"),
    reason="set APITRAIL_VERIFY_BENCH_DIR to a benchmark with its library installed",
)
def test_optional_real_benchmark_verify():
    from apitrail import bench
    from apitrail.sandbox import SandboxConfig

    directory = os.environ["APITRAIL_VERIFY_BENCH_DIR"]
    problems = bench.load_benchmark(directory)
    results = bench.verify(problems, directory, SandboxConfig())
    failing = [r for r in results if r.status != "pass"]
    assert not failing, failing
    report(f"real-benchmark-verify ({len(results)} canonical solutions pass)")
