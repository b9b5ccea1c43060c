"""Retrieval walk-through: index text, BM25, dense top-k, and the
recommended-set union.

Uses the shipped fixture doc pool (a tiny data-pipeline library) and the
mock backend's deterministic hash embeddings, so everything runs offline.
"""

from pathlib import Path

from apitrail.docstore import index_text, load_doc_pool
from apitrail.llm import MockBackend, MockScript
from apitrail.retrieval import (
    CorpusStats,
    PoolIndex,
    assemble_recommended_set,
    dense_topk,
    lexical_topk,
)

FIXTURES = Path(__file__).parent.parent / "fixtures"
pool = load_doc_pool(FIXTURES / "doc_pool.jsonl")
print(f"pool: {len(pool)} docs from {pool.source_uri}")

doc = pool.get("sk-005")
print(f"\nOne doc row: {doc.import_path} | {doc.signature}")
print(f"Index text (path + first sentence): {index_text(doc)!r}")

print("\n--- BM25 (offline lexical baseline) ---")
stats = CorpusStats(pool)
for sd in lexical_topk("read lines from a text file", pool, 3, stats):
    print(f"  rank {sd.rank}: {sd.doc_id}  score={sd.score:.3f}  "
          f"{pool.get(sd.doc_id).import_path}")

print("\n--- dense cosine top-k (mock embeddings) ---")
backend = MockBackend(MockScript(embedding_dim=16))
index = PoolIndex.build(pool, backend)
for sd in dense_topk("group items into fixed-size batches", index, 3, backend):
    print(f"  rank {sd.rank}: {sd.doc_id}  score={sd.score:.3f}  "
          f"{pool.get(sd.doc_id).import_path}")

print("\n--- final recommended set ---")
used_during_exploration = ["sk-001", "sk-005"]
globally_recommended = ["sk-005", "sk-020", "sk-008"]
rec = assemble_recommended_set(used_during_exploration, globally_recommended, pool)
print(f"  exploration used: {used_during_exploration}")
print(f"  global picks:     {globally_recommended}")
print(f"  handed to generator (ordered dedup union): {rec.final}")
