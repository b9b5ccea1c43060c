"""API recommendation: retrieval, reranking, and the final recommended set.

For each planned subtask an initial candidate list is retrieved from the
doc pool (dense cosine by default, Okapi BM25 as the offline fallback), a
model-driven intra-task pass drops irrelevant candidates, and a model-driven
inter-task pass picks a fixed-size global set for the whole problem. The
set handed to the final generator is the ordered union of the APIs actually
used during exploration and that global set.

All tie-breaking uses pool load order so runs are replayable.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .docstore import ApiDoc, DocPool, index_text
from .errors import AssemblyError, RetrievalError
from .llm.backend import Backend, ChatRequest
from .prompting import load_template, render

logger = logging.getLogger(__name__)

_TOKEN = re.compile(r"[a-z0-9]+")


@dataclass
class RetrievalConfig:
    """Knobs for the recommendation stage.

    ``k`` is the per-subtask initial retrieval volume; ``global_k`` the size
    of the problem-level set. ``k1``/``b`` only apply to the lexical scorer.
    """

    k: int = 20
    global_k: int = 15
    retriever: str = "dense"
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.global_k < 1:
            raise ValueError("global_k must be >= 1")
        if self.retriever not in ("dense", "lexical"):
            raise ValueError(f"unknown retriever {self.retriever!r}")


@dataclass(frozen=True)
class ScoredDoc:
    doc_id: str
    score: float
    rank: int


@dataclass
class SubtaskRecommendation:
    """Initial retrieval hits and the model-refined subset for one subtask."""

    subtask_index: int
    initial: list[ScoredDoc]
    refined: list[str] = field(default_factory=list)


@dataclass
class RecommendedSet:
    """What the final generator receives.

    ``final`` is the ordered dedup union: exploration-used ids first in
    chain order, then global ids not already present.
    """

    global_ids: list[str]
    used_in_exploration: list[str]
    final: list[str]


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumerics; dots split path segments."""
    return _TOKEN.findall(text.lower())


class CorpusStats:
    """Per-pool statistics for Okapi scoring over the docs' index texts."""

    def __init__(self, pool: DocPool, k1: float = 1.2, b: float = 0.75):
        self.k1 = k1
        self.b = b
        self.doc_ids = pool.doc_ids
        self.doc_tokens = [tokenize(index_text(doc)) for doc in pool]
        self.doc_lens = [len(toks) for toks in self.doc_tokens]
        self.n_docs = len(self.doc_tokens)
        self.avgdl = (sum(self.doc_lens) / self.n_docs) if self.n_docs else 0.0
        self.term_freqs = []
        df: dict[str, int] = {}
        for toks in self.doc_tokens:
            tf: dict[str, int] = {}
            for tok in toks:
                tf[tok] = tf.get(tok, 0) + 1
            self.term_freqs.append(tf)
            for tok in tf:
                df[tok] = df.get(tok, 0) + 1
        self.doc_freq = df

    def idf(self, term: str) -> float:
        df = self.doc_freq.get(term, 0)
        # Non-negative Okapi IDF variant: ln(1 + (N - df + 0.5) / (df + 0.5)).
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def lexical_score(query: str, doc_position: int, stats: CorpusStats) -> float:
    """Okapi BM25 score of one pool doc (by position) against a query."""
    tf = stats.term_freqs[doc_position]
    dl = stats.doc_lens[doc_position]
    norm = stats.k1 * (1.0 - stats.b + stats.b * dl / stats.avgdl) if stats.avgdl else stats.k1
    score = 0.0
    for term in tokenize(query):
        f = tf.get(term, 0)
        if f == 0:
            continue
        score += stats.idf(term) * f * (stats.k1 + 1.0) / (f + norm)
    return score


def lexical_topk(query: str, pool: DocPool, k: int, stats: CorpusStats) -> list[ScoredDoc]:
    scores = [lexical_score(query, i, stats) for i in range(len(stats.doc_ids))]
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]
    return [
        ScoredDoc(doc_id=stats.doc_ids[i], score=scores[i], rank=r)
        for r, i in enumerate(order, start=1)
    ]


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return matrix / norms


class PoolIndex:
    """Embeddings of every doc's index text, persisted beside the pool file.

    The cache file carries a content-hash header covering the pool bytes and
    the embedding model name, so a changed pool or model re-embeds instead
    of serving stale vectors.
    """

    def __init__(self, pool: DocPool, embeddings: np.ndarray):
        if embeddings.shape[0] != len(pool):
            raise RetrievalError(
                f"pool has {len(pool)} docs but embedding matrix has {embeddings.shape[0]} rows"
            )
        self.pool = pool
        self.embeddings = np.asarray(embeddings, dtype=np.float64)
        self._unit = _normalize_rows(self.embeddings)

    @staticmethod
    def content_hash(pool_path: str | Path, model_name: str) -> str:
        blob = Path(pool_path).read_bytes() + b"\x00" + model_name.encode("utf-8")
        return hashlib.sha256(blob).hexdigest()

    @classmethod
    def build(
        cls,
        pool: DocPool,
        backend: Backend,
        cache_path: str | Path | None = None,
        model_name: str = "",
    ) -> "PoolIndex":
        """Embed all index texts, loading from the cache file when it matches."""
        texts = [index_text(doc) for doc in pool]
        expected = None
        if cache_path is not None and pool.source_uri:
            expected = cls.content_hash(pool.source_uri, model_name)
            cached = cls._load_cache(cache_path, expected, len(pool))
            if cached is not None:
                return cls(pool, cached)
        embeddings = backend.embed_texts(texts)
        if cache_path is not None and expected is not None:
            cls._write_cache(cache_path, expected, embeddings)
        return cls(pool, embeddings)

    @staticmethod
    def _load_cache(path: str | Path, expected_hash: str, n_docs: int) -> np.ndarray | None:
        path = Path(path)
        if not path.exists():
            return None
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
            if data.get("content_hash") != expected_hash:
                logger.info("embedding cache %s is stale, re-embedding", path)
                return None
            vectors = np.asarray(data["vectors"], dtype=np.float64)
            if vectors.shape[0] != n_docs:
                return None
            return vectors
        except (ValueError, KeyError, OSError):
            logger.warning("embedding cache %s unreadable, re-embedding", path)
            return None

    @staticmethod
    def _write_cache(path: str | Path, content_hash: str, embeddings: np.ndarray) -> None:
        payload = {
            "content_hash": content_hash,
            "dim": int(embeddings.shape[1]),
            "vectors": embeddings.tolist(),
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    def query_topk(self, query_vector: np.ndarray, k: int) -> list[ScoredDoc]:
        """Cosine similarity against every pool vector; ties by pool order."""
        q = np.asarray(query_vector, dtype=np.float64)
        qnorm = np.linalg.norm(q)
        unit_q = q / qnorm if qnorm else q
        scores = self._unit @ unit_q
        order = np.argsort(-scores, kind="stable")[:k]
        return [
            ScoredDoc(doc_id=self.pool.doc_ids[int(i)], score=float(scores[int(i)]), rank=r)
            for r, i in enumerate(order, start=1)
        ]


def dense_topk(query: str, index: PoolIndex, k: int, backend: Backend) -> list[ScoredDoc]:
    """Embed the query and return the top-k pool docs by cosine similarity."""
    query_vec = backend.embed_texts([query])[0]
    if query_vec.shape[0] != index.embeddings.shape[1]:
        raise RetrievalError(
            f"query embedding dim {query_vec.shape[0]} != pool dim {index.embeddings.shape[1]}"
        )
    return index.query_topk(query_vec, k)


def retrieve_for_subtask(
    subtask_text: str,
    pool: DocPool,
    cfg: RetrievalConfig,
    backend: Backend,
    index: PoolIndex | None = None,
    stats: CorpusStats | None = None,
) -> list[ScoredDoc]:
    """Initial per-subtask retrieval of at most ``cfg.k`` candidates."""
    if not subtask_text.strip():
        raise RetrievalError("cannot retrieve for an empty subtask")
    k = min(cfg.k, len(pool))
    if cfg.retriever == "dense":
        if index is None:
            raise RetrievalError("dense retrieval needs a PoolIndex")
        return dense_topk(subtask_text, index, k, backend)
    if stats is None:
        stats = CorpusStats(pool, k1=cfg.k1, b=cfg.b)
    return lexical_topk(subtask_text, pool, k, stats)


def _render_candidates(doc_ids: list[str], pool: DocPool) -> str:
    lines = []
    for doc_id in doc_ids:
        doc = pool.get(doc_id)
        lines.append(f"{doc_id}: {index_text(doc)}")
    return "\n".join(lines)


def _parse_kept_ids(completion: str, allowed: set[str]) -> list[str]:
    """Pull doc ids out of a completion, keeping completion order, deduped."""
    kept = []
    seen = set()
    for token in re.split(r"[\s,;]+", completion):
        token = token.strip().strip(".:()[]'\"`")
        if token in allowed and token not in seen:
            kept.append(token)
            seen.add(token)
    return kept


def intra_task_rerank(
    subtask_text: str,
    initial: list[ScoredDoc],
    pool: DocPool,
    backend: Backend,
    templates_dir=None,
) -> list[str]:
    """Model-filter one subtask's candidates; falls back to keep-all.

    The completion is parsed as a kept-id list; ids outside the candidate
    set are dropped, and the survivors keep the initial list's relative
    order. An empty parse keeps everything (with a warning) rather than
    emptying the context.
    """
    if not initial:
        raise RetrievalError("intra-task rerank needs a non-empty candidate list")
    candidate_ids = [sd.doc_id for sd in initial]
    prompt = render(
        load_template("rerank_intra", templates_dir),
        subtask=subtask_text,
        candidates=_render_candidates(candidate_ids, pool),
    )
    completion = backend.complete_n(ChatRequest(messages=[("user", prompt)], temperature=0.0))[0]
    kept = set(_parse_kept_ids(completion, set(candidate_ids)))
    if not kept:
        logger.warning("intra-task rerank kept nothing parseable; keeping all %d candidates",
                       len(candidate_ids))
        return list(candidate_ids)
    return [doc_id for doc_id in candidate_ids if doc_id in kept]


def inter_task_rerank(
    problem_id: str,
    problem_text: str,
    recommendations: list[SubtaskRecommendation],
    global_k: int,
    pool: DocPool,
    backend: Backend,
    templates_dir=None,
) -> list[str]:
    """Pick the problem-level set of at most ``global_k`` ids.

    One completion over the union of the refined sets. If the model keeps
    fewer than ``global_k``, the list is filled round-robin over the
    subtasks' refined lists in rank order; if more, it is truncated.
    """
    if not recommendations:
        raise RetrievalError("inter-task rerank needs at least one subtask recommendation")
    union_ids: list[str] = []
    seen = set()
    for rec in recommendations:
        for doc_id in rec.refined:
            if doc_id not in seen:
                union_ids.append(doc_id)
                seen.add(doc_id)
    prompt = render(
        load_template("rerank_inter", templates_dir),
        problem_id=problem_id,
        problem=problem_text,
        candidates=_render_candidates(union_ids, pool),
        global_k=str(global_k),
    )
    completion = backend.complete_n(ChatRequest(messages=[("user", prompt)], temperature=0.0))[0]
    kept = _parse_kept_ids(completion, set(union_ids))[:global_k]
    if len(kept) < min(global_k, len(union_ids)):
        kept = _round_robin_fill(kept, recommendations, global_k)
    return kept


def _round_robin_fill(
    kept: list[str], recommendations: list[SubtaskRecommendation], global_k: int
) -> list[str]:
    result = list(kept)
    present = set(kept)
    depth = 0
    max_depth = max((len(rec.refined) for rec in recommendations), default=0)
    while len(result) < global_k and depth < max_depth:
        for rec in recommendations:
            if len(result) >= global_k:
                break
            if depth < len(rec.refined):
                doc_id = rec.refined[depth]
                if doc_id not in present:
                    result.append(doc_id)
                    present.add(doc_id)
        depth += 1
    return result


def assemble_recommended_set(
    used_in_exploration: list[str], global_ids: list[str], pool: DocPool
) -> RecommendedSet:
    """Ordered dedup union: exploration-used ids first, then global ids."""
    for doc_id in list(used_in_exploration) + list(global_ids):
        if doc_id not in pool:
            raise AssemblyError(f"recommended set references unknown doc_id {doc_id!r}")
    final: list[str] = []
    seen = set()
    for doc_id in list(used_in_exploration) + list(global_ids):
        if doc_id not in seen:
            final.append(doc_id)
            seen.add(doc_id)
    return RecommendedSet(
        global_ids=list(global_ids),
        used_in_exploration=list(used_in_exploration),
        final=final,
    )


def render_doc_rows(doc_ids: list[str], pool: DocPool) -> str:
    """Full tabular rows (path | signature | description) for prompts."""
    rows = []
    for doc_id in doc_ids:
        doc: ApiDoc = pool.get(doc_id)
        rows.append(f"- [{doc_id}] {doc.import_path} | {doc.signature} | {doc.description}")
    return "\n".join(rows) if rows else "(none)"
