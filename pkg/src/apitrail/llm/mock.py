"""Deterministic scripted backend for offline runs and tests.

A script is an ordered list of entries, each with an optional matcher (one
or more substrings that must all appear in the request text) and a list of
responses. A request consumes the first live entry whose matcher matches;
its responses are cycled to the requested sample count, so one scripted
response can stand in for m diversified samples. Replaying the same request
sequence against the same script yields byte-identical output.

Embeddings come from an explicit text-to-vector table when provided, with a
hash-derived deterministic fallback for texts not in the table, so scripts
only need to pin vectors where the test geometry matters.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ScriptExhaustedError
from .backend import ChatRequest

DEFAULT_EMBED_DIM = 16


@dataclass
class ScriptEntry:
    """One scripted exchange.

    ``match``: substrings that must all occur in the request's flattened
    text; empty means match anything. ``times``: how many requests this
    entry may serve (-1 = unlimited).
    """

    responses: list[str]
    match: list[str] = field(default_factory=list)
    times: int = 1

    def matches(self, text: str) -> bool:
        return all(needle in text for needle in self.match)


@dataclass
class MockScript:
    entries: list[ScriptEntry] = field(default_factory=list)
    embedding_table: dict[str, list[float]] = field(default_factory=dict)
    embedding_dim: int = DEFAULT_EMBED_DIM


def load_mock_script(path: str | Path) -> MockScript:
    """Load a script from its JSON file format.

    Top-level keys: ``entries`` (list of {match, responses, times}),
    ``embeddings`` (text -> vector), ``embedding_dim``.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = []
    for raw in data.get("entries", []):
        match = raw.get("match", [])
        if isinstance(match, str):
            match = [match]
        entries.append(
            ScriptEntry(
                responses=list(raw["responses"]),
                match=list(match),
                times=int(raw.get("times", 1)),
            )
        )
    table = {k: [float(x) for x in v] for k, v in data.get("embeddings", {}).items()}
    dim = int(data.get("embedding_dim", 0))
    if not dim:
        dim = len(next(iter(table.values()))) if table else DEFAULT_EMBED_DIM
    return MockScript(entries=entries, embedding_table=table, embedding_dim=dim)


def _hash_vector(text: str, dim: int) -> list[float]:
    """Deterministic pseudo-embedding derived from a SHA-256 stream."""
    out: list[float] = []
    counter = 0
    while len(out) < dim:
        digest = hashlib.sha256(f"{counter}\x00{text}".encode("utf-8")).digest()
        out.extend((b - 127.5) / 127.5 for b in digest)
        counter += 1
    return out[:dim]


class MockBackend:
    """Replays a :class:`MockScript`; thread-safe via a single lock."""

    def __init__(self, script: MockScript):
        self.script = script
        self._remaining = [e.times for e in script.entries]
        self._lock = threading.Lock()

    def complete_n(self, req: ChatRequest) -> list[str]:
        text = req.flat_text()
        with self._lock:
            for i, entry in enumerate(self.script.entries):
                if self._remaining[i] == 0:
                    continue
                if not entry.matches(text):
                    continue
                if self._remaining[i] > 0:
                    self._remaining[i] -= 1
                responses = entry.responses
                return [responses[j % len(responses)] for j in range(req.sample_count)]
        raise ScriptExhaustedError(
            "no script entry matches request starting with: "
            + text[:200].replace("\n", "\\n")
        )

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        if not texts:
            raise ValueError("embed_texts requires at least one text")
        dim = self.script.embedding_dim
        rows = []
        for text in texts:
            vec = self.script.embedding_table.get(text)
            rows.append(vec if vec is not None else _hash_vector(text, dim))
        return np.asarray(rows, dtype=np.float64)
