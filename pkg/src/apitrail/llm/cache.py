"""Content-addressed response cache wrapping any backend.

Keys cover everything that can change a completion: model name, messages,
sample count and the effective sampling parameters. Values are written
atomically (temp file + rename), so concurrent writers of the same key are
harmless: they produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np

from .backend import Backend, BackendConfig, ChatRequest

logger = logging.getLogger(__name__)


def cache_key(req: ChatRequest, cfg: BackendConfig) -> str:
    """Stable hex digest identifying a completion request."""
    payload = {
        "model": cfg.model_name,
        "messages": [[r, c] for r, c in req.messages],
        "sample_count": req.sample_count,
        "temperature": req.effective_temperature(cfg),
        "top_p": req.effective_top_p(cfg),
        "max_tokens": cfg.max_tokens,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class CachingBackend:
    """Backend decorator adding persistent completion caching.

    Embeddings are passed through uncached: the pool-level embedding cache
    in the retrieval stage already persists the expensive bulk, and query
    texts rarely repeat.
    """

    def __init__(self, inner: Backend, cfg: BackendConfig, cache_dir: str | Path | None):
        self.inner = inner
        self.cfg = cfg
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        assert self.cache_dir is not None
        return self.cache_dir / f"{key}.json"

    def complete_n(self, req: ChatRequest) -> list[str]:
        if self.cache_dir is None:
            return self.inner.complete_n(req)
        key = cache_key(req, self.cfg)
        path = self._path(key)
        if path.exists():
            try:
                stored = json.loads(path.read_text(encoding="utf-8"))
                responses = stored["responses"]
                if isinstance(responses, list) and len(responses) == req.sample_count:
                    self.hits += 1
                    return [str(r) for r in responses]
                logger.warning("cache entry %s has wrong shape, refetching", key[:12])
            except (ValueError, KeyError, OSError):
                logger.warning("corrupt cache entry %s, refetching", key[:12])
        self.misses += 1
        responses = self.inner.complete_n(req)
        fd, tmp = tempfile.mkstemp(dir=self.cache_dir, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump({"key": key, "responses": responses}, fh, ensure_ascii=False)
            os.replace(tmp, path)
        except OSError:
            logger.warning("could not persist cache entry %s", key[:12])
            if os.path.exists(tmp):
                os.unlink(tmp)
        return responses

    def embed_texts(self, texts: list[str]) -> np.ndarray:
        return self.inner.embed_texts(texts)
