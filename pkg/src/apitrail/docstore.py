"""Documentation pool: the retrieval search space.

Each API of the target library is one tabular row (import path, signature,
description, optional example code). Pools are stored as UTF-8 JSON Lines,
one record per line, which keeps them streamable and diff-friendly. Load
order is preserved and used as the deterministic tie-break key everywhere
downstream.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import DocPoolError

REQUIRED_FIELDS = ("doc_id", "import_path", "signature", "description")


@dataclass(frozen=True)
class ApiDoc:
    """One documentation row for a single API."""

    doc_id: str
    import_path: str
    signature: str
    description: str
    example_code: str | None = None

    def __post_init__(self):
        if not self.doc_id:
            raise DocPoolError("doc_id must be non-empty")
        if not self.import_path:
            raise DocPoolError(f"doc {self.doc_id!r}: import_path must be non-empty")
        if not self.signature:
            raise DocPoolError(f"doc {self.doc_id!r}: signature must be non-empty")


class DocPool:
    """Immutable, ordered collection of :class:`ApiDoc` rows.

    Immutable after load, so a single pool can be shared read-only across
    concurrent workers. Iteration follows load order.
    """

    def __init__(self, docs: list[ApiDoc], source_uri: str = ""):
        self._docs = list(docs)
        self.source_uri = source_uri
        self._by_id = {}
        for doc in self._docs:
            if doc.doc_id in self._by_id:
                raise DocPoolError(f"duplicate doc_id {doc.doc_id!r}")
            self._by_id[doc.doc_id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[ApiDoc]:
        return iter(self._docs)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def get(self, doc_id: str) -> ApiDoc:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise DocPoolError(f"unknown doc_id {doc_id!r}") from None

    @property
    def doc_ids(self) -> list[str]:
        return [d.doc_id for d in self._docs]


def load_doc_pool(path: str | Path) -> DocPool:
    """Load a documentation pool from a JSON Lines file.

    Every line must be a JSON object with fields ``doc_id``, ``import_path``,
    ``signature``, ``description`` and optionally ``example_code``. File
    order is preserved. Blank lines are ignored.

    Raises:
        DocPoolError: on a malformed line (carrying the line number) or a
            duplicate ``doc_id`` (naming both offending lines).
    """
    path = Path(path)
    docs: list[ApiDoc] = []
    seen_lines: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DocPoolError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(record, dict):
                raise DocPoolError(f"{path}: line {lineno}: record must be an object")
            missing = [f for f in REQUIRED_FIELDS if not record.get(f)]
            if missing:
                raise DocPoolError(
                    f"{path}: line {lineno}: missing or empty field(s): {', '.join(missing)}"
                )
            doc_id = str(record["doc_id"])
            if doc_id in seen_lines:
                raise DocPoolError(
                    f"{path}: duplicate doc_id {doc_id!r} on lines "
                    f"{seen_lines[doc_id]} and {lineno}"
                )
            seen_lines[doc_id] = lineno
            docs.append(
                ApiDoc(
                    doc_id=doc_id,
                    import_path=str(record["import_path"]),
                    signature=str(record["signature"]),
                    description=str(record["description"]),
                    example_code=record.get("example_code"),
                )
            )
    return DocPool(docs, source_uri=str(path))


def first_sentence(description: str) -> str:
    """Return the first sentence of a description.

    The split point is the first period followed by whitespace or by the end
    of the string; if there is none, the whole (trimmed) description is
    returned. Abbreviations such as "e.g." are deliberately not special-cased,
    so they produce a slightly short result.
    """
    text = description.strip()
    for i, ch in enumerate(text):
        if ch != ".":
            continue
        if i + 1 == len(text) or text[i + 1].isspace():
            return text[: i + 1].strip()
    return text


def index_text(doc: ApiDoc) -> str:
    """Build the retrieval index text for a doc.

    Concatenates the import path and the first sentence of the description,
    the combination that retrieves best. The signature intentionally does not
    participate. Deterministic given the doc.
    """
    sentence = first_sentence(doc.description)
    if not sentence:
        return doc.import_path
    return f"{doc.import_path} {sentence}"
