"""Chunk embeddings: a trainable mean-of-tokens encoder, or vectors read from disk."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import autodiff as ad
from .chunking import PAD_ID, ChunkSequence


class FormatError(ValueError):
    """A record could not be parsed."""


class SchemaError(ValueError):
    """A record parsed but violates the declared layout."""


def init_uniform(rng: np.random.Generator, shape: tuple[int, int], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class EmbeddingTable:
    weight: ad.Tensor
    ff_weight: ad.Tensor | None = None

    @classmethod
    def create(cls, vocab_size: int, d: int, rng: np.random.Generator, feed_forward: bool = False):
        weight = ad.parameter(init_uniform(rng, (vocab_size, d), d), name="embedding")
        ff = ad.parameter(init_uniform(rng, (d, d), d), name="embedding_ff") if feed_forward else None
        return cls(weight, ff)

    @property
    def vocab_size(self) -> int:
        return self.weight.shape[0]

    @property
    def dim(self) -> int:
        return self.weight.shape[1]

    def parameters(self) -> list[ad.Tensor]:
        return [self.weight] + ([self.ff_weight] if self.ff_weight is not None else [])


def embed_ids(ids: np.ndarray, table: EmbeddingTable) -> ad.Tensor:
    """Row i is the mean embedding of the non-PAD ids in ``ids[i]``."""
    x = ad.embedding_bag(table.weight, ids, pad_id=PAD_ID)
    if table.ff_weight is not None:
        x = ad.relu(x @ table.ff_weight)
    return x


def embed_chunks(cs: ChunkSequence | Sequence[Sequence[int]], table: EmbeddingTable) -> ad.Tensor:
    chunks = cs.chunks if isinstance(cs, ChunkSequence) else cs
    return embed_ids(np.asarray(chunks, dtype=np.int64), table)


@dataclass
class ExternalEmbeddings:
    """Precomputed chunk vectors keyed by document id, e.g. a pretrained encoder's CLS outputs."""

    vectors: dict[str, np.ndarray]
    dim: int

    def __len__(self) -> int:
        return len(self.vectors)

    def __getitem__(self, doc_id: str) -> np.ndarray:
        return self.vectors[doc_id]


def load_external(path: str | Path, dim: int | None = None) -> ExternalEmbeddings:
    """Read ``{"id": ..., "chunks": [[...], ...]}`` records, one per line.

    ``dim`` fixes the expected width; otherwise the first record sets it.
    """
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                doc_id = rec["id"]
                rows = rec["chunks"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}:{lineno}: cannot parse embedding record ({exc})") from None
            if not isinstance(doc_id, str):
                raise FormatError(f"{path}:{lineno}: id must be a string")
            if not isinstance(rows, list) or not rows:
                raise SchemaError(f"document {doc_id!r}: needs at least one chunk vector")
            widths = {len(r) if isinstance(r, list) else -1 for r in rows}
            if len(widths) != 1:
                raise SchemaError(f"document {doc_id!r}: ragged chunk rows")
            width = widths.pop()
            if dim is None:
                dim = width
            if width != dim:
                raise SchemaError(f"document {doc_id!r}: chunk width {width}, expected {dim}")
            try:
                mat = np.array(rows, dtype=np.float64)
            except (TypeError, ValueError):
                raise FormatError(f"{path}:{lineno}: non-numeric chunk entry") from None
            if doc_id in vectors:
                raise SchemaError(f"document {doc_id!r} appears twice")
            vectors[doc_id] = mat
    if dim is None:
        raise SchemaError(f"{path}: no embedding records")
    return ExternalEmbeddings(vectors, dim)


def save_external(emb: ExternalEmbeddings | Mapping[str, np.ndarray], path: str | Path) -> None:
    vectors = emb.vectors if isinstance(emb, ExternalEmbeddings) else emb
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, mat in vectors.items():
            # repr of a Python float round-trips exactly
            rows = [[float(v) for v in row] for row in np.asarray(mat)]
            fh.write(json.dumps({"id": doc_id, "chunks": rows}) + "\n")
