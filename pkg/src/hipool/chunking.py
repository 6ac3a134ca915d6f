"""Tokenization, vocabulary and overlapping fixed-length chunking."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

DEFAULT_CHUNK_LEN = 300
DEFAULT_OVERLAP = 150

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class ConfigurationError(ValueError):
    pass


def split_tokens(text: str) -> list[str]:
    """Lowercase, then split on whitespace and punctuation (both discarded)."""
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Vocabulary:
    """Frozen token -> id map; ids 0 and 1 are PAD and UNK."""

    token_to_id: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        ids = {PAD_TOKEN: PAD_ID, UNK_TOKEN: UNK_ID}
        for tok, idx in self.token_to_id.items():
            if tok in ids and ids[tok] != idx:
                raise ValueError(f"reserved token {tok!r} must keep id {ids[tok]}")
            ids[tok] = idx
        if sorted(ids.values()) != list(range(len(ids))):
            raise ValueError("vocabulary ids must be contiguous from 0")
        object.__setattr__(self, "token_to_id", dict(ids))

    @classmethod
    def from_tokens(cls, tokens: Iterable[str]) -> Vocabulary:
        mapping: dict[str, int] = {}
        for tok in tokens:
            if tok in (PAD_TOKEN, UNK_TOKEN) or tok in mapping:
                continue
            mapping[tok] = len(mapping) + 2
        return cls(mapping)

    @classmethod
    def build(cls, texts: Iterable[str], min_count: int = 1, max_size: int | None = None) -> Vocabulary:
        """Corpus vocabulary ordered by descending frequency, ties alphabetical."""
        counts = Counter(tok for text in texts for tok in split_tokens(text))
        ranked = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
        if max_size is not None:
            ranked = ranked[: max(0, max_size - 2)]
        return cls.from_tokens(ranked)

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    def __len__(self) -> int:
        return self.size

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def save(self, path: str | Path) -> None:
        by_id = sorted(self.token_to_id.items(), key=lambda kv: kv[1])
        lines = [tok for tok, idx in by_id if idx >= 2]
        Path(path).write_text("".join(f"{tok}\n" for tok in lines), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> Vocabulary:
        text = Path(path).read_text(encoding="utf-8")
        tokens = text.split("\n")
        if tokens and tokens[-1] == "":
            tokens.pop()
        return cls({tok: i + 2 for i, tok in enumerate(tokens)})


def tokenize(text: str, vocab: Vocabulary | Mapping[str, int]) -> list[int]:
    lookup = vocab.lookup if isinstance(vocab, Vocabulary) else (lambda t: vocab.get(t, UNK_ID))
    return [lookup(tok) for tok in split_tokens(text)]


@dataclass(frozen=True)
class ChunkSequence:
    chunks: tuple[tuple[int, ...], ...]
    L: int
    L_olp: int
    n_real: int

    def __len__(self) -> int:
        return len(self.chunks)


def chunk_count(n_tokens: int, L: int, L_olp: int) -> int:
    if n_tokens <= 0:
        return 1
    return 1 + math.ceil(max(0, n_tokens - L) / (L - L_olp))


def chunk(tokens: list[int], L: int = DEFAULT_CHUNK_LEN, L_olp: int = DEFAULT_OVERLAP) -> ChunkSequence:
    """Slide a window of ``L`` tokens with stride ``L - L_olp`` over ``tokens``.

    Windows start at 0, s, 2s, ... and the last window is the first one that
    reaches the end of the sequence; it is PAD-completed to ``L``.
    """
    if L < 1:
        raise ConfigurationError(f"chunk length must be >= 1, got {L}")
    if not 0 <= L_olp < L:
        raise ConfigurationError(f"overlap must satisfy 0 <= L_olp < L, got L_olp={L_olp}, L={L}")
    tokens = list(tokens)
    stride = L - L_olp
    chunks = []
    for start in range(0, max(len(tokens), 1), stride):
        window = tokens[start : start + L]
        chunks.append(tuple(window) + (PAD_ID,) * (L - len(window)))
        if start + L >= len(tokens):
            break
    n_real = sum(1 for t in tokens if t != PAD_ID)
    return ChunkSequence(tuple(chunks), L, L_olp, n_real)


def cap_chunks(cs: ChunkSequence, max_node: int) -> ChunkSequence:
    """Keep the earliest ``max_node`` chunks, PAD-filling up to exactly ``max_node``."""
    if max_node < 1:
        raise ConfigurationError(f"max_node must be >= 1, got {max_node}")
    kept = cs.chunks[:max_node]
    # source tokens still covered after dropping tail chunks
    n_real = min(cs.n_real, (len(kept) - 1) * (cs.L - cs.L_olp) + cs.L)
    blank = (PAD_ID,) * cs.L
    kept = kept + (blank,) * (max_node - len(kept))
    return ChunkSequence(kept, cs.L, cs.L_olp, n_real)
