"""Labeled corpora: ingestion, length statistics, filtering, splits, synthetic data."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autodiff import DomainError
from .chunking import split_tokens
from .embedder import FormatError, SchemaError


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    label: int


@dataclass
class LabeledCorpus:
    documents: list[Document]
    class_count: int
    name: str = "corpus"

    def __post_init__(self):
        seen = set()
        for doc in self.documents:
            if doc.id in seen:
                raise SchemaError(f"duplicate document id {doc.id!r}")
            seen.add(doc.id)
            if not 0 <= doc.label < self.class_count:
                raise SchemaError(f"document {doc.id!r}: label {doc.label} outside [0, {self.class_count})")

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)

    @property
    def labels(self) -> list[int]:
        return [d.label for d in self.documents]

    @property
    def texts(self) -> list[str]:
        return [d.text for d in self.documents]

    def subset(self, docs: Sequence[Document], name: str | None = None) -> LabeledCorpus:
        return LabeledCorpus(list(docs), self.class_count, name or self.name)


def load_corpus(path: str | Path, class_count: int | None = None, name: str | None = None) -> LabeledCorpus:
    """Read ``{"id"?, "text", "label"}`` records, one JSON object per line.

    Missing ids become ``line-<n>``.  Without ``class_count`` the largest
    label plus one is used.
    """
    path = Path(path)
    docs: list[Document] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict):
                raise FormatError(f"{path}:{lineno}: record must be an object")
            text, label = rec.get("text"), rec.get("label")
            if not isinstance(text, str):
                raise FormatError(f"{path}:{lineno}: 'text' must be a string")
            if isinstance(label, bool) or not isinstance(label, int):
                raise FormatError(f"{path}:{lineno}: 'label' must be a non-negative integer, got {label!r}")
            if label < 0:
                raise SchemaError(f"{path}:{lineno}: negative label {label}")
            if class_count is not None and label >= class_count:
                raise SchemaError(f"{path}:{lineno}: label {label} >= class count {class_count}")
            doc_id = rec.get("id")
            if doc_id is None:
                doc_id = f"line-{lineno}"
            elif not isinstance(doc_id, str):
                raise FormatError(f"{path}:{lineno}: 'id' must be a string")
            docs.append(Document(doc_id, text, label))
    if class_count is None:
        class_count = max((d.label for d in docs), default=0) + 1
    return LabeledCorpus(docs, class_count, name or path.stem)


def save_corpus(corpus: LabeledCorpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in corpus:
            fh.write(json.dumps({"id": doc.id, "text": doc.text, "label": doc.label}, ensure_ascii=False) + "\n")


def count_tokens(text: str) -> int:
    return len(split_tokens(text))


@dataclass(frozen=True)
class CorpusStats:
    mean: float
    max: int
    min: int
    median: int
    p95: int
    total: int
    classes: int
    unit: str = "tokens"

    ROWS = (("Mean", "mean"), ("Max", "max"), ("Min", "min"), ("Med.", "median"),
            ("95pt.", "p95"), ("Total", "total"), ("Class", "classes"))

    def as_record(self) -> dict:
        return asdict(self)

    def report(self, title: str = "") -> str:
        """Aligned plain-text table, one statistic per row."""
        header = f"{title} ({self.unit})" if title else f"({self.unit})"
        lines = [header]
        width = max(len(label) for label, _ in self.ROWS)
        for label, attr in self.ROWS:
            value = getattr(self, attr)
            shown = f"{value:.2f}" if attr == "mean" else f"{value}"
            lines.append(f"{label:<{width}}  {shown:>12}")
        return "\n".join(lines)


def length_stats(lengths: Sequence[int], classes: int, unit: str = "tokens") -> CorpusStats:
    if not lengths:
        raise DomainError("statistics need a non-empty corpus")
    ordered = sorted(lengths)
    n = len(ordered)
    return CorpusStats(
        mean=sum(ordered) / n,
        max=ordered[-1],
        min=ordered[0],
        median=ordered[(n - 1) // 2],
        p95=ordered[math.ceil(0.95 * n) - 1],
        total=n,
        classes=classes,
        unit=unit,
    )


def stats(corpus: LabeledCorpus, tokenizer: Callable[[str], int] = count_tokens) -> CorpusStats:
    """Token-length statistics; lower-middle median, nearest-rank 95th percentile."""
    return length_stats([tokenizer(d.text) for d in corpus], corpus.class_count)


def filter_by_length(corpus: LabeledCorpus, min_tokens: int,
                     tokenizer: Callable[[str], int] = count_tokens) -> LabeledCorpus:
    """Keep documents strictly longer than ``min_tokens``."""
    if min_tokens < 0:
        raise DomainError(f"min_tokens must be >= 0, got {min_tokens}")
    return corpus.subset([d for d in corpus if tokenizer(d.text) > min_tokens])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(corpus: LabeledCorpus, ratios: Sequence[float] = (0.8, 0.1, 0.1),
          seed: int = 0) -> tuple[LabeledCorpus, LabeledCorpus, LabeledCorpus]:
    """Seeded shuffle, then contiguous train/dev/test cut.

    Dev and test sizes are ``round(N * ratio)``; train takes the remainder.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise DomainError(f"need three non-negative ratios, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DomainError(f"ratios must sum to 1, got {sum(ratios)}")
    n = len(corpus)
    order = np.random.default_rng(seed).permutation(n)
    n_dev = _round_half_up(n * ratios[1])
    n_test = _round_half_up(n * ratios[2])
    n_test = min(n_test, n)
    n_dev = min(n_dev, n - n_test)
    n_train = n - n_dev - n_test
    docs = [corpus.documents[i] for i in order]
    parts = (docs[:n_train], docs[n_train:n_train + n_dev], docs[n_train + n_dev:])
    for label, part in zip(("train", "dev", "test"), parts):
        if not part:
            warnings.warn(f"{label} partition of {corpus.name!r} is empty", stacklevel=2)
    return tuple(corpus.subset(p, f"{corpus.name}-{lab}") for p, lab in zip(parts, ("train", "dev", "test")))


@dataclass(frozen=True)
class SynthLayout:
    """Layout of a generated long-range document (token positions, not chunks)."""

    L: int
    chunks_per_doc: int
    stride: int = field(init=False)
    length: int = field(init=False)

    def __post_init__(self):
        stride = self.L - self.L // 2
        object.__setattr__(self, "stride", stride)
        object.__setattr__(self, "length", self.L + (self.chunks_per_doc - 1) * stride)

    @property
    def first_marker_span(self) -> tuple[int, int]:
        return 0, min(self.stride, self.length - 2 * self.stride)

    def second_marker_span(self, first: int) -> tuple[int, int]:
        return max(first + 2 * self.stride, self.length - self.stride), self.length


N_FILLER = 40


def synth_longrange(n_docs: int, n_classes: int = 2, chunks_per_doc: int = 8, L: int = 16,
                    seed: int = 0, n_filler: int = N_FILLER) -> LabeledCorpus:
    """Documents whose label depends jointly on two far-apart marker tokens.

    The first marker ``a<i>`` sits in the first chunk stride and the second
    ``b<j>`` in the last one, at least two strides (one full chunk) later, so
    they never share a chunk.  The label is ``(i + j) mod n_classes``; each
    marker alone is independent of the label, so no bag-of-tokens or
    single-chunk model beats chance.  Everything else is uniform filler.
    Texts chunk into exactly ``chunks_per_doc`` windows with ``L_olp = L // 2``.
    """
    if n_docs < 1 or n_classes < 2 or chunks_per_doc < 2 or L < 2 or n_filler < 1:
        raise DomainError("synth_longrange needs n_docs >= 1, n_classes >= 2, chunks_per_doc >= 2, L >= 2")
    layout = SynthLayout(L, chunks_per_doc)
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n_docs) % n_classes)
    filler = [f"w{i}" for i in range(n_filler)]
    docs = []
    for k, label in enumerate(labels):
        a = int(rng.integers(n_classes))
        b = (int(label) - a) % n_classes
        tokens = [filler[i] for i in rng.integers(n_filler, size=layout.length)]
        first = int(rng.integers(*layout.first_marker_span))
        second = int(rng.integers(*layout.second_marker_span(first)))
        tokens[first] = f"a{a}"
        tokens[second] = f"b{b}"
        docs.append(Document(f"synth-{k:05d}", " ".join(tokens), int(label)))
    return LabeledCorpus(docs, n_classes, f"synth-longrange-s{seed}")


def marker_positions(text: str) -> tuple[int, int]:
    """Token positions of the two planted markers in a synthetic document."""
    toks = split_tokens(text)
    first = next(i for i, t in enumerate(toks) if t[0] == "a" and t[1:].isdigit())
    second = next(i for i, t in enumerate(toks) if t[0] == "b" and t[1:].isdigit())
    return first, second
