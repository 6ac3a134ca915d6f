"""Classifier head, Adam, the training loop, evaluation and checkpoints."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError, DomainError
from .chunking import Vocabulary, cap_chunks, chunk, tokenize
from .config import RunConfig
from .data import LabeledCorpus
from .embedder import EmbeddingTable, SchemaError, embed_ids, init_uniform
from .encoder import EncoderConfig, HiPoolLayerParams, encode, init_layers

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "hipool-checkpoint-v1"


@dataclass
class ClassifierHead:
    weight: ad.Tensor
    bias: ad.Tensor

    @classmethod
    def create(cls, d: int, classes: int, rng: np.random.Generator) -> ClassifierHead:
        if classes < 2:
            raise DomainError(f"need at least two classes, got {classes}")
        return cls(
            ad.parameter(init_uniform(rng, (d, classes), d), name="head.weight"),
            ad.parameter(np.zeros((1, classes)), name="head.bias"),
        )

    @property
    def classes(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: ad.Tensor) -> ad.Tensor:
        ones = ad.constant(np.ones((x.shape[0], 1)))
        return x @ self.weight + ones @ self.bias


def cross_entropy(logits: ad.Tensor, label) -> ad.Tensor:
    """Stabilized ``-log softmax(logits)[label]``; a batch of rows gives the mean."""
    labels = np.atleast_1d(np.asarray(label))
    return ad.cross_entropy(logits, labels)


@dataclass
class HiPoolModel:
    embedding: EmbeddingTable
    layers: list[HiPoolLayerParams]
    head: ClassifierHead
    encoder: EncoderConfig

    @classmethod
    def create(cls, cfg: RunConfig, vocab_size: int, classes: int) -> HiPoolModel:
        enc = encoder_config(cfg)
        rng = np.random.default_rng(cfg.seed)
        embedding = EmbeddingTable.create(vocab_size, cfg.d, rng, feed_forward=cfg.embed_ff)
        layers = init_layers(enc, rng)
        head = ClassifierHead.create(enc.out_dim, classes, rng)
        return cls(embedding, layers, head, enc)

    def named_parameters(self) -> dict[str, ad.Tensor]:
        named = {"embedding": self.embedding.weight}
        if self.embedding.ff_weight is not None:
            named["embedding_ff"] = self.embedding.ff_weight
        for i, layer in enumerate(self.layers):
            named[f"layer{i}.w_atten"] = layer.w_atten
            named[f"layer{i}.w_gcn"] = layer.w_gcn
        named["head.weight"] = self.head.weight
        named["head.bias"] = self.head.bias
        return named

    def parameters(self) -> list[ad.Tensor]:
        return list(self.named_parameters().values())

    def logits_from_features(self, x: ad.Tensor, batch: int) -> ad.Tensor:
        return self.head(encode(x, self.encoder, self.layers, batch))

    def logits(self, chunk_ids: np.ndarray) -> ad.Tensor:
        """``chunk_ids`` is (batch, max_node, L); returns (batch, classes) logits."""
        chunk_ids = np.asarray(chunk_ids)
        if chunk_ids.ndim != 3:
            raise DimensionError(f"expected (batch, nodes, L) ids, got shape {chunk_ids.shape}")
        batch, nodes, length = chunk_ids.shape
        x = embed_ids(chunk_ids.reshape(batch * nodes, length), self.embedding)
        return self.logits_from_features(x, batch)

    def predict(self, chunk_ids: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(chunk_ids).values, axis=1)


def encoder_config(cfg: RunConfig) -> EncoderConfig:
    return EncoderConfig(
        d=cfg.d,
        p=cfg.p,
        num_layers=cfg.num_layers,
        aggregator=cfg.aggregator,
        low_adjacency=cfg.low_adjacency,
        attention_softmax=cfg.attention_softmax,
    )


@dataclass
class EncodedDataset:
    """Documents as a dense (N, max_node, L) id array plus labels."""

    ids: np.ndarray
    labels: np.ndarray
    doc_ids: list[str]

    def __len__(self) -> int:
        return len(self.labels)


def encode_corpus(corpus: LabeledCorpus, vocab: Vocabulary, cfg: RunConfig,
                  max_tokens: int | None = None) -> EncodedDataset:
    """Tokenize, optionally head-truncate to ``max_tokens``, chunk and cap every document."""
    rows = []
    for doc in corpus:
        toks = tokenize(doc.text, vocab)
        if max_tokens is not None:
            toks = toks[:max_tokens]
        rows.append(cap_chunks(chunk(toks, cfg.L, cfg.L_olp), cfg.max_node).chunks)
    ids = np.array(rows, dtype=np.int64).reshape(len(rows), cfg.max_node, cfg.L)
    return EncodedDataset(ids, np.array(corpus.labels, dtype=np.int64), [d.id for d in corpus])


@dataclass
class AdamState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[ad.Tensor], lr: float, **kw) -> AdamState:
        return cls(lr, m=[np.zeros_like(p.values) for p in params],
                   v=[np.zeros_like(p.values) for p in params], **kw)


def adam_step(params: Sequence[ad.Tensor], grads: Sequence[np.ndarray | None], state: AdamState) -> AdamState:
    """Bias-corrected Adam update, applied to ``params`` in place."""
    if not (len(params) == len(grads) == len(state.m)):
        raise DimensionError("params, grads and optimizer state differ in length")
    state.step += 1
    t = state.step
    c1 = 1 - state.beta1**t
    c2 = 1 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.values)
        if g.shape != p.shape or m.shape != p.shape:
            raise DimensionError(f"gradient {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p.values -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


@dataclass
class EvalResult:
    micro_f1: float
    accuracy: float
    tp: list[int]
    fp: list[int]
    fn: list[int]
    predictions: list[int]

    def as_record(self) -> dict:
        return {"micro_f1": self.micro_f1, "accuracy": self.accuracy,
                "tp": self.tp, "fp": self.fp, "fn": self.fn}


def micro_f1(preds: Sequence[int], gold: Sequence[int], classes: int) -> EvalResult:
    preds = np.asarray(preds, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if preds.size == 0:
        raise DomainError("cannot score an empty prediction set")
    tp = [int(np.sum((preds == c) & (gold == c))) for c in range(classes)]
    fp = [int(np.sum((preds == c) & (gold != c))) for c in range(classes)]
    fn = [int(np.sum((preds != c) & (gold == c))) for c in range(classes)]
    TP, FP, FN = sum(tp), sum(fp), sum(fn)
    f1 = 2 * TP / (2 * TP + FP + FN) if TP + FP + FN else 0.0
    acc = TP / len(gold)
    assert f1 == acc, "micro-F1 must equal accuracy for single-label data"
    return EvalResult(f1, acc, tp, fp, fn, preds.tolist())


def evaluate(model: HiPoolModel, data: EncodedDataset, batch_size: int = 64) -> EvalResult:
    if len(data) == 0:
        raise DomainError("cannot evaluate on an empty dataset")
    preds = [model.predict(data.ids[i:i + batch_size]) for i in range(0, len(data), batch_size)]
    return micro_f1(np.concatenate(preds), data.labels, model.head.classes)


def _batch_loss(model: HiPoolModel, ids: np.ndarray, labels: np.ndarray) -> ad.Tensor:
    return cross_entropy(model.logits(ids), labels)


@dataclass
class EpochLog:
    epoch: int
    loss: float
    train_f1: float
    dev_f1: float | None

    def as_record(self) -> dict:
        return {"epoch": self.epoch, "loss": self.loss, "train_f1": self.train_f1, "dev_f1": self.dev_f1}


@dataclass
class TrainResult:
    model: HiPoolModel
    log: list[EpochLog]
    stopped_early: bool = False


def train(model: HiPoolModel, train_data: EncodedDataset, cfg: RunConfig,
          dev_data: EncodedDataset | None = None, target_train_f1: float | None = None) -> TrainResult:
    """Mini-batch Adam on mean cross-entropy.

    Shuffling is seeded from ``cfg.seed``.  With a dev set and
    ``cfg.patience`` set, training stops once dev micro-F1 has not improved
    for ``patience`` epochs; the final (not the best) parameters are kept.
    ``target_train_f1`` stops as soon as the train score reaches it.
    """
    if len(train_data) == 0:
        raise DomainError("training split is empty")
    params = model.parameters()
    state = AdamState.for_params(params, cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, 1])
    log: list[EpochLog] = []
    best_dev, stale = -math.inf, 0
    for epoch in range(1, cfg.epochs + 1):
        order = shuffle_rng.permutation(len(train_data))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            for p in params:
                p.zero_grad()
            loss = _batch_loss(model, train_data.ids[idx], train_data.labels[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise ad.NumericError(f"loss became {value} at epoch {epoch}")
            loss.backward()
            adam_step(params, [p.grad for p in params], state)
            total += value * len(idx)
        train_f1 = evaluate(model, train_data).micro_f1
        dev_f1 = evaluate(model, dev_data).micro_f1 if dev_data is not None and len(dev_data) else None
        entry = EpochLog(epoch, total / len(train_data), train_f1, dev_f1)
        log.append(entry)
        logger.info("epoch %d loss %.6f train_f1 %.4f dev_f1 %s", epoch, entry.loss, train_f1, dev_f1)
        if target_train_f1 is not None and train_f1 >= target_train_f1:
            return TrainResult(model, log, stopped_early=epoch < cfg.epochs)
        if dev_f1 is not None and cfg.patience is not None:
            if dev_f1 > best_dev:
                best_dev, stale = dev_f1, 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    return TrainResult(model, log, stopped_early=True)
    return TrainResult(model, log)


def save_checkpoint(model: HiPoolModel, cfg: RunConfig, vocab_ref: str, path: str | Path) -> None:
    tensors = {
        name: {"shape": list(t.shape), "values": [float(v) for v in t.values.reshape(-1)]}
        for name, t in model.named_parameters().items()
    }
    doc = {
        "format": CHECKPOINT_FORMAT,
        "config": cfg.to_dict(),
        "classes": model.head.classes,
        "vocab_ref": vocab_ref,
        "tensors": tensors,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[HiPoolModel, RunConfig, Vocabulary]:
    """Rebuild a model from a checkpoint; every tensor shape is checked against the config."""
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise SchemaError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    cfg = RunConfig.from_dict(doc["config"]).validate()
    vocab_path = Path(doc["vocab_ref"])
    if not vocab_path.is_absolute():
        vocab_path = path.parent / vocab_path
    vocab = Vocabulary.load(vocab_path)
    model = HiPoolModel.create(cfg, vocab.size, int(doc["classes"]))
    expected = model.named_parameters()
    stored = doc["tensors"]
    if set(stored) != set(expected):
        raise SchemaError(f"{path}: tensor names {sorted(stored)} do not match config {sorted(expected)}")
    for name, t in expected.items():
        shape = tuple(stored[name]["shape"])
        values = np.array(stored[name]["values"], dtype=np.float64)
        if shape != t.shape or values.size != math.prod(shape):
            raise SchemaError(f"{path}: tensor {name!r} has shape {shape}, config implies {t.shape}")
        t.values[...] = values.reshape(shape)
    return model, cfg, vocab


def build_vocab(corpus: LabeledCorpus | Iterable[str], max_size: int | None = None) -> Vocabulary:
    texts = corpus.texts if isinstance(corpus, LabeledCorpus) else list(corpus)
    return Vocabulary.build(texts, max_size=max_size)
