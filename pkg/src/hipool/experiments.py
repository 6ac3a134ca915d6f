"""Desk-scale experiment protocols shared by the CLI, scripts and acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .config import RunConfig
from .data import LabeledCorpus, SynthLayout, split, synth_longrange
from .training import (
    HiPoolModel,
    build_vocab,
    cross_entropy,
    encode_corpus,
    evaluate,
    train,
)

# Small documents: 8 chunks of 16 tokens with half overlap -> 72 tokens each.
SYNTH_L = 16
SYNTH_CHUNKS = 8

# Memorization fixture: a large filler vocabulary makes every document distinctive.
OVERFIT_CONFIG = RunConfig(L=SYNTH_L, L_olp=SYNTH_L // 2, max_node=SYNTH_CHUNKS, d=16,
                           lr=1e-3, epochs=200, batch_size=8, patience=None)
OVERFIT_FILLER = 40

# Generalization benchmark: a small filler vocabulary leaves the markers as the only signal.
LONGRANGE_CONFIG = RunConfig(L=SYNTH_L, L_olp=SYNTH_L // 2, max_node=SYNTH_CHUNKS, d=16,
                             lr=3e-3, epochs=60, batch_size=32, patience=None)
LONGRANGE_FILLER = 8

GRADCHECK_CONFIG = RunConfig(L=SYNTH_L, L_olp=SYNTH_L // 2, max_node=8, d=8, p=2, num_layers=2)


def overfit_fixture(seed: int, n_docs: int = 64) -> LabeledCorpus:
    return synth_longrange(n_docs, 2, SYNTH_CHUNKS, SYNTH_L, seed=seed, n_filler=OVERFIT_FILLER)


def longrange_corpus(seed: int, n_docs: int = 1000, n_classes: int = 2) -> LabeledCorpus:
    return synth_longrange(n_docs, n_classes, SYNTH_CHUNKS, SYNTH_L, seed=seed, n_filler=LONGRANGE_FILLER)


def synth_lengths() -> tuple[int, int]:
    """(tokens covering only the first marker, tokens covering both) for the benchmark layout."""
    layout = SynthLayout(SYNTH_L, SYNTH_CHUNKS)
    return layout.length - layout.stride, layout.length


@dataclass
class RunOutcome:
    train_f1: float
    dev_f1: float | None
    test_f1: float | None
    epochs: int
    final_loss: float


def fit_and_score(train_corpus: LabeledCorpus, cfg: RunConfig, dev: LabeledCorpus | None = None,
                  test: LabeledCorpus | None = None, max_tokens: int | None = None,
                  target_train_f1: float | None = None) -> RunOutcome:
    vocab = build_vocab(train_corpus, max_size=cfg.vocab_size)
    model = HiPoolModel.create(cfg, vocab.size, train_corpus.class_count)
    tr = encode_corpus(train_corpus, vocab, cfg, max_tokens)
    dv = encode_corpus(dev, vocab, cfg, max_tokens) if dev is not None and len(dev) else None
    result = train(model, tr, cfg, dv, target_train_f1=target_train_f1)
    test_f1 = None
    if test is not None and len(test):
        test_f1 = evaluate(model, encode_corpus(test, vocab, cfg, max_tokens)).micro_f1
    last = result.log[-1]
    return RunOutcome(last.train_f1, last.dev_f1, test_f1, len(result.log), last.loss)


def overfit_run(seed: int, aggregator: str = "sum", epochs: int = 200) -> RunOutcome:
    cfg = replace(OVERFIT_CONFIG, seed=seed, aggregator=aggregator, epochs=epochs)
    return fit_and_score(overfit_fixture(seed), cfg, target_train_f1=1.0)


def hierarchy_comparison(seeds: Sequence[int], n_docs: int = 1000,
                         aggregators: Sequence[str] = ("sum", "simple")) -> dict[str, list[float]]:
    """Test micro-F1 per seed for each hierarchy on the long-range benchmark."""
    scores: dict[str, list[float]] = {a: [] for a in aggregators}
    for seed in seeds:
        corpus = longrange_corpus(seed, n_docs)
        tr, dv, te = split(corpus, (0.8, 0.1, 0.1), seed=seed)
        for agg in aggregators:
            cfg = replace(LONGRANGE_CONFIG, seed=seed, aggregator=agg)
            scores[agg].append(fit_and_score(tr, cfg, dv, te).test_f1)
    return scores


def length_ablation(train_corpus: LabeledCorpus, test_corpus: LabeledCorpus, cfg: RunConfig,
                    lengths: Sequence[int], seeds: Sequence[int] | None = None,
                    dev_corpus: LabeledCorpus | None = None) -> list[tuple[int, float]]:
    """Retrain per head-truncation length; mean test micro-F1 over ``seeds``."""
    if list(lengths) != sorted(lengths) or len(set(lengths)) != len(lengths):
        raise ValueError(f"lengths must be strictly ascending, got {list(lengths)}")
    seeds = [cfg.seed] if seeds is None else list(seeds)
    rows = []
    for length in lengths:
        f1s = [fit_and_score(train_corpus, replace(cfg, seed=s), dev_corpus, test_corpus,
                             max_tokens=length).test_f1 for s in seeds]
        rows.append((length, float(np.mean(f1s))))
    return rows


def synth_length_ablation(seeds: Sequence[int], n_docs: int = 1000,
                          lengths: Sequence[int] | None = None) -> list[tuple[int, float]]:
    """Length ablation on the benchmark, each seed with its own corpus; mean F1 per length."""
    lengths = list(lengths or synth_lengths())
    per_seed = []
    for seed in seeds:
        tr, _, te = split(longrange_corpus(seed, n_docs), (0.8, 0.1, 0.1), seed=seed)
        cfg = replace(LONGRANGE_CONFIG, seed=seed)
        per_seed.append([f1 for _, f1 in length_ablation(tr, te, cfg, lengths)])
    means = np.mean(np.array(per_seed), axis=0)
    return [(length, float(f1)) for length, f1 in zip(lengths, means)]


def model_gradcheck(cfg: RunConfig = GRADCHECK_CONFIG, corpus: LabeledCorpus | None = None,
                    n_docs: int = 2, eps: float = 1e-5) -> float:
    """Max relative gradient error through embedder, HiPool layers, head and loss."""
    if corpus is None:
        corpus = synth_longrange(n_docs, 2, cfg.max_node, cfg.L, seed=cfg.seed, n_filler=LONGRANGE_FILLER)
    docs = corpus.subset(corpus.documents[:n_docs])
    vocab = build_vocab(docs)
    model = HiPoolModel.create(cfg, vocab.size, corpus.class_count)
    data = encode_corpus(docs, vocab, cfg)
    # move away from the zero-bias init so every path carries gradient
    rng = np.random.default_rng([cfg.seed, 7])
    model.head.bias.values[...] = rng.uniform(-0.5, 0.5, model.head.bias.shape)

    def loss_fn() -> ad.Tensor:
        return cross_entropy(model.logits(data.ids), data.labels)

    return ad.grad_check(loss_fn, model.parameters(), eps=eps)
