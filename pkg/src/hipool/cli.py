"""Command-line entry point: ``hipool <command> ...``.

Exit codes: 0 success, 1 check failure, 2 usage/format error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import autodiff as ad
from .chunking import ConfigurationError
from .config import ConfigError, RunConfig
from .data import filter_by_length, load_corpus, save_corpus, split, stats, synth_longrange
from .embedder import FormatError, SchemaError
from .experiments import GRADCHECK_CONFIG, length_ablation, model_gradcheck
from .training import (
    HiPoolModel,
    build_vocab,
    encode_corpus,
    evaluate,
    load_checkpoint,
    save_checkpoint,
    train,
)

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
GRADCHECK_TOLERANCE = 1e-4

log = logging.getLogger("hipool")


class UsageError(Exception):
    pass


def _load_config(args) -> RunConfig:
    return RunConfig.load(args.config, args.set or []).validate()


def _corpus(path, class_count=None):
    if path is None:
        raise UsageError("no corpus path given")
    if not Path(path).is_file():
        raise UsageError(f"corpus file not found: {path}")
    return load_corpus(path, class_count=class_count)


def cmd_stats(args) -> int:
    corpus = _corpus(args.corpus)
    if args.min_tokens is not None:
        corpus = filter_by_length(corpus, args.min_tokens)
    result = stats(corpus)
    if args.json:
        print(json.dumps(result.as_record(), sort_keys=True))
    else:
        print(result.report(corpus.name))
    return EXIT_OK


def cmd_split(args) -> int:
    corpus = _corpus(args.corpus)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, part in zip(("train", "dev", "test"), split(corpus, args.ratios, args.seed)):
        save_corpus(part, out / f"{name}.jsonl")
        print(f"{name}\t{len(part)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    corpus = synth_longrange(args.n_docs, args.classes, args.chunks_per_doc, args.L,
                             seed=args.seed, n_filler=args.n_filler)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    save_corpus(corpus, args.out)
    print(f"wrote {len(corpus)} documents to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load_config(args)
    train_corpus = _corpus(cfg.train_path, cfg.class_count)
    classes = cfg.class_count or train_corpus.class_count
    dev_corpus = _corpus(cfg.dev_path, classes) if cfg.dev_path else None
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    vocab = build_vocab(train_corpus, max_size=cfg.vocab_size)
    vocab.save(out / "vocab.txt")
    model = HiPoolModel.create(cfg, vocab.size, max(classes, 2))
    train_data = encode_corpus(train_corpus, vocab, cfg)
    dev_data = encode_corpus(dev_corpus, vocab, cfg) if dev_corpus is not None else None
    result = train(model, train_data, cfg, dev_data)

    with open(out / "metrics.jsonl", "w", encoding="utf-8") as fh:
        for entry in result.log:
            fh.write(json.dumps(entry.as_record()) + "\n")
    save_checkpoint(model, cfg, "vocab.txt", out / "checkpoint.json")
    last = result.log[-1]
    summary = {"epochs": len(result.log), "train_f1": last.train_f1, "dev_f1": last.dev_f1}
    if cfg.test_path:
        test = _corpus(cfg.test_path, classes)
        summary["test_f1"] = evaluate(model, encode_corpus(test, vocab, cfg)).micro_f1
    shown = last.dev_f1 if last.dev_f1 is not None else last.train_f1
    label = "dev" if last.dev_f1 is not None else "train"
    print(f"final {label} micro-F1: {shown:.4f}")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    model, cfg, vocab = load_checkpoint(args.checkpoint)
    classes = model.head.classes
    corpus = _corpus(args.corpus)
    if corpus.class_count > classes:
        raise UsageError(f"corpus has labels up to {corpus.class_count - 1} but the checkpoint has {classes} classes")
    result = evaluate(model, encode_corpus(corpus, vocab, cfg))
    print(f"{result.micro_f1:.4f}")
    if args.json:
        print(json.dumps(result.as_record(), sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    cfg = RunConfig.load(args.config, args.set or [], base=GRADCHECK_CONFIG.to_dict()).validate()
    corpus = _corpus(cfg.train_path) if cfg.train_path else None
    start = time.perf_counter()
    error = model_gradcheck(cfg, corpus, n_docs=args.docs, eps=args.eps)
    elapsed = time.perf_counter() - start
    ok = error < GRADCHECK_TOLERANCE
    # timing goes to stderr so stdout stays byte-identical across runs
    print(f"max relative error {error:.3e} (eps={args.eps:g}, tolerance {GRADCHECK_TOLERANCE:g}) "
          f"{'PASS' if ok else 'FAIL'}")
    print(f"gradcheck took {elapsed:.2f}s", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CHECK


def cmd_ablate_length(args) -> int:
    cfg = _load_config(args)
    lengths = args.lengths
    if lengths != sorted(lengths) or len(set(lengths)) != len(lengths):
        raise UsageError(f"lengths must be strictly ascending, got {lengths}")
    train_corpus = _corpus(cfg.train_path, cfg.class_count)
    classes = cfg.class_count or train_corpus.class_count
    test_path = cfg.test_path or cfg.dev_path
    test_corpus = _corpus(test_path, classes)
    rows = length_ablation(train_corpus, test_corpus, cfg, lengths, seeds=args.seeds)
    lines = ["length\tmicro_f1"] + [f"{length}\t{f1:.4f}" for length, f1 in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hipool", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p, required=True):
        p.add_argument("config", nargs=None if required else "?", help="JSON run config")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field")

    p = sub.add_parser("stats", help="length statistics of a corpus")
    p.add_argument("corpus")
    p.add_argument("--min-tokens", type=int, help="keep only documents longer than this first")
    p.add_argument("--json", action="store_true", help="emit a machine-readable record")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("split", help="seeded train/dev/test split")
    p.add_argument("corpus")
    p.add_argument("--ratios", type=float, nargs=3, default=[0.8, 0.1, 0.1])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("synth", help="generate the synthetic long-range corpus")
    p.add_argument("--n-docs", type=int, default=1000)
    p.add_argument("--classes", type=int, default=2)
    p.add_argument("--chunks-per-doc", type=int, default=8)
    p.add_argument("--L", type=int, default=16)
    p.add_argument("--n-filler", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model, write checkpoint and metrics log")
    with_config(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="micro-F1 of a checkpoint on a corpus")
    p.add_argument("checkpoint")
    p.add_argument("corpus")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    with_config(p, required=False)
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--docs", type=int, default=2, help="documents in the checked batch")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate-length", help="micro-F1 against head-truncation length")
    with_config(p)
    p.add_argument("--lengths", type=int, nargs="+", required=True)
    p.add_argument("--seeds", type=int, nargs="+", help="average over these seeds (default: config seed)")
    p.add_argument("--out", help="also write the table here")
    p.set_defaults(func=cmd_ablate_length)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print("invalid config:", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, FormatError, SchemaError, ConfigurationError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ad.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ad.DomainError, ad.DimensionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
