"""Run configuration: one flat record of every tunable, loaded from JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .encoder import AGGREGATORS
from .graph import LOW_ADJACENCY_MODES

# learning rates used with pretrained BERT / RoBERTa encoders
PRETRAINED_LEARNING_RATES = {"bert": 1e-5, "roberta": 5e-6}
# chunk cap per corpus scale
MAX_NODE_BY_CORPUS = {"HYP": 10, "20NG": 8, "IMDB": 8, "A-512": 10, "A-2048": 15, "ILDC": 15}


class ConfigError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("invalid config: " + "; ".join(violations))


@dataclass
class RunConfig:
    # chunking
    L: int = 300
    L_olp: int = 150
    max_node: int = 10
    vocab_size: int | None = None
    # encoder
    d: int = 32
    p: int = 2
    num_layers: int = 2
    aggregator: str = "sum"
    low_adjacency: str = "chain"
    attention_softmax: bool = False
    embed_ff: bool = False
    # optimisation
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    seed: int = 0
    patience: int | None = 3
    # data
    class_count: int | None = None
    train_path: str | None = None
    dev_path: str | None = None
    test_path: str | None = None
    out_dir: str = "runs/default"

    def violations(self) -> list[str]:
        bad = []
        if self.L < 1:
            bad.append("L must be >= 1")
        if not 0 <= self.L_olp < self.L:
            bad.append("L_olp must satisfy 0 <= L_olp < L")
        if self.max_node < 1:
            bad.append("max_node must be >= 1")
        if self.vocab_size is not None and self.vocab_size < 3:
            bad.append("vocab_size must be >= 3 when set")
        if self.d < 1:
            bad.append("d must be >= 1")
        if self.p < 1:
            bad.append("p must be >= 1")
        if self.num_layers < 1:
            bad.append("num_layers must be >= 1")
        if self.aggregator not in AGGREGATORS:
            bad.append(f"aggregator must be one of {list(AGGREGATORS)}")
        if self.low_adjacency not in LOW_ADJACENCY_MODES:
            bad.append(f"low_adjacency must be one of {list(LOW_ADJACENCY_MODES)}")
        if not self.lr >= 0:
            bad.append("lr must be >= 0")
        if self.epochs < 1:
            bad.append("epochs must be >= 1")
        if self.batch_size < 1:
            bad.append("batch_size must be >= 1")
        if self.patience is not None and self.patience < 1:
            bad.append("patience must be >= 1 or null")
        if self.class_count is not None and self.class_count < 2:
            bad.append("class_count must be >= 2")
        return bad

    def validate(self) -> RunConfig:
        bad = self.violations()
        if bad:
            raise ConfigError(bad)
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError([f"unknown field {k!r}" for k in unknown])
        cfg = cls(**raw)
        _check_types(cfg)
        return cfg

    @classmethod
    def load(cls, path: str | Path | None, overrides: list[str] = (), base: dict | None = None) -> RunConfig:
        """Read a JSON config, falling back to ``base`` fields, then apply ``key=value`` overrides."""
        raw = dict(base or {})
        if path:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
            if not isinstance(loaded, dict):
                raise ConfigError(["config file must hold a JSON object"])
            raw.update(loaded)
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError([f"override {item!r} is not key=value"])
            raw[key.strip()] = _parse_value(value)
        return cls.from_dict(raw)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


_TYPES = {
    int: (int,),
    float: (int, float),
    str: (str,),
    bool: (bool,),
}


def _check_types(cfg: RunConfig) -> None:
    bad = []
    hints = {"L": int, "L_olp": int, "max_node": int, "d": int, "p": int, "num_layers": int,
             "epochs": int, "batch_size": int, "seed": int, "lr": float, "aggregator": str,
             "low_adjacency": str, "attention_softmax": bool, "embed_ff": bool, "out_dir": str}
    optional = {"vocab_size": int, "patience": int, "class_count": int,
                "train_path": str, "dev_path": str, "test_path": str}
    for name, typ in {**hints, **optional}.items():
        value = getattr(cfg, name)
        if value is None and name in optional:
            continue
        ok = isinstance(value, _TYPES[typ]) and not (typ is not bool and isinstance(value, bool))
        if not ok:
            bad.append(f"{name} must be {typ.__name__}, got {value!r}")
    if bad:
        raise ConfigError(bad)
