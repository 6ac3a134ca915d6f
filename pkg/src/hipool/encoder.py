"""HiPool graph encoder: cluster pooling, cross-cluster attention and GCN.

A batch of ``B`` documents, each with the same node count ``n``, is encoded
as one graph made of ``B`` disjoint copies: node rows of document ``b``
occupy ``b*n .. (b+1)*n - 1`` and every structural matrix is block
diagonal.  Cross-cluster attention therefore never mixes documents.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError, DomainError
from .embedder import init_uniform
from .graph import (
    LOW_ADJACENCY_MODES,
    block_diag,
    build_clusters,
    build_cross_mask,
    build_low_adjacency,
    cluster_count,
    gcn_normalize,
    lift_adjacency,
)

AGGREGATORS = ("sum", "mean", "std", "simple")


@dataclass(frozen=True)
class EncoderConfig:
    d: int = 16
    p: int = 2
    num_layers: int = 2
    aggregator: str = "sum"
    d_out: int | None = None
    low_adjacency: str = "chain"
    attention_softmax: bool = False

    def __post_init__(self):
        if self.num_layers < 1:
            raise DomainError("num_layers must be >= 1")
        if self.p < 1:
            raise DomainError("p must be >= 1")
        if self.d < 1:
            raise DomainError("d must be >= 1")
        if self.aggregator not in AGGREGATORS:
            raise DomainError(f"aggregator must be one of {AGGREGATORS}, got {self.aggregator!r}")
        if self.low_adjacency not in LOW_ADJACENCY_MODES:
            raise DomainError(f"low_adjacency must be one of {LOW_ADJACENCY_MODES}")

    @property
    def out_dim(self) -> int:
        if self.aggregator == "simple":
            return self.d
        return self.d_out or self.d

    def node_schedule(self, n: int) -> list[int]:
        counts = [n]
        for _ in range(self.num_layers):
            counts.append(cluster_count(counts[-1], self.p))
        return counts


@dataclass
class HiPoolLayerParams:
    w_atten: ad.Tensor
    w_gcn: ad.Tensor

    def parameters(self) -> list[ad.Tensor]:
        return [self.w_atten, self.w_gcn]


def init_layers(cfg: EncoderConfig, rng: np.random.Generator) -> list[HiPoolLayerParams]:
    if cfg.aggregator == "simple":
        return []
    layers = []
    d_in = cfg.d
    for i in range(cfg.num_layers):
        d_next = cfg.out_dim if i == cfg.num_layers - 1 else cfg.d
        layers.append(
            HiPoolLayerParams(
                w_atten=ad.parameter(init_uniform(rng, (d_in, d_in), d_in), name=f"layer{i}.w_atten"),
                w_gcn=ad.parameter(init_uniform(rng, (d_in, d_next), d_in), name=f"layer{i}.w_gcn"),
            )
        )
        d_in = d_next
    return layers


def pool_nodes(s: np.ndarray, h: ad.Tensor) -> ad.Tensor:
    """Each cluster node is the sum of its member nodes: ``S^T H``."""
    if s.shape[0] != h.shape[0]:
        raise DimensionError(f"assignment {s.shape} and node matrix {h.shape} disagree")
    return ad.constant(s.T) @ h


def cross_attention(
    h: ad.Tensor,
    h_high: ad.Tensor,
    mask: np.ndarray,
    w_atten: ad.Tensor,
    softmax: bool = False,
) -> ad.Tensor:
    """Add attention-weighted messages from nodes outside each cluster.

    Scores ``H_high W H^T`` are kept only where ``mask^T`` is one (nodes not
    in the cluster); the masked scores weight ``H`` and the result is added
    back onto ``H_high``.
    """
    n, d = h.shape
    m = h_high.shape[0]
    if mask.shape != (n, m):
        raise DimensionError(f"cross mask {mask.shape} does not match n={n}, m={m}")
    if w_atten.shape != (d, d) or h_high.shape[1] != d:
        raise DimensionError(f"w_atten {w_atten.shape} incompatible with feature width {d}")
    scores = h_high @ w_atten @ ad.transpose(h)
    if softmax:
        weights = ad.masked_softmax(scores, mask.T)
    else:
        weights = scores * ad.constant(mask.T)
    return weights @ h + h_high


@lru_cache(maxsize=64)
def _layer_structure(a_bytes: bytes, n: int, p: int, batch: int):
    a = np.frombuffer(a_bytes).reshape(n, n)
    s = build_clusters(n, p)
    a_high = lift_adjacency(a, s)
    structure = (
        block_diag(s, batch),
        block_diag(build_cross_mask(s), batch),
        block_diag(gcn_normalize(a_high), batch),
        a_high,
    )
    for arr in structure:
        arr.setflags(write=False)
    return structure


def layer_structure(a: np.ndarray, p: int, batch: int = 1):
    """Batched assignment, cross mask and normalized lifted adjacency, plus per-document ``A_high``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    return _layer_structure(a.tobytes(), a.shape[0], p, batch)


def hipool_layer(
    h: ad.Tensor,
    a: np.ndarray,
    cfg: EncoderConfig,
    params: HiPoolLayerParams,
    batch: int = 1,
) -> tuple[ad.Tensor, np.ndarray]:
    """One layer: pool, cross-attend, GCN.

    ``a`` is the per-document n x n adjacency shared by all ``batch``
    documents.  Returns the next node matrix and the unnormalized lifted
    adjacency for the following layer.
    """
    rows = h.shape[0]
    if rows < 1 or rows % batch:
        raise DimensionError(f"{rows} node rows do not split into {batch} documents")
    n = rows // batch
    if a.shape != (n, n):
        raise DimensionError(f"adjacency {a.shape} does not match {n} nodes per document")
    s, mask, a_norm, a_high = layer_structure(a, cfg.p, batch)
    h_high = pool_nodes(s, h)
    h_high = cross_attention(h, h_high, mask, params.w_atten, softmax=cfg.attention_softmax)
    h_next = ad.relu(ad.constant(a_norm) @ h_high @ params.w_gcn)
    return h_next, a_high


def aggregate(h: ad.Tensor, mode: str = "sum", batch: int = 1) -> ad.Tensor:
    """Collapse each document's node rows into one vector (``batch`` x d)."""
    if h.values.size == 0:
        raise DomainError("cannot aggregate an empty node matrix")
    if mode not in ("sum", "mean", "std"):
        raise DomainError(f"unknown aggregator {mode!r}")
    rows = h.shape[0]
    if rows % batch:
        raise DimensionError(f"{rows} node rows do not split into {batch} documents")
    return ad.segment_reduce(mode, h, rows // batch)


def simple_baseline(h: ad.Tensor, batch: int = 1) -> ad.Tensor:
    """Column sum of the chunk embeddings, no graph at all."""
    return aggregate(h, "sum", batch)


def encode(
    x: ad.Tensor,
    cfg: EncoderConfig,
    params: list[HiPoolLayerParams],
    batch: int = 1,
) -> ad.Tensor:
    """Chunk embeddings (``batch * n`` x d) to document vectors (``batch`` x out_dim)."""
    if cfg.aggregator == "simple":
        return simple_baseline(x, batch)
    if len(params) != cfg.num_layers:
        raise DomainError(f"expected {cfg.num_layers} layer parameter sets, got {len(params)}")
    rows = x.shape[0]
    if rows < 1 or rows % batch:
        raise DimensionError(f"{rows} chunk rows do not split into {batch} documents")
    a = build_low_adjacency(rows // batch, cfg.low_adjacency)
    h = x
    for layer in params:
        h, a = hipool_layer(h, a, cfg, layer, batch)
    return aggregate(h, cfg.aggregator, batch)
