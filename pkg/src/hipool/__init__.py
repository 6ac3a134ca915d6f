"""Hierarchical graph pooling for long-document classification."""

from .autodiff import DimensionError, DomainError, NumericError, Tensor, grad_check
from .chunking import ChunkSequence, Vocabulary, cap_chunks, chunk, tokenize
from .config import RunConfig
from .data import LabeledCorpus, load_corpus, stats, synth_longrange
from .encoder import EncoderConfig, encode
from .training import HiPoolModel, evaluate, train

__version__ = "0.1.0"
