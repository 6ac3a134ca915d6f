"""Minimal reverse-mode differentiation over dense float64 matrices.

Every :class:`Tensor` produced by an operation remembers its parents and a
backward closure.  Calling :meth:`Tensor.backward` on a scalar topologically
sorts the recorded graph (the tape) and replays the closures in reverse.
Gradients accumulate into ``.grad``; callers zero them between steps.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class DomainError(ValueError):
    """Argument outside an operation's domain."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite value."""


class Tensor:
    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backward", "name")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        arr = np.array(values, dtype=np.float64)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(1, -1)
        self.values = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        if self.values.size != 1:
            raise DimensionError(f"item() needs a single value, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self) -> None:
        """Backpropagate from this scalar through every recorded operation."""
        if self.values.size != 1:
            raise DimensionError(f"backward() needs a scalar, got shape {self.shape}")
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.values)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node._accumulate(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not _needs_grad(parent):
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # operator sugar for readability in model code
    def __matmul__(self, other: Tensor) -> Tensor:
        return matmul(self, other)

    def __add__(self, other: Tensor) -> Tensor:
        return add(self, other)

    def __sub__(self, other: Tensor) -> Tensor:
        return sub(self, other)

    def __mul__(self, other: Tensor) -> Tensor:
        return mul(self, other)


def _needs_grad(t: Tensor) -> bool:
    return t.requires_grad or t._backward is not None


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen and _needs_grad(parent):
                stack.append((parent, False))
    return order


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


def parameter(values, name: str | None = None) -> Tensor:
    return Tensor(values, requires_grad=True, name=name)


def _result(values: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.values = values
    out.requires_grad = False
    out.grad = None
    out.name = None
    if any(_needs_grad(p) for p in parents):
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _check_same(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions of {a.shape} and {b.shape} disagree")
    av, bv = a.values, b.values

    def backward(g):
        return g @ bv.T, av.T @ g

    return _result(av @ bv, (a, b), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "add")
    return _result(a.values + b.values, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "sub")
    return _result(a.values - b.values, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_same(a, b, "mul")
    av, bv = a.values, b.values
    return _result(av * bv, (a, b), lambda g: (g * bv, g * av))


def relu(a: Tensor) -> Tensor:
    gate = a.values > 0
    return _result(np.where(gate, a.values, 0.0), (a,), lambda g: (g * gate,))


def scale(a: Tensor, factor: float) -> Tensor:
    return _result(a.values * factor, (a,), lambda g: (g * factor,))


def transpose(a: Tensor) -> Tensor:
    return _result(a.values.T.copy(), (a,), lambda g: (g.T,))


def elementwise(op: str, a: Tensor, b: Tensor | None = None) -> Tensor:
    """Dispatch by name: ``add``, ``sub``, ``mul`` (binary) or ``relu`` (unary)."""
    if op == "relu":
        if b is not None:
            raise DomainError("relu takes a single operand")
        return relu(a)
    binary = {"add": add, "sub": sub, "mul": mul}
    if op not in binary:
        raise DomainError(f"unknown elementwise op {op!r}")
    if b is None:
        raise DomainError(f"{op} needs two operands")
    return binary[op](a, b)


STD_SMOOTHING = 1e-12


def _segment_view(x: np.ndarray, group: int) -> np.ndarray:
    rows, cols = x.shape
    return x.reshape(rows // group, group, cols)


def segment_reduce(op: str, a: Tensor, group: int) -> Tensor:
    """Column reduction over consecutive blocks of ``group`` rows.

    Returns one row per block.  ``group == rows`` is the ordinary
    column reduction.
    """
    rows, cols = a.shape
    if a.values.size == 0:
        raise DomainError("cannot reduce an empty tensor")
    if group < 1 or rows % group:
        raise DimensionError(f"{rows} rows do not split into blocks of {group}")
    x = _segment_view(a.values, group)

    if op == "sum":
        def backward(g):
            return (np.repeat(g, group, axis=0),)
        return _result(x.sum(axis=1), (a,), backward)

    if op == "mean":
        def backward(g):
            return (np.repeat(g / group, group, axis=0),)
        return _result(x.mean(axis=1), (a,), backward)

    if op == "std":
        centered = x - x.mean(axis=1, keepdims=True)
        std = np.sqrt((centered**2).mean(axis=1) + STD_SMOOTHING)

        def backward(g):
            # d std / d x_i = (x_i - mean) / (group * std); the mean term cancels
            gx = centered * (g / (group * std))[:, None, :]
            return (gx.reshape(rows, cols),)

        return _result(std, (a,), backward)

    raise DomainError(f"unknown reduction {op!r}")


def reduce(op: str, a: Tensor) -> Tensor:
    """``row_sum`` (r x 1) or ``col_sum`` / ``col_mean`` / ``col_std`` (1 x c)."""
    if a.values.size == 0:
        raise DomainError("cannot reduce an empty tensor")
    if op == "row_sum":
        cols = a.shape[1]
        return _result(
            a.values.sum(axis=1, keepdims=True),
            (a,),
            lambda g: (np.repeat(g, cols, axis=1),),
        )
    col_ops = {"col_sum": "sum", "col_mean": "mean", "col_std": "std"}
    if op not in col_ops:
        raise DomainError(f"unknown reduction {op!r}")
    return segment_reduce(col_ops[op], a, a.shape[0])


def masked_softmax(scores: Tensor, mask: np.ndarray) -> Tensor:
    """Row-wise softmax restricted to positions where ``mask`` is nonzero.

    Rows with no admissible position become all-zero.
    """
    if scores.shape != mask.shape:
        raise DimensionError(f"masked_softmax: scores {scores.shape} vs mask {mask.shape}")
    keep = mask != 0
    s = np.where(keep, scores.values, -np.inf)
    row_max = s.max(axis=1, keepdims=True)
    row_max = np.where(np.isfinite(row_max), row_max, 0.0)
    e = np.where(keep, np.exp(s - row_max), 0.0)
    z = e.sum(axis=1, keepdims=True)
    p = np.divide(e, z, out=np.zeros_like(e), where=z > 0)

    def backward(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return _result(p, (scores,), backward)


def embedding_bag(table: Tensor, ids: np.ndarray, pad_id: int = 0) -> Tensor:
    """Mean of table rows over the non-PAD ids of each row of ``ids``.

    A row made only of PAD ids yields the PAD row itself.  Ids are summed in
    sorted order, so the result is exactly invariant to token order.
    """
    ids = np.sort(np.asarray(ids, dtype=np.int64), axis=1)
    vocab, _ = table.shape
    if ids.size and (ids.min() < 0 or ids.max() >= vocab):
        raise DomainError(f"token id outside [0, {vocab})")
    real = ids != pad_id
    counts = real.sum(axis=1)
    weights = np.where(real, 1.0 / np.maximum(counts, 1)[:, None], 0.0)
    empty = counts == 0
    if empty.any():
        # an all-PAD row picks the PAD embedding with weight one
        weights[empty, 0] = 1.0
    rows = np.repeat(np.arange(ids.shape[0]), ids.shape[1])
    flat_ids = ids.reshape(-1)
    flat_w = weights.reshape(-1)
    nz = flat_w != 0
    rows, flat_ids, flat_w = rows[nz], flat_ids[nz], flat_w[nz]

    out = np.zeros((ids.shape[0], table.shape[1]))
    np.add.at(out, rows, table.values[flat_ids] * flat_w[:, None])

    def backward(g):
        gt = np.zeros_like(table.values)
        np.add.at(gt, flat_ids, g[rows] * flat_w[:, None])
        return (gt,)

    return _result(out, (table,), backward)


def cross_entropy(logits: Tensor, labels: Sequence[int] | np.ndarray) -> Tensor:
    """Mean negative log-likelihood of ``labels`` under row-wise softmax."""
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    rows, classes = logits.shape
    if labels.shape[0] != rows:
        raise DimensionError(f"{rows} logit rows but {labels.shape[0]} labels")
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise DomainError(f"label outside [0, {classes})")
    z = logits.values - logits.values.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_p = z - log_norm
    idx = np.arange(rows)
    loss = -log_p[idx, labels].mean()

    def backward(g):
        grad = np.exp(log_p)
        grad[idx, labels] -= 1.0
        return (grad * (g.item() / rows),)

    return _result(np.array([[loss]]), (logits,), backward)


def sum_all(a: Tensor) -> Tensor:
    return _result(np.array([[a.values.sum()]]), (a,), lambda g: (np.full(a.shape, g.item()),))


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Iterable[Tensor],
    eps: float = 1e-5,
) -> float:
    """Worst relative error between tape gradients and central differences.

    ``loss_fn`` rebuilds the scalar loss from the current parameter values.
    Parameters are perturbed in place and restored afterwards.
    """
    if not 0 < eps <= 1e-2:
        raise DomainError(f"eps must lie in (0, 1e-2], got {eps}")
    params = list(params)
    for p in params:
        if not np.all(np.isfinite(p.values)):
            raise NumericError(f"non-finite entries in {p!r}")
        p.zero_grad()
    loss = loss_fn()
    if not math.isfinite(loss.item()):
        raise NumericError("loss is not finite")
    loss.backward()

    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.values)
        flat = p.values.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn().item()
            flat[i] = orig - eps
            down = loss_fn().item()
            flat[i] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise NumericError("loss is not finite under perturbation")
            numeric = (up - down) / (2 * eps)
            a = analytic.reshape(-1)[i]
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
    return worst
