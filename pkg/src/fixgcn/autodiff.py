"""Minimal reverse-mode autodiff over dense matrices.

Forward operations are recorded on an explicit :class:`Tape` in execution
order, which is therefore already topological. ``Tape.backward`` walks the
record once in reverse, so every operation's backward rule runs exactly
once per call. Only the operation set the model needs exists here: dense
matmul, sparse-times-dense with a constant sparse operand, the propagation
operator, elementwise add/relu/scale, inverted dropout, and a masked
softmax cross-entropy head.

Gradients are accumulated lazily: a node's ``grad`` stays ``None`` until a
contribution arrives, and parameters that never influence the loss are
given explicit zero gradients at the end of the backward pass.
"""

from __future__ import annotations

from typing import Callable, Optional, Union

import numpy as np

from .filters import PropagationOperator
from .graph import SparseMatrix

RngLike = Union[int, np.random.Generator]


def as_rng(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


class Node:
    """A value on the tape, with an optional gradient slot."""

    __slots__ = ("value", "needs_grad", "grad")

    def __init__(self, value: np.ndarray, needs_grad: bool):
        self.value = value
        self.needs_grad = needs_grad
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, contribution: np.ndarray) -> None:
        if self.grad is None:
            self.grad = contribution.copy()
        else:
            self.grad += contribution


class Tape:
    """Ordered record of operations for one forward pass."""

    def __init__(self):
        self._records: list[tuple[Node, Callable[[np.ndarray], None]]] = []
        self._grad_leaves: list[Node] = []

    def leaf(self, value: np.ndarray, needs_grad: bool = False) -> Node:
        node = Node(np.asarray(value, dtype=np.float64), needs_grad)
        if needs_grad:
            self._grad_leaves.append(node)
        return node

    def constant(self, value: np.ndarray) -> Node:
        return self.leaf(value, needs_grad=False)

    def _emit(self, value: np.ndarray, inputs: tuple[Node, ...],
              rule: Callable[[np.ndarray], None]) -> Node:
        out = Node(value, any(n.needs_grad for n in inputs))
        if out.needs_grad:
            self._records.append((out, rule))
        return out

    # ------------------------------------------------------------------
    # recorded operations
    # ------------------------------------------------------------------

    def matmul(self, a: Node, b: Node) -> Node:
        if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
            raise ValueError(
                f"matmul dimension mismatch: {a.value.shape} @ {b.value.shape}")
        value = a.value @ b.value

        def rule(g: np.ndarray) -> None:
            if a.needs_grad:
                a._accumulate(g @ b.value.T)
            if b.needs_grad:
                b._accumulate(a.value.T @ g)

        return self._emit(value, (a, b), rule)

    def spmm(self, s: SparseMatrix, h: Node) -> Node:
        """Sparse-times-dense product; the sparse operand is a constant."""
        value = s.matmul_dense(h.value)

        def rule(g: np.ndarray) -> None:
            if h.needs_grad:
                h._accumulate(s.t_matmul_dense(g))

        return self._emit(value, (h,), rule)

    def propagate(self, op: PropagationOperator, h: Node) -> Node:
        """Apply P = ((1-s) I + s Ahat) Ahat.

        The backward rule applies the same operator to the incoming
        gradient, which is the exact adjoint because P is symmetric.
        """
        value = op.apply(h.value)

        def rule(g: np.ndarray) -> None:
            if h.needs_grad:
                h._accumulate(op.apply(g))

        return self._emit(value, (h,), rule)

    def add(self, a: Node, b: Node) -> Node:
        if a.value.shape != b.value.shape:
            raise ValueError(
                f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
        value = a.value + b.value

        def rule(g: np.ndarray) -> None:
            if a.needs_grad:
                a._accumulate(g)
            if b.needs_grad:
                b._accumulate(g)

        return self._emit(value, (a, b), rule)

    def relu(self, a: Node) -> Node:
        value = np.maximum(a.value, 0.0)
        # Subgradient at exactly 0 is taken as 0.
        mask = value > 0.0

        def rule(g: np.ndarray) -> None:
            if a.needs_grad:
                a._accumulate(g * mask)

        return self._emit(value, (a,), rule)

    def scale(self, a: Node, c: float) -> Node:
        c = float(c)
        value = c * a.value

        def rule(g: np.ndarray) -> None:
            if a.needs_grad:
                a._accumulate(c * g)

        return self._emit(value, (a,), rule)

    def dropout(self, a: Node, p: float, training: bool, rng: RngLike) -> Node:
        """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).

        Identity in eval mode or at p = 0 (the input node is returned
        unchanged). Deterministic for a given seed or generator state.
        """
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must be in [0, 1), got {p}")
        if not training or p == 0.0:
            return a
        gen = as_rng(rng)
        keep = gen.random(a.value.shape) >= p
        multiplier = keep / (1.0 - p)
        value = a.value * multiplier

        def rule(g: np.ndarray) -> None:
            if a.needs_grad:
                a._accumulate(g * multiplier)

        return self._emit(value, (a,), rule)

    def sum(self, a: Node) -> Node:
        value = np.asarray(a.value.sum())

        def rule(g: np.ndarray) -> None:
            if a.needs_grad:
                a._accumulate(np.broadcast_to(g, a.value.shape))

        return self._emit(value, (a,), rule)

    def softmax_cross_entropy(self, logits: Node, labels: np.ndarray,
                              mask: np.ndarray) -> Node:
        """Mean cross-entropy of row-softmaxed logits over the masked rows.

        Stabilized by row-max subtraction. The mean (rather than the raw
        sum) keeps the learning-rate meaning independent of how many nodes
        are labeled.
        """
        mask = np.asarray(mask, dtype=np.int64)
        if mask.size == 0:
            raise ValueError("cross-entropy mask must be nonempty")
        labels = np.asarray(labels, dtype=np.int64)
        picked = labels[mask]
        n_classes = logits.value.shape[1]
        if picked.min() < 0 or picked.max() >= n_classes:
            raise ValueError("label out of range for the logit width")
        rows = logits.value[mask]
        z = rows - rows.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
        log_probs = z - log_norm
        value = np.asarray(-log_probs[np.arange(len(mask)), picked].mean())

        def rule(g: np.ndarray) -> None:
            if logits.needs_grad:
                delta = np.exp(log_probs)
                delta[np.arange(len(mask)), picked] -= 1.0
                delta *= float(g) / len(mask)
                full = np.zeros_like(logits.value)
                full[mask] = delta
                logits._accumulate(full)

        return self._emit(value, (logits,), rule)

    # ------------------------------------------------------------------
    # reverse pass
    # ------------------------------------------------------------------

    def backward(self, loss: Node) -> None:
        """Accumulate d(loss)/d(leaf) into every gradient-tracked leaf.

        Leaves that do not influence the loss receive explicit zero
        gradients so optimizers can treat the parameter set uniformly.
        """
        if loss.value.ndim != 0:
            raise ValueError(
                f"backward requires a scalar loss, got shape {loss.value.shape}")
        loss.grad = np.asarray(1.0)
        for out, rule in reversed(self._records):
            if out.grad is None:
                continue
            rule(out.grad)
        for leaf in self._grad_leaves:
            if leaf.grad is None:
                leaf.grad = np.zeros_like(leaf.value)

    @property
    def num_recorded(self) -> int:
        return len(self._records)
