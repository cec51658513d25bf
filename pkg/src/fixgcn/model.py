"""The fixed-point graph network and a vanilla GCN comparison baseline.

A layer of the main model updates node features as

    H' = sigma( P H W  +  X W_res ),    P = ((1-s) I + s Ahat) Ahat

where X is always the ORIGINAL feature matrix: the residual branch
re-injects raw features at every depth rather than the previous layer's
input. Hidden layers use ReLU, the output layer is linear, dropout is
applied to every layer input in training mode, and there are no bias
terms. At s = 0 the propagation branch degenerates to one-hop
aggregation (a plain GCN layer without self-loops, plus the residual);
at s = 1 it is pure two-hop aggregation.

The baseline variant is a standard GCN stack (no residual branch) on the
self-loop normalization D~^{-1/2}(A+I)D~^{-1/2}; each model follows its
own source convention, which is why one has self-loops and the other
does not.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Node, RngLike, Tape, as_rng
from .filters import PropagationOperator, validate_scaling_parameter
from .graph import (Graph, SparseMatrix, normalized_adjacency,
                    self_loop_normalized_adjacency)
from .optim import glorot_init

VARIANT_FIXGCN = "fixgcn"
VARIANT_GCN = "gcn"
_VARIANT_ALIASES = {"fixgcn": VARIANT_FIXGCN,
                    "gcn": VARIANT_GCN,
                    "gcn-baseline": VARIANT_GCN}

# Convert the residual operand to CSR when its density is below this;
# one-hot word features sit around 1%, where sparse wins decisively.
SPARSE_FEATURE_DENSITY = 0.25

CHECKPOINT_MAGIC = "fixgcn-checkpoint"
CHECKPOINT_VERSION = 1


def normalize_variant(variant: str) -> str:
    try:
        return _VARIANT_ALIASES[variant]
    except KeyError:
        raise ValueError(
            f"unknown model variant {variant!r}; expected one of "
            f"{sorted(set(_VARIANT_ALIASES))}") from None


@dataclass(frozen=True)
class ModelConfig:
    layers: int = 2
    hidden_dim: int = 64
    s: float = 0.2
    dropout: float = 0.6
    variant: str = VARIANT_FIXGCN

    def __post_init__(self):
        object.__setattr__(self, "variant", normalize_variant(self.variant))
        validate_scaling_parameter(self.s)
        if self.layers < 1:
            raise ValueError("need at least one layer")
        if self.hidden_dim < 1:
            raise ValueError("hidden dimension must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout probability must be in [0, 1)")


@dataclass
class ModelParams:
    """Learnable weights. ``residual_weights[l]`` always maps from the
    original feature dimension, whatever the layer index."""

    variant: str
    weights: list[np.ndarray]
    residual_weights: list[np.ndarray] = field(default_factory=list)

    def as_dict(self) -> dict[str, np.ndarray]:
        out = {}
        for l, w in enumerate(self.weights):
            out[f"layer{l}.weight"] = w
        for l, w in enumerate(self.residual_weights):
            out[f"layer{l}.residual"] = w
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(self.variant,
                           [w.copy() for w in self.weights],
                           [w.copy() for w in self.residual_weights])


def layer_dims(config: ModelConfig, num_features: int,
               num_classes: int) -> list[int]:
    return [num_features] + [config.hidden_dim] * (config.layers - 1) + [num_classes]


def init_params(config: ModelConfig, num_features: int, num_classes: int,
                rng: RngLike) -> ModelParams:
    """Glorot-uniform initialization for every weight matrix."""
    gen = as_rng(rng)
    dims = layer_dims(config, num_features, num_classes)
    weights = [glorot_init(dims[l], dims[l + 1], gen)
               for l in range(config.layers)]
    residual = []
    if config.variant == VARIANT_FIXGCN:
        residual = [glorot_init(num_features, dims[l + 1], gen)
                    for l in range(config.layers)]
    return ModelParams(config.variant, weights, residual)


def _check_params(params: ModelParams, config: ModelConfig,
                  num_features: int) -> None:
    if normalize_variant(params.variant) != config.variant:
        raise ValueError(
            f"params are for variant {params.variant!r}, config wants "
            f"{config.variant!r}")
    if len(params.weights) != config.layers:
        raise ValueError(
            f"params have {len(params.weights)} layers, config wants "
            f"{config.layers}")
    if config.variant == VARIANT_FIXGCN:
        if len(params.residual_weights) != config.layers:
            raise ValueError("fixed-point variant needs one residual weight "
                             "per layer")
        for w in params.residual_weights:
            if w.shape[0] != num_features:
                raise ValueError(
                    "residual weights must map from the original feature "
                    f"dimension {num_features}, got {w.shape}")


class ForwardContext:
    """Per-graph constants for repeated forward passes.

    Holds the propagation structure and, when the features are sparse
    enough, a CSR copy of X so the residual branch runs as a sparse-dense
    product. Build once per (graph, variant) and reuse across epochs.
    """

    __slots__ = ("graph", "variant", "operator", "ahat_loop", "x", "x_csr")

    def __init__(self, graph: Graph, config: ModelConfig):
        self.graph = graph
        self.variant = config.variant
        self.x = graph.features
        self.x_csr = None
        density = np.count_nonzero(self.x) / max(1, self.x.size)
        if density < SPARSE_FEATURE_DENSITY:
            self.x_csr = SparseMatrix.from_dense(self.x)
        if config.variant == VARIANT_FIXGCN:
            self.operator = PropagationOperator(normalized_adjacency(graph),
                                                config.s)
            self.ahat_loop = None
        else:
            self.operator = None
            self.ahat_loop = self_loop_normalized_adjacency(graph)


def _sparse_dropout(m: SparseMatrix, p: float, training: bool,
                    gen: np.random.Generator) -> SparseMatrix:
    """Inverted dropout on the stored entries of a sparse matrix.

    Identical in value to dense dropout of the same matrix (structural
    zeros stay zero either way) but only draws one uniform per stored
    entry.
    """
    if not training or p == 0.0:
        return m
    keep = gen.random(m.nnz) >= p
    rows = np.repeat(np.arange(m.shape[0]), np.diff(m.row_offsets))
    vals = np.where(keep, m.values / (1.0 - p), 0.0)
    return SparseMatrix.from_coo(m.shape, rows, m.col_indices, vals)


def forward_on_tape(tape: Tape, ctx: ForwardContext,
                    param_nodes: dict[str, Node], config: ModelConfig,
                    mode: str, rng: RngLike = 0) -> Node:
    """Run the network on an existing tape; returns the logits node.

    Products are evaluated right to left: each layer multiplies its input
    by the weight first and diffuses the (usually much narrower) result,
    so the square of the adjacency is never formed and the diffusion cost
    stays proportional to the edge count times the output width. When the
    original features are sparse, layer-0 inputs run through CSR products
    instead of dense ones; the values are the same up to rounding.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    training = mode == "train"
    gen = as_rng(rng)
    p = config.dropout
    x_node = tape.constant(ctx.x)
    h: Node | None = None  # layer 0 may take the sparse route instead
    for l in range(config.layers):
        w = param_nodes[f"layer{l}.weight"]
        if l == 0 and ctx.x_csr is not None:
            hw = tape.spmm(_sparse_dropout(ctx.x_csr, p, training, gen), w)
        elif l == 0:
            hw = tape.matmul(tape.dropout(x_node, p, training, gen), w)
        else:
            hw = tape.matmul(tape.dropout(h, p, training, gen), w)
        if ctx.variant == VARIANT_FIXGCN:
            prop = tape.propagate(ctx.operator, hw)
            w_res = param_nodes[f"layer{l}.residual"]
            if ctx.x_csr is not None:
                res = tape.spmm(_sparse_dropout(ctx.x_csr, p, training, gen),
                                w_res)
            else:
                res = tape.matmul(tape.dropout(x_node, p, training, gen),
                                  w_res)
            pre = tape.add(prop, res)
        else:
            pre = tape.spmm(ctx.ahat_loop, hw)
        h = tape.relu(pre) if l < config.layers - 1 else pre
    return h


def fixgcn_layer(h: np.ndarray, x: np.ndarray, ahat: SparseMatrix,
                 w: np.ndarray, w_res: np.ndarray, s: float,
                 activation: str = "relu") -> np.ndarray:
    """One propagation layer as a plain array function.

    Computes sigma(P h w + x w_res), evaluating ``h @ w`` before the
    diffusion (right-to-left order). ``activation`` is ``"relu"`` or
    ``"identity"``.
    """
    tape = Tape()
    op = PropagationOperator(ahat, s)
    pre = tape.add(
        tape.propagate(op, tape.matmul(tape.constant(h), tape.constant(w))),
        tape.matmul(tape.constant(x), tape.constant(w_res)))
    if activation == "relu":
        return tape.relu(pre).value
    if activation == "identity":
        return pre.value
    raise ValueError(f"unknown activation {activation!r}")


def gcn_layer(h: np.ndarray, ahat_loop: SparseMatrix, w: np.ndarray,
              activation: str = "relu") -> np.ndarray:
    """One baseline GCN layer: sigma(Ahat_loop (h w))."""
    tape = Tape()
    pre = tape.spmm(ahat_loop, tape.matmul(tape.constant(h), tape.constant(w)))
    if activation == "relu":
        return tape.relu(pre).value
    if activation == "identity":
        return pre.value
    raise ValueError(f"unknown activation {activation!r}")


def forward(graph: Graph, params: ModelParams, config: ModelConfig,
            mode: str = "eval", seed: RngLike = 0) -> np.ndarray:
    """Full forward pass; returns an N x C logits matrix.

    Eval mode is deterministic; train mode draws dropout masks from
    ``seed``. For repeated passes over one graph prefer building a
    :class:`ForwardContext` once and calling :func:`forward_on_tape`.
    """
    _check_params(params, config, graph.num_features)
    ctx = ForwardContext(graph, config)
    tape = Tape()
    nodes = {k: tape.constant(v) for k, v in params.as_dict().items()}
    return forward_on_tape(tape, ctx, nodes, config, mode, seed).value


def gcn_baseline_forward(graph: Graph, params: ModelParams,
                         config: ModelConfig, mode: str = "eval",
                         seed: RngLike = 0) -> np.ndarray:
    """Forward pass of the self-loop GCN baseline."""
    if config.variant != VARIANT_GCN:
        raise ValueError("gcn_baseline_forward needs a baseline config")
    return forward(graph, params, config, mode, seed)


def predict(logits: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties break toward the lowest class index."""
    logits = np.asarray(logits)
    if logits.ndim != 2 or logits.shape[1] < 1:
        raise ValueError("logits must be an N x C matrix with C >= 1")
    return np.argmax(logits, axis=1)


# ----------------------------------------------------------------------
# checkpoints: a version-tagged text layout, shape header + row-major
# values, floats printed with repr so they round-trip exactly.
# ----------------------------------------------------------------------

def save_params(params: ModelParams, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{CHECKPOINT_MAGIC} v{CHECKPOINT_VERSION}\n")
        fh.write(f"variant {params.variant}\n")
        entries = list(params.as_dict().items())
        fh.write(f"tensors {len(entries)}\n")
        for name, w in entries:
            fh.write(f"tensor {name} {w.shape[0]} {w.shape[1]}\n")
            for row in w:
                fh.write(" ".join(repr(v) for v in row.tolist()))
                fh.write("\n")


def load_params(path) -> ModelParams:
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().split()
        if header != [CHECKPOINT_MAGIC, f"v{CHECKPOINT_VERSION}"]:
            raise ValueError(f"not a recognized checkpoint: {path}")
        variant = fh.readline().split()[1]
        count = int(fh.readline().split()[1])
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            _, name, rows, cols = fh.readline().split()
            rows, cols = int(rows), int(cols)
            data = np.empty((rows, cols), dtype=np.float64)
            for r in range(rows):
                vals = fh.readline().split()
                if len(vals) != cols:
                    raise ValueError(f"checkpoint row width mismatch in {name}")
                data[r] = [float(v) for v in vals]
            tensors[name] = data
    weights = []
    residual = []
    l = 0
    while f"layer{l}.weight" in tensors:
        weights.append(tensors[f"layer{l}.weight"])
        if f"layer{l}.residual" in tensors:
            residual.append(tensors[f"layer{l}.residual"])
        l += 1
    if len(weights) + len(residual) != len(tensors):
        raise ValueError("checkpoint holds unexpected tensors")
    return ModelParams(normalize_variant(variant), weights, residual)
