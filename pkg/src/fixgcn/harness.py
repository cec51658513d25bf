"""Training loop, evaluation, robustness protocols, and probes.

Protocol conventions, fixed here so every caller agrees:

* Training is full batch: one loss/gradient/update cycle per epoch over
  the labeled set, validation accuracy tracked every epoch, and the
  returned parameters are those of the best-validation epoch (earliest
  epoch wins ties). If the validation set is empty the final epoch wins.
* Poisoning attacks (random-edges, feature-flip, externally supplied
  structures) perturb the graph *before* training; evasion (dice) trains
  on the clean graph and only evaluation sees the perturbed one, so the
  trained parameters of an evasion run are identical to the clean run's.
* Every run is a pure function of its inputs and seed. The per-run seed
  drives the split, the parameter initialization, and the dropout stream;
  attack randomness uses the attack spec's base seed plus the run seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .attacks import AttackSpec, apply_attack, dice_attack
from .autodiff import Tape
from .data import MetricsRecord, SplitSpec, make_split
from .graph import Graph, build_graph
from .model import (ForwardContext, ModelConfig, ModelParams, forward_on_tape,
                    init_params, predict)
from .optim import AdamState, adam_step

DEFAULT_RATIOS = (0.1, 0.1, 0.8)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    lr: float = 1e-2
    weight_decay: float = 5e-4
    dropout: float = 0.6
    hidden: int = 64
    layers: int = 2
    s: float = 0.2
    seed: int = 0
    variant: str = "fixgcn"

    def __post_init__(self):
        if self.epochs <= 0:
            raise ValueError("epochs must be positive")
        if self.lr <= 0:
            raise ValueError("learning rate must be positive")
        self.model_config()  # validates layers/s/dropout/variant

    def model_config(self) -> ModelConfig:
        return ModelConfig(layers=self.layers, hidden_dim=self.hidden,
                           s=self.s, dropout=self.dropout,
                           variant=self.variant)


def _eval_accuracy(ctx: ForwardContext, params: ModelParams,
                   config: ModelConfig, labels: np.ndarray,
                   indices: np.ndarray) -> float:
    tape = Tape()
    nodes = {k: tape.constant(v) for k, v in params.as_dict().items()}
    logits = forward_on_tape(tape, ctx, nodes, config, "eval").value
    pred = predict(logits)
    return float(np.mean(pred[indices] == labels[indices]))


def train(g: Graph, split: SplitSpec, cfg: TrainConfig,
          dataset_name: str = "dataset") -> tuple[ModelParams, MetricsRecord]:
    """Train one model; returns best-validation parameters and the record."""
    if len(split.train) == 0:
        raise ValueError("training requires a nonempty labeled set")
    t0 = time.perf_counter()
    mcfg = cfg.model_config()
    rng = np.random.default_rng(cfg.seed)
    params = init_params(mcfg, g.num_features, g.num_classes, rng)
    ctx = ForwardContext(g, mcfg)
    pdict = params.as_dict()
    state = AdamState(pdict, lr=cfg.lr, weight_decay=cfg.weight_decay)
    track_val = len(split.val) > 0
    losses: list[float] = []
    val_curve: list[float] = []
    best_val = -1.0
    best = params.copy()
    for epoch in range(cfg.epochs):
        tape = Tape()
        nodes = {k: tape.leaf(v, needs_grad=True) for k, v in pdict.items()}
        logits = forward_on_tape(tape, ctx, nodes, mcfg, "train", rng)
        loss = tape.softmax_cross_entropy(logits, g.labels, split.train)
        loss_value = float(loss.value)
        if not np.isfinite(loss_value):
            raise RuntimeError(
                f"non-finite training loss at epoch {epoch}; the bounded "
                "spectral radius of the propagation should prevent this, "
                "so treat it as an implementation or data bug")
        tape.backward(loss)
        adam_step(pdict, {k: n.grad for k, n in nodes.items()}, state)
        losses.append(loss_value)
        if track_val:
            val_acc = _eval_accuracy(ctx, params, mcfg, g.labels, split.val)
            val_curve.append(val_acc)
            if val_acc > best_val:
                best_val = val_acc
                best = params.copy()
    if not track_val:
        best = params.copy()
    test_acc = 0.0
    if len(split.test) > 0:
        test_acc = _eval_accuracy(ctx, best, mcfg, g.labels, split.test)
    record = MetricsRecord(dataset=dataset_name, variant=mcfg.variant,
                           seed=cfg.seed, train_loss=losses,
                           val_accuracy=val_curve, test_accuracy=test_acc,
                           wall_time_s=time.perf_counter() - t0)
    return best, record


def evaluate(params: ModelParams, g: Graph, indices,
             config: ModelConfig) -> float:
    """Fraction of correct predictions over the given node indices."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ValueError("cannot evaluate on an empty index set")
    ctx = ForwardContext(g, config)
    return _eval_accuracy(ctx, params, config, g.labels, indices)


def run_clean(g: Graph, cfg: TrainConfig, seeds,
              ratios=DEFAULT_RATIOS,
              dataset_name: str = "dataset") -> list[MetricsRecord]:
    """Train/evaluate once per seed on the unperturbed graph."""
    records = []
    for seed in seeds:
        split = make_split(g.num_nodes, ratios, seed)
        _, rec = train(g, split, replace(cfg, seed=seed), dataset_name)
        records.append(rec)
    return records


def robustness_curve(g: Graph, cfg: TrainConfig, attack_specs, seeds,
                     ratios=DEFAULT_RATIOS,
                     dataset_name: str = "dataset") -> list[MetricsRecord]:
    """Run the poisoning/evasion protocol for each (attack spec, seed) cell.

    Poisoning kinds perturb first and train on the perturbed graph;
    dice is an evasion attack, so the clean-graph model (cached per seed)
    is evaluated on the perturbed structure.
    """
    records = []
    clean_cache: dict[int, tuple[ModelParams, MetricsRecord]] = {}

    def clean_run(seed: int) -> tuple[ModelParams, MetricsRecord]:
        if seed not in clean_cache:
            split = make_split(g.num_nodes, ratios, seed)
            clean_cache[seed] = train(g, split, replace(cfg, seed=seed),
                                      dataset_name)
        return clean_cache[seed]

    mcfg = cfg.model_config()
    for spec in attack_specs:
        for seed in seeds:
            attack_seed = spec.seed + seed
            split = make_split(g.num_nodes, ratios, seed)
            if spec.kind == "dice":
                params, crec = clean_run(seed)
                pg = dice_attack(g, g.labels, spec.rate, attack_seed)
                acc = evaluate(params, pg.graph, split.test, mcfg)
                rec = MetricsRecord(dataset=dataset_name, variant=mcfg.variant,
                                    attack_kind=spec.kind,
                                    attack_rate=spec.rate,
                                    attack_seed=attack_seed, seed=seed,
                                    train_loss=crec.train_loss,
                                    val_accuracy=crec.val_accuracy,
                                    test_accuracy=acc,
                                    wall_time_s=crec.wall_time_s)
            else:
                pg = apply_attack(g, AttackSpec(spec.kind, spec.rate,
                                                attack_seed))
                _, rec = train(pg.graph, split, replace(cfg, seed=seed),
                               dataset_name)
                rec.attack_kind = spec.kind
                rec.attack_rate = spec.rate
                rec.attack_seed = attack_seed
            records.append(rec)
    return records


def aggregate(records: list[MetricsRecord]):
    """Mean/std of test accuracy per (variant, attack kind, attack rate)."""
    cells: dict[tuple, list[float]] = {}
    for r in records:
        cells.setdefault((r.variant, r.attack_kind, r.attack_rate),
                         []).append(r.test_accuracy)
    rows = []
    for (variant, kind, rate), accs in sorted(cells.items()):
        rows.append({
            "variant": variant, "attack_kind": kind, "attack_rate": rate,
            "mean_accuracy": float(np.mean(accs)),
            "std_accuracy": float(np.std(accs)), "runs": len(accs),
        })
    return rows


def sweep_s(g: Graph, cfg: TrainConfig, s_values, seeds,
            ratios=DEFAULT_RATIOS, dataset_name: str = "dataset"):
    """Accuracy across the scaling parameter grid.

    Returns (cells, summary): per-(s, seed) test accuracies and per-s
    mean/std rows, both plot-ready.
    """
    cells = []
    summary = []
    for s in s_values:
        accs = []
        for seed in seeds:
            split = make_split(g.num_nodes, ratios, seed)
            _, rec = train(g, split, replace(cfg, s=float(s), seed=seed),
                           dataset_name)
            cells.append((float(s), int(seed), rec.test_accuracy))
            accs.append(rec.test_accuracy)
        summary.append((float(s), float(np.mean(accs)), float(np.std(accs))))
    return cells, summary


def synthetic_graph(n: int, avg_degree: float, num_features: int,
                    num_classes: int, seed: int = 0,
                    feature_density: float = 0.05) -> Graph:
    """Random graph with the requested average degree and binary features."""
    rng = np.random.default_rng(seed)
    target_edges = int(n * avg_degree / 2)
    edges: set[tuple[int, int]] = set()
    while len(edges) < target_edges:
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n))
        if i != j:
            edges.add((min(i, j), max(i, j)))
    x = (rng.random((n, num_features)) < feature_density).astype(np.float64)
    y = rng.integers(0, num_classes, size=n)
    return build_graph(n, sorted(edges), x, y)


def community_graph(nodes_per_class: int, num_classes: int,
                    p_in: float = 0.1, p_out: float = 0.01,
                    features_per_class: int = 8, flip_prob: float = 0.05,
                    seed: int = 0) -> Graph:
    """Planted-partition graph with class-indicative binary features.

    Small, learnable stand-in for the citation corpora: nodes of one class
    connect densely to each other and sparsely across classes, and each
    class owns a block of feature coordinates that its members mostly
    activate.
    """
    rng = np.random.default_rng(seed)
    n = nodes_per_class * num_classes
    y = np.repeat(np.arange(num_classes), nodes_per_class)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(y[iu] == y[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)
    f = features_per_class * num_classes
    x = (rng.random((n, f)) < flip_prob).astype(np.float64)
    for c in range(num_classes):
        block = slice(c * features_per_class, (c + 1) * features_per_class)
        members = y == c
        on = rng.random((int(members.sum()), features_per_class)) < 0.7
        x[members, block] = np.maximum(x[members, block], on)
    return build_graph(n, edges, x, y)


def scaling_probe(sizes, cfg: TrainConfig, avg_degree: float = 8.0,
                  num_features: int = 64, num_classes: int = 4,
                  epochs: int = 5, seed: int = 0):
    """Per-epoch wall time on synthetic fixed-degree graphs of growing N.

    Returns rows (n, seconds_per_epoch). A throwaway warmup run absorbs
    one-time library setup costs before anything is timed.
    """
    probe_cfg = replace(cfg, epochs=epochs, seed=seed)
    warm = synthetic_graph(min(sizes), avg_degree, num_features, num_classes,
                           seed)
    train(warm, make_split(warm.num_nodes, DEFAULT_RATIOS, seed),
          replace(probe_cfg, epochs=1), "warmup")
    rows = []
    for n in sizes:
        g = synthetic_graph(int(n), avg_degree, num_features, num_classes,
                            seed)
        split = make_split(g.num_nodes, DEFAULT_RATIOS, seed)
        _, rec = train(g, split, probe_cfg, f"synthetic-{n}")
        rows.append((int(n), rec.wall_time_s / epochs))
    return rows
