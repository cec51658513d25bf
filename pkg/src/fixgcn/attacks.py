"""Structure and feature perturbation generators, plus ingestion of
externally produced poisoned edge lists.

Three native attack kinds:

* ``random-edges``  adds floor(rate * E) new edges sampled uniformly over
  the absent pairs (pure noise injection; nothing is removed).
* ``feature-flip``  flips floor(rate * nnz(X)) distinct 0/1 feature cells
  chosen uniformly over the whole N x F grid. Anchoring the budget to
  nnz(X) keeps the perturbation magnitude comparable to the sparse
  one-hot corpora.
* ``dice``          white-box "disconnect internally, connect externally":
  each of the floor(rate * E) perturbations is, with probability 1/2, the
  addition of an absent cross-label edge, otherwise the removal of an
  existing same-label edge; when one pool runs dry the other is used.

Attacks never add or remove nodes, never introduce self-loops, preserve
symmetry by construction, and are deterministic for a fixed seed. They
return new graphs; inputs are untouched.

Meta-gradient and surrogate-scoring attack generators are external tools;
their output is consumed through :func:`load_perturbed_adjacency`, which
reads the same one-edge-per-line format the dataset loader uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import read_edge_list
from .graph import Graph, build_graph

ATTACK_KINDS = ("random-edges", "feature-flip", "dice")


class PoolExhaustedError(RuntimeError):
    """Raised when an attack cannot meet its perturbation budget.

    Carries the partial delta so callers can report how far it got.
    """

    def __init__(self, message: str, added: list, removed: list):
        super().__init__(message)
        self.added = added
        self.removed = removed


@dataclass(frozen=True)
class AttackSpec:
    kind: str
    rate: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(
                f"unknown attack kind {self.kind!r}; expected one of {ATTACK_KINDS}")
        if not 0.0 <= self.rate <= 1.0:
            raise ValueError(f"attack rate must be in [0, 1], got {self.rate}")


@dataclass
class PerturbedGraph:
    """An attacked graph with its provenance and exact delta."""

    graph: Graph
    provenance: str
    edges_added: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    edges_removed: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    features_flipped: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def delta_summary(self) -> str:
        return (f"added={len(self.edges_added)} "
                f"removed={len(self.edges_removed)} "
                f"flipped={len(self.features_flipped)}")


def _edge_array(pairs: list[tuple[int, int]]) -> np.ndarray:
    if not pairs:
        return np.zeros((0, 2), dtype=np.int64)
    return np.array(sorted(pairs), dtype=np.int64)


def random_edge_attack(g: Graph, rate: float, seed: int = 0) -> PerturbedGraph:
    """Add floor(rate * E) uniformly chosen absent edges; remove nothing."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {rate}")
    n = g.num_nodes
    budget = int(rate * g.num_edges)
    absent_total = n * (n - 1) // 2 - g.num_edges
    if budget > absent_total:
        raise ValueError(
            f"cannot add {budget} edges: only {absent_total} node pairs "
            "are absent")
    rng = np.random.default_rng(seed)
    present = g.edge_set()
    added: list[tuple[int, int]] = []
    if budget and absent_total <= max(4 * budget, 4096) and n <= 4000:
        # Dense regime, where rejection sampling would stall: enumerate
        # the absent pairs and sample directly.
        adj = np.zeros((n, n), dtype=bool)
        adj[g.edges[:, 0], g.edges[:, 1]] = True
        iu, ju = np.triu_indices(n, k=1)
        pool = np.flatnonzero(~adj[iu, ju])
        chosen = rng.choice(pool, size=budget, replace=False)
        added = [(int(iu[k]), int(ju[k])) for k in chosen]
    else:
        while len(added) < budget:
            draw_i = rng.integers(0, n, size=2 * (budget - len(added)) + 8)
            draw_j = rng.integers(0, n, size=draw_i.size)
            for i, j in zip(draw_i, draw_j):
                if i == j:
                    continue
                e = (int(min(i, j)), int(max(i, j)))
                if e in present:
                    continue
                present.add(e)
                added.append(e)
                if len(added) == budget:
                    break
    new_edges = np.concatenate([g.edges, _edge_array(added)]) \
        if added else g.edges
    attacked = build_graph(n, new_edges, g.features, g.labels)
    return PerturbedGraph(graph=attacked,
                          provenance=f"random-edges rate={rate} seed={seed}",
                          edges_added=_edge_array(added))


def feature_flip_attack(g: Graph, rate: float, seed: int = 0) -> PerturbedGraph:
    """Flip floor(rate * nnz(X)) distinct binary feature cells."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {rate}")
    x = g.features
    if not np.all((x == 0.0) | (x == 1.0)):
        raise ValueError("feature flipping requires binary 0/1 features")
    nnz = int(np.count_nonzero(x))
    budget = int(rate * nnz)
    rng = np.random.default_rng(seed)
    n_cells = x.size
    if budget > n_cells:
        raise ValueError("flip budget exceeds the number of feature cells")
    cells = rng.choice(n_cells, size=budget, replace=False)
    rows, cols = np.divmod(cells, x.shape[1])
    x2 = x.copy()
    x2[rows, cols] = 1.0 - x2[rows, cols]
    flipped = np.stack([rows, cols], axis=1) if budget else \
        np.zeros((0, 2), dtype=np.int64)
    flipped = flipped[np.lexsort((flipped[:, 1], flipped[:, 0]))] \
        if budget else flipped
    attacked = build_graph(g.num_nodes, g.edges, x2, g.labels)
    return PerturbedGraph(graph=attacked,
                          provenance=f"feature-flip rate={rate} seed={seed}",
                          features_flipped=flipped)


def _sample_absent_cross(rng: np.random.Generator, labels: np.ndarray,
                         present: set, n: int) -> tuple[int, int]:
    for _ in range(200_000):
        i = int(rng.integers(0, n))
        j = int(rng.integers(0, n))
        if i == j or labels[i] == labels[j]:
            continue
        e = (min(i, j), max(i, j))
        if e in present:
            continue
        return e
    # Rejection is hopeless only when almost every cross pair exists;
    # enumerate what is left.
    for i in range(n):
        for j in range(i + 1, n):
            if labels[i] != labels[j] and (i, j) not in present:
                return (i, j)
    raise AssertionError("caller guaranteed a free cross-label pair")


def dice_attack(g: Graph, labels, rate: float, seed: int = 0) -> PerturbedGraph:
    """Disconnect-internally / connect-externally evasion perturbation."""
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"rate must be in [0, 1], got {rate}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (g.num_nodes,):
        raise ValueError("labels must cover every node")
    n = g.num_nodes
    budget = int(rate * g.num_edges)
    rng = np.random.default_rng(seed)
    present = g.edge_set()
    same_pool = [e for e in sorted(present) if labels[e[0]] == labels[e[1]]]
    class_sizes = np.bincount(labels)
    cross_total = (n * n - int(np.sum(class_sizes.astype(np.int64) ** 2))) // 2
    cross_existing = len(present) - len(same_pool)
    absent_cross = cross_total - cross_existing
    added: list[tuple[int, int]] = []
    removed: list[tuple[int, int]] = []
    for _ in range(budget):
        can_add = absent_cross > 0
        can_remove = len(same_pool) > 0
        if not can_add and not can_remove:
            raise PoolExhaustedError(
                f"both perturbation pools exhausted after "
                f"{len(added) + len(removed)} of {budget} perturbations",
                added, removed)
        do_add = rng.random() < 0.5
        if do_add and not can_add:
            do_add = False
        elif not do_add and not can_remove:
            do_add = True
        if do_add:
            e = _sample_absent_cross(rng, labels, present, n)
            present.add(e)
            added.append(e)
            absent_cross -= 1
        else:
            k = int(rng.integers(0, len(same_pool)))
            e = same_pool[k]
            same_pool[k] = same_pool[-1]
            same_pool.pop()
            present.remove(e)
            removed.append(e)
    attacked = build_graph(n, _edge_array(sorted(present)), g.features, g.labels)
    return PerturbedGraph(graph=attacked,
                          provenance=f"dice rate={rate} seed={seed}",
                          edges_added=_edge_array(added),
                          edges_removed=_edge_array(removed))


def apply_attack(g: Graph, spec: AttackSpec) -> PerturbedGraph:
    if spec.kind == "random-edges":
        return random_edge_attack(g, spec.rate, spec.seed)
    if spec.kind == "feature-flip":
        return feature_flip_attack(g, spec.rate, spec.seed)
    if spec.kind == "dice":
        return dice_attack(g, g.labels, spec.rate, spec.seed)
    raise ValueError(f"unknown attack kind {spec.kind!r}")


def load_perturbed_adjacency(path, base: Graph) -> PerturbedGraph:
    """Replace the structure of ``base`` with an external edge list.

    The file must use the dataset edge format (``i<TAB>j`` per line,
    0-based). Node count must match, self-loops are rejected, and listing
    an edge twice in either orientation is an error. Features and labels
    are retained from ``base``; the delta is computed against it.
    """
    edges = read_edge_list(path)
    seen: set[tuple[int, int]] = set()
    for i, j in edges:
        if i == j:
            raise ValueError(f"{path}: self-loop ({i}, {i}) not allowed")
        if not (0 <= i < base.num_nodes and 0 <= j < base.num_nodes):
            raise ValueError(
                f"{path}: endpoint ({i}, {j}) outside the base graph's "
                f"{base.num_nodes} nodes")
        e = (min(i, j), max(i, j))
        if e in seen:
            raise ValueError(
                f"{path}: edge {e} listed more than once (duplicate or "
                "asymmetric input)")
        seen.add(e)
    attacked = build_graph(base.num_nodes, list(seen), base.features,
                           base.labels)
    base_set = base.edge_set()
    return PerturbedGraph(
        graph=attacked,
        provenance=f"file:{path}",
        edges_added=_edge_array(sorted(seen - base_set)),
        edges_removed=_edge_array(sorted(base_set - seen)))
