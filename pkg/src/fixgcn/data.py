"""Corpus loading, split generation, and metrics persistence.

On-disk dataset layout (all files tab/space separated text; formats are
normative and bit-exact):

* ``edges.tsv``    one undirected edge per line as ``i<TAB>j``, 0-based
  node indices, no duplicates in either orientation, no self-loops.
* ``features.tsv`` either N rows of F space-separated reals, or a sparse
  triplet form: a first line ``sparse N F`` followed by
  ``row col value`` lines. The sparse form is the sensible one for
  one-hot word features.
* ``labels.tsv``   one integer class per line, N lines.
* ``splits.tsv``   optional: ``node<TAB>{train|val|test}`` lines.

Loading builds the graph, keeps only its largest connected component and
logs the resulting (N, E, F, C). There is deliberately no download code;
docs/DATASETS.md gives the recipe for converting the public citation-corpus
distributions into this layout.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph, build_graph, largest_connected_component

log = logging.getLogger(__name__)

# Feature matrices denser than this are written as dense rows.
SPARSE_WRITE_DENSITY = 0.25


# ----------------------------------------------------------------------
# splits
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/val/test node index sets."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "val", "test"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            object.__setattr__(self, name, arr)
        combined = np.concatenate([self.train, self.val, self.test])
        if len(np.unique(combined)) != len(combined):
            raise ValueError("split sets must be pairwise disjoint")


def make_split(num_nodes: int, ratios: tuple[float, float, float] = (0.1, 0.1, 0.8),
               seed: int = 0) -> SplitSpec:
    """Random unstratified partition with floor-sized train/val parts.

    Sizes are floor(ratio * N) for train and val; when the ratios sum to
    one the rounding remainder goes to test, otherwise test also gets its
    floor share and the leftover nodes stay unassigned.
    """
    if num_nodes <= 0:
        raise ValueError("cannot split an empty node set")
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) > 1.0 + 1e-12:
        raise ValueError(f"ratios must be 3 non-negatives summing <= 1: {ratios}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(num_nodes)
    n_train = int(ratios[0] * num_nodes)
    n_val = int(ratios[1] * num_nodes)
    if abs(sum(ratios) - 1.0) <= 1e-12:
        n_test = num_nodes - n_train - n_val
    else:
        n_test = int(ratios[2] * num_nodes)
    return SplitSpec(train=order[:n_train],
                     val=order[n_train:n_train + n_val],
                     test=order[n_train + n_val:n_train + n_val + n_test])


def write_split(split: SplitSpec, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for name in ("train", "val", "test"):
            for node in sorted(getattr(split, name).tolist()):
                fh.write(f"{node}\t{name}\n")


def read_split(path) -> SplitSpec:
    parts: dict[str, list[int]] = {"train": [], "val": [], "test": []}
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            node, name = line.split("\t")
            if name not in parts:
                raise ValueError(f"{path}:{line_no}: unknown split {name!r}")
            parts[name].append(int(node))
    return SplitSpec(train=np.array(parts["train"], dtype=np.int64),
                     val=np.array(parts["val"], dtype=np.int64),
                     test=np.array(parts["test"], dtype=np.int64))


# ----------------------------------------------------------------------
# datasets
# ----------------------------------------------------------------------

def read_edge_list(path) -> list[tuple[int, int]]:
    """Parse an ``i<TAB>j`` edge file into endpoint pairs (no validation
    beyond the line format; graph construction enforces the rest)."""
    edges = []
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected 'i<TAB>j'")
            edges.append((int(parts[0]), int(parts[1])))
    return edges


def _read_features(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        first = fh.readline().split()
        if first[:1] == ["sparse"]:
            if len(first) != 3:
                raise ValueError(f"{path}: sparse header must be 'sparse N F'")
            n, f = int(first[1]), int(first[2])
            x = np.zeros((n, f), dtype=np.float64)
            for line_no, line in enumerate(fh, 2):
                line = line.strip()
                if not line:
                    continue
                r, c, v = line.split()
                x[int(r), int(c)] = float(v)
            return x
        rows = [np.array([float(v) for v in first], dtype=np.float64)]
        width = len(first)
        for line_no, line in enumerate(fh, 2):
            line = line.strip()
            if not line:
                continue
            vals = [float(v) for v in line.split()]
            if len(vals) != width:
                raise ValueError(
                    f"{path}:{line_no}: ragged feature row "
                    f"({len(vals)} values, expected {width})")
            rows.append(np.array(vals, dtype=np.float64))
        return np.stack(rows)


def _read_labels(path) -> np.ndarray:
    labels = []
    with open(path, "r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            y = int(line)
            if y < 0:
                raise ValueError(f"{path}:{line_no}: label out of range: {y}")
            labels.append(y)
    return np.array(labels, dtype=np.int64)


def load_dataset(directory) -> Graph:
    """Load a dataset directory and return its largest connected component."""
    directory = os.fspath(directory)
    for required in ("edges.tsv", "features.tsv", "labels.tsv"):
        if not os.path.exists(os.path.join(directory, required)):
            raise FileNotFoundError(
                f"dataset directory {directory} is missing {required}")
    features = _read_features(os.path.join(directory, "features.tsv"))
    labels = _read_labels(os.path.join(directory, "labels.tsv"))
    edges = read_edge_list(os.path.join(directory, "edges.tsv"))
    g = build_graph(features.shape[0], edges, features, labels)
    g, _ = largest_connected_component(g)
    log.info("loaded %s: N=%d E=%d F=%d C=%d", directory, g.num_nodes,
             g.num_edges, g.num_features, g.num_classes)
    return g


def write_edge_list(edges: np.ndarray, path) -> None:
    """Write canonical (sorted, i<j) edges as ``i<TAB>j`` lines."""
    with open(path, "w", encoding="ascii") as fh:
        for i, j in np.asarray(edges):
            fh.write(f"{i}\t{j}\n")


def write_features(x: np.ndarray, path, sparse: bool | None = None) -> None:
    density = np.count_nonzero(x) / max(1, x.size)
    if sparse is None:
        sparse = density < SPARSE_WRITE_DENSITY
    with open(path, "w", encoding="ascii") as fh:
        if sparse:
            fh.write(f"sparse {x.shape[0]} {x.shape[1]}\n")
            for r, c in zip(*np.nonzero(x)):
                fh.write(f"{r} {c} {float(x[r, c])!r}\n")
        else:
            for row in x:
                fh.write(" ".join(repr(v) for v in row.tolist()))
                fh.write("\n")


def write_dataset(g: Graph, directory, sparse_features: bool | None = None) -> None:
    """Write a graph as a loadable dataset directory."""
    os.makedirs(directory, exist_ok=True)
    write_edge_list(g.edges, os.path.join(directory, "edges.tsv"))
    write_features(g.features, os.path.join(directory, "features.tsv"),
                   sparse=sparse_features)
    with open(os.path.join(directory, "labels.tsv"), "w", encoding="ascii") as fh:
        for y in g.labels.tolist():
            fh.write(f"{y}\n")


# ----------------------------------------------------------------------
# metrics records
# ----------------------------------------------------------------------

@dataclass
class MetricsRecord:
    """One training/evaluation run with its per-epoch curves."""

    dataset: str
    variant: str
    attack_kind: str = "none"
    attack_rate: float = 0.0
    attack_seed: int = 0
    seed: int = 0
    train_loss: list[float] = field(default_factory=list)
    val_accuracy: list[float] = field(default_factory=list)
    test_accuracy: float = 0.0
    # wall time is measurement metadata, not a result: equal records mean
    # equal results even when the clock disagrees
    wall_time_s: float = field(default=0.0, compare=False)

    def __post_init__(self):
        for acc in list(self.val_accuracy) + [self.test_accuracy]:
            if not 0.0 <= acc <= 1.0:
                raise ValueError(f"accuracy {acc} outside [0, 1]")


_METRICS_COLUMNS = ["dataset", "variant", "attack_kind", "attack_rate",
                    "attack_seed", "seed", "test_accuracy", "wall_time_s",
                    "train_loss", "val_accuracy"]


def write_metrics_csv(records: list[MetricsRecord], path) -> None:
    """One row per record; per-epoch curves embedded as JSON arrays.

    Floats are serialized with ``repr`` semantics, so every numeric field
    survives a round trip exactly.
    """
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(_METRICS_COLUMNS)
        for r in records:
            writer.writerow([
                r.dataset, r.variant, r.attack_kind, repr(float(r.attack_rate)),
                r.attack_seed, r.seed, repr(float(r.test_accuracy)),
                repr(float(r.wall_time_s)),
                json.dumps([float(v) for v in r.train_loss]),
                json.dumps([float(v) for v in r.val_accuracy]),
            ])


def read_metrics_csv(path) -> list[MetricsRecord]:
    records = []
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != _METRICS_COLUMNS:
            raise ValueError(f"{path}: unexpected metrics header "
                             f"{reader.fieldnames}")
        for row in reader:
            records.append(MetricsRecord(
                dataset=row["dataset"],
                variant=row["variant"],
                attack_kind=row["attack_kind"],
                attack_rate=float(row["attack_rate"]),
                attack_seed=int(row["attack_seed"]),
                seed=int(row["seed"]),
                train_loss=json.loads(row["train_loss"]),
                val_accuracy=json.loads(row["val_accuracy"]),
                test_accuracy=float(row["test_accuracy"]),
                wall_time_s=float(row["wall_time_s"]),
            ))
    return records


# ----------------------------------------------------------------------
# small generic CSV tables (training curves, sweeps, filter samples...)
# ----------------------------------------------------------------------

def write_table_csv(header: list[str], rows: list[tuple], path) -> None:
    """Plain CSV table; floats written with repr for exact round trips."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v
                             for v in row])


def read_table_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read back a plain CSV table as (header, string rows)."""
    with open(path, "r", newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]
