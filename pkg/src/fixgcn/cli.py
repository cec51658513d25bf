"""Command-line front end: training, attacks, sweeps, curves, filter dumps.

Every subcommand echoes its fully resolved configuration before doing any
work, writes plot-ready CSV files only on success, and uses a stable exit
code contract: 0 success, 1 usage error, 2 runtime error.

Flags may be preloaded from a ``key=value`` config file (``--config``);
explicitly passed flags win over the file. ``FIXGCN_DATA_ROOT`` resolves
relative dataset names and ``FIXGCN_THREADS`` seeds the default of
``--threads``, which bounds harness parallelism (execution is currently
sequential, which every bound permits; ``--threads 1`` is the documented
bit-reproducible setting).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from .attacks import (ATTACK_KINDS, AttackSpec, PoolExhaustedError,
                      apply_attack, load_perturbed_adjacency)
from .data import (load_dataset, make_split, write_dataset, write_metrics_csv,
                   write_table_csv)
from .filters import filter_response_table
from .harness import (TrainConfig, aggregate, robustness_curve, run_clean,
                      sweep_s, train)
from .model import save_params

_KIND_ALIASES = {"random": "random-edges", "feature": "feature-flip",
                 "dice": "dice"}
for _k in ATTACK_KINDS:
    _KIND_ALIASES[_k] = _k


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit code 1 for usage problems, not 2
        raise UsageError(message)


def _read_config_file(path) -> dict[str, str]:
    values = {}
    try:
        with open(path, "r", encoding="ascii") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise UsageError(
                        f"{path}:{line_no}: expected key=value, got {line!r}")
                key, value = line.split("=", 1)
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    return values


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults < config file < explicit flags; echo the result."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        file_values = _read_config_file(args.config)
        unknown = set(file_values) - set(defaults)
        if unknown:
            raise UsageError(
                f"config file sets unknown keys: {sorted(unknown)}")
        for key, raw in file_values.items():
            caster = type(defaults[key]) if defaults[key] is not None else str
            if caster is bool:
                merged[key] = raw.lower() in ("1", "true", "yes")
            else:
                merged[key] = caster(raw)
    for key in defaults:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            merged[key] = flag_value
    if "threads" in merged and merged["threads"] is None:
        merged["threads"] = int(os.environ.get("FIXGCN_THREADS", "1"))
    for key in sorted(merged):
        print(f"config {key}={merged[key]}")
    return merged


def _resolve_data_dir(name: str) -> str:
    if os.path.isdir(name):
        return name
    root = os.environ.get("FIXGCN_DATA_ROOT")
    if root:
        candidate = os.path.join(root, name)
        if os.path.isdir(candidate):
            return candidate
    raise FileNotFoundError(f"dataset directory not found: {name}")


def _train_config(merged: dict) -> TrainConfig:
    try:
        return TrainConfig(epochs=merged["epochs"], lr=merged["lr"],
                           weight_decay=merged["weight_decay"],
                           dropout=merged["dropout"], hidden=merged["hidden"],
                           layers=merged["layers"], s=merged["s"],
                           seed=merged["seed"], variant=merged["model"])
    except ValueError as exc:
        # Bad flag values are usage errors, rejected before any work.
        raise UsageError(str(exc)) from None


_TRAIN_DEFAULTS = dict(data=None, model="fixgcn", s=0.2, seed=0, epochs=200,
                       lr=1e-2, weight_decay=5e-4, dropout=0.6, hidden=64,
                       layers=2, threads=None, out="metrics.csv", ckpt=None)


def _add_train_flags(p: _Parser, with_out: bool = True):
    p.add_argument("--data", required=False)
    p.add_argument("--model", choices=["fixgcn", "gcn"])
    p.add_argument("--s", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--config")
    if with_out:
        p.add_argument("--out")


def _check_threads(merged: dict) -> None:
    if merged.get("threads", 1) < 1:
        raise UsageError("--threads must be at least 1")


def cmd_train(args) -> int:
    defaults = dict(_TRAIN_DEFAULTS)
    merged = _resolve(args, defaults)
    _check_threads(merged)
    if not merged["data"]:
        raise UsageError("--data is required")
    cfg = _train_config(merged)  # validates s and friends before any work
    g = load_dataset(_resolve_data_dir(merged["data"]))
    split = make_split(g.num_nodes, seed=cfg.seed)
    params, record = train(g, split, cfg,
                           dataset_name=os.path.basename(
                               os.path.normpath(merged["data"])))
    rows = [(e, loss, acc) for e, (loss, acc) in
            enumerate(zip(record.train_loss,
                          record.val_accuracy or [0.0] * len(record.train_loss)))]
    write_table_csv(["epoch", "train_loss", "val_accuracy"], rows,
                    merged["out"])
    if merged["ckpt"]:
        save_params(params, merged["ckpt"])
    print(f"test_accuracy {record.test_accuracy!r}")
    print(f"wall_time_s {record.wall_time_s!r}")
    print(f"wrote {merged['out']}")
    return 0


_ATTACK_DEFAULTS = dict(data=None, kind=None, rate=0.0, seed=0, out=None,
                        threads=None)


def cmd_attack(args) -> int:
    merged = _resolve(args, dict(_ATTACK_DEFAULTS))
    _check_threads(merged)
    for key in ("data", "kind", "out"):
        if not merged[key]:
            raise UsageError(f"--{key} is required")
    kind = _KIND_ALIASES.get(merged["kind"])
    if kind is None:
        raise UsageError(f"unknown attack kind {merged['kind']!r}")
    try:
        spec = AttackSpec(kind, merged["rate"], merged["seed"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    g = load_dataset(_resolve_data_dir(merged["data"]))
    try:
        pg = apply_attack(g, spec)
    except PoolExhaustedError as exc:
        print(f"attack aborted: {exc}", file=sys.stderr)
        print(f"delta-so-far: added={len(exc.added)} removed={len(exc.removed)}",
              file=sys.stderr)
        return 2
    os.makedirs(merged["out"], exist_ok=True)
    write_dataset(pg.graph, merged["out"])
    summary_path = os.path.join(merged["out"], "delta.txt")
    with open(summary_path, "w", encoding="ascii") as fh:
        fh.write(f"kind={kind}\n")
        fh.write(f"rate={merged['rate']!r}\n")
        fh.write(f"seed={merged['seed']}\n")
        fh.write(f"added={len(pg.edges_added)} removed={len(pg.edges_removed)}\n")
        fh.write(f"flipped={len(pg.features_flipped)}\n")
    print(pg.delta_summary())
    print(f"wrote {merged['out']}")
    return 0


def _parse_s_grid(spec: str) -> list[float]:
    try:
        if ":" in spec:
            start, stop, step = (float(v) for v in spec.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            values = []
            k = 0
            while True:
                v = round(start + k * step, 10)
                if v > stop + 1e-9:
                    break
                values.append(v)
                k += 1
            return values
        return [float(spec)]
    except ValueError:
        raise UsageError(f"malformed s grid {spec!r}; expected "
                         "'start:stop:step' or a single value") from None


def cmd_sweep(args) -> int:
    defaults = dict(_TRAIN_DEFAULTS)
    defaults.update(s_grid="0.1:0.9:0.1", seeds=10, out="sweep.csv")
    merged = _resolve(args, defaults)
    _check_threads(merged)
    if not merged["data"]:
        raise UsageError("--data is required")
    grid = _parse_s_grid(merged["s_grid"])
    for s in grid:
        if not 0.0 <= s <= 1.0:
            raise UsageError(f"s grid value {s} outside [0, 1]")
    cfg = _train_config(merged)
    g = load_dataset(_resolve_data_dir(merged["data"]))
    cells, summary = sweep_s(g, cfg, grid, range(merged["seeds"]))
    write_table_csv(["s", "seed", "test_accuracy"], cells, merged["out"])
    for s, mean, std in summary:
        print(f"s={s!r} mean_accuracy={mean!r} std={std!r}")
    print(f"wrote {merged['out']}")
    return 0


def _parse_attack_specfile(path) -> tuple[list[AttackSpec], list[str]]:
    specs = []
    external = []
    try:
        with open(path, "r", encoding="ascii") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if parts[0] == "external":
                    if len(parts) != 2:
                        raise UsageError(
                            f"{path}:{line_no}: expected 'external <path>'")
                    external.append(parts[1])
                    continue
                kind = _KIND_ALIASES.get(parts[0])
                if kind is None or len(parts) not in (2, 3):
                    raise UsageError(
                        f"{path}:{line_no}: expected '<kind> <rate> [seed]'")
                rate = float(parts[1])
                seed = int(parts[2]) if len(parts) == 3 else 0
                specs.append(AttackSpec(kind, rate, seed))
    except OSError as exc:
        raise UsageError(f"cannot read attack spec file: {exc}") from exc
    return specs, external


def cmd_curve(args) -> int:
    defaults = dict(_TRAIN_DEFAULTS)
    defaults.update(attacks=None, seeds=10, out="curve.csv")
    merged = _resolve(args, defaults)
    _check_threads(merged)
    for key in ("data", "attacks"):
        if not merged[key]:
            raise UsageError(f"--{key} is required")
    specs, external = _parse_attack_specfile(merged["attacks"])
    cfg = _train_config(merged)
    name = os.path.basename(os.path.normpath(merged["data"]))
    g = load_dataset(_resolve_data_dir(merged["data"]))
    seeds = range(merged["seeds"])
    records = robustness_curve(g, cfg, specs, seeds, dataset_name=name)
    for path in external:
        pg = load_perturbed_adjacency(path, g)
        for seed in seeds:
            split = make_split(g.num_nodes, seed=seed)
            _, rec = train(pg.graph, split, replace(cfg, seed=seed), name)
            rec.attack_kind = "external"
            rec.attack_seed = seed
            records.append(rec)
    write_metrics_csv(records, merged["out"])
    for row in aggregate(records):
        print(" ".join(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}"
                       for k, v in row.items()))
    print(f"wrote {merged['out']}")
    return 0


def cmd_filter(args) -> int:
    merged = _resolve(args, dict(s=0.2, out="response.csv", threads=None))
    _check_threads(merged)
    try:
        rows = filter_response_table(merged["s"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    write_table_csv(["lambda", "response"], rows, merged["out"])
    print(f"wrote {merged['out']} ({len(rows)} samples)")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="fixgcn", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one model on a dataset")
    _add_train_flags(p_train)
    p_train.add_argument("--ckpt")
    p_train.set_defaults(func=cmd_train)

    p_attack = sub.add_parser("attack", help="write a perturbed dataset")
    p_attack.add_argument("--data")
    p_attack.add_argument("--kind", choices=sorted(_KIND_ALIASES))
    p_attack.add_argument("--rate", type=float)
    p_attack.add_argument("--seed", type=int)
    p_attack.add_argument("--out")
    p_attack.add_argument("--threads", type=int)
    p_attack.add_argument("--config")
    p_attack.set_defaults(func=cmd_attack)

    p_sweep = sub.add_parser("sweep", help="accuracy across the s grid")
    _add_train_flags(p_sweep)
    p_sweep.add_argument("--s-grid", dest="s_grid")
    p_sweep.add_argument("--seeds", type=int)
    p_sweep.set_defaults(func=cmd_sweep)

    p_curve = sub.add_parser("curve", help="robustness curve over attacks")
    _add_train_flags(p_curve)
    p_curve.add_argument("--attacks")
    p_curve.add_argument("--seeds", type=int)
    p_curve.set_defaults(func=cmd_curve)

    p_filter = sub.add_parser("filter", help="dump transfer-function samples")
    p_filter.add_argument("--s", type=float)
    p_filter.add_argument("--out")
    p_filter.add_argument("--threads", type=int)
    p_filter.add_argument("--config")
    p_filter.set_defaults(func=cmd_filter)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
