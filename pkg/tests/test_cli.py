import os

import numpy as np
import pytest

from fixgcn import community_graph, load_dataset, load_params, read_metrics_csv
from fixgcn.cli import main
from fixgcn.data import read_table_csv, write_dataset


@pytest.fixture
def toy_dir(tmp_path):
    g = community_graph(10, 3, p_in=0.35, p_out=0.04, features_per_class=5,
                        seed=21)
    d = tmp_path / "toy"
    write_dataset(g, d)
    return d


def args(*items):
    return [str(v) for v in items]


class TestTrainCommand:
    def test_writes_epoch_rows_and_checkpoint(self, toy_dir, tmp_path, capsys):
        out = tmp_path / "m.csv"
        ckpt = tmp_path / "model.ckpt"
        code = main(args("train", "--data", toy_dir, "--epochs", 25,
                         "--hidden", 8, "--out", out, "--ckpt", ckpt))
        assert code == 0
        header, rows = read_table_csv(out)
        assert header == ["epoch", "train_loss", "val_accuracy"]
        assert len(rows) == 25
        params = load_params(ckpt)
        assert params.variant == "fixgcn"
        echoed = capsys.readouterr().out
        assert "config epochs=25" in echoed
        assert "config model=fixgcn" in echoed

    def test_missing_dataset_no_partial_csv(self, tmp_path):
        out = tmp_path / "m.csv"
        code = main(args("train", "--data", tmp_path / "nope", "--out", out))
        assert code == 2
        assert not out.exists()

    def test_invalid_s_rejected_before_any_work(self, toy_dir, tmp_path):
        out = tmp_path / "m.csv"
        code = main(args("train", "--data", toy_dir, "--s", 1.5,
                         "--out", out))
        assert code == 1
        assert not out.exists()

    def test_unknown_flag_is_usage_error(self, toy_dir):
        assert main(args("train", "--data", toy_dir, "--bogus", 1)) == 1

    def test_gcn_variant(self, toy_dir, tmp_path):
        out = tmp_path / "m.csv"
        code = main(args("train", "--data", toy_dir, "--model", "gcn",
                         "--epochs", 10, "--hidden", 8, "--out", out))
        assert code == 0

    def test_config_file_with_flag_override(self, toy_dir, tmp_path, capsys):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("epochs=10\nhidden=8\nseed=5\n")
        out = tmp_path / "m.csv"
        code = main(args("train", "--data", toy_dir, "--config", cfgfile,
                         "--seed", 9, "--out", out))
        assert code == 0
        echoed = capsys.readouterr().out
        assert "config epochs=10" in echoed   # from the file
        assert "config seed=9" in echoed      # flag wins

    def test_config_file_unknown_key(self, toy_dir, tmp_path):
        cfgfile = tmp_path / "run.cfg"
        cfgfile.write_text("learning=0.1\n")
        assert main(args("train", "--data", toy_dir, "--config", cfgfile)) == 1

    def test_data_root_env_resolution(self, toy_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("FIXGCN_DATA_ROOT", str(toy_dir.parent))
        monkeypatch.chdir(tmp_path)
        out = tmp_path / "m.csv"
        code = main(args("train", "--data", "toy", "--epochs", 5,
                         "--hidden", 8, "--out", out))
        assert code == 0


class TestAttackCommand:
    def test_rate_zero_byte_identical_edges(self, toy_dir, tmp_path):
        out = tmp_path / "attacked"
        code = main(args("attack", "--data", toy_dir, "--kind", "random",
                         "--rate", 0.0, "--seed", 1, "--out", out))
        assert code == 0
        assert (out / "edges.tsv").read_bytes() == \
            (toy_dir / "edges.tsv").read_bytes()

    def test_random_attack_delta_summary(self, toy_dir, tmp_path, capsys):
        g = load_dataset(toy_dir)
        budget = int(0.2 * g.num_edges)
        out = tmp_path / "attacked"
        code = main(args("attack", "--data", toy_dir, "--kind", "random",
                         "--rate", 0.2, "--seed", 3, "--out", out))
        assert code == 0
        delta = (out / "delta.txt").read_text()
        assert f"added={budget} removed=0" in delta
        attacked = load_dataset(out)
        assert attacked.num_edges == g.num_edges + budget

    def test_feature_attack_writes_features(self, toy_dir, tmp_path):
        out = tmp_path / "attacked"
        code = main(args("attack", "--data", toy_dir, "--kind", "feature",
                         "--rate", 0.3, "--seed", 2, "--out", out))
        assert code == 0
        g = load_dataset(toy_dir)
        attacked = load_dataset(out)
        flips = int(np.sum(np.abs(attacked.features - g.features)))
        assert flips == int(0.3 * np.count_nonzero(g.features))

    def test_dice_single_label_no_additions(self, tmp_path):
        g = community_graph(8, 1, p_in=0.4, features_per_class=4, seed=3)
        src = tmp_path / "single"
        write_dataset(g, src)
        out = tmp_path / "attacked"
        code = main(args("attack", "--data", src, "--kind", "dice",
                         "--rate", 0.5, "--seed", 0, "--out", out))
        assert code == 0
        assert "added=0 " in (out / "delta.txt").read_text()

    def test_pool_exhaustion_reports_partial_delta(self, tmp_path, capsys):
        g = community_graph(1, 2, p_in=0.0, p_out=1.0, features_per_class=2,
                            seed=0)  # two nodes, one cross edge
        src = tmp_path / "tiny"
        write_dataset(g, src)
        out = tmp_path / "attacked"
        code = main(args("attack", "--data", src, "--kind", "dice",
                         "--rate", 1.0, "--seed", 0, "--out", out))
        assert code == 2
        err = capsys.readouterr().err
        assert "delta-so-far" in err

    def test_bad_rate_usage_error(self, toy_dir, tmp_path):
        code = main(args("attack", "--data", toy_dir, "--kind", "random",
                         "--rate", 2.0, "--out", tmp_path / "x"))
        assert code == 1


class TestSweepCommand:
    def test_cell_count_and_round_trip(self, toy_dir, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(args("sweep", "--data", toy_dir, "--s-grid",
                         "0.2:0.4:0.1", "--seeds", 2, "--epochs", 8,
                         "--hidden", 8, "--out", out))
        assert code == 0
        header, rows = read_table_csv(out)
        assert header == ["s", "seed", "test_accuracy"]
        assert len(rows) == 6
        grid = sorted({row[0] for row in rows})
        assert grid == ["0.2", "0.3", "0.4"]

    def test_single_point_grid(self, toy_dir, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(args("sweep", "--data", toy_dir, "--s-grid", "0.2",
                         "--seeds", 1, "--epochs", 5, "--hidden", 8,
                         "--out", out))
        assert code == 0
        _, rows = read_table_csv(out)
        assert len(rows) == 1

    def test_malformed_grid(self, toy_dir, tmp_path):
        code = main(args("sweep", "--data", toy_dir, "--s-grid", "a:b:c",
                         "--out", tmp_path / "s.csv"))
        assert code == 1

    def test_out_of_range_grid(self, toy_dir, tmp_path):
        code = main(args("sweep", "--data", toy_dir, "--s-grid",
                         "0.5:1.5:0.5", "--out", tmp_path / "s.csv"))
        assert code == 1


class TestCurveCommand:
    def test_records_round_trip(self, toy_dir, tmp_path):
        specfile = tmp_path / "attacks.txt"
        specfile.write_text("# kind rate [seed]\nrandom 0.0\ndice 0.4 7\n")
        out = tmp_path / "curve.csv"
        code = main(args("curve", "--data", toy_dir, "--attacks", specfile,
                         "--seeds", 2, "--epochs", 8, "--hidden", 8,
                         "--out", out))
        assert code == 0
        records = read_metrics_csv(out)
        assert len(records) == 4
        kinds = {r.attack_kind for r in records}
        assert kinds == {"random-edges", "dice"}

    def test_external_edge_list(self, toy_dir, tmp_path):
        g = load_dataset(toy_dir)
        ext = tmp_path / "poisoned.tsv"
        from fixgcn.data import write_edge_list
        write_edge_list(g.edges[:-2], ext)  # drop two edges
        specfile = tmp_path / "attacks.txt"
        specfile.write_text(f"external {ext}\n")
        out = tmp_path / "curve.csv"
        code = main(args("curve", "--data", toy_dir, "--attacks", specfile,
                         "--seeds", 1, "--epochs", 8, "--hidden", 8,
                         "--out", out))
        assert code == 0
        records = read_metrics_csv(out)
        assert records[0].attack_kind == "external"

    def test_bad_specfile(self, toy_dir, tmp_path):
        specfile = tmp_path / "attacks.txt"
        specfile.write_text("nettack 0.2\n")
        code = main(args("curve", "--data", toy_dir, "--attacks", specfile,
                         "--out", tmp_path / "c.csv"))
        assert code == 1


class TestFilterCommand:
    def test_unit_row_present_and_monotone_tail(self, tmp_path):
        out = tmp_path / "resp.csv"
        code = main(args("filter", "--s", 0.2, "--out", out))
        assert code == 0
        text = out.read_text()
        assert "\n1.0,1.0\n" in text
        header, rows = read_table_csv(out)
        assert header == ["lambda", "response"]
        assert len(rows) == 200
        tail = [float(r[1]) for r in rows if 1.0 <= float(r[0]) <= 2.0]
        assert all(b < a for a, b in zip(tail, tail[1:]))

    def test_invalid_s(self, tmp_path):
        assert main(args("filter", "--s", -0.5, "--out", tmp_path / "r.csv")) == 1


class TestExitCodes:
    def test_no_command_is_usage_error(self):
        assert main([]) == 1

    def test_unknown_command(self):
        assert main(["frobnicate"]) == 1
