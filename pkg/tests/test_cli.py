"""Exit codes, option resolution, and artifact round trips for the CLI."""

import json
import os

import numpy as np
import pytest

from ggeval.cli import main
from ggeval.graphs import load_graphs
from ggeval.metrics import METRIC_NAMES, REPORT_FIELDS


def run(*argv):
    return main(list(argv))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny dataset plus a trained checkpoint shared by the round trips."""
    root = tmp_path_factory.mktemp("cliws")
    data = root / "lobsters.jsonl"
    ckpt = root / "enc.json"
    assert run("--seed", "3", "generate", "--recipe", "lobster",
               "--count", "10", "--out", str(data)) == 0
    assert run("--seed", "3", "train", "--data", str(data),
               "--out", str(ckpt), "--epochs", "1", "--batch-size", "4",
               "--layers", "2", "--hidden", "8", "--lr", "0.001") == 0
    return root, data, ckpt


# --- generate ----------------------------------------------------------------


def test_generate_round_trip(tmp_path):
    out = tmp_path / "set.jsonl"
    assert run("--seed", "1", "generate", "--recipe", "grid",
               "--count", "5", "--out", str(out)) == 0
    gs = load_graphs(out)
    assert len(gs) == 5


def test_generate_deterministic_in_seed(tmp_path):
    a, b, c = (tmp_path / n for n in ("a.jsonl", "b.jsonl", "c.jsonl"))
    run("--seed", "9", "generate", "--recipe", "lobster", "--count", "4", "--out", str(a))
    run("--seed", "9", "generate", "--recipe", "lobster", "--count", "4", "--out", str(b))
    run("--seed", "8", "generate", "--recipe", "lobster", "--count", "4", "--out", str(c))
    assert a.read_text() == b.read_text()
    assert a.read_text() != c.read_text()


def test_generate_missing_out_is_usage_error(capsys):
    assert run("generate", "--recipe", "lobster", "--count", "2") == 2
    assert "missing required option" in capsys.readouterr().err


def test_generate_bad_recipe_rejected_by_parser():
    with pytest.raises(SystemExit) as exc:
        run("generate", "--recipe", "nope", "--count", "2", "--out", "x")
    assert exc.value.code == 2


# --- features ----------------------------------------------------------------


def test_features_csv(workspace, tmp_path):
    _, data, _ = workspace
    out = tmp_path / "features.csv"
    assert run("features", "--in", str(data), "--out", str(out)) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "graph,node_id,degree,c3,c4"
    total_nodes = sum(g.num_nodes for g in load_graphs(data))
    assert len(lines) == 1 + total_nodes


def test_features_missing_file_is_io_error(tmp_path, capsys):
    assert run("features", "--in", str(tmp_path / "nope.jsonl"),
               "--out", str(tmp_path / "o.csv")) == 1
    assert "features" in capsys.readouterr().err


# --- train / embed -----------------------------------------------------------


def test_train_history_csv(workspace, tmp_path):
    _, data, _ = workspace
    ckpt = tmp_path / "enc.json"
    hist = tmp_path / "loss.csv"
    assert run("--seed", "5", "train", "--data", str(data), "--out", str(ckpt),
               "--history", str(hist), "--epochs", "2", "--batch-size", "4",
               "--layers", "2", "--hidden", "8", "--lr", "0.001") == 0
    lines = hist.read_text().strip().splitlines()
    assert lines[0] == "epoch,loss"
    assert len(lines) == 3
    assert ckpt.exists()


def test_embed_matrix_shape(workspace, tmp_path):
    _, data, ckpt = workspace
    out = tmp_path / "emb.csv"
    assert run("embed", "--params", str(ckpt), "--in", str(data),
               "--out", str(out)) == 0
    emb = np.loadtxt(out, delimiter=",", ndmin=2)
    assert emb.shape == (10, 2 * 8)


def test_train_bad_variant_is_parser_error(workspace):
    _, data, _ = workspace
    with pytest.raises(SystemExit) as exc:
        run("train", "--data", str(data), "--out", "x", "--variant", "nope")
    assert exc.value.code == 2


# --- evaluate ----------------------------------------------------------------


def embedding_files(tmp_path):
    rng = np.random.default_rng(0)
    ref, gen = tmp_path / "ref.csv", tmp_path / "gen.csv"
    np.savetxt(ref, rng.normal(size=(20, 4)), delimiter=",")
    np.savetxt(gen, rng.normal(size=(18, 4)), delimiter=",")
    return ref, gen


def test_evaluate_stdout_json(tmp_path, capsys):
    ref, gen = embedding_files(tmp_path)
    assert run("evaluate", "--ref", str(ref), "--gen", str(gen), "--k", "3") == 0
    payload = json.loads(capsys.readouterr().out)
    assert tuple(payload) == tuple(sorted(REPORT_FIELDS))
    assert payload["k"] == 3


def test_evaluate_out_file(tmp_path):
    ref, gen = embedding_files(tmp_path)
    out = tmp_path / "report.json"
    assert run("evaluate", "--ref", str(ref), "--gen", str(gen),
               "--out", str(out)) == 0
    assert json.loads(out.read_text())["k"] == 5


def test_evaluate_k_too_large_fails_cleanly(tmp_path, capsys):
    ref, gen = embedding_files(tmp_path)
    assert run("evaluate", "--ref", str(ref), "--gen", str(gen),
               "--k", "50") == 1
    assert "evaluate" in capsys.readouterr().err


# --- benchmark ---------------------------------------------------------------


def test_benchmark_outputs(workspace, tmp_path):
    _, data, ckpt = workspace
    out = tmp_path / "curves.csv"
    plot_stem = tmp_path / "chart.svg"
    assert run("--seed", "2", "benchmark", "--data", str(data),
               "--params", str(ckpt), "--kind", "mix-random",
               "--step", "0.5", "--k", "3",
               "--out", str(out), "--plot", str(plot_stem)) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 1 + 3  # header + ratios {0, 0.5, 1} for one seed
    summary = json.loads((tmp_path / "curves.summary.json").read_text())
    assert summary["kind"] == "mix_random"
    assert summary["seeds"] == [2]
    assert set(summary["rho"]) == set(METRIC_NAMES)
    for name in METRIC_NAMES:
        assert (tmp_path / f"chart-{name}.svg").exists()


def test_benchmark_unknown_kind_is_usage_error(workspace, tmp_path, capsys):
    _, data, ckpt = workspace
    assert run("benchmark", "--data", str(data), "--params", str(ckpt),
               "--kind", "nope", "--out", str(tmp_path / "c.csv")) == 2
    assert "unknown kind" in capsys.readouterr().err


# --- verify ------------------------------------------------------------------


def test_verify_default_passes(capsys):
    assert run("verify") == 0
    out = capsys.readouterr().out
    assert out.count("cycle-pair") == 3
    assert "wl-ceiling" in out
    assert "FAIL" not in out


def test_verify_custom_tuple(capsys):
    assert run("verify", "--prop1", "5,8,6,7") == 0
    out = capsys.readouterr().out
    assert out.count("cycle-pair") == 1
    assert "wl-ceiling" not in out


def test_verify_bad_tuple_syntax(capsys):
    assert run("verify", "--prop1", "5,8,6") == 2
    assert "--prop1" in capsys.readouterr().err


def test_verify_hypothesis_violation_fails(capsys):
    assert run("verify", "--prop1", "3,5,4,4") == 1
    assert "HypothesisViolationError" in capsys.readouterr().err


# --- config file and global flags ---------------------------------------------


def test_config_file_supplies_options(tmp_path):
    cfg = tmp_path / "ggeval.ini"
    out = tmp_path / "from-config.jsonl"
    cfg.write_text(
        f"[generate]\nrecipe = lobster\ncount = 4\nout = {out}\n"
    )
    assert run("--config", str(cfg), "generate") == 0
    assert len(load_graphs(out)) == 4


def test_flag_beats_config(tmp_path):
    cfg = tmp_path / "ggeval.ini"
    out = tmp_path / "flagged.jsonl"
    cfg.write_text(f"[generate]\nrecipe = lobster\ncount = 4\nout = {out}\n")
    assert run("--config", str(cfg), "generate", "--count", "2") == 0
    assert len(load_graphs(out)) == 2


def test_config_dashed_keys(workspace, tmp_path):
    _, data, _ = workspace
    cfg = tmp_path / "train.ini"
    ckpt = tmp_path / "enc.json"
    cfg.write_text(
        "[train]\nepochs = 1\nbatch-size = 4\nlayers = 2\nhidden = 8\n"
        "lr = 0.001\n"
    )
    assert run("--config", str(cfg), "train", "--data", str(data),
               "--out", str(ckpt)) == 0
    assert ckpt.exists()


def test_config_missing_file(capsys):
    assert run("--config", "/nonexistent.ini", "verify") == 2
    assert "config file not found" in capsys.readouterr().err


def test_config_bad_value_type(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[generate]\nrecipe = lobster\ncount = soon\nout = x\n")
    assert run("--config", str(cfg), "generate") == 2
    assert "count" in capsys.readouterr().err


def test_threads_flag_sets_environment(tmp_path):
    saved = {var: os.environ.get(var)
             for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                         "MKL_NUM_THREADS", "NUMEXPR_NUM_THREADS")}
    try:
        out = tmp_path / "t.jsonl"
        assert run("--threads", "2", "generate", "--recipe", "lobster",
                   "--count", "2", "--out", str(out)) == 0
        assert os.environ["OMP_NUM_THREADS"] == "2"
    finally:
        for var, value in saved.items():
            if value is None:
                os.environ.pop(var, None)
            else:
                os.environ[var] = value


def test_missing_subcommand_is_parser_error():
    with pytest.raises(SystemExit) as exc:
        run()
    assert exc.value.code == 2
