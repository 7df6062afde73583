import csv
import json

import numpy as np
import pytest

from aiqt.cli import (
    ConfigError,
    ExperimentConfig,
    format_config,
    grid_points,
    line_points,
    main,
    parse_config,
)
from aiqt.model import forward, model_from_dict
from aiqt.spinchain import CouplingPoint, load_dataset, solve_point

SMALL = "n_qubits=4\ntotal_samples=30\nepochs=2\nseeds=2  # two runs\nbatch_size=8\n"


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "cfg.txt"
    cfg.write_text(SMALL)
    assert main(["gen-dataset", "--config", str(cfg), "--out", str(root / "data")]) == 0
    assert main(["train", "--config", str(cfg), "--dataset", str(root / "data" / "dataset.json"),
                 "--out", str(root / "run")]) == 0
    return root


# --- config -----------------------------------------------------------------


def test_defaults_match_training_protocol():
    cfg = ExperimentConfig().validate()
    assert (cfg.n_qubits, cfg.total_samples, cfg.epochs, cfg.seeds, cfg.layers) == (10, 900, 100, 10, 3)
    assert (cfg.learning_rate, cfg.batch_size, cfg.train_fraction) == (5e-3, 32, 0.7)
    assert cfg.grid_resolution == 41 and cfg.gzz == 0.1


def test_parse_config_comments_and_types():
    cfg = parse_config("# header\n\nn_qubits = 6  # six\nmodel=aiqt-te\ntheta_init=0.5\ntarget_qubits=2, 3\n")
    assert cfg.n_qubits == 6 and cfg.model == "aiqt-te"
    assert cfg.theta_init == 0.5 and cfg.target_qubits == (2, 3)


@pytest.mark.parametrize(
    "text",
    ["bogus=1\n", "n_qubits=4\nn_qubits=5\n", "n_qubits\n", "epochs=ten\n", "model=cnn\n",
     "total_samples=31\n", "seeds=0\n", "learning_rate=-1\n", "target_qubits=0,0\n", "target_qubits=0,12\n"],
)
def test_parse_config_rejects(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_config_round_trip():
    cfg = parse_config("model=all\ntheta_init=1.25\ngzz=0.3\n")
    assert parse_config(format_config(cfg)) == cfg


# --- geometry of the sweeps -------------------------------------------------


@pytest.mark.parametrize("r", [2, 5, 41])
def test_grid_point_count(r):
    pts = grid_points(r)
    assert len(pts) == r * (r + 1) // 2
    assert {p.as_tuple() for p in pts} >= {(0.0, 0.0, 4.0), (4.0, 0.0, 0.0), (0.0, 4.0, 0.0)}


def test_line_points():
    pts = line_points(0.1, 40)
    assert len(pts) == 40
    assert pts[0].as_tuple() == (0.0, 3.9, 0.1)
    assert pts[-1].g_zxz == pytest.approx(3.9) and pts[-1].g_x == 0.0


# --- commands ---------------------------------------------------------------


def test_gen_dataset_outputs(workspace):
    header, samples = load_dataset(workspace / "data" / "dataset.json")
    assert header["total"] == 30 and header["n_qubits"] == 4
    assert sorted(int(s.label) for s in samples) == [0] * 10 + [1] * 10 + [2] * 10
    assert parse_config((workspace / "data" / "config.txt").read_text()).total_samples == 30


def test_gen_dataset_byte_identical(workspace, tmp_path):
    cfg = workspace / "cfg.txt"
    assert main(["gen-dataset", "--config", str(cfg), "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "dataset.json").read_bytes() == (workspace / "data" / "dataset.json").read_bytes()


def test_seed_override_changes_dataset(workspace, tmp_path):
    cfg = workspace / "cfg.txt"
    assert main(["gen-dataset", "--config", str(cfg), "--seed", "7", "--out", str(tmp_path / "s7")]) == 0
    assert "dataset_seed=7" in (tmp_path / "s7" / "config.txt").read_text()
    assert (tmp_path / "s7" / "dataset.json").read_bytes() != (workspace / "data" / "dataset.json").read_bytes()


def test_train_outputs(workspace):
    rows = read_csv(workspace / "run" / "metrics.csv")
    assert rows[0] == ["epoch", "train_loss", "val_loss", "val_accuracy", "theta", "J", "g", "seed", "model"]
    assert len(rows) == 1 + 2 * 2
    assert {r[7] for r in rows[1:]} == {"0", "1"}
    model = json.loads((workspace / "run" / "model_aiqt-qft_seed1.json").read_text())
    assert model["variant"] == "aiqt-qft" and np.array(model["phi"]).shape == (3, 15)
    assert (workspace / "run" / "metrics.csv").read_bytes().endswith(b"\n")


def test_train_byte_identical(workspace, tmp_path):
    cfg = workspace / "cfg.txt"
    ds = workspace / "data" / "dataset.json"
    assert main(["train", "--config", str(cfg), "--dataset", str(ds), "--out", str(tmp_path / "r")]) == 0
    for name in ("metrics.csv", "summary.csv", "model_aiqt-qft_seed0.json", "config.txt"):
        assert (tmp_path / "r" / name).read_bytes() == (workspace / "run" / name).read_bytes()


def test_train_all_models(workspace, tmp_path):
    cfg = tmp_path / "all.txt"
    cfg.write_text("n_qubits=4\ntotal_samples=30\nepochs=1\nseeds=1\nmodel=all\n")
    ds = workspace / "data" / "dataset.json"
    assert main(["train", "--config", str(cfg), "--dataset", str(ds), "--seed", "3", "--out", str(tmp_path / "r")]) == 0
    rows = read_csv(tmp_path / "r" / "metrics.csv")
    assert [r[8] for r in rows[1:]] == ["qnn", "qft", "aiqt-qft", "aiqt-te"]
    assert all(r[7] == "3" for r in rows[1:])
    assert (tmp_path / "r" / "model_aiqt-te_seed3.json").exists()


def test_train_rejects_mismatched_dataset(workspace, tmp_path, capsys):
    cfg = tmp_path / "c.txt"
    cfg.write_text("n_qubits=5\n")
    ds = workspace / "data" / "dataset.json"
    assert main(["train", "--config", str(cfg), "--dataset", str(ds), "--out", str(tmp_path / "r")]) == 2
    assert "n_qubits" in capsys.readouterr().err
    assert not (tmp_path / "r").exists()


def test_sweep_line(workspace, tmp_path):
    model_path = workspace / "run" / "model_aiqt-qft_seed0.json"
    out = tmp_path / "line"
    assert main(["sweep-line", "--model", str(model_path), "--resolution", "6", "--gzz", "0.4", "--out", str(out)]) == 0
    rows = read_csv(out / "sweep_line.csv")
    assert rows[0] == ["g_zxz", "g_x", "P(Trivial)", "P(SB)", "P(SPT)", "P(fail)"]
    assert len(rows) == 7
    probs = np.array([[float(x) for x in r[2:]] for r in rows[1:]])
    np.testing.assert_allclose(probs.sum(axis=1), 1, atol=1e-9)
    # endpoint equals a single-point forward evaluation
    model = model_from_dict(json.loads(model_path.read_text()))
    _, state = solve_point(4, CouplingPoint(0.0, 3.6, 0.4))
    np.testing.assert_array_equal(probs[0], forward(model, state))


def test_sweep_grid(workspace, tmp_path):
    model_path = workspace / "run" / "model_aiqt-qft_seed1.json"
    out = tmp_path / "grid"
    assert main(["sweep-grid", "--model", str(model_path), "--resolution", "5", "--out", str(out)]) == 0
    rows = read_csv(out / "sweep_grid.csv")
    assert rows[0] == ["g_zxz", "g_x", "g_zz", "predicted_class", "p00", "p01", "p10", "p11"]
    assert len(rows) == 1 + 15
    for r in rows[1:]:
        p = np.array([float(x) for x in r[4:]])
        assert r[3] == format(int(np.argmax(p)), "02b")
        assert abs(sum(float(x) for x in r[:3]) - 4) < 1e-9
    again = tmp_path / "grid2"
    assert main(["sweep-grid", "--model", str(model_path), "--resolution", "5", "--out", str(again)]) == 0
    assert (again / "sweep_grid.csv").read_bytes() == (out / "sweep_grid.csv").read_bytes()


def test_sweep_bad_model_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["sweep-grid", "--model", str(bad), "--out", str(tmp_path / "g")]) == 2
    assert "model" in capsys.readouterr().err


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
