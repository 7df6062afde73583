"""Command-line entry points: dataset generation, training and phase sweeps.

    aiqt gen-dataset --config cfg.txt --out data/
    aiqt train       --config cfg.txt --dataset data/dataset.json --out runs/
    aiqt sweep-line  --model runs/model_aiqt-qft_seed0.json --gzz 0.1 --out line/
    aiqt sweep-grid  --model runs/model_aiqt-qft_seed0.json --resolution 41 --out grid/

Every command writes into the ``--out`` directory and leaves a
``config.txt`` there holding the fully resolved configuration.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from typing import Optional

import numpy as np

from .model import VARIANTS, forward_batch, model_from_dict, model_to_dict
from .spinchain import (
    SIMPLEX_TOTAL,
    CouplingPoint,
    PhaseLabel,
    load_dataset,
    sample_dataset,
    save_dataset,
    solve_point,
    stratified_split,
    to_arrays,
)
from .train import TrainConfig, metrics_csv, run_training, summarize


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class ExperimentConfig:
    # dataset
    n_qubits: int = 10
    total_samples: int = 900
    dataset_seed: int = 0
    train_fraction: float = 0.7
    split_seed: int = 0
    # training
    model: str = "aiqt-qft"
    learning_rate: float = 5e-3
    batch_size: int = 32
    epochs: int = 100
    seeds: int = 10
    first_seed: int = 0
    layers: int = 3
    theta_init: Optional[float] = None
    J_init: float = 1.0
    g_init: float = 1.0
    n_steps: int = 10
    target_qubits: tuple = (0, 1)
    phi_scale: float = 0.1
    # sweeps
    grid_resolution: int = 41
    line_resolution: int = 40
    gzz: float = 0.1

    def validate(self) -> "ExperimentConfig":
        if self.n_qubits < 2:
            raise ConfigError("n_qubits must be >= 2")
        if self.total_samples <= 0 or self.total_samples % 3:
            raise ConfigError("total_samples must be a positive multiple of 3")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.model not in VARIANTS + ("all",):
            raise ConfigError(f"model must be one of {VARIANTS + ('all',)}, got {self.model!r}")
        if self.seeds < 1:
            raise ConfigError("seeds (the number of runs) must be >= 1")
        if self.grid_resolution < 2 or self.line_resolution < 2:
            raise ConfigError("sweep resolutions must be >= 2")
        if not 0 <= self.gzz <= SIMPLEX_TOTAL:
            raise ConfigError(f"gzz must lie in [0, {SIMPLEX_TOTAL}]")
        if len(self.target_qubits) != 2 or len(set(self.target_qubits)) != 2:
            raise ConfigError("target_qubits must name two distinct qubits")
        if any(not 0 <= q < self.n_qubits for q in self.target_qubits):
            raise ConfigError("target_qubits out of range for n_qubits")
        try:
            self.train_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def train_config(self, variant: Optional[str] = None) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            epochs=self.epochs,
            seeds=tuple(range(self.first_seed, self.first_seed + self.seeds)),
            layers=self.layers,
            aiqt_variant=variant or (self.model if self.model != "all" else "aiqt-qft"),
            theta_init=self.theta_init,
            J_init=self.J_init,
            g_init=self.g_init,
            n_steps=self.n_steps,
            target_qubits=self.target_qubits,
            phi_scale=self.phi_scale,
        )

    @property
    def variants(self) -> tuple:
        return VARIANTS if self.model == "all" else (self.model,)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_value(key: str, text: str):
    default = _FIELDS[key].default
    if key == "target_qubits":
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    if key == "theta_init":
        return None if text.lower() in ("", "none", "default") else float(text)
    if key == "model":
        return text
    if isinstance(default, bool):
        raise ConfigError(f"unsupported boolean key {key}")
    if isinstance(default, int):
        return int(text)
    return float(text)


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    """Strict ``key=value`` parser; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parse_value(key, value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
    return ExperimentConfig(**values).validate()


def format_config(cfg: ExperimentConfig) -> str:
    return "".join(f"{name}={_format_value(getattr(cfg, name))}\n" for name in _FIELDS)


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig().validate()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# --- helpers ----------------------------------------------------------------


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _num(x: float) -> str:
    return repr(float(x))


def _prepare_out(out: str, cfg: ExperimentConfig) -> None:
    os.makedirs(out, exist_ok=True)
    _write_text(os.path.join(out, "config.txt"), format_config(cfg))


def _load_model(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return model_from_dict(json.load(fh))
    except (OSError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"cannot read model file {path}: {exc}") from exc


def _evaluate_points(model, points) -> np.ndarray:
    states = np.array([solve_point(model.n_qubits, p)[1].amplitudes for p in points])
    return forward_batch(model, states)


# --- commands ---------------------------------------------------------------


def cmd_gen_dataset(cfg: ExperimentConfig, out: str, log=print) -> str:
    _prepare_out(out, cfg)
    samples = sample_dataset(cfg.n_qubits, cfg.total_samples, cfg.dataset_seed)
    path = os.path.join(out, "dataset.json")
    save_dataset(path, samples, cfg.n_qubits, cfg.dataset_seed)
    counts = {lab.name: sum(s.label == lab for s in samples) for lab in PhaseLabel if lab != PhaseLabel.FAIL}
    energies = [s.energy for s in samples]
    log(f"wrote {len(samples)} samples to {path}")
    log("class counts: " + ", ".join(f"{k}={v}" for k, v in counts.items()))
    log(f"ground energy range: [{min(energies):.6f}, {max(energies):.6f}]")
    return path


def cmd_train(cfg: ExperimentConfig, dataset_path: str, out: str, log=print) -> dict:
    header, samples = load_dataset(dataset_path)
    if header["n_qubits"] != cfg.n_qubits:
        raise ConfigError(
            f"dataset has n_qubits={header['n_qubits']} but config says n_qubits={cfg.n_qubits}"
        )
    _prepare_out(out, cfg)
    train, val = stratified_split(samples, cfg.train_fraction, cfg.split_seed)
    train_arr, val_arr = to_arrays(train), to_arrays(val)
    all_results, summaries = [], {}
    for variant in cfg.variants:
        results = run_training(cfg.train_config(variant), train_arr, val_arr, variant)
        for res in results:
            fin = res.final
            log(f"{variant} seed {res.seed}: train_loss={fin.train_loss:.4f} "
                f"val_loss={fin.val_loss:.4f} val_accuracy={fin.val_accuracy:.4f}")
            name = f"model_{variant}_seed{res.seed}.json"
            _write_text(os.path.join(out, name), json.dumps(model_to_dict(res.model), indent=1) + "\n")
        all_results.extend(results)
        summaries[variant] = summarize(results)
    _write_text(os.path.join(out, "metrics.csv"), metrics_csv(all_results))
    rows = []
    for variant, s in summaries.items():
        rows.append([variant, s.n_params, *map(_num, s.train_loss + s.val_loss + s.val_accuracy)])
    _write_csv(
        os.path.join(out, "summary.csv"),
        ["model", "n_params", "train_loss_mean", "train_loss_std", "val_loss_mean", "val_loss_std",
         "val_accuracy_mean", "val_accuracy_std"],
        rows,
    )
    return summaries


def line_points(gzz: float, resolution: int) -> list:
    span = SIMPLEX_TOTAL - gzz
    points = []
    for k in range(resolution):
        a = span * k / (resolution - 1)
        points.append(CouplingPoint(a, max(span - a, 0.0), gzz))
    return points


def grid_points(resolution: int) -> list:
    """Triangular grid with ``resolution`` points per edge, ``r(r+1)/2`` in total."""
    m = resolution - 1
    points = []
    for i in range(resolution):
        for j in range(resolution - i):
            a = SIMPLEX_TOTAL * i / m
            b = SIMPLEX_TOTAL * j / m
            points.append(CouplingPoint(a, b, max(SIMPLEX_TOTAL - a - b, 0.0)))
    return points


def cmd_sweep_line(cfg: ExperimentConfig, model_path: str, out: str) -> str:
    model = _load_model(model_path)
    _prepare_out(out, cfg)
    points = line_points(cfg.gzz, cfg.line_resolution)
    probs = _evaluate_points(model, points)
    rows = [[_num(p.g_zxz), _num(p.g_x), *map(_num, pr)] for p, pr in zip(points, probs)]
    path = os.path.join(out, "sweep_line.csv")
    _write_csv(path, ["g_zxz", "g_x", "P(Trivial)", "P(SB)", "P(SPT)", "P(fail)"], rows)
    return path


def cmd_sweep_grid(cfg: ExperimentConfig, model_path: str, out: str) -> str:
    model = _load_model(model_path)
    _prepare_out(out, cfg)
    points = grid_points(cfg.grid_resolution)
    probs = _evaluate_points(model, points)
    rows = []
    for p, pr in zip(points, probs):
        cls = PhaseLabel(int(np.argmax(pr))).bits
        rows.append([_num(p.g_zxz), _num(p.g_x), _num(p.g_zz), cls, *map(_num, pr)])
    path = os.path.join(out, "sweep_grid.csv")
    _write_csv(path, ["g_zxz", "g_x", "g_zz", "predicted_class", "p00", "p01", "p10", "p11"], rows)
    return path


# --- argument parsing -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aiqt", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key=value config file (defaults if omitted)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the dataset seed or the first training seed")
        return p

    common(sub.add_parser("gen-dataset", help="sample couplings and solve ground states"))
    p = common(sub.add_parser("train", help="train one model variant or all of them"))
    p.add_argument("--dataset", required=True, help="dataset JSON from gen-dataset")
    p = common(sub.add_parser("sweep-line", help="class probabilities along g_zxz + g_x = 4 - g_zz"))
    p.add_argument("--model", required=True, help="model JSON written by train")
    p.add_argument("--gzz", type=float, help="fixed g_zz (default 0.1)")
    p.add_argument("--resolution", type=int, help="number of points on the line")
    p = common(sub.add_parser("sweep-grid", help="predicted phase on a triangular simplex grid"))
    p.add_argument("--model", required=True, help="model JSON written by train")
    p.add_argument("--resolution", type=int, help="points per simplex edge")
    return parser


def resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    updates = {}
    if args.seed is not None:
        updates["dataset_seed" if args.command == "gen-dataset" else "first_seed"] = args.seed
    if getattr(args, "gzz", None) is not None:
        updates["gzz"] = args.gzz
    if getattr(args, "resolution", None) is not None:
        key = "line_resolution" if args.command == "sweep-line" else "grid_resolution"
        updates[key] = args.resolution
    return dataclasses.replace(cfg, **updates).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "gen-dataset":
            cmd_gen_dataset(cfg, args.out)
        elif args.command == "train":
            cmd_train(cfg, args.dataset, args.out)
        elif args.command == "sweep-line":
            print(cmd_sweep_line(cfg, args.model, args.out))
        else:
            print(cmd_sweep_grid(cfg, args.model, args.out))
    except (ConfigError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
