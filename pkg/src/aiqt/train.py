"""Training loop: mini-batch Adam on the batch-mean cross entropy.

Every run is fully determined by its seed: the seed's generator draws the QNN
initialization first and then the per-epoch shuffles, so different model
variants trained with the same seed start from the same ``phi``.
"""
from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .diff import GradientVector, cross_entropy_batch, loss_and_gradient_vector
from .model import VARIANTS, ModelParams, forward, forward_batch, make_model
from .spinchain import to_arrays

METRICS_HEADER = ("epoch", "train_loss", "val_loss", "val_accuracy", "theta", "J", "g", "seed", "model")


@dataclass
class TrainConfig:
    learning_rate: float = 5e-3
    batch_size: int = 32
    epochs: int = 100
    seeds: tuple = tuple(range(10))
    layers: int = 3
    aiqt_variant: str = "aiqt-qft"
    theta_init: Optional[float] = None
    J_init: float = 1.0
    g_init: float = 1.0
    n_steps: int = 10
    target_qubits: tuple = (0, 1)
    phi_scale: float = 0.1
    check_normalization: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.layers < 1 or self.n_steps < 1:
            raise ValueError("batch_size, layers and n_steps must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if self.aiqt_variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.aiqt_variant!r}; expected one of {VARIANTS}")
        self.seeds = tuple(int(s) for s in self.seeds)


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n_params: int, **kw) -> "AdamState":
        return cls(np.zeros(n_params), np.zeros(n_params), **kw)


def adam_step(state: AdamState, params: ModelParams, grad, lr: float):
    """One bias-corrected Adam update; returns ``(new_state, new_params)``."""
    g = grad.to_vector() if isinstance(grad, GradientVector) else np.asarray(grad, dtype=float)
    x = params.to_vector()
    if g.shape != x.shape or state.m.shape != x.shape:
        raise ValueError(f"shape mismatch: params {x.shape}, grad {g.shape}, moments {state.m.shape}")
    t = state.step + 1
    m = state.beta1 * state.m + (1 - state.beta1) * g
    v = state.beta2 * state.v + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1**t)
    v_hat = v / (1 - state.beta2**t)
    x = x - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, m=m, v=v, step=t), params.with_vector(x)


def cross_entropy(probs, one_hot) -> float:
    """``-sum_i y_i log max(p_i, 1e-12)`` for one sample."""
    probs = np.asarray(probs, dtype=float)
    one_hot = np.asarray(one_hot, dtype=float)
    if one_hot.shape != probs.shape or np.any(one_hot < 0) or abs(one_hot.sum() - 1) > 1e-12:
        raise ValueError(f"malformed label vector {one_hot!r}")
    return cross_entropy_batch(probs[None, :], one_hot[None, :])


@dataclass
class MetricsRecord:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    theta: Optional[float]
    J: Optional[float]
    g: Optional[float]
    seed: int
    model: str
    wall_time: float = 0.0
    train_accuracy: float = float("nan")

    def csv_row(self) -> list:
        def num(x):
            return "" if x is None else repr(float(x))

        return [str(self.epoch), num(self.train_loss), num(self.val_loss), num(self.val_accuracy),
                num(self.theta), num(self.J), num(self.g), str(self.seed), self.model]


@dataclass
class RunResult:
    seed: int
    variant: str
    records: list
    model: ModelParams

    @property
    def final(self) -> MetricsRecord:
        return self.records[-1]


def evaluate(model: ModelParams, states, one_hot, labels, chunk: int = 256, check: bool = False):
    """Mean loss and accuracy over a split (exact probabilities)."""
    probs = np.concatenate(
        [forward_batch(model, states[i : i + chunk]) for i in range(0, len(states), chunk)]
    )
    if check and np.max(np.abs(probs.sum(axis=1) - 1.0)) > 1e-10:
        raise AssertionError("outcome probabilities do not sum to one")
    loss = cross_entropy_batch(probs, one_hot)
    acc = float(np.mean(np.argmax(probs, axis=1) == labels))
    return loss, acc


def _record(model, epoch, seed, train_arr, val_arr, t0, check):
    tr_loss, tr_acc = evaluate(model, *train_arr, check=check)
    va_loss, va_acc = evaluate(model, *val_arr, check=check)
    trainable = model.global_names
    aiqt = model.aiqt
    return MetricsRecord(
        epoch=epoch,
        train_loss=tr_loss,
        val_loss=va_loss,
        val_accuracy=va_acc,
        theta=aiqt.theta if aiqt is not None else None,
        J=aiqt.J if "J" in trainable else None,
        g=aiqt.g if "g" in trainable else None,
        seed=seed,
        model=model.variant,
        wall_time=time.perf_counter() - t0,
        train_accuracy=tr_acc,
    )


def train_one(config: TrainConfig, train, val, seed: int, variant: Optional[str] = None,
              progress=None) -> RunResult:
    """Train a single model for one seed.

    ``train``/``val`` are sequences of labeled samples or ``(states, one_hot,
    labels)`` array triples. Record 0 is the evaluation before any update.
    """
    variant = variant or config.aiqt_variant
    train_arr = train if isinstance(train, tuple) else to_arrays(train)
    val_arr = val if isinstance(val, tuple) else to_arrays(val)
    if len(train_arr[0]) == 0 or len(val_arr[0]) == 0:
        raise ValueError("train and validation splits must be non-empty")
    n_qubits = int(round(math.log2(train_arr[0].shape[1])))
    rng = np.random.default_rng(seed)
    model = make_model(
        variant, n_qubits, config.layers, rng,
        theta_init=config.theta_init, J_init=config.J_init, g_init=config.g_init,
        n_steps=config.n_steps, target_qubits=config.target_qubits, phi_scale=config.phi_scale,
    )
    adam = AdamState.zeros(model.n_params)
    t0 = time.perf_counter()
    records = [_record(model, 0, seed, train_arr, val_arr, t0, config.check_normalization)]
    states, one_hot, _ = train_arr
    n_train = len(states)
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n_train)
        for start in range(0, n_train, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grad = loss_and_gradient_vector(model, states[idx], one_hot[idx])
            adam, model = adam_step(adam, model, grad, config.learning_rate)
        records.append(_record(model, epoch, seed, train_arr, val_arr, t0, config.check_normalization))
        if progress is not None:
            progress(records[-1])
    return RunResult(seed, model.variant, records, model)


def run_training(config: TrainConfig, train, val, variant: Optional[str] = None, progress=None) -> list:
    """One :class:`RunResult` per configured seed."""
    train_arr = train if isinstance(train, tuple) else to_arrays(train)
    val_arr = val if isinstance(val, tuple) else to_arrays(val)
    return [train_one(config, train_arr, val_arr, s, variant, progress) for s in config.seeds]


@dataclass
class Summary:
    variant: str
    n_params: int
    train_loss: tuple  # (mean, std)
    val_loss: tuple
    val_accuracy: tuple
    per_seed_accuracy: list = field(default_factory=list)


def summarize(results: Sequence[RunResult]) -> Summary:
    finals = [r.final for r in results]

    def ms(key):
        vals = np.array([getattr(f, key) for f in finals])
        return float(vals.mean()), float(vals.std())

    return Summary(
        variant=results[0].variant,
        n_params=results[0].model.n_params,
        train_loss=ms("train_loss"),
        val_loss=ms("val_loss"),
        val_accuracy=ms("val_accuracy"),
        per_seed_accuracy=[f.val_accuracy for f in finals],
    )


def evaluate_baselines(config: TrainConfig, train, val, variants=VARIANTS, progress=None) -> dict:
    """Train every variant under the same protocol; ``{variant: (results, Summary)}``."""
    train_arr = train if isinstance(train, tuple) else to_arrays(train)
    val_arr = val if isinstance(val, tuple) else to_arrays(val)
    out = {}
    for variant in variants:
        results = run_training(config, train_arr, val_arr, variant, progress)
        out[variant] = (results, summarize(results))
    return out


def metrics_csv(results: Sequence[RunResult], include_initial: bool = False) -> str:
    """CSV text, one row per (epoch, seed, model); epoch 0 only if requested."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(METRICS_HEADER)
    for res in results:
        for rec in res.records:
            if rec.epoch == 0 and not include_initial:
                continue
            writer.writerow(rec.csv_row())
    return buf.getvalue()


def predict(model: ModelParams, state) -> np.ndarray:
    return forward(model, state)
