"""AIQT + QNN model assembly and the exact forward pass.

A model is an optional transform block (interpolating QFT, fixed QFT or
Trotterized TFIM evolution) followed by the Gell-Mann QNN, read out as the
marginal distribution of the target qubits.

Trainable parameters are laid out as one flat vector: the global transform
parameters first (``theta``; ``theta, J, g`` for time evolution; nothing for
the plain QNN or the fixed QFT), then ``phi`` row by row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from . import _kernels as _k
from . import qnn
from .fusion import DiagonalBlock, compile_plan
from .statevec import (
    DTYPE,
    PureState,
    _check_targets,
    apply_gate_inplace,
    as_batch,
    marginal_probabilities_array,
)
from .transforms import AiqtSpec, QftInterp, TfimTimeEvolution, aiqt_ops

VARIANTS = ("qnn", "qft", "aiqt-qft", "aiqt-te")


class TapeOp(NamedTuple):
    gate: object
    partials: tuple  # ((flat_index, d_angle/d_param), ...)
    layer: Optional[int]  # QNN row for TwoQubitUnitary gates


@dataclass
class ModelParams:
    n_qubits: int
    phi: np.ndarray
    aiqt: Optional[AiqtSpec] = None
    aiqt_trainable: bool = True
    target_qubits: tuple = (0, 1)

    def __post_init__(self):
        if self.n_qubits < 2:
            raise ValueError(f"model needs at least 2 qubits, got {self.n_qubits}")
        self.phi = qnn.check_params(self.phi).copy()
        self.target_qubits = _check_targets(self.target_qubits, self.n_qubits)

    @property
    def variant(self) -> str:
        if self.aiqt is None:
            return "qnn"
        if isinstance(self.aiqt, QftInterp):
            return "aiqt-qft" if self.aiqt_trainable else "qft"
        return "aiqt-te" if self.aiqt_trainable else "te"

    @property
    def n_layers(self) -> int:
        return self.phi.shape[0]

    @property
    def global_names(self) -> tuple:
        if self.aiqt is None or not self.aiqt_trainable:
            return ()
        if isinstance(self.aiqt, QftInterp):
            return ("theta",)
        return ("theta", "J", "g")

    @property
    def n_params(self) -> int:
        return len(self.global_names) + self.phi.size

    def to_vector(self) -> np.ndarray:
        head = [getattr(self.aiqt, name) for name in self.global_names]
        return np.concatenate([np.asarray(head, dtype=float), self.phi.ravel()])

    def with_vector(self, vec) -> "ModelParams":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.n_params,):
            raise ValueError(f"parameter vector must have shape ({self.n_params},), got {vec.shape}")
        k = len(self.global_names)
        aiqt = self.aiqt
        if k:
            aiqt = replace(aiqt, **{name: float(vec[i]) for i, name in enumerate(self.global_names)})
        return replace(self, aiqt=aiqt, phi=vec[k:].reshape(self.phi.shape))

    def tape(self) -> list:
        """Gate sequence with, per gate, how its angle depends on the flat parameters."""
        ops = []
        index = {name: i for i, name in enumerate(self.global_names)}
        if self.aiqt is not None:
            for gate, partials in aiqt_ops(self.aiqt, self.n_qubits):
                mapped = tuple((index[name], c) for name, c in partials if name in index)
                ops.append(TapeOp(gate, mapped, None))
        for gate, ell in qnn.qnn_ops(self.n_qubits, self.phi):
            ops.append(TapeOp(gate, (), ell))
        return ops

    @property
    def n_outcomes(self) -> int:
        return 2 ** len(self.target_qubits)


def make_model(
    variant: str,
    n_qubits: int,
    n_layers: int = 3,
    rng: Optional[np.random.Generator] = None,
    theta_init: Optional[float] = None,
    J_init: float = 1.0,
    g_init: float = 1.0,
    n_steps: int = 10,
    target_qubits=(0, 1),
    phi_scale: float = 0.1,
) -> ModelParams:
    """Build a freshly initialized model of the given variant.

    ``phi`` is drawn uniformly from ``[-phi_scale, phi_scale]`` using ``rng``.
    ``theta_init`` defaults to ``2*pi`` for the QFT variants and ``0.2*pi``
    for time evolution.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown model variant {variant!r}; expected one of {VARIANTS}")
    rng = rng if rng is not None else np.random.default_rng(0)
    phi = qnn.init_params(n_layers, rng, phi_scale)
    if variant == "qnn":
        aiqt, trainable = None, False
    elif variant == "qft":
        aiqt, trainable = QftInterp(2 * math.pi), False
    elif variant == "aiqt-qft":
        theta = 2 * math.pi if theta_init is None else theta_init
        aiqt, trainable = QftInterp(theta), True
    else:
        theta = 2 * math.pi * 0.1 if theta_init is None else theta_init
        aiqt, trainable = TfimTimeEvolution(theta, J_init, g_init, n_steps), True
    return ModelParams(n_qubits, phi, aiqt, trainable, tuple(target_qubits))


def outcome_index(n_qubits: int, target_qubits) -> np.ndarray:
    """Outcome label of every basis index under the given readout qubits."""
    idx = np.arange(2**n_qubits)
    out = np.zeros_like(idx)
    for t in target_qubits:
        out = (out << 1) | ((idx >> (n_qubits - 1 - t)) & 1)
    return out


def plan(model: ModelParams) -> list:
    return compile_plan(model.tape(), model.n_qubits)


def run_plan(psi: np.ndarray, plan_ops, n_qubits: int) -> None:
    """Execute a compiled plan on ``psi`` in place."""
    rows = as_batch(psi)
    for op in plan_ops:
        if isinstance(op, DiagonalBlock):
            _k.apply_diagonal(rows, op.phases)
        else:
            apply_gate_inplace(rows, op.gate, n_qubits)


def run_tape(model: ModelParams, states: np.ndarray, plan_ops=None) -> np.ndarray:
    psi = np.array(states, dtype=DTYPE, order="C", copy=True)
    if psi.shape[-1] != 2**model.n_qubits:
        raise ValueError(
            f"state dimension {psi.shape[-1]} does not match a {model.n_qubits}-qubit model"
        )
    run_plan(psi, plan(model) if plan_ops is None else plan_ops, model.n_qubits)
    return psi


def forward_batch(model: ModelParams, states: np.ndarray) -> np.ndarray:
    """Outcome probabilities, shape ``(batch, 2**N_tq)``."""
    states = np.atleast_2d(states)
    psi = run_tape(model, states)
    return marginal_probabilities_array(psi, model.n_qubits, model.target_qubits)


def forward(model: ModelParams, state) -> np.ndarray:
    if isinstance(state, PureState):
        if state.n_qubits != model.n_qubits:
            raise ValueError(f"state has {state.n_qubits} qubits, model expects {model.n_qubits}")
        state = state.amplitudes
    return forward_batch(model, np.asarray(state)[None, :])[0]


def model_to_dict(model: ModelParams) -> dict:
    aiqt = model.aiqt
    return {
        "variant": model.variant,
        "n_qubits": model.n_qubits,
        "target_qubits": list(model.target_qubits),
        "theta": getattr(aiqt, "theta", None),
        "J": getattr(aiqt, "J", None),
        "g": getattr(aiqt, "g", None),
        "n_steps": getattr(aiqt, "n_steps", None),
        "phi": model.phi.tolist(),
    }


def model_from_dict(data: dict) -> ModelParams:
    try:
        variant = data["variant"]
        phi = np.asarray(data["phi"], dtype=float)
        n_qubits = int(data["n_qubits"])
        targets = tuple(data.get("target_qubits", (0, 1)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed model description: {exc}") from exc
    if variant == "qnn":
        aiqt, trainable = None, False
    elif variant in ("qft", "aiqt-qft"):
        aiqt, trainable = QftInterp(float(data["theta"])), variant == "aiqt-qft"
    elif variant in ("aiqt-te", "te"):
        aiqt = TfimTimeEvolution(
            float(data["theta"]), float(data["J"]), float(data["g"]), int(data["n_steps"])
        )
        trainable = variant == "aiqt-te"
    else:
        raise ValueError(f"unknown model variant {variant!r}")
    return ModelParams(n_qubits, phi, aiqt, trainable, targets)
