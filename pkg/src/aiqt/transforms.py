"""Circuit builders for the interpolating transforms.

Two families are provided:

* ``QftInterp(theta)``: the QFT circuit with every controlled rotation angle
  ``2*pi/2**k`` replaced by ``theta/2**k``. ``theta = 0`` gives the Hadamard
  transform, ``theta = 2*pi`` the exact QFT (bit-reversal swaps included).
* ``TfimTimeEvolution(theta, J, g, n_steps)``: first-order Trotterized
  ``exp(-i theta H)`` for ``H = -J sum Z_i Z_{i+1} - g sum X_i`` on an open chain.

Besides the plain ``build_*`` functions, each family has a ``*_ops`` generator
that pairs every gate with the partial derivatives of its rotation angle with
respect to the global parameters. The gradient code consumes those.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Union

import numpy as np
import scipy.linalg

from .statevec import CNOT, RX, RZ, Circuit, ControlledPhase, Hadamard, Swap

MAX_EXACT_TE_QUBITS = 6


@dataclass(frozen=True)
class QftInterp:
    theta: float = 2 * math.pi

    def __post_init__(self):
        if not math.isfinite(self.theta):
            raise ValueError(f"theta must be finite, got {self.theta}")


@dataclass(frozen=True)
class TfimTimeEvolution:
    theta: float
    J: float = 1.0
    g: float = 1.0
    n_steps: int = 10

    def __post_init__(self):
        for name in ("theta", "J", "g"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")


AiqtSpec = Union[QftInterp, TfimTimeEvolution]


def qft_interp_ops(n_qubits: int, theta: float) -> Iterator[tuple]:
    """Yield ``(gate, partials)`` for the interpolating QFT.

    Qubit ``j`` receives a Hadamard followed by controlled phases from each
    later qubit ``j + d`` with angle ``theta / 2**(d + 1)``, i.e. ``CR_k`` with
    ``k = d + 1``; at ``theta = 2*pi`` the nearest neighbour gets ``pi/2``.
    """
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    for j in range(n_qubits):
        yield Hadamard(j), ()
        for d in range(1, n_qubits - j):
            scale = 1.0 / 2 ** (d + 1)
            yield ControlledPhase(j + d, j, theta * scale), (("theta", scale),)
    for j in range(n_qubits // 2):
        yield Swap(j, n_qubits - 1 - j), ()


def build_qft_interp(n_qubits: int, theta: float) -> Circuit:
    return Circuit(n_qubits, [g for g, _ in qft_interp_ops(n_qubits, theta)])


def build_fixed_qft(n_qubits: int) -> Circuit:
    return build_qft_interp(n_qubits, 2 * math.pi)


def tfim_te_ops(n_qubits: int, theta: float, J: float, g: float, n_steps: int) -> Iterator[tuple]:
    """Yield ``(gate, partials)`` for the Trotterized TFIM evolution.

    Each step: ``RX(-2 g dt)`` on every qubit, then ``CNOT, RZ(-2 J dt), CNOT``
    on every bond in ascending order, with ``dt = theta / n_steps``.
    """
    if n_qubits < 1:
        raise ValueError(f"n_qubits must be >= 1, got {n_qubits}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    dt = theta / n_steps
    rx_angle = -2.0 * g * dt
    rz_angle = -2.0 * J * dt
    rx_partials = (("theta", -2.0 * g / n_steps), ("g", -2.0 * theta / n_steps))
    rz_partials = (("theta", -2.0 * J / n_steps), ("J", -2.0 * theta / n_steps))
    for _ in range(n_steps):
        for q in range(n_qubits):
            yield RX(q, rx_angle), rx_partials
        for i in range(n_qubits - 1):
            yield CNOT(i, i + 1), ()
            yield RZ(i + 1, rz_angle), rz_partials
            yield CNOT(i, i + 1), ()


def build_tfim_te(n_qubits: int, theta: float, J: float, g: float, n_steps: int = 10) -> Circuit:
    return Circuit(n_qubits, [gate for gate, _ in tfim_te_ops(n_qubits, theta, J, g, n_steps)])


def aiqt_ops(spec: AiqtSpec, n_qubits: int) -> Iterator[tuple]:
    if isinstance(spec, QftInterp):
        return qft_interp_ops(n_qubits, spec.theta)
    if isinstance(spec, TfimTimeEvolution):
        return tfim_te_ops(n_qubits, spec.theta, spec.J, spec.g, spec.n_steps)
    raise TypeError(f"unknown AIQT variant {type(spec).__name__}")


def build_aiqt(spec: AiqtSpec, n_qubits: int) -> Circuit:
    return Circuit(n_qubits, [g for g, _ in aiqt_ops(spec, n_qubits)])


# --- dense oracles ----------------------------------------------------------

_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.diag([1.0, -1.0])


def _site_op(n: int, ops: dict) -> np.ndarray:
    out = np.ones((1, 1))
    for q in range(n):
        out = np.kron(out, ops.get(q, np.eye(2)))
    return out


def tfim_hamiltonian_dense(n_qubits: int, J: float, g: float) -> np.ndarray:
    dim = 2**n_qubits
    h = np.zeros((dim, dim))
    for i in range(n_qubits - 1):
        h -= J * _site_op(n_qubits, {i: _Z, i + 1: _Z})
    for i in range(n_qubits):
        h -= g * _site_op(n_qubits, {i: _X})
    return h


def exact_te_unitary(n_qubits: int, theta: float, J: float, g: float) -> np.ndarray:
    """``expm(-i theta H_TFIM)`` from the dense Hamiltonian (test oracle)."""
    if n_qubits > MAX_EXACT_TE_QUBITS:
        raise ValueError(f"exact_te_unitary limited to {MAX_EXACT_TE_QUBITS} qubits, got {n_qubits}")
    return scipy.linalg.expm(-1j * theta * tfim_hamiltonian_dense(n_qubits, J, g))
