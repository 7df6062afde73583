"""Dense state-vector simulation.

Bit ordering: qubit 0 is the most significant bit of the basis index, so the
basis state ``|q0 q1 ... q_{n-1}>`` sits at index ``sum(q_k << (n-1-k))``.
Every module in the package (QFT bit reversal, dataset amplitude encoding,
target-qubit readout) uses this convention.

Kernels (compiled, see ``_kernels``) act in place on arrays of shape
``(batch, 2**n)``, one strided amplitude pair (or quadruple) at a time. Dense matrices are
only built by :func:`circuit_to_dense_unitary`, which exists as a test oracle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import _kernels as _k

DTYPE = np.complex128
_SQRT1_2 = 1.0 / np.sqrt(2.0)
MAX_DENSE_QUBITS = 12


@dataclass
class PureState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        amps = np.asarray(self.amplitudes, dtype=DTYPE)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {amps.shape}"
            )
        self.amplitudes = amps

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "PureState":
        return PureState(self.n_qubits, self.amplitudes.copy())


# --- gate definitions -------------------------------------------------------


@dataclass(frozen=True)
class Hadamard:
    q: int

    @property
    def qubits(self):
        return (self.q,)


@dataclass(frozen=True)
class ControlledPhase:
    """diag(1, 1, 1, e^{i angle}) on (control, target)."""

    control: int
    target: int
    angle: float

    @property
    def qubits(self):
        return (self.control, self.target)


@dataclass(frozen=True)
class RX:
    """exp(-i angle X / 2)."""

    q: int
    angle: float

    @property
    def qubits(self):
        return (self.q,)


@dataclass(frozen=True)
class RZ:
    """exp(-i angle Z / 2)."""

    q: int
    angle: float

    @property
    def qubits(self):
        return (self.q,)


@dataclass(frozen=True)
class CNOT:
    control: int
    target: int

    @property
    def qubits(self):
        return (self.control, self.target)


@dataclass(frozen=True)
class Swap:
    q1: int
    q2: int

    @property
    def qubits(self):
        return (self.q1, self.q2)


@dataclass(frozen=True, eq=False)
class TwoQubitUnitary:
    """Arbitrary 4x4 unitary; row/column index is ``2*bit(q1) + bit(q2)``."""

    q1: int
    q2: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=DTYPE)
        if m.shape != (4, 4):
            raise ValueError(f"TwoQubitUnitary needs a 4x4 matrix, got {m.shape}")
        err = np.linalg.norm(m.conj().T @ m - np.eye(4))
        if err >= 1e-10:
            raise ValueError(f"TwoQubitUnitary matrix is not unitary (|U^dag U - I|_F = {err:.3e})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def qubits(self):
        return (self.q1, self.q2)


GateOp = Union[Hadamard, ControlledPhase, RX, RZ, CNOT, Swap, TwoQubitUnitary]


def _check_gate(gate: GateOp, n_qubits: int) -> None:
    qs = gate.qubits
    for q in qs:
        if not (0 <= q < n_qubits):
            raise ValueError(f"{type(gate).__name__}: qubit index {q} out of range for {n_qubits} qubits")
    if len(qs) == 2 and qs[0] == qs[1]:
        raise ValueError(f"{type(gate).__name__}: both qubit indices are {qs[0]}")


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple = ()

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")
        gates = tuple(self.gates)
        for g in gates:
            _check_gate(g, self.n_qubits)
        object.__setattr__(self, "gates", gates)

    def __len__(self):
        return len(self.gates)

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate circuits on different qubit counts")
        return Circuit(self.n_qubits, self.gates + other.gates)


# --- in-place application ---------------------------------------------------


def stride(q: int, n: int) -> int:
    """Basis-index stride of qubit ``q`` (qubit 0 is the most significant bit)."""
    return 1 << (n - 1 - q)


def as_batch(psi: np.ndarray) -> np.ndarray:
    """2-D view ``(batch, dim)`` of a C-contiguous amplitude array."""
    if not psi.flags.c_contiguous:
        raise ValueError("amplitude arrays must be C-contiguous")
    return psi.reshape(-1, psi.shape[-1])


def apply_gate_inplace(psi: np.ndarray, gate: GateOp, n: int, dagger: bool = False) -> None:
    """Apply ``gate`` (or its adjoint) to every row of ``psi`` in place.

    ``psi`` must be C-contiguous with shape ``(batch, 2**n)`` or ``(2**n,)``.
    No validation is done here; use :func:`apply_gate` for checked calls.
    """
    psi = as_batch(psi)
    sign = -1.0 if dagger else 1.0
    if isinstance(gate, ControlledPhase):
        _k.apply_cphase(psi, stride(gate.control, n), stride(gate.target, n),
                        np.exp(1j * sign * gate.angle))
    elif isinstance(gate, Hadamard):
        h = _SQRT1_2 + 0j
        _k.apply_1q(psi, stride(gate.q, n), h, h, h, -h)
    elif isinstance(gate, RX):
        c, s = np.cos(gate.angle / 2), -1j * sign * np.sin(gate.angle / 2)
        _k.apply_1q(psi, stride(gate.q, n), c + 0j, s, s, c + 0j)
    elif isinstance(gate, RZ):
        p = np.exp(-0.5j * sign * gate.angle)
        _k.apply_phase_on_one(psi, stride(gate.q, n), p, p.conjugate())
    elif isinstance(gate, CNOT):
        _k.apply_cnot(psi, stride(gate.control, n), stride(gate.target, n))
    elif isinstance(gate, Swap):
        _k.apply_swap(psi, stride(gate.q1, n), stride(gate.q2, n))
    elif isinstance(gate, TwoQubitUnitary):
        m = gate.matrix.conj().T.copy() if dagger else gate.matrix
        _k.apply_2q(psi, stride(gate.q1, n), stride(gate.q2, n), m)
    else:
        raise TypeError(f"unknown gate type {type(gate).__name__}")


# --- public operations ------------------------------------------------------


def basis_state(n_qubits: int, index: int) -> PureState:
    dim = 2**n_qubits
    if not (0 <= index < dim):
        raise ValueError(f"basis index {index} out of range [0, {dim}) for {n_qubits} qubits")
    amps = np.zeros(dim, dtype=DTYPE)
    amps[index] = 1.0
    return PureState(n_qubits, amps)


def apply_gate(state: PureState, gate: GateOp) -> PureState:
    _check_gate(gate, state.n_qubits)
    out = state.amplitudes.copy()
    apply_gate_inplace(out, gate, state.n_qubits)
    return PureState(state.n_qubits, out)


def apply_circuit_array(psi: np.ndarray, circuit: Circuit) -> np.ndarray:
    """Apply ``circuit`` to a (batch of) raw amplitude arrays; returns a new array."""
    out = np.array(psi, dtype=DTYPE, order="C", copy=True)
    if out.shape[-1] != 2**circuit.n_qubits:
        raise ValueError(
            f"state dimension {out.shape[-1]} does not match circuit on {circuit.n_qubits} qubits"
        )
    for g in circuit.gates:
        apply_gate_inplace(out, g, circuit.n_qubits)
    return out


def apply_circuit(state: PureState, circuit: Circuit) -> PureState:
    if circuit.n_qubits != state.n_qubits:
        raise ValueError(
            f"circuit acts on {circuit.n_qubits} qubits but state has {state.n_qubits}"
        )
    return PureState(state.n_qubits, apply_circuit_array(state.amplitudes, circuit))


def circuit_to_dense_unitary(circuit: Circuit) -> np.ndarray:
    n = circuit.n_qubits
    if n > MAX_DENSE_QUBITS:
        raise ValueError(f"dense unitary limited to {MAX_DENSE_QUBITS} qubits, got {n}")
    # row j of the batch is basis state j, so the result rows are the columns of U
    cols = apply_circuit_array(np.eye(2**n, dtype=DTYPE), circuit)
    return cols.T.copy()


def _marginal(psi: np.ndarray, n: int, targets: tuple) -> np.ndarray:
    # targets sorted ascending
    p = (psi.real**2 + psi.imag**2).reshape((-1,) + (2,) * n)
    rest = tuple(1 + q for q in range(n) if q not in targets)
    p = p.sum(axis=rest)
    return p.reshape(p.shape[0], -1)


def _check_targets(targets: Sequence[int], n: int) -> tuple:
    targets = tuple(int(t) for t in targets)
    if not targets:
        raise ValueError("at least one target qubit is required")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate target qubits in {targets}")
    for t in targets:
        if not (0 <= t < n):
            raise ValueError(f"target qubit {t} out of range for {n} qubits")
    return targets


def marginal_probabilities_array(psi: np.ndarray, n: int, targets: Sequence[int]) -> np.ndarray:
    """Batched marginals: ``(batch, 2**n)`` -> ``(batch, 2**len(targets))``.

    Outcome index ``i`` spells the target bits with ``targets[0]`` as the most
    significant bit.
    """
    targets = _check_targets(targets, n)
    order = tuple(sorted(targets))
    p = _marginal(psi, n, order)
    if order != targets:
        k = len(targets)
        perm = [order.index(t) for t in targets]
        p = p.reshape((-1,) + (2,) * k).transpose((0,) + tuple(1 + i for i in perm))
        p = p.reshape(p.shape[0], -1)
    return p


def marginal_probabilities(state: PureState, target_qubits: Sequence[int]) -> np.ndarray:
    return marginal_probabilities_array(state.amplitudes, state.n_qubits, target_qubits)[0]
