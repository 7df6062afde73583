"""Exact gradients of the cross-entropy loss by adjoint (reverse-mode) passes.

For an output state ``psi`` and loss ``L(p)`` with ``p_i = <psi|P_i|psi>``, the
sensitivity vector is ``lam = sum_i dL/dp_i P_i psi`` and for a gate ``U(a)``
at position ``k``

    dL/da = 2 Re <lam_k| dU/da |psi_{k-1}>,

where ``lam_k`` is ``lam`` pulled back through the gates after ``k``. The
backward sweep un-applies gates to recover ``psi_{k-1}`` instead of caching
every intermediate state.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .fusion import DiagonalBlock
from .model import ModelParams, forward_batch, outcome_index, plan, run_tape
from .qnn import gellmann_basis, layer_eigh
from . import _kernels as _k
from .statevec import (
    RX,
    RZ,
    ControlledPhase,
    TwoQubitUnitary,
    apply_gate_inplace,
    marginal_probabilities_array,
    stride,
)

PROB_FLOOR = 1e-12


@dataclass
class GradientVector:
    d_phi: np.ndarray
    d_theta: Optional[float] = None
    d_J: Optional[float] = None
    d_g: Optional[float] = None

    @classmethod
    def from_vector(cls, model: ModelParams, vec: np.ndarray) -> "GradientVector":
        k = len(model.global_names)
        head = dict(zip(model.global_names, vec[:k]))
        return cls(
            d_phi=np.asarray(vec[k:]).reshape(model.phi.shape),
            d_theta=head.get("theta"),
            d_J=head.get("J"),
            d_g=head.get("g"),
        )

    def to_vector(self) -> np.ndarray:
        head = [x for x in (self.d_theta, self.d_J, self.d_g) if x is not None]
        return np.concatenate([np.asarray(head, dtype=float), self.d_phi.ravel()])


# --- batch plumbing ---------------------------------------------------------


def batch_arrays(batch):
    """Accept ``(states, one_hot)`` arrays or a sequence of labeled samples."""
    if isinstance(batch, tuple) and len(batch) == 2:
        states, one_hot = batch
    else:
        states = np.array([s.state.amplitudes for s in batch])
        one_hot = np.array([s.one_hot for s in batch])
    states = np.atleast_2d(np.asarray(states))
    one_hot = np.atleast_2d(np.asarray(one_hot, dtype=float))
    if states.shape[0] == 0:
        raise ValueError("batch is empty")
    if one_hot.shape[0] != states.shape[0]:
        raise ValueError(f"{states.shape[0]} states but {one_hot.shape[0]} labels")
    return states, one_hot


def cross_entropy_batch(probs: np.ndarray, one_hot: np.ndarray) -> float:
    """Batch-mean cross entropy with the probability floor inside the log."""
    logp = np.log(np.maximum(probs, PROB_FLOOR))
    return float(-np.sum(one_hot * logp) / probs.shape[0])


def batch_loss(model: ModelParams, batch) -> float:
    states, one_hot = batch_arrays(batch)
    _check_dims(model, states, one_hot)
    return cross_entropy_batch(forward_batch(model, states), one_hot)


def _check_dims(model, states, one_hot):
    if states.shape[1] != 2**model.n_qubits:
        raise ValueError(
            f"sample states have dimension {states.shape[1]}, model expects {2**model.n_qubits}"
        )
    if one_hot.shape[1] != model.n_outcomes:
        raise ValueError(f"labels have {one_hot.shape[1]} outcomes, model reads {model.n_outcomes}")


# --- Frechet derivative of exp(-iH) -----------------------------------------


def _check_hermitian(m, name):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got {m.shape}")
    if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10:
        raise ValueError(f"{name} is not Hermitian")
    return m


def _divided_differences(w: np.ndarray) -> np.ndarray:
    """Divided differences of ``x -> exp(-i x)`` on the eigenvalues ``w``.

    Written as ``exp(-i (a+b)/2) * sinc((a-b)/2)`` so that (near-)degenerate
    pairs need no special case.
    """
    a, b = w[:, None], w[None, :]
    return np.exp(-0.5j * (a + b)) * np.sinc((a - b) / (2 * np.pi))


def frechet_exp(H, dH, method: str = "block") -> np.ndarray:
    """Directional derivative of ``exp(-iH)`` along ``dH`` (i.e. ``D exp(-iH)[-i dH]``).

    ``method="block"`` reads the upper-right block of the augmented exponential
    ``expm([[-iH, -i dH], [0, -iH]])``; ``method="eig"`` uses the eigenbasis
    divided-difference formula.
    """
    H = _check_hermitian(H, "H")
    dH = _check_hermitian(dH, "dH")
    d = H.shape[0]
    if method == "block":
        aug = np.zeros((2 * d, 2 * d), dtype=complex)
        aug[:d, :d] = aug[d:, d:] = -1j * H
        aug[:d, d:] = -1j * dH
        return scipy.linalg.expm(aug)[:d, d:]
    if method == "eig":
        w, v = np.linalg.eigh(H)
        e = v.conj().T @ (-1j * dH) @ v
        return v @ (_divided_differences(w) * e) @ v.conj().T
    raise ValueError(f"unknown method {method!r}")


def _layer_frechets(phi_row) -> np.ndarray:
    """``dU/dphi_i`` for all 15 generators of one layer, shape ``(15, 4, 4)``."""
    w, v = layer_eigh(phi_row)
    vh = v.conj().T
    e = vh @ (-1j * gellmann_basis()) @ v
    return v @ (_divided_differences(w) * e) @ vh


# --- per-gate sensitivity contractions --------------------------------------


def _angle_grad(gate, lam, psi, n) -> float:
    """``2 Re <lam|dU/da|psi_before>`` evaluated with ``psi = U psi_before``."""
    if isinstance(gate, ControlledPhase):
        # dU/da = i P11 U
        ov = _k.overlap_11(lam, psi, stride(gate.control, n), stride(gate.target, n))
        return -2.0 * ov.imag
    if isinstance(gate, RX):
        # dU/da = -i/2 X U
        return _k.overlap_x(lam, psi, stride(gate.q, n)).imag
    if isinstance(gate, RZ):
        return _k.overlap_z(lam, psi, stride(gate.q, n)).imag
    raise TypeError(f"no angle derivative for {type(gate).__name__}")


def _pair_environment(gate: TwoQubitUnitary, lam, psi, n) -> np.ndarray:
    """``M[r, c] = sum conj(lam[r]) psi[c]`` over the batch and spectator qubits."""
    return _k.pair_environment(lam, psi, stride(gate.q1, n), stride(gate.q2, n))


# --- public API -------------------------------------------------------------


def _sensitivity(model, psi, probs, one_hot):
    m = probs.shape[0]
    safe = np.maximum(probs, PROB_FLOOR)
    # the floor is a constant below PROB_FLOOR, so its derivative vanishes there
    dldp = np.where(probs > PROB_FLOOR, -one_hot / (m * safe), 0.0)
    out_idx = outcome_index(model.n_qubits, model.target_qubits)
    return dldp[:, out_idx] * psi


def _is_trainable(op) -> bool:
    if isinstance(op, DiagonalBlock):
        return bool(op.generators)
    return bool(op.partials) or op.layer is not None


def loss_and_gradient_vector(
    model: ModelParams, states: np.ndarray, one_hot: np.ndarray, fuse: bool = True
):
    """Batch-mean cross entropy and its gradient as a flat vector.

    ``fuse=False`` walks the raw gate tape instead of the fused plan; both
    give the same result and the unfused path is kept for cross-checking.
    """
    states = np.atleast_2d(states)
    _check_dims(model, states, one_hot)
    n = model.n_qubits
    ops = plan(model) if fuse else model.tape()
    psi = run_tape(model, states, ops)
    probs = marginal_probabilities_array(psi, n, model.target_qubits)
    loss = cross_entropy_batch(probs, one_hot)
    lam = _sensitivity(model, psi, probs, one_hot)

    grad = np.zeros(model.n_params)
    n_global = len(model.global_names)
    env = np.zeros((model.n_layers, 4, 4), dtype=complex)
    first = next((i for i, op in enumerate(ops) if _is_trainable(op)), len(ops))
    for op in reversed(ops[first:]):
        if isinstance(op, DiagonalBlock):
            # block = exp(i sum_k a_k h_k): dL/dp = -2 Im <lam| G_p |psi>
            for idx, h in op.generators:
                grad[idx] += -2.0 * _k.overlap_diag(lam, psi, h).imag
            conj = op.phases.conj()
            _k.apply_diagonal(psi, conj)
            _k.apply_diagonal(lam, conj)
            continue
        gate = op.gate
        if op.partials:
            da = _angle_grad(gate, lam, psi, n)
            for idx, coeff in op.partials:
                grad[idx] += coeff * da
        apply_gate_inplace(psi, gate, n, dagger=True)
        if op.layer is not None:
            env[op.layer] += _pair_environment(gate, lam, psi, n)
        apply_gate_inplace(lam, gate, n, dagger=True)

    for ell in range(model.n_layers):
        dU = _layer_frechets(model.phi[ell])
        g = 2.0 * np.einsum("iab,ab->i", dU, env[ell]).real
        grad[n_global + 15 * ell : n_global + 15 * (ell + 1)] = g
    return loss, grad


def loss_and_gradient(model: ModelParams, batch):
    """Return ``(loss, GradientVector)`` for a batch.

    ``batch`` is either ``(states, one_hot)`` arrays or a sequence of labeled
    samples carrying ``.state`` and ``.one_hot``.
    """
    states, one_hot = batch_arrays(batch)
    loss, vec = loss_and_gradient_vector(model, states, one_hot)
    return loss, GradientVector.from_vector(model, vec)


def finite_diff_gradient(model: ModelParams, batch, h: float = 1e-4) -> GradientVector:
    """Central differences on every trainable scalar (two forward passes each)."""
    if not h > 0:
        raise ValueError(f"step h must be positive, got {h}")
    states, one_hot = batch_arrays(batch)
    x0 = model.to_vector()
    out = np.zeros_like(x0)
    for i in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        fp = batch_loss(model.with_vector(xp), (states, one_hot))
        fm = batch_loss(model.with_vector(xm), (states, one_hot))
        out[i] = (fp - fm) / (2 * h)
    return GradientVector.from_vector(model, out)
