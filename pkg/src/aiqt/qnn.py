"""Hardware-efficient QNN built from SU(4) Gell-Mann exponentials.

Layer ``l`` applies ``U_l = exp(-i sum_i phi[l, i] G_i)`` to every qubit pair
of a brick-wall pattern. All pairs in a layer share the same ``U_l``.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .statevec import TwoQubitUnitary, apply_gate_inplace, DTYPE, PureState

N_GENERATORS = 15


@lru_cache(maxsize=None)
def _gellmann() -> np.ndarray:
    mats = []
    pairs = [(j, k) for j in range(4) for k in range(j + 1, 4)]
    for j, k in pairs:
        m = np.zeros((4, 4), dtype=DTYPE)
        m[j, k] = m[k, j] = 1.0
        mats.append(m)
    for j, k in pairs:
        m = np.zeros((4, 4), dtype=DTYPE)
        m[j, k] = -1j
        m[k, j] = 1j
        mats.append(m)
    mats.append(np.diag([1, -1, 0, 0]).astype(DTYPE))
    mats.append(np.diag([1, 1, -2, 0]).astype(DTYPE) / np.sqrt(3))
    mats.append(np.diag([1, 1, 1, -3]).astype(DTYPE) / np.sqrt(6))
    out = np.array(mats)
    out.setflags(write=False)
    return out


def gellmann_basis() -> np.ndarray:
    """The 15 generalized Gell-Mann matrices, shape ``(15, 4, 4)``.

    Order: 6 symmetric (pairs (0,1), (0,2), (0,3), (1,2), (1,3), (2,3)),
    6 antisymmetric in the same pair order, then 3 diagonal.
    Normalized so that ``Tr(G_i G_j) = 2 delta_ij``.
    """
    return _gellmann()


def _check_phi(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (N_GENERATORS,):
        raise ValueError(f"layer parameters must have shape (15,), got {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("layer parameters must be finite")
    return phi


def layer_hamiltonian(phi) -> np.ndarray:
    phi = _check_phi(phi)
    return np.tensordot(phi, gellmann_basis(), axes=1)


def layer_eigh(phi):
    """Eigendecomposition ``(w, V)`` of the layer generator ``sum phi_i G_i``."""
    return np.linalg.eigh(layer_hamiltonian(phi))


def layer_unitary(phi) -> np.ndarray:
    w, v = layer_eigh(phi)
    return (v * np.exp(-1j * w)) @ v.conj().T


def pairing(n_qubits: int, layer_index: int) -> list:
    """Brick-wall pairs for 1-based ``layer_index``.

    Odd layers pair (0,1), (2,3), ...; even layers pair (1,2), (3,4), ....
    A qubit left without a partner idles for that layer.
    """
    if n_qubits < 2:
        raise ValueError(f"QNN needs at least 2 qubits, got {n_qubits}")
    if layer_index < 1:
        raise ValueError(f"layer_index is 1-based, got {layer_index}")
    offset = 0 if layer_index % 2 == 1 else 1
    return [(q, q + 1) for q in range(offset, n_qubits - 1, 2)]


def check_params(phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2 or phi.shape[1] != N_GENERATORS:
        raise ValueError(f"QNN parameters must have shape (L, 15), got {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("QNN parameters must be finite")
    return phi


def qnn_ops(n_qubits: int, phi):
    """Yield ``(gate, layer)`` with ``layer`` the 0-based parameter row."""
    phi = check_params(phi)
    for ell in range(phi.shape[0]):
        u = layer_unitary(phi[ell])
        for a, b in pairing(n_qubits, ell + 1):
            yield TwoQubitUnitary(a, b, u), ell


def apply_qnn_array(psi: np.ndarray, n_qubits: int, phi) -> np.ndarray:
    out = np.array(psi, dtype=DTYPE, order="C", copy=True)
    for gate, _ in qnn_ops(n_qubits, phi):
        apply_gate_inplace(out, gate, n_qubits)
    return out


def apply_qnn(state: PureState, phi) -> PureState:
    return PureState(state.n_qubits, apply_qnn_array(state.amplitudes, state.n_qubits, phi))


def init_params(n_layers: int, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    return rng.uniform(-scale, scale, size=(n_layers, N_GENERATORS))
