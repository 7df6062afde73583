"""Cluster-Ising chain: Hamiltonian, exact ground states, phase labels, datasets.

    H = g_zxz sum_{i=2}^{N-1} Z_{i-1} X_i Z_{i+1} - g_x sum_i X_i - g_zz sum_i Z_i Z_{i+1}

on an open chain, with couplings on the simplex ``g_zxz + g_x + g_zz = 4``.
Every term is a real Pauli string, so H is real symmetric. In the computational
basis ``H|x> = d(x)|x> + sum_i c_i(x) |x ^ bit_i>`` with
``d(x) = -g_zz sum z_i z_{i+1}`` and ``c_i(x) = -g_x + g_zxz z_{i-1} z_{i+1}``
(the ZXZ part only on interior sites).
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .statevec import PureState

SIMPLEX_TOTAL = 4.0
TIE_TOLERANCE = 0.05
MAX_DENSE_ED_QUBITS = 10
MAX_DENSE_QUBITS = 12
MAX_LANCZOS_QUBITS = 14
LABEL_RULE = "argmax-0.05"


class PhaseLabel(enum.IntEnum):
    """Phase classes; the value is the readout outcome (``10`` binary = 2, ...)."""

    TRIVIAL = 0
    SB = 1
    SPT = 2
    FAIL = 3

    @property
    def bits(self) -> str:
        return format(int(self), "02b")


N_CLASSES = len(PhaseLabel)


@dataclass(frozen=True)
class CouplingPoint:
    g_zxz: float
    g_x: float
    g_zz: float

    def __post_init__(self):
        vals = (self.g_zxz, self.g_x, self.g_zz)
        if any(not math.isfinite(v) or v < 0 for v in vals):
            raise ValueError(f"couplings must be finite and nonnegative, got {vals}")
        if abs(sum(vals) - SIMPLEX_TOTAL) > 1e-9:
            raise ValueError(f"couplings must sum to {SIMPLEX_TOTAL}, got {sum(vals)!r}")

    def as_tuple(self):
        return (self.g_zxz, self.g_x, self.g_zz)


@dataclass
class LabeledSample:
    couplings: CouplingPoint
    state: PureState
    label: PhaseLabel
    energy: float = float("nan")

    @property
    def one_hot(self) -> np.ndarray:
        out = np.zeros(N_CLASSES)
        out[int(self.label)] = 1.0
        return out


# --- Hamiltonian ------------------------------------------------------------


def _z_signs(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return np.array([1 - 2 * ((idx >> (n - 1 - q)) & 1) for q in range(n)], dtype=float)


class ClusterIsingOperator(scipy.sparse.linalg.LinearOperator):
    """Matrix-free cluster-Ising Hamiltonian (real symmetric)."""

    def __init__(self, n_qubits: int, couplings: CouplingPoint):
        self.n_qubits = n_qubits
        self.couplings = couplings
        dim = 2**n_qubits
        super().__init__(dtype=np.float64, shape=(dim, dim))
        z = _z_signs(n_qubits)
        self.diagonal = -couplings.g_zz * np.sum(z[:-1] * z[1:], axis=0)
        idx = np.arange(dim)
        self.flip_index = [idx ^ (1 << (n_qubits - 1 - i)) for i in range(n_qubits)]
        coef = []
        for i in range(n_qubits):
            c = np.full(dim, -couplings.g_x)
            if 0 < i < n_qubits - 1:
                c = c + couplings.g_zxz * z[i - 1] * z[i + 1]
            coef.append(c)
        self.flip_coef = coef

    def _matvec(self, v):
        v = np.asarray(v).reshape(-1)
        out = self.diagonal * v
        for flip, c in zip(self.flip_index, self.flip_coef):
            out += c * v[flip]
        return out

    def _rmatvec(self, v):
        return self._matvec(v)

    def to_dense(self) -> np.ndarray:
        dim = self.shape[0]
        h = np.diag(self.diagonal)
        cols = np.arange(dim)
        for flip, c in zip(self.flip_index, self.flip_coef):
            h[flip, cols] += c
        return h


def build_hamiltonian(n_qubits: int, couplings: CouplingPoint, matrix_free: bool = False):
    """Dense ``(2**N, 2**N)`` array, or a :class:`ClusterIsingOperator` if ``matrix_free``."""
    if n_qubits < 2:
        raise ValueError(f"chain needs at least 2 sites, got {n_qubits}")
    op = ClusterIsingOperator(n_qubits, couplings)
    if matrix_free:
        if n_qubits > MAX_LANCZOS_QUBITS:
            raise ValueError(f"matrix-free ED limited to {MAX_LANCZOS_QUBITS} sites")
        return op
    if n_qubits > MAX_DENSE_QUBITS:
        raise ValueError(f"dense Hamiltonian limited to {MAX_DENSE_QUBITS} sites; use matrix_free")
    return op.to_dense()


# --- ground states ----------------------------------------------------------


def fix_global_phase(vec: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Rotate so the largest-magnitude amplitude is real positive (lowest index on ties)."""
    mag = np.abs(vec)
    k = int(np.flatnonzero(mag >= mag.max() - tol)[0])
    return vec * (np.conj(vec[k]) / mag[k])


class EigensolverError(RuntimeError):
    pass


def ground_state(H, seed: int = 12345) -> tuple:
    """Lowest eigenpair ``(energy, PureState)`` of a dense matrix or operator.

    Dense input uses a Hermitian eigensolver; a ``LinearOperator`` goes
    through ARPACK's Lanczos with a seeded start vector.
    """
    dim = H.shape[0]
    n = int(round(math.log2(dim)))
    if 2**n != dim:
        raise ValueError(f"Hamiltonian dimension {dim} is not a power of two")
    if isinstance(H, np.ndarray):
        if np.max(np.abs(H - H.conj().T)) > 1e-10:
            raise ValueError("Hamiltonian is not Hermitian")
        w, v = scipy.linalg.eigh(H, subset_by_index=[0, 0])
        energy, vec = float(w[0]), v[:, 0]
    else:
        v0 = np.random.default_rng(seed).normal(size=dim)
        try:
            w, v = scipy.sparse.linalg.eigsh(H, k=1, which="SA", v0=v0, tol=1e-13, maxiter=50 * dim)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise EigensolverError(
                f"Lanczos did not converge for dimension {dim}: "
                f"{len(exc.eigenvalues)} of 1 eigenvalues found"
            ) from exc
        energy, vec = float(w[0]), v[:, 0]
    vec = vec / np.linalg.norm(vec)
    return energy, PureState(n, fix_global_phase(vec.astype(complex)))


def solve_point(n_qubits: int, couplings: CouplingPoint) -> tuple:
    """ED ground state with the solver chosen by chain length."""
    matrix_free = n_qubits > MAX_DENSE_ED_QUBITS
    return ground_state(build_hamiltonian(n_qubits, couplings, matrix_free=matrix_free))


# --- labels and datasets ----------------------------------------------------

_DOMINANT = (PhaseLabel.SPT, PhaseLabel.TRIVIAL, PhaseLabel.SB)


def label_point(couplings: CouplingPoint, tie_tolerance: float = TIE_TOLERANCE) -> Optional[PhaseLabel]:
    """Label by the dominant coupling; ``None`` inside the tie band.

    g_zxz dominant -> SPT, g_x -> Trivial, g_zz -> SB.
    """
    vals = np.array(couplings.as_tuple())
    order = np.argsort(-vals, kind="stable")
    if vals[order[0]] - vals[order[1]] < tie_tolerance:
        return None
    return _DOMINANT[int(order[0])]


def sample_simplex(rng: np.random.Generator) -> CouplingPoint:
    e = rng.exponential(size=3)
    g = SIMPLEX_TOTAL * e / e.sum()
    # put the rounding residue on the largest entry so the sum is exact to 1 ulp
    g[np.argmax(g)] += SIMPLEX_TOTAL - g.sum()
    return CouplingPoint(*(float(x) for x in g))


def sample_dataset(n_qubits: int, total: int, seed: int, max_draws: Optional[int] = None) -> list:
    """Balanced dataset of ED ground states, reproducible from ``seed``.

    Points are drawn uniformly on the simplex; tie-band points and points of
    already-full classes are rejected. Samples come back in draw order.
    """
    if total <= 0 or total % 3:
        raise ValueError(f"total must be a positive multiple of 3, got {total}")
    quota = total // 3
    max_draws = 1000 * total if max_draws is None else max_draws
    rng = np.random.default_rng(seed)
    counts = {PhaseLabel.TRIVIAL: 0, PhaseLabel.SB: 0, PhaseLabel.SPT: 0}
    accepted = []
    draws = 0
    while len(accepted) < total:
        if draws >= max_draws:
            raise RuntimeError(
                f"class quotas not met after {max_draws} draws: "
                + ", ".join(f"{k.name}={v}" for k, v in counts.items())
            )
        draws += 1
        point = sample_simplex(rng)
        label = label_point(point)
        if label is None or counts[label] >= quota:
            continue
        counts[label] += 1
        accepted.append((point, label))
    samples = []
    for point, label in accepted:
        energy, state = solve_point(n_qubits, point)
        samples.append(LabeledSample(point, state, label, energy))
    return samples


def stratified_split(dataset: Sequence[LabeledSample], train_fraction: float = 0.7, seed: int = 0):
    """Per-class shuffled split; returns ``(train, test)`` lists."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    labels = np.array([int(s.label) for s in dataset])
    train_idx, test_idx = [], []
    for cls in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == cls)
        members = members[rng.permutation(len(members))]
        k = int(round(train_fraction * len(members)))
        train_idx.extend(members[:k].tolist())
        test_idx.extend(members[k:].tolist())
    train_idx = [train_idx[i] for i in rng.permutation(len(train_idx))]
    test_idx = [test_idx[i] for i in rng.permutation(len(test_idx))]
    return [dataset[i] for i in train_idx], [dataset[i] for i in test_idx]


def to_arrays(samples: Sequence[LabeledSample]):
    """Stack samples into ``(states, one_hot, labels)`` arrays."""
    if not samples:
        raise ValueError("no samples")
    states = np.array([s.state.amplitudes for s in samples])
    labels = np.array([int(s.label) for s in samples])
    one_hot = np.eye(N_CLASSES)[labels]
    return states, one_hot, labels


# --- JSON dataset files -----------------------------------------------------


def dataset_to_dict(samples: Sequence[LabeledSample], n_qubits: int, seed: int) -> dict:
    return {
        "n_qubits": n_qubits,
        "seed": seed,
        "total": len(samples),
        "label_rule": LABEL_RULE,
        "samples": [
            {
                "g_zxz": s.couplings.g_zxz,
                "g_x": s.couplings.g_x,
                "g_zz": s.couplings.g_zz,
                "label": s.label.bits,
                "energy": s.energy,
                "amplitudes": [[float(a.real), float(a.imag)] for a in s.state.amplitudes],
            }
            for s in samples
        ],
    }


def save_dataset(path, samples, n_qubits: int, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(dataset_to_dict(samples, n_qubits, seed), fh, separators=(",", ":"))
        fh.write("\n")


def dataset_from_dict(data: dict):
    """Return ``(header, samples)``; header holds n_qubits, seed, total, label_rule."""
    n = int(data["n_qubits"])
    samples = []
    for row in data["samples"]:
        amps = np.array(row["amplitudes"], dtype=float)
        if amps.shape != (2**n, 2):
            raise ValueError(f"sample has amplitude array of shape {amps.shape}, expected {(2**n, 2)}")
        # reinterpret [re, im] pairs in place; keeps signed zeros intact
        state = PureState(n, np.ascontiguousarray(amps).view(np.complex128)[:, 0])
        point = CouplingPoint(row["g_zxz"], row["g_x"], row["g_zz"])
        label = PhaseLabel(int(row["label"], 2))
        samples.append(LabeledSample(point, state, label, float(row["energy"])))
    header = {k: data[k] for k in ("n_qubits", "seed", "total", "label_rule")}
    if header["total"] != len(samples):
        raise ValueError(f"header says {header['total']} samples, file has {len(samples)}")
    return header, samples


def load_dataset(path):
    with open(path, encoding="utf-8") as fh:
        return dataset_from_dict(json.load(fh))
