"""Compiled gate kernels on (batch, 2**n) complex128 arrays.

Qubits are addressed by their stride ``s = 1 << (n - 1 - q)`` in the basis
index. Every kernel loops over the basis indices with the addressed bits
cleared and touches the 2 (or 4) amplitudes of that group in place.
"""
import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _insert0(i, s):
    lo = i & (s - 1)
    return ((i - lo) << 1) | lo


@njit(cache=True, inline="always")
def _insert00(i, s_lo, s_hi):
    return _insert0(_insert0(i, s_lo), s_hi)


@njit(cache=True)
def apply_1q(psi, s, m00, m01, m10, m11):
    nb, dim = psi.shape
    for b in range(nb):
        row = psi[b]
        for i in range(dim >> 1):
            i0 = _insert0(i, s)
            i1 = i0 | s
            a0 = row[i0]
            a1 = row[i1]
            row[i0] = m00 * a0 + m01 * a1
            row[i1] = m10 * a0 + m11 * a1


@njit(cache=True)
def apply_phase_on_one(psi, s, p0, p1):
    """Diagonal single-qubit gate diag(p0, p1)."""
    nb, dim = psi.shape
    for b in range(nb):
        row = psi[b]
        for i in range(dim >> 1):
            i0 = _insert0(i, s)
            row[i0] *= p0
            row[i0 | s] *= p1


@njit(cache=True)
def apply_cphase(psi, s1, s2, phase):
    nb, dim = psi.shape
    lo, hi = min(s1, s2), max(s1, s2)
    for b in range(nb):
        row = psi[b]
        for i in range(dim >> 2):
            row[_insert00(i, lo, hi) | s1 | s2] *= phase


@njit(cache=True)
def apply_cnot(psi, sc, st):
    nb, dim = psi.shape
    lo, hi = min(sc, st), max(sc, st)
    for b in range(nb):
        row = psi[b]
        for i in range(dim >> 2):
            i0 = _insert00(i, lo, hi) | sc
            i1 = i0 | st
            tmp = row[i0]
            row[i0] = row[i1]
            row[i1] = tmp


@njit(cache=True)
def apply_swap(psi, s1, s2):
    nb, dim = psi.shape
    lo, hi = min(s1, s2), max(s1, s2)
    for b in range(nb):
        row = psi[b]
        for i in range(dim >> 2):
            base = _insert00(i, lo, hi)
            i01 = base | s2
            i10 = base | s1
            tmp = row[i01]
            row[i01] = row[i10]
            row[i10] = tmp


@njit(cache=True)
def apply_2q(psi, s1, s2, u):
    """4x4 ``u`` indexed by ``2*bit(q1) + bit(q2)``."""
    nb, dim = psi.shape
    lo, hi = min(s1, s2), max(s1, s2)
    u00, u01, u02, u03 = u[0, 0], u[0, 1], u[0, 2], u[0, 3]
    u10, u11, u12, u13 = u[1, 0], u[1, 1], u[1, 2], u[1, 3]
    u20, u21, u22, u23 = u[2, 0], u[2, 1], u[2, 2], u[2, 3]
    u30, u31, u32, u33 = u[3, 0], u[3, 1], u[3, 2], u[3, 3]
    for b in range(nb):
        row = psi[b]
        for i in range(dim >> 2):
            i0 = _insert00(i, lo, hi)
            i1 = i0 | s2
            i2 = i0 | s1
            i3 = i2 | s2
            a0, a1, a2, a3 = row[i0], row[i1], row[i2], row[i3]
            row[i0] = u00 * a0 + u01 * a1 + u02 * a2 + u03 * a3
            row[i1] = u10 * a0 + u11 * a1 + u12 * a2 + u13 * a3
            row[i2] = u20 * a0 + u21 * a1 + u22 * a2 + u23 * a3
            row[i3] = u30 * a0 + u31 * a1 + u32 * a2 + u33 * a3


@njit(cache=True)
def apply_diagonal(psi, phases):
    nb, dim = psi.shape
    for b in range(nb):
        row = psi[b]
        for x in range(dim):
            row[x] *= phases[x]


# --- adjoint contractions ---------------------------------------------------


@njit(cache=True)
def overlap_x(lam, psi, s):
    """sum conj(lam) X_q psi over the batch."""
    nb, dim = psi.shape
    acc = 0j
    for b in range(nb):
        for i in range(dim >> 1):
            i0 = _insert0(i, s)
            i1 = i0 | s
            acc += lam[b, i0].conjugate() * psi[b, i1] + lam[b, i1].conjugate() * psi[b, i0]
    return acc


@njit(cache=True)
def overlap_z(lam, psi, s):
    nb, dim = psi.shape
    acc = 0j
    for b in range(nb):
        for i in range(dim >> 1):
            i0 = _insert0(i, s)
            i1 = i0 | s
            acc += lam[b, i0].conjugate() * psi[b, i0] - lam[b, i1].conjugate() * psi[b, i1]
    return acc


@njit(cache=True)
def overlap_11(lam, psi, s1, s2):
    nb, dim = psi.shape
    lo, hi = min(s1, s2), max(s1, s2)
    acc = 0j
    for b in range(nb):
        for i in range(dim >> 2):
            k = _insert00(i, lo, hi) | s1 | s2
            acc += lam[b, k].conjugate() * psi[b, k]
    return acc


@njit(cache=True)
def overlap_diag(lam, psi, h):
    """sum conj(lam) h psi for a real diagonal ``h``."""
    nb, dim = psi.shape
    acc = 0j
    for b in range(nb):
        for x in range(dim):
            acc += lam[b, x].conjugate() * h[x] * psi[b, x]
    return acc


@njit(cache=True)
def pair_environment(lam, psi, s1, s2):
    """M[r, c] = sum conj(lam[idx_r]) psi[idx_c], indices ordered as in apply_2q."""
    nb, dim = psi.shape
    lo, hi = min(s1, s2), max(s1, s2)
    m = np.zeros((4, 4), dtype=np.complex128)
    lv = np.empty(4, dtype=np.complex128)
    pv = np.empty(4, dtype=np.complex128)
    for b in range(nb):
        for i in range(dim >> 2):
            i0 = _insert00(i, lo, hi)
            i1 = i0 | s2
            i2 = i0 | s1
            i3 = i2 | s2
            lv[0], lv[1], lv[2], lv[3] = lam[b, i0], lam[b, i1], lam[b, i2], lam[b, i3]
            pv[0], pv[1], pv[2], pv[3] = psi[b, i0], psi[b, i1], psi[b, i2], psi[b, i3]
            for r in range(4):
                lr = lv[r].conjugate()
                for c in range(4):
                    m[r, c] += lr * pv[c]
    return m
