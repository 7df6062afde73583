"""Execution plans: a gate tape with consecutive diagonal gates fused.

Controlled phases, RZ rotations and the ``CNOT(c,t) RZ(t) CNOT(c,t)`` pattern
are all of the form ``exp(i a h)`` with a real diagonal ``h``. A run of them
collapses to one elementwise phase multiply. Because the generators commute,
the derivative of the fused block with respect to a model parameter ``p`` is
``i G_p U`` with ``G_p = sum_k (da_k/dp) h_k``, so each block needs a single
overlap per parameter in the adjoint sweep.
"""
from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .statevec import CNOT, RZ, ControlledPhase


class DiagonalBlock(NamedTuple):
    phases: np.ndarray  # complex (2**n,)
    generators: tuple  # ((flat_index, real (2**n,) array), ...)


@lru_cache(maxsize=32)
def _bits(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    out = np.array([(idx >> (n - 1 - q)) & 1 for q in range(n)], dtype=float)
    out.setflags(write=False)
    return out


def _diagonal_item(ops, k, n):
    """Return ``(h, angle, partials, consumed)`` if a diagonal item starts at ``k``."""
    op = ops[k]
    gate = op.gate
    bits = _bits(n)
    if isinstance(gate, ControlledPhase):
        return bits[gate.control] * bits[gate.target], gate.angle, op.partials, 1
    if isinstance(gate, RZ):
        return bits[gate.q] - 0.5, gate.angle, op.partials, 1
    if isinstance(gate, CNOT) and k + 2 < len(ops):
        mid, last = ops[k + 1], ops[k + 2]
        if (
            isinstance(mid.gate, RZ)
            and mid.gate.q == gate.target
            and isinstance(last.gate, CNOT)
            and last.gate == gate
            and not op.partials
            and not last.partials
        ):
            zc = 1.0 - 2.0 * bits[gate.control]
            zt = 1.0 - 2.0 * bits[gate.target]
            return -0.5 * zc * zt, mid.gate.angle, mid.partials, 3
    return None


def compile_plan(tape, n_qubits: int) -> list:
    """Fuse runs of diagonal gates in ``tape``.

    Plan entries are either the original ``TapeOp`` or a :class:`DiagonalBlock`.
    RZ is written as ``exp(i a (bit - 1/2))``, equal to ``exp(-i a Z/2)``.
    """
    plan = []
    k = 0
    while k < len(tape):
        item = _diagonal_item(tape, k, n_qubits)
        if item is None:
            plan.append(tape[k])
            k += 1
            continue
        exponent = np.zeros(2**n_qubits)
        gens = {}
        while item is not None:
            h, angle, partials, consumed = item
            exponent += angle * h
            for idx, coeff in partials:
                gens[idx] = gens.get(idx, 0.0) + coeff * h
            k += consumed
            item = _diagonal_item(tape, k, n_qubits) if k < len(tape) else None
        plan.append(DiagonalBlock(np.exp(1j * exponent), tuple(sorted(gens.items()))))
    return plan
