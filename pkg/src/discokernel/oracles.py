"""Reference computations that share no code with the simulator.

Gate unitaries come from matrix exponentials of Pauli generators and are
applied to a full ``2^n`` tensor with ``einsum``; post-selection is a plain
index into the final tensor.
"""
from __future__ import annotations

import string

import numpy as np
from scipy.linalg import expm

from .circuit import Circuit

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)
_I = np.eye(2, dtype=complex)


def _unitary(kind: str, angle) -> np.ndarray:
    if kind == "H":
        return (_X + _Z) / np.sqrt(2)
    if kind == "RX":
        return expm(-0.5j * angle * _X)
    if kind == "RZ":
        return expm(-0.5j * angle * _Z)
    if kind == "CRZ":
        return np.kron(_P0, _I) + np.kron(_P1, expm(-0.5j * angle * _Z))
    if kind == "CX":
        return np.kron(_P0, _I) + np.kron(_P1, _X)
    if kind == "CSWAP":
        swap = np.zeros((4, 4), dtype=complex)
        for i in range(2):
            for j in range(2):
                swap[2 * j + i, 2 * i + j] = 1
        return np.kron(_P0, np.eye(4)) + np.kron(_P1, swap)
    raise ValueError(kind)


def full_state(c: Circuit) -> np.ndarray:
    """Final state as an n-axis tensor (axis q is qubit q), post-selection ignored."""
    n = c.n_qubits
    if n > 20:
        raise ValueError("oracle limited to 20 qubits")
    letters = string.ascii_letters
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for g in c.gates:
        m = len(g.targets)
        u = _unitary(g.kind, g.angle).reshape((2,) * (2 * m))
        state_idx = list(letters[:n])
        out_idx = list(state_idx)
        new = letters[n:n + m]
        for k, q in enumerate(g.targets):
            out_idx[q] = new[k]
        spec = f"{new}{''.join(state_idx[q] for q in g.targets)},{''.join(state_idx)}->{''.join(out_idx)}"
        psi = np.einsum(spec, u, psi)
    return psi


def sentence_state(c: Circuit) -> np.ndarray:
    """Normalised one-qubit state left on the sentence wire after post-selection."""
    if len(c.sentence_qubits) != 1:
        raise ValueError("oracle needs exactly one sentence qubit")
    psi = full_state(c)
    index = [slice(None)] * c.n_qubits
    for q, bit in c.post_select.items():
        index[q] = bit
    reduced = psi[tuple(index)]
    # the only remaining axes are non-post-selected qubits; all but the sentence one must be absent
    if reduced.ndim != 1:
        raise ValueError("circuit leaves more than the sentence qubit unmeasured")
    norm = np.linalg.norm(reduced)
    if norm ** 2 < 1e-12:
        raise ValueError("post-selection has vanishing probability")
    return reduced / norm


def reduced_state_fidelity(ci: Circuit, cj: Circuit) -> float:
    """|<phi_j|phi_i>|^2 between the two post-selected sentence states."""
    return float(abs(np.vdot(sentence_state(cj), sentence_state(ci))) ** 2)
