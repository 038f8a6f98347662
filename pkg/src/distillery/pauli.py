"""Symplectic Pauli strings and their conjugation through Clifford gates.

A string is (x bits, z bits, phase) with letter encoding I=(0,0), X=(1,0),
Z=(0,1), Y=(1,1); two strings commute iff their symplectic inner product
x1.z2 + z1.x2 vanishes mod 2. Conjugation tables for the supported gates are
generated numerically from the dense matrices at import, so they cannot
drift from the simulator's gate definitions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .circuit import Gate
from .densop import CNOT, HADAMARD, ID2, PAULI_X, PAULI_Y, PAULI_Z, S_GATE, SDG_GATE, SWAP, cphase_matrix

LETTERS = "IXZY"  # index = x + 2*z
_XZ_OF = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "Y": (1, 1)}
_LETTER_OF = {v: k for k, v in _XZ_OF.items()}
_MATS = {"I": ID2, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}

# letter multiplication: (a, b) -> (phase as power of i, product letter)
_MUL: dict[tuple[str, str], tuple[int, str]] = {}
for _a, _b in itertools.product("IXYZ", repeat=2):
    _prod = _MATS[_a] @ _MATS[_b]
    for _c in "IXYZ":
        for _k in range(4):
            if np.allclose(_prod, (1j**_k) * _MATS[_c]):
                _MUL[(_a, _b)] = (_k, _c)


class UnsupportedProtocolError(ValueError):
    """The circuit contains a gate outside the supported Clifford set."""


@dataclass(frozen=True)
class PauliString:
    """n-qubit Pauli with sign tracked as a power of i."""

    n: int
    x_bits: tuple[int, ...]
    z_bits: tuple[int, ...]
    phase_i: int = 0  # the string equals i**phase_i times the letter product

    def __post_init__(self):
        if len(self.x_bits) != self.n or len(self.z_bits) != self.n:
            raise ValueError("x_bits and z_bits must have length n")
        object.__setattr__(self, "phase_i", self.phase_i % 4)

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, (0,) * n, (0,) * n)

    @classmethod
    def from_letters(cls, letters: dict[int, str], n: int) -> "PauliString":
        x = [0] * n
        z = [0] * n
        for q, c in letters.items():
            x[q], z[q] = _XZ_OF[c]
        return cls(n, tuple(x), tuple(z))

    def letter(self, q: int) -> str:
        return _LETTER_OF[(self.x_bits[q], self.z_bits[q])]

    def label(self) -> str:
        """Compressed form, e.g. 'X2Y3'; the identity is 'I'."""
        parts = [f"{self.letter(q)}{q}" for q in range(self.n) if self.letter(q) != "I"]
        return "".join(parts) if parts else "I"

    def support(self) -> tuple[int, ...]:
        return tuple(q for q in range(self.n) if self.letter(q) != "I")

    def commutes_with(self, other: "PauliString") -> bool:
        acc = 0
        for q in range(self.n):
            acc += self.x_bits[q] * other.z_bits[q] + self.z_bits[q] * other.x_bits[q]
        return acc % 2 == 0

    def with_letter(self, q: int, letter: str, extra_phase: int = 0) -> "PauliString":
        x = list(self.x_bits)
        z = list(self.z_bits)
        x[q], z[q] = _XZ_OF[letter]
        return PauliString(self.n, tuple(x), tuple(z), self.phase_i + extra_phase)

    def matrix(self) -> np.ndarray:
        out = np.array([[1]], dtype=complex)
        for q in range(self.n):
            out = np.kron(out, _MATS[self.letter(q)])
        return (1j**self.phase_i) * out


def multiply_letters(a: str, b: str) -> tuple[int, str]:
    """(phase power of i, letter) for the single-qubit product a*b."""
    return _MUL[(a, b)]


def _conj_table_1q(u: np.ndarray) -> dict[str, tuple[int, str]]:
    table = {}
    for a in "IXYZ":
        conj = u @ _MATS[a] @ u.conj().T
        for c in "IXYZ":
            for k in range(4):
                if np.allclose(conj, (1j**k) * _MATS[c], atol=1e-12):
                    table[a] = (k, c)
    assert len(table) == 4
    return table


def _conj_table_2q(u: np.ndarray) -> dict[tuple[str, str], tuple[int, str, str]]:
    table = {}
    for a, b in itertools.product("IXYZ", repeat=2):
        conj = u @ np.kron(_MATS[a], _MATS[b]) @ u.conj().T
        for c, d in itertools.product("IXYZ", repeat=2):
            target = np.kron(_MATS[c], _MATS[d])
            for k in range(4):
                if np.allclose(conj, (1j**k) * target, atol=1e-12):
                    table[(a, b)] = (k, c, d)
    assert len(table) == 16
    return table


_TABLES_1Q = {
    "H": _conj_table_1q(HADAMARD),
    "S": _conj_table_1q(S_GATE),
    "Sdg": _conj_table_1q(SDG_GATE),
    "X": _conj_table_1q(PAULI_X),
}
_TABLES_2Q = {
    "CNOT": _conj_table_2q(CNOT),
    "SWAP": _conj_table_2q(SWAP),
    "CZ": _conj_table_2q(cphase_matrix(np.pi)),
}
_INVERSE_NAME = {"H": "H", "S": "Sdg", "Sdg": "S", "X": "X", "CNOT": "CNOT", "SWAP": "SWAP", "CZ": "CZ"}


def _gate_table_name(gate: Gate) -> str:
    if gate.name == "CPhase":
        theta = float(gate.angle) % (2 * np.pi)
        if abs(theta) < 1e-12 or abs(theta - 2 * np.pi) < 1e-12:
            return "I"
        if abs(theta - np.pi) < 1e-12:
            return "CZ"
        raise UnsupportedProtocolError(f"CPhase({gate.angle}) is not Clifford")
    if gate.name in _TABLES_1Q or gate.name in _TABLES_2Q:
        return gate.name
    raise UnsupportedProtocolError(f"gate {gate.name!r} has no Clifford conjugation rule")


def conjugate_by_gate(p: PauliString, gate: Gate, inverse: bool = False) -> PauliString:
    """U P U^dag for a supported Clifford gate (U^dag P U when ``inverse``)."""
    name = _gate_table_name(gate)
    if name == "I":
        return p
    if inverse:
        name = _INVERSE_NAME[name]
    if name in _TABLES_1Q:
        (q,) = gate.targets
        k, c = _TABLES_1Q[name][p.letter(q)]
        return p.with_letter(q, c, k)
    qa, qb = gate.targets
    k, ca, cb = _TABLES_2Q[name][(p.letter(qa), p.letter(qb))]
    return p.with_letter(qa, ca).with_letter(qb, cb, k)


def conjugate_through(p: PauliString, gates, inverse: bool = False) -> PauliString:
    """Conjugate through a gate sequence: U_k ... U_1 P U_1^dag ... U_k^dag.

    With ``inverse`` the sequence is walked backwards with inverted gates,
    giving U^dag P U for the overall circuit unitary U.
    """
    if inverse:
        for g in reversed(list(gates)):
            p = conjugate_by_gate(p, g, inverse=True)
    else:
        for g in gates:
            p = conjugate_by_gate(p, g)
    return p
