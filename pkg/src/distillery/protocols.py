"""Post-selected distillation protocols: two-pair parity checks and the
three-pair double-check variant, plus the general projector formulation.

Qubit layout is side-major: with n pairs, qubits 0..n-1 are the local (A)
halves and qubits n..2n-1 the remote (B) halves, so pair i lives on qubits
(i, n+i). The two-pair protocols therefore use pairs (0,2) and (1,3) and the
three-pair protocol pairs (0,3), (1,4), (2,5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channels import Channel as NoiseChannel
from .channels import apply_channel_matrix
from .circuit import (
    CircuitElement,
    Gate,
    Measure,
    NOISELESS,
    NoisyExecutionConfig,
    NothingAcceptedError,
    execute_exact,
    parity_agreement,
    postselect,
)
from .densop import (
    BELL_VEC,
    DensityOperator,
    UnitaryOp,
    apply_matrix,
    bell_fidelity_matrix,
    bell_pairs_on,
    embed_on_qubits,
    partial_trace_matrix,
)

PROTOCOL_NAMES = ("z2b", "x2b", "zx3b")


@dataclass(frozen=True)
class ProtocolSpec:
    """A distillation protocol: circuit, agreement checks, and kept pair."""

    name: str
    n_pairs: int
    pairs: tuple[tuple[int, int], ...]
    circuit: tuple[CircuitElement, ...]
    checks: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    kept_pair: tuple[int, int]

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_pairs

    @property
    def noise_qubits(self) -> tuple[int, ...]:
        """The remote (B) half of each pair, where input noise is placed."""
        return tuple(b for _, b in self.pairs)

    def accepts(self, outcomes) -> bool:
        return parity_agreement(self.checks)(outcomes)


@dataclass(frozen=True)
class DistillOutcome:
    p_accept: float
    rho_out: DensityOperator | None
    f_after: float
    f_before_max: float

    @property
    def ratio(self) -> float:
        return self.f_after / self.f_before_max

    @property
    def err_decrease(self) -> float:
        """Percentage decrease in Bell infidelity; NaN when already perfect."""
        if self.f_before_max >= 1.0:
            return math.nan
        return 100.0 * (self.f_after - self.f_before_max) / (1.0 - self.f_before_max)


def build_z2b() -> ProtocolSpec:
    """Two-pair protocol checking agreement of ZZ parities across the pairs.

    Catches single X or Y errors on the checked halves.
    """
    circuit = (
        Gate("CNOT", (0, 1)),
        Gate("CNOT", (2, 3)),
        Measure(1, "Z", "i"),
        Measure(3, "Z", "j"),
    )
    return ProtocolSpec(
        name="z2b",
        n_pairs=2,
        pairs=((0, 2), (1, 3)),
        circuit=circuit,
        checks=((("i",), ("j",)),),
        kept_pair=(0, 2),
    )


def build_x2b() -> ProtocolSpec:
    """Two-pair protocol checking agreement of XX parities across the pairs.

    The basis-change dual of :func:`build_z2b`; catches single Z or Y errors.
    """
    circuit = (
        Gate("CNOT", (1, 0)),
        Gate("CNOT", (3, 2)),
        Measure(1, "X", "i"),
        Measure(3, "X", "j"),
    )
    return ProtocolSpec(
        name="x2b",
        n_pairs=2,
        pairs=((0, 2), (1, 3)),
        circuit=circuit,
        checks=((("i",), ("j",)),),
        kept_pair=(0, 2),
    )


def build_zx3b() -> ProtocolSpec:
    """Three-pair protocol with simultaneous ZZZ-type and XX-type checks.

    Sensitive to bit flips and phase flips at the same time; keeps pair
    (0, 3) when both check outcomes agree across the two sides.
    """
    circuit = (
        Gate("CNOT", (0, 1)),
        Gate("CNOT", (3, 4)),
        Gate("CNOT", (2, 1)),
        Gate("CNOT", (5, 4)),
        Measure(1, "Z", "i"),
        Measure(4, "Z", "j"),
        Measure(2, "X", "k"),
        Measure(5, "X", "l"),
    )
    return ProtocolSpec(
        name="zx3b",
        n_pairs=3,
        pairs=((0, 3), (1, 4), (2, 5)),
        circuit=circuit,
        checks=((("i",), ("j",)), (("k",), ("l",))),
        kept_pair=(0, 3),
    )


_BUILDERS = {"z2b": build_z2b, "x2b": build_x2b, "zx3b": build_zx3b}


def get_protocol(name: str) -> ProtocolSpec:
    try:
        return _BUILDERS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; expected one of {PROTOCOL_NAMES}") from None


def run_protocol(
    spec: ProtocolSpec,
    input_noise: Sequence[NoiseChannel] = (),
    cfg: NoisyExecutionConfig = NOISELESS,
) -> DistillOutcome:
    """Distill freshly prepared pairs degraded by ``input_noise``.

    The pre-distillation fidelity is the maximum Bell fidelity over the
    pairs after the input noise, immediately before the check circuit.
    """
    n = spec.n_qubits
    rho = bell_pairs_on(spec.pairs, n)
    for ch in input_noise:
        for q in ch.target_qubits:
            if not 0 <= q < n:
                raise ValueError(f"input noise qubit {q} out of range")
        rho = apply_channel_matrix(rho, ch, n)
    f_before = max(bell_fidelity_matrix(rho, pair, n) for pair in spec.pairs)
    result = execute_exact(spec.circuit, DensityOperator(n, rho), cfg)
    p_accept, kept = postselect(result, spec.accepts)
    reduced = partial_trace_matrix(kept.matrix, spec.kept_pair, n)
    f_after = float(np.real(BELL_VEC.conj() @ reduced @ BELL_VEC))
    return DistillOutcome(
        p_accept=p_accept,
        rho_out=DensityOperator(2, reduced),
        f_after=f_after,
        f_before_max=f_before,
    )


def _pair_projector_matrix() -> np.ndarray:
    p = np.zeros((4, 4), dtype=complex)
    p[0, 0] = 1.0
    p[3, 3] = 1.0
    return p


def general_distill(
    rho_ab: DensityOperator, u: UnitaryOp, kept_pair_index: int = 0
) -> tuple[float, DensityOperator, float]:
    """Distill one pair out of an n-pair state by projecting the rest.

    ``rho_ab`` lives on 2n qubits in side-major layout (pair i on qubits
    (i, n+i)). After applying ``u`` (which should factor across the two
    sides), every pair except ``kept_pair_index`` is projected onto its
    even-parity Z subspace |00><00| + |11><11|; the acceptance probability is
    the trace of the projected state and the returned pair state is the
    renormalized reduction, together with its Bell fidelity.
    """
    if rho_ab.n_qubits % 2 != 0:
        raise ValueError("state must have an even number of qubits (n pairs)")
    n_pairs = rho_ab.n_qubits // 2
    if not 0 <= kept_pair_index < n_pairs:
        raise ValueError(f"kept pair index {kept_pair_index} out of range for {n_pairs} pairs")
    n = rho_ab.n_qubits
    mat = apply_matrix(rho_ab.matrix, u.matrix, u.target_qubits, n)
    proj = _pair_projector_matrix()
    for i in range(n_pairs):
        if i == kept_pair_index:
            continue
        full = embed_on_qubits(proj, (i, n_pairs + i), n)
        mat = full @ mat @ full
    p_accept = float(np.real(np.trace(mat)))
    if p_accept <= 1e-14:
        raise NothingAcceptedError("projection onto agreeing outcomes has zero weight")
    reduced = partial_trace_matrix(mat, [kept_pair_index, n_pairs + kept_pair_index], n) / p_accept
    fid = float(np.real(BELL_VEC.conj() @ reduced @ BELL_VEC))
    return p_accept, DensityOperator(2, reduced), fid
