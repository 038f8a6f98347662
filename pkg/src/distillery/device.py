"""Device calibration data and the noise models built from it.

Covers: loading per-qubit T1/T2/readout and per-edge ZZ-rate/gate-error
records, idle-noise sequences (Trotterized always-on ZZ plus damping and
dephasing, with optional staggered echo pulses), the idle-then-distill
experiments, and mirror two-qubit-Clifford layers for noise twirling.

Chains of physical qubits are mapped to register indices by position: the
qubit at chain position i is register qubit i, and chain edges (i, i+1) must
exist in the calibration.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .channels import GlobalDepolarizingChannel, bit_flip, damping_dephasing, gp_from_t1t2
from .circuit import (
    Barrier,
    ChannelOp,
    CircuitElement,
    Gate,
    Measure,
    NOISELESS,
    NoisyExecutionConfig,
    execute_exact,
    postselect,
)
from .densop import (
    BELL_VEC,
    DensityOperator,
    bell_fidelity_matrix,
    bell_pairs_on,
    partial_trace_matrix,
)
from .protocols import ProtocolSpec


class CalibrationError(ValueError):
    """A calibration file is malformed or physically inconsistent."""


@dataclass(frozen=True)
class QubitCalibration:
    id: int
    t1: float
    t2: float
    meas_error: float


@dataclass(frozen=True)
class EdgeCalibration:
    q1: int
    q2: int
    zz_rate: float  # Hz, signed
    gate_error: float


@dataclass(frozen=True)
class DeviceCalibration:
    qubits: tuple[QubitCalibration, ...]
    edges: tuple[EdgeCalibration, ...]
    meas_delay: float  # microseconds

    def __post_init__(self):
        ids = [q.id for q in self.qubits]
        if len(ids) != len(set(ids)):
            raise CalibrationError(f"duplicate qubit ids in calibration: {ids}")
        for q in self.qubits:
            if q.t1 <= 0:
                raise CalibrationError(f"qubit {q.id}: T1 must be positive, got {q.t1}")
            if not 0 < q.t2 <= 2 * q.t1:
                raise CalibrationError(
                    f"qubit {q.id}: T2 must satisfy 0 < T2 <= 2*T1, got T1={q.t1}, T2={q.t2}"
                )
            if not 0 <= q.meas_error <= 1:
                raise CalibrationError(f"qubit {q.id}: meas_error out of [0, 1]")
        known = set(ids)
        for e in self.edges:
            if e.q1 not in known or e.q2 not in known:
                raise CalibrationError(f"edge ({e.q1}, {e.q2}) references unknown qubits")
            if not 0 <= e.gate_error <= 1:
                raise CalibrationError(f"edge ({e.q1}, {e.q2}): gate_error out of [0, 1]")
        if self.meas_delay < 0:
            raise CalibrationError(f"meas_delay must be nonnegative, got {self.meas_delay}")

    def qubit(self, qid: int) -> QubitCalibration:
        for q in self.qubits:
            if q.id == qid:
                return q
        raise CalibrationError(f"qubit {qid} not in calibration")

    def edge(self, a: int, b: int) -> EdgeCalibration:
        for e in self.edges:
            if {e.q1, e.q2} == {a, b}:
                return e
        raise CalibrationError(f"edge ({a}, {b}) not in calibration")


def _require(data: dict, key: str, context: str):
    if key not in data:
        raise CalibrationError(f"{context}: missing field {key!r}")
    return data[key]


def calibration_from_dict(data: dict) -> DeviceCalibration:
    qubits = []
    for i, q in enumerate(_require(data, "qubits", "calibration")):
        ctx = f"qubits[{i}]"
        qubits.append(
            QubitCalibration(
                id=int(_require(q, "id", ctx)),
                t1=float(_require(q, "T1", ctx)),
                t2=float(_require(q, "T2", ctx)),
                meas_error=float(_require(q, "meas_error", ctx)),
            )
        )
    edges = []
    for i, e in enumerate(_require(data, "edges", "calibration")):
        ctx = f"edges[{i}]"
        edges.append(
            EdgeCalibration(
                q1=int(_require(e, "q1", ctx)),
                q2=int(_require(e, "q2", ctx)),
                zz_rate=float(_require(e, "zz_rate", ctx)),
                gate_error=float(_require(e, "gate_error", ctx)),
            )
        )
    return DeviceCalibration(tuple(qubits), tuple(edges), float(_require(data, "meas_delay", "calibration")))


def calibration_to_dict(calib: DeviceCalibration) -> dict:
    return {
        "qubits": [
            {"id": q.id, "T1": q.t1, "T2": q.t2, "meas_error": q.meas_error}
            for q in calib.qubits
        ],
        "edges": [
            {"q1": e.q1, "q2": e.q2, "zz_rate": e.zz_rate, "gate_error": e.gate_error}
            for e in calib.edges
        ],
        "meas_delay": calib.meas_delay,
    }


def load_calibration(path: str | Path) -> DeviceCalibration:
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as err:
            raise CalibrationError(f"{path}: not valid JSON ({err})") from err
    return calibration_from_dict(data)


def save_calibration(calib: DeviceCalibration, path: str | Path) -> None:
    Path(path).write_text(json.dumps(calibration_to_dict(calib), indent=2) + "\n")


def bundled_calibration_path(name: str) -> Path:
    """Path of a calibration fixture shipped with the package."""
    path = Path(__file__).parent / "calibrations" / f"{name}.json"
    if not path.exists():
        available = sorted(p.stem for p in path.parent.glob("*.json"))
        raise CalibrationError(f"no bundled calibration {name!r}; available: {available}")
    return path


# ---------------------------------------------------------------------------
# Idle noise


@dataclass(frozen=True)
class IdleSpec:
    """An idle window split into equal Trotter segments.

    ``duration_us`` is the total window length. Each segment applies the
    per-qubit damping-dephasing accumulated over duration/n followed by the
    per-edge ZZ phase for the same interval. Staggered echo mode inserts X
    pulses on even chain positions after segments n/2 and n and on odd
    positions after n/4 and 3n/4, which cancels pure ZZ evolution exactly
    (and requires n divisible by 4).
    """

    duration_us: float
    n_segments: int = 16
    dd_mode: str = "none"
    zz_enabled: bool = True

    def __post_init__(self):
        if self.duration_us < 0:
            raise ValueError(f"duration must be nonnegative, got {self.duration_us}")
        if self.n_segments < 1:
            raise ValueError(f"segment count must be >= 1, got {self.n_segments}")
        if self.dd_mode not in ("none", "staggered"):
            raise ValueError(f"dd_mode must be 'none' or 'staggered', got {self.dd_mode!r}")
        if self.dd_mode == "staggered" and self.n_segments % 4 != 0:
            raise ValueError("staggered echo needs a segment count divisible by 4")


def idle_sequence(
    chain: Sequence[int],
    spec: IdleSpec,
    calib: DeviceCalibration,
    include_damping: bool = True,
) -> list[CircuitElement]:
    """Noise elements for an idle window on a chain of adjacent qubits.

    ``chain`` holds physical qubit ids; emitted elements act on register
    positions 0..len(chain)-1. With ``include_damping`` off only the coherent
    ZZ part (and echo pulses) remains, which models perfect coherence.
    """
    chain = list(chain)
    if spec.duration_us == 0:
        return []
    n = spec.n_segments
    dt = spec.duration_us / n
    edge_angles = []
    if spec.zz_enabled:
        for pos in range(len(chain) - 1):
            rate = calib.edge(chain[pos], chain[pos + 1]).zz_rate
            edge_angles.append((pos, 2.0 * math.pi * rate * dt * 1e-6))
    pulse_after: dict[int, list[int]] = {}
    if spec.dd_mode == "staggered":
        for pos in range(len(chain)):
            segs = (n // 2, n) if pos % 2 == 0 else (n // 4, 3 * n // 4)
            for s in segs:
                pulse_after.setdefault(s, []).append(pos)
    elements: list[CircuitElement] = []
    for k in range(1, n + 1):
        if include_damping:
            for pos, qid in enumerate(chain):
                q = calib.qubit(qid)
                elements.append(
                    ChannelOp(damping_dephasing(gp_from_t1t2(dt, q.t1, q.t2), qubit=pos))
                )
        for pos, angle in edge_angles:
            elements.append(Gate("CPhase", (pos, pos + 1), angle))
        for pos in pulse_after.get(k, ()):
            elements.append(Gate("X", (pos,)))
    return elements


# ---------------------------------------------------------------------------
# Experiment circuits


def _swap_elements(a: int, b: int, gate_error: float, decomposition: str) -> list[CircuitElement]:
    if decomposition == "single_gate":
        steps = [("SWAP", (a, b))]
    elif decomposition == "three_cnots":
        steps = [("CNOT", (a, b)), ("CNOT", (b, a)), ("CNOT", (a, b))]
    else:
        raise ValueError(
            f"swap decomposition must be 'three_cnots' or 'single_gate', got {decomposition!r}"
        )
    out: list[CircuitElement] = []
    for name, targets in steps:
        out.append(Gate(name, targets))
        if gate_error > 0:
            out.append(ChannelOp(GlobalDepolarizingChannel(targets, gate_error)))
    return out


REORDER_SWAPS = {2: [(1, 2)], 3: [(1, 2), (3, 4), (2, 3)]}


def _prep_and_swap_stage(
    n_pairs: int, edge_gate_error, decomposition: str
) -> tuple[list[CircuitElement], list[CircuitElement]]:
    """Local Bell preparation and the reordering swaps that de-localize pairs.

    ``edge_gate_error`` maps a register edge (a, b) to a gate error; pass a
    callable for calibrated circuits or 0.0 when the executor attaches its
    own uniform gate noise.
    """
    get_err = edge_gate_error if callable(edge_gate_error) else (lambda a, b: edge_gate_error)
    prep: list[CircuitElement] = []
    for a, b in [(2 * j, 2 * j + 1) for j in range(n_pairs)]:
        prep.append(Gate("H", (a,)))
        prep.append(Gate("CNOT", (a, b)))
        err = get_err(a, b)
        if err > 0:
            prep.append(ChannelOp(GlobalDepolarizingChannel((a, b), err)))
    swap_stage: list[CircuitElement] = []
    for a, b in REORDER_SWAPS[n_pairs]:
        swap_stage.extend(_swap_elements(a, b, get_err(a, b), decomposition))
    return prep, swap_stage


def _check_stage(
    spec: ProtocolSpec, edge_gate_error, meas_error_of, meas_delay_damping
) -> list[CircuitElement]:
    """The protocol's check circuit with explicit per-edge and per-qubit noise."""
    get_err = edge_gate_error if callable(edge_gate_error) else (lambda a, b: edge_gate_error)
    elements: list[CircuitElement] = []
    for el in spec.circuit:
        if isinstance(el, Gate):
            elements.append(el)
            if len(el.targets) == 2:
                a, b = el.targets
                err = get_err(min(a, b), max(a, b))
                if err > 0:
                    elements.append(ChannelOp(GlobalDepolarizingChannel(el.targets, err)))
        elif isinstance(el, Measure):
            m = meas_error_of(el.qubit) if callable(meas_error_of) else meas_error_of
            if m > 0:
                elements.append(ChannelOp(bit_flip(m, qubit=el.qubit)))
            elements.append(el)
        else:
            elements.append(el)
    for ch in meas_delay_damping:
        elements.append(ch)
    return elements


@dataclass(frozen=True)
class IdleExperimentRow:
    delay_us: float
    pair_fidelities: tuple[float, ...]  # at the end of the idle window
    f_before: float
    f_after: float
    p_accept: float

    @property
    def ratio(self) -> float:
        return self.f_after / self.f_before


def idle_distill_experiment(
    spec: ProtocolSpec,
    chain: Sequence[int],
    calib: DeviceCalibration,
    delays_us: Sequence[float],
    idle: IdleSpec,
    swap_decomposition: str = "three_cnots",
    perfect_coherence: bool = False,
) -> list[IdleExperimentRow]:
    """Prepare, swap, idle for each delay, then distill, on calibrated qubits.

    All gate and measurement noise comes from the calibration (edge gate
    errors as two-qubit global depolarizing, per-qubit readout bit flips);
    the kept qubits pick up their measurement-delay damping while the check
    qubits are read out. ``perfect_coherence`` drops every damping-dephasing
    channel (the T1, T2 -> infinity limit) while keeping ZZ and echo pulses.
    """
    chain = list(chain)
    if len(chain) != spec.n_qubits:
        raise ValueError(f"chain length {len(chain)} does not match {spec.n_qubits}-qubit protocol")
    edge_err = lambda a, b: calib.edge(chain[a], chain[b]).gate_error
    meas_err = lambda pos: calib.qubit(chain[pos]).meas_error

    rows = []
    prep, swap_stage = _prep_and_swap_stage(spec.n_pairs, edge_err, swap_decomposition)
    for delay in delays_us:
        idle_stage = idle_sequence(
            chain, replace(idle, duration_us=delay), calib, include_damping=not perfect_coherence
        )
        meas_delay_damping = []
        if calib.meas_delay > 0 and not perfect_coherence:
            for pos in spec.kept_pair:
                q = calib.qubit(chain[pos])
                meas_delay_damping.append(
                    ChannelOp(damping_dephasing(gp_from_t1t2(calib.meas_delay, q.t1, q.t2), qubit=pos))
                )
        check = _check_stage(spec, edge_err, meas_err, meas_delay_damping)
        circuit = (
            prep
            + [Barrier("t0")]
            + swap_stage
            + [Barrier("t1")]
            + idle_stage
            + [Barrier("t2")]
            + check
        )
        init = DensityOperator(spec.n_qubits, _ground_state(spec.n_qubits))
        result = execute_exact(circuit, init, NOISELESS)
        at_t2 = result.snapshots["t2"].matrix
        fids = tuple(
            bell_fidelity_matrix(at_t2, pair, spec.n_qubits) for pair in spec.pairs
        )
        p_accept, kept = postselect(result, spec.accepts)
        reduced = partial_trace_matrix(kept.matrix, spec.kept_pair, spec.n_qubits)
        f_after = float(np.real(BELL_VEC.conj() @ reduced @ BELL_VEC))
        rows.append(IdleExperimentRow(float(delay), fids, max(fids), f_after, p_accept))
    return rows


def _ground_state(n: int) -> np.ndarray:
    mat = np.zeros((2**n, 2**n), dtype=complex)
    mat[0, 0] = 1.0
    return mat


# ---------------------------------------------------------------------------
# Mirror Clifford twirling


_WORD_LENGTH = 20


def mirror_clifford_layers(
    k: int,
    seed: int | np.random.Generator,
    pairs: Sequence[tuple[int, int]] = ((0, 1), (2, 3)),
) -> list[CircuitElement]:
    """k random two-qubit-Clifford layers followed by their exact mirror inverse.

    Each layer applies, to every listed qubit pair, a random word of
    generators from {H, S, CNOT (both directions)}; the second half undoes
    the first gate by gate, so the noiseless circuit is the identity.
    """
    if k < 0:
        raise ValueError(f"layer count must be nonnegative, got {k}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    first: list[Gate] = []
    for _ in range(k):
        for a, b in pairs:
            gens = (
                Gate("H", (a,)),
                Gate("H", (b,)),
                Gate("S", (a,)),
                Gate("S", (b,)),
                Gate("CNOT", (a, b)),
                Gate("CNOT", (b, a)),
            )
            picks = rng.integers(0, len(gens), size=_WORD_LENGTH)
            first.extend(gens[i] for i in picks)
    inverse_name = {"H": "H", "S": "Sdg", "Sdg": "S", "CNOT": "CNOT"}
    second = [Gate(inverse_name[g.name], g.targets) for g in reversed(first)]
    return list(first) + second


@dataclass(frozen=True)
class TwirlPoint:
    k: int
    f_before: float
    f_after: float
    p_accept: float

    @property
    def ratio(self) -> float:
        return self.f_after / self.f_before


def mirror_twirl_experiment(
    spec: ProtocolSpec,
    k_values: Sequence[int],
    n_seeds: int,
    gate_error: float,
    base_seed: int = 0,
) -> list[TwirlPoint]:
    """Seed-averaged distillation of pairs degraded by noisy mirror layers.

    The mirror layers run with two-qubit gate noise on freshly prepared
    pairs; the seed-averaged register state is then distilled with a perfect
    check circuit, mirroring a twirl toward global depolarizing noise.
    """
    if spec.n_pairs != 2:
        raise ValueError("the twirl experiment runs on a two-pair protocol")
    n = spec.n_qubits
    init = DensityOperator(n, bell_pairs_on(list(spec.pairs), n))
    cfg = NoisyExecutionConfig(gate_error=gate_error)
    points = []
    for k in k_values:
        acc = np.zeros((2**n, 2**n), dtype=complex)
        for s in range(n_seeds):
            rng = np.random.default_rng(np.random.SeedSequence([base_seed, k, s]))
            layers = mirror_clifford_layers(k, rng)
            result = execute_exact(layers, init, cfg)
            acc += result.unconditional_state().matrix
        avg = DensityOperator(n, acc / n_seeds)
        f_before = max(bell_fidelity_matrix(avg.matrix, pair, n) for pair in spec.pairs)
        result = execute_exact(spec.circuit, avg, NOISELESS)
        p_accept, kept = postselect(result, spec.accepts)
        reduced = partial_trace_matrix(kept.matrix, spec.kept_pair, n)
        f_after = float(np.real(BELL_VEC.conj() @ reduced @ BELL_VEC))
        points.append(TwirlPoint(k, f_before, f_after, p_accept))
    return points
