"""Parameter sweeps over the staged distillation experiments.

The staged circuit prepares local pairs, optionally degrades some of them to
set up an asymmetry, swaps halves so the pairs become non-local, applies a
waiting error (the swept variable), and finally runs the protocol's check
stage. Gate and measurement noise ride on the executor. Each grid point
yields one CSV row; rows carry the per-pair fidelities at the first barrier,
the pre-distillation fidelity at the last barrier, and the post-selected
outcome.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .channels import GlobalDepolarizingChannel, bit_flip, depolarizing_local
from .circuit import (
    Barrier,
    ChannelOp,
    CircuitElement,
    NoisyExecutionConfig,
    NothingAcceptedError,
    execute_exact,
    postselect,
)
from .densop import BELL_VEC, DensityOperator, bell_fidelity_matrix, partial_trace_matrix
from .device import (
    IdleSpec,
    _prep_and_swap_stage,
    bundled_calibration_path,
    idle_distill_experiment,
    load_calibration,
)
from .protocols import ProtocolSpec, get_protocol

CSV_HEADER_COMMENT = "# distillery-csv v1"

NOISE_FAMILIES = ("bitflip", "local_depol", "global_depol", "idle")
SWEEP_VARIABLES = {"bitflip": "q", "local_depol": "q", "global_depol": "lam", "idle": "delay"}

# qubits carrying the waiting error (one half of each non-local pair) and the
# qubits whose extra depolarizing sets up the pair asymmetry
WAIT_QUBITS = {2: (1, 2), 3: (3, 4, 5)}
ASYMMETRY_QUBITS = {2: (0,), 3: (0, 4)}
LOCAL_PAIRS = {2: ((0, 1), (2, 3)), 3: ((0, 1), (2, 3), (4, 5))}


class ConfigError(ValueError):
    """A sweep configuration is malformed; the message names the field."""


@dataclass(frozen=True)
class SweepGrid:
    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not vals:
            raise ConfigError("sweep.values: grid must be non-empty")
        if any(b < a for a, b in zip(vals, vals[1:])):
            raise ConfigError("sweep.values: grid must be monotone nondecreasing")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepGrid":
        if "values" in data:
            return cls(tuple(data["values"]))
        try:
            start, stop, num = float(data["start"]), float(data["stop"]), int(data["num"])
        except KeyError as err:
            raise ConfigError(f"sweep: missing field {err.args[0]!r}") from None
        if num < 1:
            raise ConfigError("sweep.num: must be >= 1")
        return cls(tuple(np.linspace(start, stop, num)))


@dataclass(frozen=True)
class IdleOptions:
    calibration: str
    chain: tuple[int, ...]
    n_segments: int = 16
    dd_mode: str = "staggered"
    zz_enabled: bool = True
    perfect_coherence: bool = False


@dataclass(frozen=True)
class SweepConfig:
    protocol: str
    noise_family: str
    sweep: SweepGrid
    variable: str
    asymmetry_p: float = 0.0
    asymmetry_ratio: float | None = None
    gate_error: tuple[float, ...] = (0.0,)
    meas_error: tuple[float, ...] = (0.0,)
    swap_decomposition: str = "three_cnots"
    seed: int = 0
    out: str | None = None
    idle: IdleOptions | None = None

    def __post_init__(self):
        if self.noise_family not in NOISE_FAMILIES:
            raise ConfigError(
                f"noise_family: must be one of {NOISE_FAMILIES}, got {self.noise_family!r}"
            )
        expected_var = SWEEP_VARIABLES[self.noise_family]
        if self.variable != expected_var:
            raise ConfigError(
                f"sweep.variable: family {self.noise_family!r} sweeps {expected_var!r}, "
                f"got {self.variable!r}"
            )
        if not 0.0 <= self.asymmetry_p <= 1.0:
            raise ConfigError(f"asymmetry_p: must be in [0, 1], got {self.asymmetry_p}")
        if self.asymmetry_ratio is not None and not 0.0 < self.asymmetry_ratio <= 1.0:
            raise ConfigError(f"asymmetry_ratio: must be in (0, 1], got {self.asymmetry_ratio}")
        for g in self.gate_error:
            if not 0.0 <= g <= 1.0:
                raise ConfigError(f"gate_error: must be in [0, 1], got {g}")
        for m in self.meas_error:
            if not 0.0 <= m <= 1.0:
                raise ConfigError(f"meas_error: must be in [0, 1], got {m}")
        if self.swap_decomposition not in ("three_cnots", "single_gate"):
            raise ConfigError(
                f"swap_decomposition: must be 'three_cnots' or 'single_gate', "
                f"got {self.swap_decomposition!r}"
            )
        if self.noise_family == "idle" and self.idle is None:
            raise ConfigError("idle: required when noise_family is 'idle'")
        if self.noise_family == "bitflip" and any(v > 0.5 for v in self.sweep.values):
            raise ConfigError("sweep.values: bit-flip probabilities must stay in [0, 1/2]")


def _as_float_tuple(value, name: str) -> tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    raise ConfigError(f"{name}: expected a number or list of numbers, got {value!r}")


def config_from_dict(data: dict) -> SweepConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: expected a JSON object")
    try:
        protocol = data["protocol"]
        family = data["noise_family"]
        sweep_data = data["sweep"]
    except KeyError as err:
        raise ConfigError(f"config: missing field {err.args[0]!r}") from None
    get_protocol(protocol)  # raises on unknown names
    if not isinstance(sweep_data, dict):
        raise ConfigError("sweep: expected an object with a grid")
    variable = sweep_data.get("variable", SWEEP_VARIABLES.get(family, "q"))
    idle = None
    if data.get("idle") is not None:
        idata = data["idle"]
        try:
            idle = IdleOptions(
                calibration=str(idata["calibration"]),
                chain=tuple(int(q) for q in idata["chain"]),
                n_segments=int(idata.get("n_segments", 16)),
                dd_mode=str(idata.get("dd_mode", "staggered")),
                zz_enabled=bool(idata.get("zz_enabled", True)),
                perfect_coherence=bool(idata.get("perfect_coherence", False)),
            )
        except KeyError as err:
            raise ConfigError(f"idle: missing field {err.args[0]!r}") from None
    return SweepConfig(
        protocol=str(protocol),
        noise_family=str(family),
        sweep=SweepGrid.from_dict(sweep_data),
        variable=str(variable),
        asymmetry_p=float(data.get("asymmetry_p", 0.0)),
        asymmetry_ratio=(None if data.get("asymmetry_ratio") is None else float(data["asymmetry_ratio"])),
        gate_error=_as_float_tuple(data.get("gate_error", 0.0), "gate_error"),
        meas_error=_as_float_tuple(data.get("meas_error", 0.0), "meas_error"),
        swap_decomposition=str(data.get("swap_decomposition", "three_cnots")),
        seed=int(data.get("seed", 0)),
        out=data.get("out"),
        idle=idle,
    )


def config_to_dict(cfg: SweepConfig) -> dict:
    out = {
        "protocol": cfg.protocol,
        "noise_family": cfg.noise_family,
        "sweep": {"variable": cfg.variable, "values": list(cfg.sweep.values)},
        "asymmetry_p": cfg.asymmetry_p,
        "asymmetry_ratio": cfg.asymmetry_ratio,
        "gate_error": list(cfg.gate_error),
        "meas_error": list(cfg.meas_error),
        "swap_decomposition": cfg.swap_decomposition,
        "seed": cfg.seed,
        "out": cfg.out,
    }
    if cfg.idle is not None:
        out["idle"] = {
            "calibration": cfg.idle.calibration,
            "chain": list(cfg.idle.chain),
            "n_segments": cfg.idle.n_segments,
            "dd_mode": cfg.idle.dd_mode,
            "zz_enabled": cfg.idle.zz_enabled,
            "perfect_coherence": cfg.idle.perfect_coherence,
        }
    return out


def load_config(path: str | Path) -> SweepConfig:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config: not valid JSON ({err})") from None
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# Staged circuits


def _wait_elements(family: str, n_pairs: int, value: float, n_qubits: int) -> list[CircuitElement]:
    if family == "bitflip":
        return [ChannelOp(bit_flip(value, qubit=q)) for q in WAIT_QUBITS[n_pairs]]
    if family == "local_depol":
        return [ChannelOp(depolarizing_local(value, qubit=q)) for q in WAIT_QUBITS[n_pairs]]
    if family == "global_depol":
        return [ChannelOp(GlobalDepolarizingChannel(tuple(range(n_qubits)), value))]
    raise ConfigError(f"noise_family: no waiting channel for {family!r}")


def build_staged_circuit(
    spec: ProtocolSpec,
    family: str,
    asymmetry_p: float,
    wait_value: float,
    swap_decomposition: str = "three_cnots",
) -> list[CircuitElement]:
    """Prep, asymmetry, swap, waiting error, then the protocol's checks.

    Uniform gate/measurement noise is left to the executor configuration, so
    the asymmetry and waiting channels are the only explicit noise here.
    """
    prep, swap_stage = _prep_and_swap_stage(spec.n_pairs, 0.0, swap_decomposition)
    elements = list(prep)
    if asymmetry_p > 0:
        for q in ASYMMETRY_QUBITS[spec.n_pairs]:
            elements.append(ChannelOp(depolarizing_local(asymmetry_p, qubit=q)))
    elements.append(Barrier("t0"))
    elements.extend(swap_stage)
    elements.append(Barrier("t1"))
    elements.extend(_wait_elements(family, spec.n_pairs, wait_value, spec.n_qubits))
    elements.append(Barrier("t2"))
    elements.extend(spec.circuit)
    return elements


@dataclass(frozen=True)
class SweepRow:
    sweep_value: float
    pair_fidelities: tuple[float, ...]  # at the first barrier (idle: end of wait)
    f_before: float
    f_after: float | None
    p_accept: float

    @property
    def ratio(self) -> float | None:
        return None if self.f_after is None else self.f_after / self.f_before

    @property
    def err_decrease(self) -> float | None:
        if self.f_after is None or self.f_before >= 1.0:
            return None
        return 100.0 * (self.f_after - self.f_before) / (1.0 - self.f_before)


def _ground(n: int) -> DensityOperator:
    mat = np.zeros((2**n, 2**n), dtype=complex)
    mat[0, 0] = 1.0
    return DensityOperator(n, mat)


def run_staged_point(
    spec: ProtocolSpec,
    family: str,
    asymmetry_p: float,
    wait_value: float,
    exec_cfg: NoisyExecutionConfig,
    swap_decomposition: str = "three_cnots",
) -> SweepRow:
    circuit = build_staged_circuit(spec, family, asymmetry_p, wait_value, swap_decomposition)
    result = execute_exact(circuit, _ground(spec.n_qubits), exec_cfg)
    at_t0 = result.snapshots["t0"].matrix
    fids = tuple(
        bell_fidelity_matrix(at_t0, pair, spec.n_qubits) for pair in LOCAL_PAIRS[spec.n_pairs]
    )
    at_t2 = result.snapshots["t2"].matrix
    f_before = max(bell_fidelity_matrix(at_t2, pair, spec.n_qubits) for pair in spec.pairs)
    try:
        p_accept, kept = postselect(result, spec.accepts)
    except NothingAcceptedError:
        return SweepRow(wait_value, fids, f_before, None, 0.0)
    reduced = partial_trace_matrix(kept.matrix, spec.kept_pair, spec.n_qubits)
    f_after = float(np.real(BELL_VEC.conj() @ reduced @ BELL_VEC))
    return SweepRow(wait_value, fids, f_before, f_after, p_accept)


def pair_fidelities_at_prep(
    spec: ProtocolSpec, asymmetry_p: float, exec_cfg: NoisyExecutionConfig
) -> tuple[float, ...]:
    """Per-pair fidelities at the first barrier, before any swap."""
    circuit = build_staged_circuit(spec, "local_depol", asymmetry_p, 0.0, "single_gate")
    cut = circuit[: next(i for i, el in enumerate(circuit) if isinstance(el, Barrier)) + 1]
    result = execute_exact(cut, _ground(spec.n_qubits), exec_cfg)
    at_t0 = result.snapshots["t0"].matrix
    return tuple(
        bell_fidelity_matrix(at_t0, pair, spec.n_qubits) for pair in LOCAL_PAIRS[spec.n_pairs]
    )


def solve_asymmetry(
    spec: ProtocolSpec,
    target_ratio: float,
    exec_cfg: NoisyExecutionConfig,
    tol: float = 1e-6,
) -> float:
    """Depolarizing strength making the degraded pairs hit F1 = ratio * F2.

    Bisection against the simulated fidelity ratio at the first barrier;
    circuit noise shifts the naive 1 - p = ratio relation, so the target is
    matched on the simulated ratio directly.
    """
    if not 0.0 < target_ratio <= 1.0:
        raise ConfigError(f"asymmetry_ratio: must be in (0, 1], got {target_ratio}")

    def ratio_at(p: float) -> float:
        fids = pair_fidelities_at_prep(spec, p, exec_cfg)
        return fids[0] / fids[1]

    lo, hi = 0.0, 1.0
    if ratio_at(hi) > target_ratio:
        raise ConfigError(f"asymmetry_ratio: {target_ratio} unreachable even at full depolarizing")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo < tol:
            break
        if ratio_at(mid) > target_ratio:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _idle_rows(config: SweepConfig) -> list[SweepRow]:
    opts = config.idle
    path = Path(opts.calibration)
    if not path.exists():
        path = bundled_calibration_path(opts.calibration)
    calib = load_calibration(path)
    spec = get_protocol(config.protocol)
    idle = IdleSpec(
        duration_us=0.0,
        n_segments=opts.n_segments,
        dd_mode=opts.dd_mode,
        zz_enabled=opts.zz_enabled,
    )
    rows = idle_distill_experiment(
        spec,
        opts.chain,
        calib,
        config.sweep.values,
        idle,
        swap_decomposition=config.swap_decomposition,
        perfect_coherence=opts.perfect_coherence,
    )
    return [
        SweepRow(r.delay_us, r.pair_fidelities, r.f_before, r.f_after, r.p_accept)
        for r in rows
    ]


def _staged_point_task(args) -> SweepRow:
    protocol, family, asym_p, value, g, m, decomposition = args
    spec = get_protocol(protocol)
    cfg = NoisyExecutionConfig(gate_error=g, meas_error=m)
    return run_staged_point(spec, family, asym_p, value, cfg, decomposition)


def run_sweep(config: SweepConfig, gate_error: float, meas_error: float, jobs: int = 1) -> list[SweepRow]:
    """All grid points for one (gate error, measurement error) setting."""
    if config.noise_family == "idle":
        return _idle_rows(config)
    spec = get_protocol(config.protocol)
    exec_cfg = NoisyExecutionConfig(gate_error=gate_error, meas_error=meas_error)
    asym_p = config.asymmetry_p
    if config.asymmetry_ratio is not None:
        asym_p = solve_asymmetry(spec, config.asymmetry_ratio, exec_cfg)
    tasks = [
        (config.protocol, config.noise_family, asym_p, v, gate_error, meas_error, config.swap_decomposition)
        for v in config.sweep.values
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_staged_point_task, tasks))
    return [_staged_point_task(t) for t in tasks]


# ---------------------------------------------------------------------------
# CSV output


def _fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{x:.12g}"


def rows_to_csv(rows: Sequence[SweepRow], n_pairs: int) -> str:
    fid_cols = [f"F{i + 1}" for i in range(n_pairs)]
    header = ["sweep_value", *fid_cols, "F_b", "F_a", "p_accept", "r", "eps_d"]
    lines = [CSV_HEADER_COMMENT, ",".join(header)]
    for row in rows:
        cells = [_fmt(row.sweep_value)]
        cells += [_fmt(f) for f in row.pair_fidelities]
        cells += [
            _fmt(row.f_before),
            _fmt(row.f_after),
            _fmt(row.p_accept),
            _fmt(row.ratio),
            _fmt(row.err_decrease),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def idle_rows_to_csv(rows: Sequence[SweepRow], n_pairs: int) -> str:
    """simulate-idle output: delay, pair fidelities, F_b, F_a, p_accept, r."""
    fid_cols = [f"F{i + 1}" for i in range(n_pairs)]
    header = ["delay", *fid_cols, "F_b", "F_a", "p_accept", "r"]
    lines = [CSV_HEADER_COMMENT, ",".join(header)]
    for row in rows:
        cells = [_fmt(row.sweep_value)]
        cells += [_fmt(f) for f in row.pair_fidelities]
        cells += [_fmt(row.f_before), _fmt(row.f_after), _fmt(row.p_accept), _fmt(row.ratio)]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
