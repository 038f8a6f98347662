"""Command-line front end.

Subcommands: sweep, analytic, enumerate, simulate-idle, simulate,
validate-config. Exit codes: 0 success, 2 configuration error, 3 runtime
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import analytic
from .circuit import (
    NoisyExecutionConfig,
    NothingAcceptedError,
    circuit_from_json,
    execute_exact,
)
from .densop import DensityOperator, bell_fidelity_matrix, bell_pairs_on
from .device import (
    CalibrationError,
    IdleSpec,
    bundled_calibration_path,
    idle_distill_experiment,
    load_calibration,
)
from .protocols import PROTOCOL_NAMES, get_protocol
from .sweep import (
    ConfigError,
    SweepConfig,
    SweepRow,
    config_to_dict,
    idle_rows_to_csv,
    load_config,
    rows_to_csv,
    run_sweep,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _out_path_for(base: str, g: float, m: float, multiple: bool) -> str:
    if not multiple:
        return base
    p = Path(base)
    return str(p.with_name(f"{p.stem}_g{g:g}_m{m:g}{p.suffix or '.csv'}"))


def cmd_sweep(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = SweepConfig(**{**config.__dict__, "seed": args.seed})
    if args.print_config:
        print(json.dumps(config_to_dict(config), indent=2))
        return EXIT_OK
    out_base = args.out or config.out
    combos = [(g, m) for g in config.gate_error for m in config.meas_error]
    multiple = len(combos) > 1
    if out_base is None and multiple:
        raise ConfigError("out: an output path is required when gate/meas errors are lists")
    spec = get_protocol(config.protocol)
    for g, m in combos:
        rows = run_sweep(config, g, m, jobs=args.jobs)
        text = rows_to_csv(rows, spec.n_pairs)
        _write_text(None if out_base is None else _out_path_for(out_base, g, m, multiple), text)
    return EXIT_OK


def cmd_validate_config(args) -> int:
    config = load_config(args.config)
    print(json.dumps(config_to_dict(config), indent=2))
    return EXIT_OK


def cmd_analytic(args) -> int:
    proto = args.protocol.lower()
    family = args.family.lower()
    if family == "bitflip":
        if proto != "z2b":
            raise ConfigError("analytic: bit-flip closed form is for the z2b protocol")
        res = analytic.recurrence_bitflip(args.p, args.q)
    elif family == "local_depol":
        if proto == "z2b":
            res = analytic.z2b_local_depol(args.p, args.q)
        elif proto == "zx3b":
            res = analytic.zx3b_local_depol(args.p, args.q)
        else:
            raise ConfigError(f"analytic: no local depolarizing closed form for {proto!r}")
    elif family == "global_depol":
        if args.lam is None:
            raise ConfigError("analytic: global_depol requires --lam")
        res = analytic.global_depol_distill(proto, args.lam)
        payload = {
            "protocol": proto,
            "noise_family": family,
            "lam": args.lam,
            "p_accept": res.acceptance_prob,
            "F_b": res.fidelity_before,
            "F_a": res.fidelity_after,
            "r": res.ratio,
        }
        _print_analytic(payload, args.json)
        return EXIT_OK
    else:
        raise ConfigError(
            f"analytic: unknown noise family {args.family!r} "
            "(expected bitflip, local_depol, or global_depol)"
        )
    payload = {
        "protocol": proto,
        "noise_family": family,
        "p": args.p,
        "q": args.q,
        "p_accept": res.acceptance_prob,
        "F_b": res.fidelity_before,
        "F_a": res.fidelity_after,
        "r": res.ratio,
    }
    _print_analytic(payload, args.json)
    return EXIT_OK


def _print_analytic(payload: dict, as_json: bool) -> None:
    if as_json:
        print(json.dumps(payload))
        return
    for key, value in payload.items():
        print(f"{key}: {value:.12g}" if isinstance(value, float) else f"{key}: {value}")


def cmd_enumerate(args) -> int:
    result = analytic.enumerate_protocol(args.protocol)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["error", "probability_monomial", "residual"])
    for row in result.rows:
        writer.writerow([row.error_label, row.monomial, row.residual_label])
    _write_text(args.out, buf.getvalue())
    return EXIT_OK


def _parse_chain(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(f"chain: expected comma-separated integers, got {text!r}") from None


def _parse_delays(text: str) -> list[float]:
    try:
        if ":" in text:
            start, stop, step = (float(tok) for tok in text.split(":"))
            if step <= 0:
                raise ConfigError("delays: step must be positive")
            out = []
            v = start
            while v <= stop + 1e-9:
                out.append(round(v, 9))
                v += step
            return out
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(
            f"delays: expected 'start:stop:step' or comma-separated values, got {text!r}"
        ) from None


def cmd_simulate_idle(args) -> int:
    path = Path(args.calibration)
    if not path.exists():
        path = bundled_calibration_path(args.calibration)
    calib = load_calibration(path)
    spec = get_protocol(args.protocol)
    chain = _parse_chain(args.chain)
    delays = _parse_delays(args.delays)
    idle = IdleSpec(
        duration_us=0.0,
        n_segments=args.segments,
        dd_mode=args.dd,
        zz_enabled=not args.no_zz,
    )
    rows = idle_distill_experiment(
        spec,
        chain,
        calib,
        delays,
        idle,
        swap_decomposition=args.swap_decomposition,
        perfect_coherence=args.perfect_coherence,
    )
    sweep_rows = [
        SweepRow(r.delay_us, r.pair_fidelities, r.f_before, r.f_after, r.p_accept) for r in rows
    ]
    _write_text(args.out, idle_rows_to_csv(sweep_rows, spec.n_pairs))
    return EXIT_OK


def cmd_simulate(args) -> int:
    circuit = circuit_from_json(Path(args.circuit).read_text())
    n = args.qubits
    if args.init_bell_pairs:
        pairs = []
        for tok in args.init_bell_pairs.split(","):
            a, b = tok.split("-")
            pairs.append((int(a), int(b)))
        init = DensityOperator(n, bell_pairs_on(pairs, n))
    else:
        import numpy as np

        mat = np.zeros((2**n, 2**n), dtype=complex)
        mat[0, 0] = 1.0
        init = DensityOperator(n, mat)
    cfg = NoisyExecutionConfig(gate_error=args.gate_error, meas_error=args.meas_error)
    result = execute_exact(circuit, init, cfg)
    payload = {
        "labels": list(result.record.labels),
        "outcomes": {
            "".join(str(b) for b in outcome): prob
            for outcome, prob in sorted(result.record.joint_probabilities.items())
        },
    }
    if args.fidelity_pair:
        a, b = (int(t) for t in args.fidelity_pair.split(","))
        state = result.unconditional_state()
        payload["bell_fidelity"] = bell_fidelity_matrix(state.matrix, (a, b), n)
    print(json.dumps(payload, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distillery",
        description="Simulate and analyze post-selected entanglement distillation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a parameter sweep from a JSON config, emit CSV")
    p.add_argument("--config", required=True, help="sweep configuration JSON")
    p.add_argument("--out", default=None, help="output CSV path (default: config 'out' or stdout)")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for grid points")
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("analytic", help="evaluate closed-form distillation results")
    p.add_argument("protocol", choices=list(PROTOCOL_NAMES))
    p.add_argument("family", help="bitflip, local_depol, or global_depol")
    p.add_argument("--p", type=float, default=0.0)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(fn=cmd_analytic)

    p = sub.add_parser("enumerate", help="emit the accepted-error table as CSV")
    p.add_argument("protocol", choices=list(PROTOCOL_NAMES))
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_enumerate)

    p = sub.add_parser("simulate-idle", help="idle-then-distill experiment on a calibrated chain")
    p.add_argument("--calibration", required=True, help="calibration JSON path or bundled name")
    p.add_argument("--protocol", required=True, choices=list(PROTOCOL_NAMES))
    p.add_argument("--chain", required=True, help="comma-separated physical qubit ids")
    p.add_argument("--delays", required=True, help="'start:stop:step' in us, or comma list")
    p.add_argument("--segments", type=int, default=16, help="Trotter segments per idle window")
    p.add_argument("--dd", choices=["none", "staggered"], default="staggered")
    p.add_argument("--no-zz", action="store_true", help="disable ZZ crosstalk")
    p.add_argument("--perfect-coherence", action="store_true", help="drop all T1/T2 damping")
    p.add_argument(
        "--swap-decomposition", choices=["three_cnots", "single_gate"], default="three_cnots"
    )
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_simulate_idle)

    p = sub.add_parser("simulate", help="execute a circuit JSON file exactly")
    p.add_argument("--circuit", required=True, help="circuit JSON path")
    p.add_argument("--qubits", type=int, required=True, help="register size")
    p.add_argument("--init-bell-pairs", default=None, help="e.g. '0-2,1-3' (default: all zeros)")
    p.add_argument("--gate-error", type=float, default=0.0)
    p.add_argument("--meas-error", type=float, default=0.0)
    p.add_argument("--fidelity-pair", default=None, help="report Bell fidelity of 'a,b'")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("validate-config", help="validate a sweep config and print it resolved")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_validate_config)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CalibrationError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NothingAcceptedError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
