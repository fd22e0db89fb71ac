"""Batch command-line interface.

Subcommands:
  synth   synthesize a gadget, print its brute-force residual and gate stats
  build   compile an automaton file to a pipeline stage circuit file
  sim     simulate a circuit file and print the report
  decide  end-to-end decision for an automaton file

Exit codes: 0 success / verdict correct; 1 failed bound or residual check;
2 usage error; 3 zero postselection overlap; 4 acceptance probability
exactly one half.  All numeric output carries 17 significant digits so
reports diff cleanly.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import synth as _synth
from .automaton import parse_automaton
from .errors import FormatError, HalfProbability, PostforgeError, ZeroOverlap
from .ir import gate_stats, std_gate
from .pipeline import build_artifacts, decide
from .sim import run, run_dqc1_mixed
from .textfmt import parse, serialize

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_ZERO_OVERLAP = 3
EXIT_HALF_PROBABILITY = 4

_STAGES = ("qx", "vx", "uplus", "uminus", "final")


def _default_tol(args_tol: float | None) -> float:
    if args_tol is not None:
        return args_tol
    env = os.environ.get("POSTFORGE_TOL")
    return float(env) if env else 1e-9


def _print_stats(circuit) -> None:
    stats = gate_stats(circuit)
    for key in sorted(stats.counts):
        print(f"count {key} {stats.counts[key]}")
    print(f"gates {stats.total_gates}")
    print(f"postselects {stats.n_postselect}")
    print(f"measures {stats.n_measure}")
    print(f"qubits {stats.n_qubits}")


def _synth_result(args, parser):
    kind = args.kind
    if kind == "mcx":
        if args.k is None or args.k < 0:
            parser.error("mcx needs --k >= 0")
        pols = None
        if args.polarities:
            if len(args.polarities) != args.k or set(args.polarities) - {"0", "1"}:
                parser.error("--polarities must be a 0/1 string of length k")
            pols = [int(c) for c in args.polarities]
        return _synth.synth_mcx(args.k, pols), _synth.reference_mcx(args.k, pols)
    if kind == "inc":
        if args.n is None or args.n < 1:
            parser.error("inc needs --n >= 1")
        return _synth.synth_inc_pow2(args.n), _synth.reference_inc(args.n)
    if kind == "cinc":
        if args.n is None or args.n < 1 or args.k is None or args.k < 1:
            parser.error("cinc needs --n >= 1 and --k >= 1")
        return (_synth.synth_controlled_inc(args.n, args.k, args.mode),
                _synth.reference_controlled_inc(args.n, args.k, args.mode))
    if kind == "incmod":
        if args.modulus is None or args.width is None or args.modulus < 2 \
                or (1 << args.width) < args.modulus:
            parser.error("incmod needs 2 <= --modulus <= 2^--width")
        return (_synth.synth_inc_mod(args.modulus, args.width),
                _synth.reference_inc_mod(args.modulus, args.width))
    if kind == "cgate":
        if args.k is None or args.k < 1 or args.gate is None:
            parser.error("cgate needs --gate and --k >= 1")
        gate = std_gate(args.gate)
        if args.mode == "or":
            return (_synth.synth_or_controlled_gate(gate, args.k),
                    _synth.reference_controlled(gate, args.k, "or"))
        return (_synth.synth_controlled_gate(gate, args.k),
                _synth.reference_controlled(gate, args.k, "and"))
    if kind == "w":
        return _synth.gadget_w_basis(), _synth.reference_w_basis()
    if kind == "or3":
        return _synth.gadget_or3(), _synth.reference_or3()
    parser.error(f"unknown synth kind {kind!r}")


def _cmd_synth(args, parser) -> int:
    result, reference = _synth_result(args, parser)
    tol = _default_tol(args.tol)
    block, leak = _synth.data_block_unitary(result)
    residual = max(float(np.abs(block - reference).max()), float(np.sqrt(leak)))
    print(f"residual {residual:.17g}")
    _print_stats(result.circuit)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(serialize(result.circuit))
        print(f"wrote {args.output}")
    return EXIT_OK if residual <= tol else EXIT_CHECK_FAILED


def _cmd_build(args, parser) -> int:
    with open(args.automaton) as fh:
        aut = parse_automaton(fh.read())
    art = build_artifacts(aut, r=args.r, counter_width=args.N)
    stage = {"qx": art.qx, "vx": art.vx, "uplus": art.uplus,
             "uminus": art.uminus, "final": art.final}[args.stage]
    with open(args.output, "w") as fh:
        fh.write(serialize(stage))
    print(f"wrote {args.output}")
    print(f"p_a {art.p_a}")
    print(f"qubits {stage.n_qubits}")
    return EXIT_OK


def _cmd_sim(args, parser) -> int:
    with open(args.circuit) as fh:
        circuit = parse(fh.read())
    if args.dqc1_clean is not None:
        report = run_dqc1_mixed(circuit, clean=args.dqc1_clean)
    else:
        report = run(circuit)
    sys.stdout.write(report.text())
    return EXIT_OK


def _cmd_decide(args, parser) -> int:
    with open(args.automaton) as fh:
        aut = parse_automaton(fh.read())
    rpt = decide(aut, r=args.r, counter_width=args.N, dqc1=args.dqc1)
    sys.stdout.write(rpt.text())
    return EXIT_OK if rpt.correct and rpt.bound_ok else EXIT_CHECK_FAILED


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="postforge")
    sub = parser.add_subparsers(dest="command", required=True)

    p_synth = sub.add_parser("synth", help="synthesize and verify a gadget")
    p_synth.add_argument("kind", choices=["mcx", "cinc", "inc", "incmod", "cgate", "w", "or3"])
    p_synth.add_argument("--k", type=int)
    p_synth.add_argument("--n", type=int)
    p_synth.add_argument("--modulus", type=int)
    p_synth.add_argument("--width", type=int)
    p_synth.add_argument("--mode", choices=["and", "or"], default="and")
    p_synth.add_argument("--gate", choices=["h", "x", "t", "tdg"])
    p_synth.add_argument("--polarities")
    p_synth.add_argument("--tol", type=float)
    p_synth.add_argument("-o", "--output")

    p_build = sub.add_parser("build", help="compile an automaton to a stage circuit")
    p_build.add_argument("automaton")
    p_build.add_argument("--stage", choices=_STAGES, required=True)
    p_build.add_argument("--r", type=int, default=1)
    p_build.add_argument("--N", type=int, default=None)
    p_build.add_argument("-o", "--output", required=True)

    p_sim = sub.add_parser("sim", help="simulate a circuit file")
    p_sim.add_argument("circuit")
    p_sim.add_argument("--dqc1-clean", type=int, default=None)

    p_dec = sub.add_parser("decide", help="end-to-end decision for an automaton")
    p_dec.add_argument("automaton")
    p_dec.add_argument("--r", type=int, default=1)
    p_dec.add_argument("--N", type=int, default=None)
    p_dec.add_argument("--dqc1", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handler = {"synth": _cmd_synth, "build": _cmd_build,
               "sim": _cmd_sim, "decide": _cmd_decide}[args.command]
    try:
        return handler(args, parser)
    except SystemExit as exc:  # parser.error inside handlers
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except ZeroOverlap as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ZERO_OVERLAP
    except HalfProbability as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HALF_PROBABILITY
    except (FormatError, PostforgeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
