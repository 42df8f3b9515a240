"""Command line interface.

Exit codes: 0 pass, 2 certificate failure, 3 configuration or contract
error, 4 resource limit.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BosonicError, ConfigurationError, ContractViolation
from .fock import load_matrix, set_tolerances
from .oracles import get_oracle
from .pipeline import DEFAULT_MAX_BLOCK_CUTOFF, PipelineConfig, compile_physical_unitary, verify
from .polyham import expand_qp, prepare_state_details, synth_hermitian, synth_multimode


def _write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")


def _load_state(path) -> np.ndarray:
    payload = json.loads(Path(path).read_text())
    amps = payload.get("amplitudes", payload) if isinstance(payload, dict) else payload
    try:
        return np.array([complex(a[0], a[1]) if isinstance(a, list) else complex(a) for a in amps])
    except (TypeError, ValueError, IndexError) as exc:
        raise ContractViolation(f"{path}: expected a list of amplitudes or [re, im] pairs") from exc


def cmd_truncate(args) -> dict:
    from .truncation import effective_dimension

    result = effective_dimension(get_oracle(args.oracle), args.energy, args.eps, args.samples, args.seed)
    cert = result.certificate.to_json()
    if args.out:
        _write_json(args.out, cert)
    print(
        f"M = {cert['M']}, N = {cert['N']}, delta = {cert['delta']:.3e}, "
        f"sampled worst distance = {cert['sampled_worst_distance']:.4f} <= {args.eps}"
    )
    return {"status": "passed", "certificate": cert}


def cmd_synth(args) -> dict:
    h = load_matrix(args.hamiltonian)
    if args.cutoffs:
        cutoffs = [int(c) for c in args.cutoffs.split(",")]
        if args.modes is not None and args.modes != len(cutoffs):
            raise ConfigurationError("--modes does not match the number of --cutoffs")
        p = synth_multimode(h, cutoffs)
    else:
        if args.modes not in (None, 1):
            raise ConfigurationError("multimode synthesis needs --cutoffs")
        p = synth_hermitian(h)
    payload = expand_qp(p).to_json() if args.qp else p.to_json()
    _write_json(args.out, payload)
    print(f"{len(p.terms)} terms, normal-ordered degree {p.degree}, written to {args.out}")
    return {"status": "passed", "terms": len(p.terms), "degree": p.degree, "block_cutoffs": list(p.block_cutoffs)}


def cmd_prepare_state(args) -> dict:
    prep = prepare_state_details(_load_state(args.target), args.eps)
    _write_json(args.out, prep.hamiltonian.to_json())
    print(f"d_eps = {prep.cutoff}, degree {prep.hamiltonian.degree}, written to {args.out}")
    return {"status": "passed", "d_eps": prep.cutoff, "degree": prep.hamiltonian.degree}


def cmd_compile(args) -> dict:
    config = PipelineConfig(
        oracle=args.oracle,
        E=args.energy,
        epsilon=args.eps,
        samples=args.samples,
        rng_seed=args.seed,
        poly_path=args.out,
        report_path=args.report,
        tol_block=args.tol_block,
        max_block_cutoff=args.max_block_cutoff,
    )
    report, _ = compile_physical_unitary(config)
    print(
        f"{report.status}: M = {report.M}, N = {report.N}, generator cutoff {report.generator_cutoff}, "
        f"degree {report.degree}, sampled distance {report.sampled_worst_distance:.4f}"
    )
    for failure in report.failures:
        print(f"  FAILED {failure}")
    return report.to_json()


def cmd_sk_compile(args) -> dict:
    from .gate_compiler import compile_physical
    from .solovay_kitaev import NetDictionary, build_net, default_net, get_gateset

    gateset = get_gateset(args.gateset)
    net = None
    if args.net_cache and Path(args.net_cache).is_file():
        net = NetDictionary.load(args.net_cache)
        if net.gateset.to_json() != gateset.to_json():
            raise ConfigurationError(f"{args.net_cache} was built for a different gate set")
    elif args.epsilon0 is not None:
        net = build_net(gateset, args.epsilon0, args.max_length, prefix_length=args.prefix_length, seed=args.seed)
    if net is None:
        net = default_net(gateset)
    if args.net_cache and not Path(args.net_cache).is_file():
        net.save(args.net_cache)
    result = compile_physical(
        get_oracle(args.oracle), args.energy, args.eps, gateset, args.depth, net=net, samples=args.samples, seed=args.seed
    )
    out = Path(args.out)
    payload = result.to_json()
    payload["gateset"] = gateset.to_json()
    files = []
    for k, gen in enumerate(result.generators):
        name = out.with_name(f"{out.stem}.gate{k}.json")
        _write_json(name, gen.to_json())
        files.append(name.name)
    payload["gate_polynomials"] = files
    _write_json(out, payload)
    print(
        f"word length {len(result.word)}, SK error {result.sk_error:.3e}, "
        f"sampled distance {result.sampled_worst_distance:.4f} <= 2 eps = {2 * args.eps}"
    )
    return {k: v for k, v in payload.items() if k != "word"}


def cmd_verify(args) -> dict:
    tolerances = {"block": args.tol_block} if args.tol_block is not None else None
    report = verify(args.poly, args.report, tolerances=tolerances)
    print(f"{report.status}: sampled distance {report.sampled_worst_distance:.4f}")
    for failure in report.failures:
        print(f"  FAILED {failure}")
    return report.to_json()


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed of every random choice")
    common.add_argument("--tol-unitary", type=float, default=None, help="unitarity tolerance")
    common.add_argument("--tol-block", type=float, default=None, help="block-equality tolerance")
    common.add_argument("--json-report", metavar="PATH", help="write a JSON summary of the run")

    parser = argparse.ArgumentParser(prog="bosonic-effective", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("truncate", parents=[common], help="certified truncation of a physical unitary")
    p.add_argument("--oracle", required=True, help="builtin name[:param] or oracle JSON file")
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--out", help="certificate JSON")
    p.set_defaults(func=cmd_truncate)

    p = sub.add_parser("synth", parents=[common], help="polynomial Hamiltonian of a Hermitian matrix")
    p.add_argument("--hamiltonian", required=True, help="matrix JSON")
    p.add_argument("--modes", type=int)
    p.add_argument("--cutoffs", help="comma-separated per-mode cutoffs")
    p.add_argument("--qp", action="store_true", help="write the (q, p) expansion instead")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare-state", parents=[common], help="polynomial Hamiltonian preparing a state from vacuum")
    p.add_argument("--target", required=True, help="JSON list of amplitudes or [re, im] pairs")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare_state)

    p = sub.add_parser("compile", parents=[common], help="physical unitary to one polynomial Hamiltonian")
    p.add_argument("--oracle", required=True)
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--out", default="P.json", help="polynomial JSON")
    p.add_argument("--report", default="report.json", help="compilation report JSON")
    p.add_argument("--max-block-cutoff", type=int, default=DEFAULT_MAX_BLOCK_CUTOFF)
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("sk-compile", parents=[common], help="physical unitary to a lifted gate word")
    p.add_argument("--oracle", required=True)
    p.add_argument("--energy", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--gateset", required=True, help="qubit-ht, qutrit-ht, qudit-ht:<d> or a gate set JSON")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--samples", type=int, default=500)
    p.add_argument("--epsilon0", type=float, help="net accuracy (default per dimension)")
    p.add_argument("--max-length", type=int, default=12)
    p.add_argument("--prefix-length", type=int, default=0)
    p.add_argument("--net-cache", help=".npz file to load the net from, or to save it to")
    p.add_argument("--out", default="word.json")
    p.set_defaults(func=cmd_sk_compile)

    p = sub.add_parser("verify", parents=[common], help="re-check compile artifacts")
    p.add_argument("--poly", default="P.json")
    p.add_argument("--report", default="report.json")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "compile" and args.tol_block is None:
        args.tol_block = 1e-10
    summary: dict
    code = 0
    try:
        if args.tol_unitary is not None:
            set_tolerances(unitary=args.tol_unitary)
        summary = args.func(args)
        if summary.get("status", "passed") != "passed":
            code = 2
    except BosonicError as exc:
        code = exc.exit_code
        summary = {"status": "error", "error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
    except OSError as exc:
        code = 3
        summary = {"status": "error", "error": "OSError", "message": str(exc), "exit_code": code}
        print(f"error: {exc}", file=sys.stderr)
    if args.json_report:
        _write_json(args.json_report, {"command": args.command, "exit_code": code, **summary})
    return code


if __name__ == "__main__":
    sys.exit(main())
