"""Command-line front end: ``ctxent <command> [flags]``.

Exit codes: 0 success / unique reconstruction, 1 a property check failed,
2 input error, 3 ambiguous reconstruction, 4 infeasible, 5 numerical
breakdown.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .context import computational_context, maximal_context_from_unitary
from .entropy import SHANNON, EntropyKind, EntropyOracle, contextual_entropy, two_outcome_curve
from .errors import CtxEntError, InvalidInput, NumericalBreakdown, OracleMiss
from .io import (
    context_from_json,
    matrix_from_json,
    matrix_to_json,
    read_json,
    section_from_json,
    section_to_json,
    write_json,
)
from .matrixcore import random_density, trace_distance, validate_density, von_neumann_entropy
from .minimizer import MinimizerConfig, minimize_over_maximal_contexts
from .properties import BATTERIES, run_batteries
from .reconstruct import AmbiguousPair, ReconstructionConfig, Unique, reconstruct

log = logging.getLogger("ctxent")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_AMBIGUOUS, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 1, 2, 3, 4, 5


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    wall_time: float = 0.0
    summary: dict = field(default_factory=dict)
    version: str = __version__


def substream(seed: int, name: str) -> int:
    """Independent integer seed for the named consumer of ``seed``."""
    return int(np.random.SeedSequence([seed, zlib.crc32(name.encode())]).generate_state(1)[0])


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("CTXENT_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise InvalidInput(f"CTXENT_SEED must be an integer, got {env!r}") from None


def _kind(text: str) -> EntropyKind:
    try:
        return EntropyKind.parse(text)
    except InvalidInput as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _load_state(path):
    return validate_density(matrix_from_json(read_json(path)))


def _emit(args, payload: dict, manifest: RunManifest, started: float) -> None:
    """Write ``payload`` to ``--out`` (plus manifest) or print it."""
    manifest.wall_time = time.perf_counter() - started
    if args.out:
        manifest.outputs["result"] = args.out
        write_json(args.out, payload)
        write_json(args.out + ".manifest.json", asdict(manifest))
    else:
        json.dump(payload, sys.stdout, indent=1)
        sys.stdout.write("\n")


def _minimizer_cfg(args, seed) -> MinimizerConfig:
    return MinimizerConfig(restarts=args.restarts, max_iters=args.max_iters,
                           seed=substream(seed, "minimizer"), workers=args.workers)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_gen(args, seed, started) -> int:
    rho = random_density(args.dim, args.rank, substream(seed, "gen"))
    manifest = RunManifest("gen", {"dim": args.dim, "rank": args.rank}, seed)
    _emit(args, matrix_to_json(rho), manifest, started)
    return EXIT_OK


def cmd_entropy(args, seed, started) -> int:
    rho = _load_state(args.state)
    if args.context:
        v = context_from_json(read_json(args.context))
    elif args.maximal_from_unitary:
        v = maximal_context_from_unitary(matrix_from_json(read_json(args.maximal_from_unitary)))
    else:
        v = computational_context(rho.dim)
    value = contextual_entropy(rho, v, args.kind)
    print(repr(value))
    if args.out:
        manifest = RunManifest("entropy", {"kind": str(args.kind)}, seed,
                               inputs={"state": args.state, "context": args.context})
        _emit(args, {"value": value, "kind": str(args.kind),
                     "probabilities": v.probabilities(rho.matrix).tolist()}, manifest, started)
    return EXIT_OK


def cmd_vn(args, seed, started) -> int:
    rho = _load_state(args.state)
    cfg = _minimizer_cfg(args, seed)
    oracle = EntropyOracle.from_state(rho, args.kind)
    res = minimize_over_maximal_contexts(oracle, rho.dim, cfg)
    print(repr(res.best_value))
    payload = res.to_json()
    if args.kind == SHANNON:
        payload["eigendecomposition_value"] = von_neumann_entropy(rho)
    if args.out:
        manifest = RunManifest("vn", {"kind": str(args.kind), "minimizer": cfg.to_json()}, seed,
                               inputs={"state": args.state},
                               summary={"converged": res.converged})
        _emit(args, payload, manifest, started)
    return EXIT_OK


def cmd_reconstruct(args, seed, started) -> int:
    reference = None
    if args.section:
        sample = section_from_json(read_json(args.section))
        oracle = EntropyOracle.from_section(sample, record=bool(args.record))
        kind = args.kind or oracle.kind or SHANNON
    else:
        if args.state:
            reference = _load_state(args.state)
        else:
            if args.dim is None:
                raise InvalidInput("reconstruct needs --state, --section or --dim")
            reference = random_density(args.dim, args.rank, substream(seed, "gen"))
        kind = args.kind or SHANNON
        oracle = EntropyOracle.from_state(reference, kind, record=bool(args.record))
    cfg = ReconstructionConfig(
        minimizer=_minimizer_cfg(args, seed),
        tol_zero=args.tol_zero, tol_sum=args.tol_sum, tie_tol=args.tie_tol,
        verify_contexts=args.verify_contexts, verify_tol=args.verify_tol,
        seed=substream(seed, "reconstruct"),
    )
    result = reconstruct(oracle, oracle.dim, cfg, kind)
    payload = result.to_json()
    payload["kind"] = str(kind)
    if reference is not None:
        if isinstance(result, Unique):
            payload["trace_distance"] = trace_distance(result.rho, reference)
        elif isinstance(result, AmbiguousPair):
            payload["trace_distance"] = min(trace_distance(result.rho_a, reference),
                                            trace_distance(result.rho_b, reference))
    if "trace_distance" in payload:
        print(f"trace_distance {payload['trace_distance']:.3e}", file=sys.stderr)
    if args.record:
        write_json(args.record, section_to_json(oracle.section()))
    manifest = RunManifest("reconstruct", {"kind": str(kind), **cfg.to_json()}, seed,
                           inputs={"state": args.state, "section": args.section},
                           outputs={"record": args.record},
                           summary={"outcome": payload["outcome"], "exit_code": result.exit_code})
    _emit(args, payload, manifest, started)
    return result.exit_code


def cmd_props(args, seed, started) -> int:
    names = args.battery or list(BATTERIES)
    seeds = [substream(seed, f"props/{i}") for i in range(args.seeds)]
    reports = run_batteries(names, args.dim, seeds, args.trials)
    ok = all(r.passed for r in reports)
    for r in reports:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.check} residual={r.max_residual:.3e} "
              f"trials={r.trials}", file=sys.stderr)
    manifest = RunManifest("props", {"dim": args.dim, "seeds": args.seeds, "trials": args.trials,
                                     "batteries": names}, seed, summary={"all_passed": ok})
    _emit(args, {"all_passed": ok, "reports": [r.to_json() for r in reports]}, manifest, started)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_curves(args, seed, started) -> int:
    kinds = args.kind or [SHANNON]
    shannon_only = all(k == SHANNON for k in kinds)
    rows = []
    for k in kinds:
        x, h = two_outcome_curve(k, args.points)
        rows += [(xi, k.order, hi) for xi, hi in zip(x, h)]
    header = ["x", "value"] if shannon_only else ["x", "q", "value"]
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(header)
        for xi, q, hi in rows:
            w.writerow([repr(float(xi)), repr(float(hi))] if shannon_only
                       else [repr(float(xi)), "inf" if math.isinf(q) else repr(q), repr(float(hi))])
    finally:
        if args.out:
            out.close()
    if args.out:
        manifest = RunManifest("curves", {"kinds": [str(k) for k in kinds], "points": args.points},
                               seed, outputs={"csv": args.out},
                               wall_time=time.perf_counter() - started)
        write_json(args.out + ".manifest.json", asdict(manifest))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctxent", description="Contextual entropy toolkit")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, kind_default=SHANNON):
        sp.add_argument("--seed", type=int, default=None, help="default: $CTXENT_SEED or 0")
        sp.add_argument("--out", help="output path; a .manifest.json is written next to it")
        if kind_default is not False:
            sp.add_argument("--kind", type=_kind, default=kind_default,
                            help="shannon | renyi:<q> | hartley | chebyshev")

    def minimizer_flags(sp):
        sp.add_argument("--restarts", type=int, default=None, help="default 8 * dim")
        sp.add_argument("--max-iters", type=int, default=50)
        sp.add_argument("--workers", type=int, default=1)

    sp = sub.add_parser("gen", help="write a random density matrix")
    common(sp, kind_default=False)
    sp.add_argument("--dim", type=int, required=True)
    sp.add_argument("--rank", type=int, default=None)
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("entropy", help="contextual entropy of a state on one context")
    common(sp)
    sp.add_argument("--state", required=True)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--context", help="context JSON (default: computational basis)")
    g.add_argument("--maximal-from-unitary", help="unitary JSON whose columns span the context")
    sp.set_defaults(func=cmd_entropy)

    sp = sub.add_parser("vn", help="minimum of the contextual entropy over maximal contexts")
    common(sp)
    sp.add_argument("--state", required=True)
    minimizer_flags(sp)
    sp.set_defaults(func=cmd_vn)

    sp = sub.add_parser("reconstruct", help="reconstruct a state from its entropy oracle")
    common(sp, kind_default=None)
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--state", help="state JSON backing the oracle")
    src.add_argument("--section", help="recorded section JSON to replay")
    sp.add_argument("--dim", type=int, help="generate a random state of this dimension")
    sp.add_argument("--rank", type=int, default=None)
    sp.add_argument("--record", help="write the queried section sample here")
    minimizer_flags(sp)
    d = ReconstructionConfig()
    sp.add_argument("--verify-contexts", type=int, default=d.verify_contexts)
    sp.add_argument("--tol-zero", type=float, default=d.tol_zero)
    sp.add_argument("--tol-sum", type=float, default=d.tol_sum)
    sp.add_argument("--tol-tie", "--tie-tol", dest="tie_tol", type=float, default=d.tie_tol)
    sp.add_argument("--tol-verify", "--verify-tol", dest="verify_tol", type=float,
                    default=d.verify_tol)
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("props", help="run property batteries")
    common(sp, kind_default=False)
    sp.add_argument("--dim", type=int, default=3)
    sp.add_argument("--seeds", type=int, default=10, help="number of seeds")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--battery", action="append", choices=sorted(BATTERIES))
    sp.set_defaults(func=cmd_props)

    sp = sub.add_parser("curves", help="CSV of two-outcome entropy curves")
    common(sp, kind_default=False)
    sp.add_argument("--kind", type=_kind, action="append")
    sp.add_argument("--points", type=int, default=1001)
    sp.set_defaults(func=cmd_curves)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    started = time.perf_counter()
    try:
        seed = _resolve_seed(args)
        return args.func(args, seed, started)
    except (InvalidInput, OracleMiss, OSError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalBreakdown, CtxEntError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
