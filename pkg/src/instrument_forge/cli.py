"""
Command-line entry point ``instrument-forge``.

Subcommands: validate, dilate, posterior, compose, localnet. Every command
prints (or writes with ``--out``) a JSON run report. Exit status is 0 when
all checks pass, 1 when a check fails, 2 on usage, I/O or parse errors.
"""
import argparse
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import dilation as dil
from . import formats as fmt
from . import instrument as ins
from . import localnet as ln
from .errors import InstrumentForgeError, ParseError

TOL_ENV = "INSTRUMENT_FORGE_TOL"
DIGITS = 12

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _num(x: float) -> float:
    return float(f"{float(x):.{DIGITS}g}")


def _matrix(m) -> list:
    return fmt.encode_matrix(m, DIGITS)


class RunReport:
    """Accumulates checks, artifacts and payload for one command run."""

    def __init__(self, command: str, inputs: List[str]):
        self.command = command
        self.inputs_digest = fmt.digest(*inputs)
        self.checks = []
        self.artifacts = []
        self.data = {}
        self.notes = []

    def check(self, name: str, residual: float, tol: float):
        self.checks.append({"name": name, "residual": _num(residual), "tol": _num(tol),
                            "passed": bool(residual < tol)})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> dict:
        out = {
            "command": self.command,
            "inputs_digest": self.inputs_digest,
            "passed": self.passed,
            "checks": self.checks,
            "artifacts": self.artifacts,
        }
        if self.notes:
            out["notes"] = self.notes
        if self.data:
            out["data"] = self.data
        return out


def _tolerance(args, default: float) -> float:
    if args.tol is not None:
        return args.tol
    env = os.environ.get(TOL_ENV)
    if env:
        try:
            return float(env)
        except ValueError as exc:
            raise UsageError(f"{TOL_ENV}={env!r} is not a number") from exc
    return default


def _validation_tol(args) -> Optional[float]:
    """Explicit override for the validation checks, or None for their defaults."""
    return _tolerance(args, None)


def _add_validation(report: RunReport, inst: ins.CPInstrument, tol: Optional[float],
                    prefix: str = ""):
    vr = ins.validate(inst) if tol is None else ins.validate(inst, tol, tol, tol)
    for c in vr.checks:
        report.check(prefix + c.name, c.residual, c.tol)
    return vr.passed


def _load_valid(path: str, report: RunReport, args, prefix: str = "") -> Optional[ins.CPInstrument]:
    """Load an instrument; on validation failure record the checks and return None."""
    inst = fmt.load_instrument(path, validate=False)
    if not _add_validation(report, inst, _validation_tol(args), prefix):
        return None
    return inst


# ---------------------------------------------------------------- commands

def cmd_validate(args) -> RunReport:
    report = RunReport("validate", [args.spec])
    inst = fmt.load_instrument(args.spec, validate=False)
    _add_validation(report, inst, _validation_tol(args))
    report.data = {"dim": inst.dim, "blocks": [list(b) for b in inst.algebra.blocks],
                   "outcomes": list(inst.outcomes)}
    return report


def cmd_dilate(args) -> RunReport:
    report = RunReport("dilate", [args.spec])
    inst = _load_valid(args.spec, report, args)
    if inst is None:
        return report
    tol = _tolerance(args, dil.REALIZATION_TOL)
    if not inst.algebra.is_full:
        report.notes.append("canonical extension applied: instrument acts on a proper subalgebra")
    full, process = dil.realize(inst)
    real = dil.verify_realization(process, inst, tol)
    report.check("realization", real.residual, tol)
    report.check("membership", dil.process_membership_residual(process, inst.algebra), tol)
    sigma_rank = int(np.linalg.matrix_rank(process.sigma, tol=1e-9))
    report.data = {
        "ancilla_dim": process.ancilla_dim,
        "system_dim": process.system_dim,
        "sigma_rank": sigma_rank,
        "canonical_extension": not inst.algebra.is_full,
    }
    if args.process_out:
        fmt.dump_json(fmt.process_to_json(process), args.process_out)
        report.artifacts.append(str(args.process_out))
    return report


def cmd_posterior(args) -> RunReport:
    report = RunReport("posterior", [args.spec, args.state])
    inst = _load_valid(args.spec, report, args)
    if inst is None:
        return report
    state = fmt.load_state(args.state)
    if state.dim != inst.dim:
        raise ins.DimensionMismatch(f"state on C^{state.dim}, instrument on C^{inst.dim}")
    tol = _tolerance(args, 1e-10)
    fam = ins.posterior_family(inst, state)
    mix = float(np.abs(fam.mixture() - ins.apply_predual(inst, state)).max())
    report.check("mixture", mix, tol)
    report.check("normalization", abs(float(fam.weights.sum()) - 1.0), tol)
    report.data = {
        "weights": {s: _num(p) for s, p in zip(fam.outcomes, fam.weights)},
        "posteriors": {s: ("indefinite" if post is ins.INDEFINITE else _matrix(post.density))
                       for s, post in zip(fam.outcomes, fam.posteriors)},
        "indefinite": [s for s, post in zip(fam.outcomes, fam.posteriors) if post is ins.INDEFINITE],
    }
    return report


def cmd_compose(args) -> RunReport:
    report = RunReport("compose", [args.first, args.second, args.state])
    first = _load_valid(args.first, report, args, "first.")
    second = _load_valid(args.second, report, args, "second.")
    if first is None or second is None:
        return report
    state = fmt.load_state(args.state)
    tol = _tolerance(args, 1e-10)
    table = ins.joint_distribution(second, first, state)
    p_first = np.array([ins.outcome_probability(first, state, (s,)) for s in first.outcomes])
    report.check("first_marginal", float(np.abs(table.sum(axis=0) - p_first).max()), tol)
    report.check("normalization", abs(float(table.sum()) - 1.0), tol)
    fam = ins.posterior_family(first, state)
    worst = 0.0
    for j, s in enumerate(first.outcomes):
        post = fam.posteriors[j]
        if post is ins.INDEFINITE or fam.weights[j] <= 1e-8:
            continue
        for i, t in enumerate(second.outcomes):
            pred = fam.weights[j] * ins.outcome_probability(second, post, (t,))
            worst = max(worst, abs(table[i, j] - pred))
    report.check("factorization", worst, tol)
    report.data = {
        "rows": list(second.outcomes),
        "columns": list(first.outcomes),
        "joint": [[_num(x) for x in row] for row in table],
        "first_marginal": {s: _num(x) for s, x in zip(first.outcomes, table.sum(axis=0))},
        "second_marginal": {t: _num(x) for t, x in zip(second.outcomes, table.sum(axis=1))},
    }
    return report


def _vn_model(net, spec, region, where):
    try:
        obs = fmt.decode_matrix(spec["observable"], f"{where}.observable")
        amp = [(float(x), fmt._entry(a, f"{where}.amplitude")) for x, a in spec["amplitude"]]
        grid = [float(x) for x in spec["grid"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed von_neumann_model: {exc}", where) from exc
    return ln.von_neumann_model(net, obs, region, amp, grid, spec.get("weights"), spec.get("labels"))


def cmd_localnet(args) -> RunReport:
    report = RunReport("localnet", [args.net, args.spec])
    net = fmt.net_from_json(fmt.read_json(args.net), args.net)
    try:
        inner = ln.parse_region(args.region)
        outer = ln.parse_region(args.collar) if args.collar else None
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for r in (inner, outer):
        if r is not None and not 0 <= r.stop < net.sites:
            raise UsageError(f"region {r} outside lattice 0..{net.sites - 1}")
    tol = _tolerance(args, ln.LOCAL_TOL)
    raw = fmt.read_json(args.spec)
    if isinstance(raw, dict) and "von_neumann_model" in raw:
        glob = _vn_model(net, raw["von_neumann_model"], inner, f"{args.spec}.von_neumann_model")
        report.notes.append("von Neumann model: strict locality tested on the region itself")
        strict = ln.is_local_instrument(net, glob, inner, inner, rng=args.seed)
        report.check("strict_locality", strict.locality_residual, tol)
        report.check("strict_range", strict.range_residual, tol)
        report.check("strict_intertwining", strict.intertwining_residual, tol)
        if outer is not None:
            rep = ln.is_local_instrument(net, glob, inner, outer, rng=args.seed)
            report.check("locality", rep.locality_residual, tol)
            report.check("intertwining", rep.intertwining_residual, tol)
        report.data = {"outcomes": list(glob.outcomes), "global_dim": net.global_dim}
        return report
    if outer is None:
        raise UsageError("--collar is required to extend a local instrument")
    local = fmt.instrument_from_json(raw, args.spec, Path(args.spec).parent, validate=False)
    n = net.local_dim ** len(inner.sites)
    if local.dim != n:
        raise UsageError(f"instrument acts on C^{local.dim}, region {inner} needs C^{n}")
    if not _add_validation(report, local, _validation_tol(args)):
        return report
    on_region = ln.local_instrument(net, inner, {s: local.kraus[s] for s in local.outcomes})
    ext = ln.extend_local(net, on_region, inner, outer)
    restricted = ins.build_instrument(on_region.algebra, ext.outcomes, ext.kraus)
    report.check("restriction", ins.instrument_distance(restricted, on_region), tol)
    rep = ln.is_local_instrument(net, ext, inner, outer, rng=args.seed)
    report.check("locality", rep.locality_residual, tol)
    report.check("range", rep.range_residual, tol)
    full = dil.canonical_extension(ext)
    report.check("intertwining", ln.intertwining_check(net, full, outer), tol)
    report.data = {"outcomes": list(ext.outcomes), "global_dim": net.global_dim,
                   "region": str(inner), "collar": str(outer)}
    return report


# ---------------------------------------------------------------- plumbing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="instrument-forge",
                                     description="CP instruments, dilations and measuring processes.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--tol", type=float, default=None,
                        help=f"override check tolerances (env {TOL_ENV} also works)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="check an instrument spec")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("dilate", parents=[common], help="synthesize a measuring process")
    p.add_argument("spec")
    p.add_argument("--process-out", help="write the measuring process JSON here")
    p.set_defaults(func=cmd_dilate)

    p = sub.add_parser("posterior", parents=[common], help="posterior states for an input state")
    p.add_argument("spec")
    p.add_argument("state")
    p.set_defaults(func=cmd_posterior)

    p = sub.add_parser("compose", parents=[common], help="joint distribution of two measurements")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("state")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("localnet", parents=[common], help="local extension on a lattice net")
    p.add_argument("net")
    p.add_argument("spec")
    p.add_argument("--region", required=True, help="inner region a..b")
    p.add_argument("--collar", help="outer region a..b containing the inner one")
    p.set_defaults(func=cmd_localnet)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        report = args.func(args)
    except (InstrumentForgeError, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = fmt.dump_json(report.to_json())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK if report.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
