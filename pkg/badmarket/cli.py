"""Command-line entry point: ``badmarket <subcommand> ...``.

Exit codes: 0 success, 1 verification failure, 2 no convergence, 3 input error.
"""
import argparse
import logging
import sys
from dataclasses import dataclass, field
from typing import List, Optional

from badmarket import experiments, quota, readers, welfare, writers
from badmarket.builders import to_display_order
from badmarket.config import load_solver_config
from badmarket.economy import validate_economy
from badmarket.errors import (
    BadmarketError,
    DimensionError,
    DomainError,
    NoConvergence,
    ParseError,
    PreconditionError,
    SchemaError,
)
from badmarket.solver import solve_equilibrium, verify_equilibrium

_log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFICATION = 1
EXIT_NO_CONVERGENCE = 2
EXIT_INPUT = 3

# Consumers listed in a certificate summary before it is truncated.
_SUMMARY_ROWS = 10


@dataclass
class CommandOutcome:
    exit_code: int
    summary: str = ''
    artifacts: List[str] = field(default_factory=list)


def _vector(values):
    return "(" + ", ".join(f"{float(v):.10g}" for v in values) + ")"


def _certificate_summary(econ, cert):
    lines = []
    order = econ.metadata.get('display_order')
    label = "price" if order is None else "price (display order)"
    lines.append(f"{label}: {_vector(to_display_order(econ, cert.price))}")
    for cid, x in list(zip(cert.consumer_ids, cert.bundles))[:_SUMMARY_ROWS]:
        lines.append(f"  x[{cid}] = {_vector(to_display_order(econ, x))}")
    if len(cert.consumer_ids) > _SUMMARY_ROWS:
        aggregate = econ.weights @ cert.bundles
        lines.append(f"  ... {len(cert.consumer_ids) - _SUMMARY_ROWS} more consumers")
        lines.append(f"  weighted aggregate = {_vector(to_display_order(econ, aggregate))}")
    for fid, a, y in zip(cert.firm_ids, cert.activities, cert.productions):
        lines.append(f"  y[{fid}] = {_vector(to_display_order(econ, y))} activities {_vector(a.levels)}")
    if getattr(cert, 'rents', None):
        lines.append(f"  rents = {_vector(cert.rents)}")
    return "\n".join(lines)


def _config(args):
    tol = args.tol
    return load_solver_config(
        args.config,
        clearing_tol=tol,
        optimality_tol=tol,
        seed=args.seed,
        restarts=args.restarts,
    )


def _load_validated(path):
    """Economy from path plus None, or None plus the failing outcome."""
    econ = readers.read_economy(path)
    report = validate_economy(econ)
    for finding in report.warnings:
        _log.warning(f"{finding.rule_id}: {finding.message}")
    if not report.passed:
        return None, CommandOutcome(EXIT_INPUT, report.summary())
    return econ, None


def _write_certificate(cert, args, outcome):
    if args.out:
        writers.save_certificate(cert, args.out)
        outcome.artifacts.append(args.out)
    return outcome


##------------------------------------------------------------------------------------
## Subcommands
##------------------------------------------------------------------------------------
def cmd_solve(args):
    """Validate, solve, verify and summarise an economy."""
    econ, failed = _load_validated(args.economy)
    if failed:
        return failed
    cfg = _config(args)
    cert = solve_equilibrium(econ, cfg, free_disposal=args.free_disposal)
    report = verify_equilibrium(econ, cert, cfg=cfg)
    code = EXIT_OK if report.passed else EXIT_VERIFICATION
    outcome = CommandOutcome(code, _certificate_summary(econ, cert) + "\n" + report.summary())
    return _write_certificate(cert, args, outcome)


def cmd_verify(args):
    """Check a certificate file against an economy (and a quota scheme with --quota)."""
    econ = readers.read_economy(args.economy)
    cert = readers.read_certificate(args.certificate)
    cfg = _config(args)
    if args.quota:
        scheme = readers.read_quota_scheme(args.quota)
        report = quota.verify_quota(econ, scheme, cert, cfg=cfg)
    else:
        report = verify_equilibrium(econ, cert, cfg=cfg)
    return CommandOutcome(EXIT_OK if report.passed else EXIT_VERIFICATION, report.summary())


def cmd_quota(args):
    """Solve the quota equilibrium of an economy under the scheme given by --quota."""
    if not args.quota:
        raise SchemaError("the quota subcommand needs --quota PATH")
    scheme = readers.read_quota_scheme(args.quota)
    if scheme.is_zero():
        _log.info("all quotas are zero; solving the plain economy")
        return cmd_solve(args)
    econ, failed = _load_validated(args.economy)
    if failed:
        return failed
    cfg = _config(args)
    cert = quota.solve_quota(econ, scheme, cfg)
    report = quota.verify_quota(econ, scheme, cert, cfg=cfg)
    base = quota.attach_government(econ, scheme)
    summary = _certificate_summary(base, cert)
    summary += f"\n  compliance residual = {_vector(cert.compliance_residual)}\n" + report.summary()
    outcome = CommandOutcome(EXIT_OK if report.passed else EXIT_VERIFICATION, summary)
    return _write_certificate(cert, args, outcome)


def cmd_welfare(args):
    """Compare two certificates, or search for a Pareto improvement on one."""
    econ = readers.read_economy(args.economy)
    if args.compare:
        path_a, path_b = args.compare
        cert_a = readers.read_certificate(path_a)
        cert_b = readers.read_certificate(path_b)
        table = welfare.utility_table(econ, {'A': cert_a, 'B': cert_b})
        if welfare.pareto_dominates(econ, cert_a, cert_b):
            verdict = "A Pareto-dominates B"
        elif welfare.pareto_dominates(econ, cert_b, cert_a):
            verdict = "B Pareto-dominates A"
        else:
            verdict = "no dominance"
        outcome = CommandOutcome(EXIT_OK, table.to_string() + "\n" + verdict)
        if args.csv:
            table.to_csv(args.csv, float_format='%.17g')
            outcome.artifacts.append(args.csv)
        return outcome
    if args.search:
        cert = readers.read_certificate(args.search)
        cfg = _config(args)
        pair = welfare.search_pareto_improvement(econ, cert, args.samples, seed=cfg.seed)
        if pair is None:
            return CommandOutcome(EXIT_OK, f"no Pareto improvement found in {args.samples} samples")
        table = welfare.utility_table(econ, {'improvement': pair.bundles_a, 'certificate': pair.bundles_b})
        return CommandOutcome(EXIT_OK, table.to_string() + "\nPareto improvement found")
    raise SchemaError("welfare needs --compare A B or --search CERT")


def _parse_ns(text):
    try:
        ns = [int(v) for v in text.split(',') if v.strip()]
    except ValueError as e:
        raise DomainError(f"--ns must be a comma-separated list of integers, got {text!r}") from e
    if not ns or min(ns) < 1:
        raise DomainError(f"--ns must list positive integers, got {text!r}")
    return ns


def cmd_family(args):
    """Sweep a family over --ns and write the CSV (to --out, or print it)."""
    cfg = _config(args)
    records = experiments.run_family(args.family, _parse_ns(args.ns), cfg, progress=args.progress)
    outcome = CommandOutcome(EXIT_OK)
    if args.out:
        experiments.emit_csv(records, args.out, timing=args.timing)
        outcome.artifacts.append(args.out)
    frame = experiments.records_to_frame(records, timing=args.timing)
    outcome.summary = frame.to_string(index=False)
    if any(r.certificate is None for r in records):
        outcome.exit_code = EXIT_NO_CONVERGENCE
    elif not all(r.converged for r in records):
        outcome.exit_code = EXIT_VERIFICATION
    return outcome


def cmd_oracle(args):
    """Closed-form reference: a certificate for hara, the continuum table for garbage."""
    if args.family == experiments.HARA:
        if args.n is None:
            raise DomainError("oracle --family hara needs --n")
        cert = experiments.hara_oracle(args.n)
        econ = experiments.BUILDERS[experiments.HARA](args.n)
        outcome = CommandOutcome(EXIT_OK, _certificate_summary(econ, cert))
        return _write_certificate(cert, args, outcome)
    frame = experiments.garbage_reference_frame()
    outcome = CommandOutcome(EXIT_OK, frame.to_string())
    if args.out:
        frame.to_csv(args.out, float_format='%.17g')
        outcome.artifacts.append(args.out)
    return outcome


##------------------------------------------------------------------------------------
## Parser
##------------------------------------------------------------------------------------
def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--tol', type=float, default=None, help="clearing and optimality tolerance")
    common.add_argument('--seed', type=int, default=None, help="seed of every stochastic path")
    common.add_argument('--restarts', type=int, default=None, help="number of solver starts")
    common.add_argument('--out', default=None, help="output path (certificate JSON or CSV)")
    common.add_argument('--quota', default=None, help="quota scheme JSON")
    common.add_argument('--config', default=None, help="YAML file of solver settings")
    common.add_argument('-v', '--verbose', action='count', default=0, help="-v info, -vv debug")

    parser = argparse.ArgumentParser(
        prog='badmarket',
        description="Equilibria of finite production economies with bads and negative prices.",
    )
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('solve', parents=[common], help="solve an economy document")
    p.add_argument('economy')
    p.add_argument('--free-disposal', action='store_true', help="solve for a free-disposal equilibrium")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser('verify', parents=[common], help="verify a certificate")
    p.add_argument('economy')
    p.add_argument('certificate')
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser('quota', parents=[common], help="solve a quota equilibrium (needs --quota)")
    p.add_argument('economy')
    p.set_defaults(func=cmd_quota, free_disposal=False)

    p = sub.add_parser('welfare', parents=[common], help="Pareto comparisons")
    p.add_argument('economy')
    p.add_argument('--compare', nargs=2, metavar=('A', 'B'), help="two certificate files")
    p.add_argument('--csv', default=None, help="write the utility table here")
    p.add_argument('--search', metavar='CERT', help="search for a Pareto improvement on CERT")
    p.add_argument('--samples', type=int, default=10000)
    p.set_defaults(func=cmd_welfare)

    p = sub.add_parser('family', parents=[common], help="sweep an example family")
    p.add_argument('--family', choices=sorted(experiments.BUILDERS), required=True)
    p.add_argument('--ns', required=True, help="comma-separated instance sizes")
    p.add_argument('--timing', action='store_true', help="record runtime_ms in the CSV (left empty otherwise)")
    p.add_argument('--progress', action='store_true', help="show a progress bar")
    p.set_defaults(func=cmd_family)

    p = sub.add_parser('oracle', parents=[common], help="closed-form reference of an example family")
    p.add_argument('--family', choices=sorted(experiments.BUILDERS), required=True)
    p.add_argument('--n', type=int, default=None)
    p.set_defaults(func=cmd_oracle)
    return parser


def _configure_logging(verbose):
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def run(argv=None) -> CommandOutcome:
    """Parse argv and run the subcommand, mapping errors to exit codes."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on bad usage, which would read as no convergence
        if e.code in (0, None):
            raise
        return CommandOutcome(EXIT_INPUT, "invalid arguments")
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except NoConvergence as e:
        return CommandOutcome(EXIT_NO_CONVERGENCE, f"no convergence: {e} (best residual {e.best_residual:.3e})")
    except (ParseError, SchemaError, DimensionError, DomainError, PreconditionError, OSError) as e:
        return CommandOutcome(EXIT_INPUT, f"input error: {e}")
    except BadmarketError as e:
        return CommandOutcome(EXIT_INPUT, f"error: {e}")


def main(argv: Optional[list] = None) -> int:
    outcome = run(argv)
    stream = sys.stdout if outcome.exit_code == EXIT_OK else sys.stderr
    if outcome.summary:
        print(outcome.summary, file=stream)
    for path in outcome.artifacts:
        print(f"wrote {path}", file=stream)
    return outcome.exit_code


if __name__ == "__main__":
    sys.exit(main())
