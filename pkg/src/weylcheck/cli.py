"""Command-line driver.

Subcommands: verify, covariantize, decoupling, identity, oracle.
Densities come from a file or from `builtin:NAME`.  Reports print as
human-readable text, or as JSON with `--json`.  Exit codes: 0 all checks
passed, 1 a verification failed, 2 usage or parse error.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from . import densities, dsl, gauge, oracle, scale
from . import exprs as ex
from .errors import ParseError, UncoveredDerivative, WeylcheckError
from .report import Mode, OracleSummary, TraceStep, VerificationReport
from .simplify import full_simplify

_BUILTIN_PREFIX = "builtin:"


class _UsageError(Exception):
    pass


def _load_target(target: str) -> dsl.LagrangianDef:
    if target.startswith(_BUILTIN_PREFIX):
        name = target[len(_BUILTIN_PREFIX):]
        try:
            return densities.builtin(name)
        except KeyError as e:
            raise _UsageError(str(e.args[0])) from e
    try:
        with open(target, "r", encoding="utf-8") as fh:
            src = fh.read()
    except OSError as e:
        raise _UsageError(f"cannot read {target}: {e.strerror}") from e
    except UnicodeDecodeError as e:
        raise _UsageError(f"cannot read {target}: not a UTF-8 text file") from e
    return dsl.parse(src)


def _nonscalar_step(L: dsl.LagrangianDef) -> Optional[TraceStep]:
    free = L.free_indices()
    if not free:
        return None
    labels = ", ".join(sorted(ix.label for ix in free))
    return TraceStep("non-scalar-density", labels,
                     "density has free indices and is not a scalar")


def _with_step(r: VerificationReport,
               step: Optional[TraceStep]) -> VerificationReport:
    if step is None:
        return r
    return VerificationReport(r.claim, r.mode, r.passed, r.residual,
                              (step,) + r.trace, r.oracle)


def _cmd_verify(args) -> VerificationReport:
    L = _load_target(args.target)
    mode = Mode.GLOBAL if args.mode == "global" else Mode.LOCAL
    return _with_step(scale.check_invariance(L, mode), _nonscalar_step(L))


def _cmd_covariantize(args) -> tuple[VerificationReport, str]:
    L = _load_target(args.target)
    cov = gauge.gauge_covariantize(L)
    diff = full_simplify(ex.canonicalize(cov - L.parsed))
    out = dsl.render(dsl.make_def(L.name + "-cov", cov))
    trace = (TraceStep("covariantize", dsl.render_expr(L.parsed),
                       dsl.render_expr(cov)),
             TraceStep("added-terms", "0", dsl.render_expr(diff)))
    report = _with_step(VerificationReport(
        claim=f"covariantize:{L.name}",
        mode=Mode.COVARIANTIZE,
        passed=True,
        residual="0",
        trace=trace,
        oracle=OracleSummary(),
    ), _nonscalar_step(L))
    return report, out


def _cmd_decoupling(args) -> VerificationReport:
    if args.field == "fermion":
        return gauge.verify_fermion_decoupling()
    if args.field == "gauge":
        return gauge.verify_gauge_decoupling()
    return gauge.verify_scalar_coupling()


def _cmd_identity(args) -> VerificationReport:
    if args.name != "gamma-sigma":
        raise _UsageError(f"unknown identity {args.name!r}; "
                          f"available: gamma-sigma")
    return gauge.verify_gamma_sigma()


def _cmd_oracle(args) -> VerificationReport:
    seed = args.seed
    env = os.environ.get("WEYLCHECK_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError:
            raise _UsageError(
                f"WEYLCHECK_SEED must be an integer, got {env!r}")
    if args.trials < 1:
        raise _UsageError("--trials must be at least 1")
    return oracle.run_oracle(trials=args.trials, seed=seed)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="weylcheck",
        description="Check scale invariance of Lagrangian densities and "
                    "the decoupling of fields from the scale gauge vector.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true",
                        help="emit the report as JSON")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", parents=[common],
                       help="check global or local scale invariance")
    v.add_argument("target", metavar="file|builtin:NAME")
    v.add_argument("--mode", choices=("global", "local"), required=True)

    c = sub.add_parser("covariantize", parents=[common],
                       help="apply the scale-covariant derivative "
                            "replacements")
    c.add_argument("target", metavar="file|builtin:NAME")

    d = sub.add_parser("decoupling", parents=[common],
                       help="verify which fields couple to the gauge "
                            "vector S")
    d.add_argument("--field", choices=("fermion", "gauge", "scalar"),
                   required=True)

    i = sub.add_parser("identity", parents=[common],
                       help="check a named Clifford identity")
    i.add_argument("name", metavar="IDENTITY")

    o = sub.add_parser("oracle", parents=[common],
                       help="run the numeric rule-agreement oracle")
    o.add_argument("--trials", type=int, default=100)
    o.add_argument("--seed", type=int, default=0)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code else 0

    extra_text: Optional[str] = None
    try:
        if args.command == "verify":
            report = _cmd_verify(args)
        elif args.command == "covariantize":
            report, extra_text = _cmd_covariantize(args)
        elif args.command == "decoupling":
            report = _cmd_decoupling(args)
        elif args.command == "identity":
            report = _cmd_identity(args)
        else:
            report = _cmd_oracle(args)
    except _UsageError as e:
        print(f"weylcheck: {e}", file=sys.stderr)
        return 2
    except ParseError as e:
        print(f"weylcheck: parse error: {e.args[0]}", file=sys.stderr)
        return 2
    except UncoveredDerivative as e:
        print(f"weylcheck: {e.args[0]}", file=sys.stderr)
        return 1
    except WeylcheckError as e:
        print(f"weylcheck: {e.args[0]}", file=sys.stderr)
        return 1

    if args.json:
        sys.stdout.write(report.to_json())
    else:
        sys.stdout.write(report.to_text())
        if extra_text is not None:
            sys.stdout.write("\n" + extra_text)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
