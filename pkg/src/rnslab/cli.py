"""Command-line front end.

Exit codes: 0 success, 1 invariant failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import ConfigError, build_plan, read_config, reference_page
from .experiments import besov_bound, model_phase, run_eps_sweep, run_eta_sweep, single_run
from .invariants import MUTATIONS, all_passed, run_invariant_suite
from .rns.checkpoint import save_checkpoint

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2

VERBS = {
    "run": "single-run",
    "sweep-eps": "eps-sweep",
    "sweep-eta": "eta-sweep",
    "model-phase": "model-phase",
    "besov-bound": "besov-bound",
    "check": "invariant-suite",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rnslab", description="Rescaled anisotropic Navier-Stokes laboratory.")
    parser.add_argument("--config", help="INI file with [solver], [model], [experiment] sections")
    parser.add_argument("--print-defaults", action="store_true", help="print the configuration reference and exit")
    sub = parser.add_subparsers(dest="verb", parser_class=_Parser)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--out", dest="out_dir", help="output directory (default: results)")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a solver (or model, for model-phase) parameter")
        if verb in ("sweep-eps", "sweep-eta", "model-phase", "besov-bound"):
            p.add_argument("--values", help="comma-separated swept values (eps, eta or gamma)")
        if verb == "sweep-eta":
            p.add_argument("--bisection-steps", dest="bisection_steps", type=int)
        if verb == "model-phase":
            p.add_argument("--amplitudes", help="comma-separated initial amplitudes")
            p.add_argument("--steps", type=int, default=10_000)
            p.add_argument("--no-locate", action="store_true", help="skip the threshold bisection")
        if verb == "run":
            p.add_argument("--checkpoint", help="write the final state to this file")
        if verb == "check":
            p.add_argument("--mutation", choices=MUTATIONS, help="inject a known defect (negative control)")
            p.add_argument("--pairs", type=int, default=10)
    return parser


def _print_summary(summary: dict) -> None:
    for key, value in summary.items():
        print(f"{key}: {value}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code
    if args.print_defaults:
        print(reference_page(), end="")
        return EXIT_OK
    if args.verb is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    cli = vars(args)
    try:
        sections = read_config(args.config) if args.config else {}
        plan = build_plan(VERBS[args.verb], sections, cli)
    except ConfigError as exc:
        print(f"rnslab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.verb == "check":
        results = run_invariant_suite(seed=plan.seed, pairs=args.pairs, mutation=args.mutation)
        for r in results:
            print(r.line())
        return EXIT_OK if all_passed(results) else EXIT_INVARIANT

    out = Path(plan.out_dir)
    if args.verb == "run":
        report, result = single_run(plan)
        path = report.write(out)
        if args.checkpoint:
            save_checkpoint(args.checkpoint, result.state, result.config.eps, result.phase.theta)
        _print_summary(report.summary)
        print(f"wrote {path}")
        div = max(d.divergence for d in [result.initial] + result.history)
        leak = max(d.outside_support for d in [result.initial] + result.history)
        return EXIT_OK if div <= 1e-10 and leak == 0.0 else EXIT_INVARIANT

    if args.verb == "sweep-eps":
        report = run_eps_sweep(plan)
    elif args.verb == "sweep-eta":
        report = run_eta_sweep(plan)
    elif args.verb == "besov-bound":
        report = besov_bound(plan)
    else:
        report = model_phase(plan, steps=args.steps, locate=not args.no_locate)
    path = report.write(out)
    _print_summary(report.summary)
    print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
