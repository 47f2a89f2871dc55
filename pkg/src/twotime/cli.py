"""Command-line harness: ``twotime {validate-free, suite, solve, energy}``.

Exit codes: 0 pass, 1 suite failure, 2 convention ambiguity surfaced, 64 usage.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import chi, solver, suites
from .errors import EndpointDependent, TwoTimeError
from .scenario import ResultWriter, Scenario

EXIT_OK, EXIT_FAIL, EXIT_AMBIGUOUS, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat JSON file with scenario fields")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--sigma", type=float)
    common.add_argument("--epsilon", type=float)
    common.add_argument("--convention", choices=["eq23", "eq29"])
    common.add_argument("--tol", type=float, help="solver tolerance (validation tolerance for validate-free)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="twotime", description="Two-time quantum action harness")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("validate-free", parents=[common],
                   help="check which prefactor convention nulls the free residual")
    s = sub.add_parser("suite", parents=[common], help="run a named verification suite")
    s.add_argument("name")
    sub.add_parser("solve", parents=[common], help="solve the wave equation from zero coefficients")
    sub.add_parser("energy", parents=[common], help="large-T energy of the free solution")
    return p


def resolve_scenario(args) -> Scenario:
    data = Scenario.load(args.config).to_dict() if args.config else Scenario().to_dict()
    for key in ("seed", "out", "sigma", "epsilon", "convention"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    if args.tol is not None:
        data["validate_tol" if args.command == "validate-free" else "tol"] = args.tol
    return Scenario.from_dict(data)


def cmd_validate_free(sc: Scenario) -> int:
    if sc.e1e2 != 0:
        raise UsageError("validate-free requires e1e2 = 0")
    w = ResultWriter(sc.out, sc)
    results = suites.validate_free(sc)
    passing = [name for name, r in results.items() if r["passed"]]
    for name, r in results.items():
        r.pop("field").save(w.path(f"free_residual_{name}.tsv"), w.header)
        print(f"{name}: max residual {r['max_residual']:.3e}, canonical mismatch "
              f"{r['max_canonical_mismatch']:.3e} -> {'PASS' if r['passed'] else 'FAIL'}")
    status = EXIT_OK if len(passing) == 1 else EXIT_AMBIGUOUS
    w.json("validate_free.json", {"conventions": results, "passing": passing,
                                  "selected": passing[0] if status == EXIT_OK else None,
                                  "tolerance": sc.validate_tol})
    print(f"passing convention: {passing[0]}" if status == EXIT_OK
          else f"ambiguous: {len(passing)} conventions pass")
    return status


def cmd_suite(sc: Scenario, name: str) -> int:
    if name not in suites.RUNNERS:
        raise UsageError(f"unknown suite {name!r}; choose from {', '.join(suites.SUITES)}")
    w = ResultWriter(sc.out, sc)
    criteria, details = suites.RUNNERS[name](sc, w)
    ok = all(c["passed"] for c in criteria)
    w.json(f"suite_{name}.json", {"suite": name, "passed": ok, "criteria": criteria, "details": details})
    for c in criteria:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}.{c['name']} value={c['value']}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_solve(sc: Scenario) -> int:
    g = sc.grid()
    rep = solver.solve(chi.ChiCoefficients.zeros(g), sc.collocation(g), sc.kernel(), sc.constants(g),
                       sc.prefactor_convention(), tol=sc.tol, max_iter=sc.max_iter)
    w = ResultWriter(sc.out, sc)
    w.json("solve.json", rep.to_dict())
    w.table("solve_history.tsv", ["iteration", "objective", "damping"],
            [(i, f, m) for i, (f, m) in enumerate(zip(rep.residual_history, rep.damping_history))])
    chi.save_coefficients(w.path("coefficients.tsv"), rep.final_coeffs, w.header)
    print(f"converged={rep.converged} iterations={rep.iterations} "
          f"relative={rep.relative_residual:.3e} lambda={rep.lam.real:.12g}")
    return EXIT_OK if rep.converged else EXIT_FAIL


def cmd_energy(sc: Scenario) -> int:
    w = ResultWriter(sc.out, sc)
    try:
        est, exact = suites.free_energy_estimate(sc)
    except EndpointDependent as exc:
        print(f"endpoint dependent: {exc}", file=sys.stderr)
        return EXIT_FAIL
    est.save(w.path("energy.tsv"), w.header)
    w.json("energy.json", {"W": est.W, "free_value": exact, "endpoint_spread": est.endpoint_spread,
                           "slope": est.slope, "fit_residual": est.fit_residual})
    print(f"W = {est.W:.15g} (free value {exact:.15g})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        sc = resolve_scenario(args)
        if args.command == "validate-free":
            code = cmd_validate_free(sc)
        elif args.command == "suite":
            code = cmd_suite(sc, args.name)
        elif args.command == "solve":
            code = cmd_solve(sc)
        else:
            code = cmd_energy(sc)
    except (UsageError, ValueError, OSError) as exc:
        print(f"twotime: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TwoTimeError as exc:
        print(f"twotime: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    ResultWriter(sc.out, sc).metadata(" ".join(sys.argv if argv is None else ["twotime", *argv]))
    return code


if __name__ == "__main__":
    sys.exit(main())
