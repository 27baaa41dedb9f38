"""Command line front end.

Subcommands::

    solve     one problem, nodal values as CSV
    table     (eps, N) error sweep written as CSV plus a JSON manifest
    plot      SVG overlay of PGFEM, reference and optional baseline
    diagnose  derivative-bound statistics near singular points
    validate  report on b - p' for each eps

Exit status is 0 on success, 1 for configuration errors and 2 for
numerical failures.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from .benchmarks import (
    EPS_LIST,
    ExampleSpec,
    builtin_example,
    custom_example,
    derivative_bound_diagnostic,
    run_example,
    upwind_shishkin_solve,
)
from .expression import ExpressionSyntaxError
from .mesh import ConfigurationError
from .output import (
    OutputError,
    baseline_report,
    format_csv,
    manifest,
    write_csv,
    write_manifest,
    write_svg,
    write_text,
)
from .pgfem import PipelineError, SolverOptions, pgfem_solve
from .problem import validate_problem

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _common(p: argparse.ArgumentParser, sweep: bool = True):
    p.add_argument("--example", choices=("ex1", "ex2", "ex3", "custom"), default="ex2")
    p.add_argument("--p", help="convection p(x) (custom)")
    p.add_argument("--b", help="reaction b(x) (custom)")
    p.add_argument("--f", help="source f(x) (custom)")
    p.add_argument("--uL", default="0", help="left boundary value (custom)")
    p.add_argument("--uR", default="0", help="right boundary value (custom)")
    p.add_argument("--domain", type=_floats, default=(0.0, 1.0), help="x_left,x_right (custom)")
    p.add_argument("--exact", help="closed-form solution u(x) (custom, optional)")
    p.add_argument("--waive", action="store_true", help="run even if b - p' > 0 fails")
    p.add_argument("--eps", type=_floats, help="comma list of eps values")
    if sweep:
        p.add_argument("--n", type=_ints, help="comma list of N values")
    else:
        p.add_argument("--n", type=int, default=256, help="number of elements")
    p.add_argument("--duals", choices=("exact", "tfpm"), help="dual solver")
    p.add_argument("--n1", type=int, help="TFPM subintervals per element")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tpgfem", description="Petrov-Galerkin FEM for turning point problems")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one problem")
    _common(p, sweep=False)
    p.add_argument("--out", help="CSV file for x,u (default: stdout)")

    p = sub.add_parser("table", help="error table sweep")
    _common(p)
    p.add_argument("--ref-n", type=int, default=4096, help="reference mesh size")
    p.add_argument("--baseline", choices=("shishkin",), help="also tabulate upwind/Shishkin")
    p.add_argument("--out", help="CSV path; the manifest goes next to it as .json")

    p = sub.add_parser("plot", help="SVG solution plot")
    _common(p, sweep=False)
    p.add_argument("--ref-n", type=int, default=4096)
    p.add_argument("--baseline", choices=("shishkin",))
    p.add_argument("--out", required=True, help="SVG path")

    p = sub.add_parser("diagnose", help="derivative bounds near singular points")
    _common(p, sweep=False)
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("validate", help="check b - p' > 0")
    _common(p, sweep=False)
    p.add_argument("--samples", type=int, default=1001)
    return parser


def _spec(args) -> ExampleSpec:
    overrides = {}
    if args.eps:
        overrides["eps_list"] = tuple(args.eps)
    n = getattr(args, "n", None)
    if isinstance(n, tuple):
        overrides["n_list"] = n
    elif isinstance(n, int):
        overrides["n_list"] = (n,)
    if args.duals:
        overrides["mode"] = args.duals
    if args.n1:
        overrides["n1"] = args.n1
    if args.example == "custom":
        missing = [k for k in ("p", "b", "f") if getattr(args, k) is None]
        if missing:
            raise ConfigurationError(f"custom problems need --{', --'.join(missing)}")
        if len(args.domain) != 2:
            raise ConfigurationError("--domain takes two numbers")
        return custom_example(args.p, args.b, args.f, args.domain, args.uL, args.uR, args.exact,
                              waive_condition=args.waive, **overrides)
    if args.waive:
        overrides["waive_condition"] = True
    return builtin_example(args.example, **overrides)


def _emit(text: str, path: Optional[str]):
    if path:
        write_text(path, text)
    else:
        sys.stdout.write(text)


def _options(spec: ExampleSpec) -> SolverOptions:
    return SolverOptions(mode=spec.mode, n1=spec.n1)


def cmd_solve(args) -> int:
    spec = _spec(args)
    lines = ["eps,x,u"]
    for eps in spec.eps_list:
        sol = pgfem_solve(spec.problem(eps), spec.n_list[0], _options(spec))
        lines.extend(f"{eps!r},{x!r},{u!r}" for x, u in zip(sol.nodes.tolist(), sol.values.tolist()))
        mp = "holds" if sol.max_principle.holds else "fails"
        print(f"# eps={eps!r} N={sol.n} mode={spec.mode} max-principle {mp}", file=sys.stderr)
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_table(args) -> int:
    spec = _spec(args)
    res = run_example(spec, ref_n=args.ref_n, baseline=args.baseline == "shishkin")
    reports = [res.report]
    if args.baseline:
        reports.append(baseline_report(res))
    reports = [r for r in reports if r.rows]
    for e, n, stage, msg in res.errors:
        print(f"warning: eps={e!r} N={n}: [{stage}] {msg}", file=sys.stderr)
    if not reports:
        print("error: no cell succeeded", file=sys.stderr)
        return EXIT_NUMERIC
    text = format_csv(reports)
    if args.out:
        write_csv(args.out, reports)
        stem = os.path.splitext(args.out)[0]
        write_manifest(stem + ".json", manifest([res], [args.out], "table"))
    else:
        sys.stdout.write(text)
    return EXIT_NUMERIC if res.errors else EXIT_OK


def cmd_plot(args) -> int:
    spec = _spec(args)
    eps = spec.eps_list[0]
    n = spec.n_list[0]
    bvp = spec.problem(eps)
    sol = pgfem_solve(bvp, n, _options(spec))
    series = [(f"PGFEM N={n}", sol.nodes, sol.values)]
    if bvp.exact is not None:
        xs = np.linspace(bvp.x_left, bvp.x_right, 4097)
        series.append(("exact", xs, bvp.exact(xs)))
    else:
        ref = pgfem_solve(bvp, args.ref_n, SolverOptions(mode="exact"))
        series.append((f"reference N={args.ref_n}", ref.nodes, ref.values))
    if args.baseline:
        base = upwind_shishkin_solve(bvp, n, sol.singular_points)
        series.append((f"upwind Shishkin N={n}", base.nodes, base.values))
    hw = min(0.25 * bvp.width, max(10.0 * math.sqrt(eps), 3.0 * sol.partition.h_max))
    mag = [(s.location, hw) for s in sol.singular_points]
    write_svg(args.out, series, bvp.domain, mag, title=f"{spec.identifier}, eps = {eps!r}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    spec = _spec(args)
    sols = [pgfem_solve(spec.problem(e), spec.n_list[0], _options(spec)) for e in spec.eps_list]
    rep = derivative_bound_diagnostic(sols)
    lines = ["s,window,eps,N,statistic"]
    for s, eps, v in rep.rows():
        lines.append(f"{s!r},{rep.windows[s]!r},{eps!r},{spec.n_list[0]},{format(v, '.17g')}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    spec = _spec(args)
    worst = EXIT_OK
    for eps in spec.eps_list:
        bvp = spec.problem(eps)
        rep = validate_problem(bvp, args.samples)
        waived = " (waived)" if not rep.condition_ok and bvp.waive_condition else ""
        print(f"eps={eps!r}: {rep}{waived}")
        if not rep.condition_ok and not bvp.waive_condition:
            worst = EXIT_CONFIG
    return worst


_COMMANDS = {"solve": cmd_solve, "table": cmd_table, "plot": cmd_plot,
             "diagnose": cmd_diagnose, "validate": cmd_validate}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.eps is None:
        args.eps = EPS_LIST if args.command in ("table", "diagnose", "validate") else None
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, ExpressionSyntaxError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PipelineError as exc:
        # bad input caught by the pipeline is still a configuration problem
        if exc.stage in ("validate", "mesh"):
            print(f"configuration error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
