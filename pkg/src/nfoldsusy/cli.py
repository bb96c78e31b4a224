"""Command-line surface.

Subcommands::

    verify     MODEL   closure condition + intertwining residuals
    spectrum   MODEL   finite-matrix levels vs the grid eigensolver
    certify-g  MODEL   coupling-grading certificate for the family block
    index      MODEL   kernel-counting index with per-state verdicts

Every command reads one model file, prints a short human summary and
optionally writes a JSON report (--json), a CSV table (--csv, spectrum
only) and gnuplot-ready plot data (--plot-data, spectrum only).

Exit codes: 0 success, 1 mathematical failure, 2 input error,
3 spectrum success but with unmatched algebraic roots.

The environment variable NFOLD_THREADS caps the worker threads used for
independent branch computations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import expr as ex
from .errors import NFoldError, ParseError
from .gscale import f_split_check, g_structure_certificate
from .modelfile import load_model_file
from .spectral import grid_spectrum, match_spectra, witten_index
from .susy import verify as verify_system
from .typea import condition_residual, s_matrix

EXIT_OK = 0
EXIT_MATH_FAIL = 1
EXIT_INPUT = 2
EXIT_UNMATCHED = 3


def _max_workers():
    try:
        return max(1, int(os.environ.get("NFOLD_THREADS", "4")))
    except ValueError:
        return 4


def _thread_map(fn, items):
    items = list(items)
    if len(items) <= 1 or _max_workers() == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        return list(pool.map(fn, items))


def _emit(report, args):
    if getattr(args, "json", None):
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=False)
            fh.write("\n")


def _envelope(command, mf, args, passed, results):
    return {
        "command": command,
        "model": mf.name,
        "kind": mf.kind,
        "seed": int(getattr(args, "seed", 0)),
        "passed": bool(passed),
        "results": results,
    }


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    mf = load_model_file(args.model)
    tol = args.tol if args.tol is not None else 1e-9
    results = {}
    passed = True
    if mf.kind == "typeA":
        model = mf.build_typea()
        cond = ex.is_zero(condition_residual(model), mf.dom,
                          n_samples=64, tol=tol, seed=args.seed)
        results["closure_condition"] = {
            "ok": cond.ok, "max_abs": cond.max_abs,
            "witness": {"q": cond.witness_q,
                        "value": [cond.witness_value.real,
                                  cond.witness_value.imag]}
            if not cond.ok else None,
        }
        passed = passed and cond.ok
    system = mf.build_system()
    report = verify_system(system, tol=tol, seed=args.seed)
    results["intertwining"] = report.to_dict()
    passed = passed and report.ok
    print(f"verify {mf.name}: "
          + ("PASS" if passed else "FAIL")
          + f"  (forward {report.forward.max_abs:.2e},"
            f" backward {report.backward.max_abs:.2e})")
    _emit(_envelope("verify", mf, args, passed, results), args)
    return EXIT_OK if passed else EXIT_MATH_FAIL


# ---------------------------------------------------------------------------
# spectrum


def _branch_spectrum(mf, model, branch, levels, grid_n, tol, seed):
    s = s_matrix(model, branch)
    potential = model.vminus if branch == "minus" else model.vplus
    report = grid_spectrum(potential, mf.grid_spec(grid_n), levels)
    roots = s.real_roots()
    table = match_spectra(roots, report, tol)
    return branch, s, report.with_matching(table)


def cmd_spectrum(args) -> int:
    mf = load_model_file(args.model)
    tol = args.tol if args.tol is not None else 1e-3
    branches = ("minus", "plus") if args.branch == "both" else (args.branch,)
    levels = args.levels or mf.levels
    model = mf.build_typea()

    outs = _thread_map(
        lambda b: _branch_spectrum(mf, model, b, levels, args.grid,
                                   tol, args.seed), branches)
    results = {}
    unmatched = 0
    for branch, s, report in outs:
        results[branch] = {
            "s_matrix": s.to_dict(),
            "spectrum": report.to_dict(),
        }
        table = report.matching
        unmatched += len(table.unmatched)
        status = "all matched" if table.all_matched else (
            f"{len(table.unmatched)} unmatched root(s)")
        print(f"spectrum {mf.name} [{branch}]: {len(table.rows)} algebraic "
              f"roots, {status}")
        for row in table.rows:
            if row.matched:
                print(f"  root {row.root:+.6f} -> level {row.level_index} "
                      f"({row.level:+.6f}, diff {row.diff:.2e})")
            else:
                print(f"  root {row.root:+.6f} -> unmatched "
                      "(check normalizability)")
    _emit(_envelope("spectrum", mf, args, unmatched == 0, results), args)
    if args.csv:
        _write_csv(args.csv, outs)
    if args.plot_data:
        _write_plot_data(args.plot_data, mf, model, outs)
    return EXIT_OK if unmatched == 0 else EXIT_UNMATCHED


def _write_csv(path, outs):
    lines = ["branch,root_index,root,matched,level_index,level,abs_diff,"
             "extrapolated_diff"]
    for branch, _s, report in outs:
        for i, row in enumerate(report.matching.rows):
            if row.matched:
                lines.append(
                    f"{branch},{i},{row.root!r},1,{row.level_index},"
                    f"{row.level!r},{row.diff!r},{row.extrapolated_diff!r}")
            else:
                lines.append(f"{branch},{i},{row.root!r},0,,,,")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _write_plot_data(path, mf, model, outs):
    """Two-column gnuplot blocks: the potential curve, then one segment
    per algebraic level (plot with 'index' selectors)."""
    evaluator = ex.Evaluator()
    lo, hi = mf.dom.window()
    qs = np.linspace(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo), 400)
    blocks = []
    for branch, s, _report in outs:
        potential = model.vminus if branch == "minus" else model.vplus
        rows = []
        for q in qs:
            try:
                rows.append(f"{q:.9g} {evaluator(potential, q).real:.9g}")
            except ex.EvaluationError:
                continue
        blocks.append(f"# potential {branch}\n" + "\n".join(rows))
        seg = []
        for root in np.sort(s.real_roots()):
            seg.append(f"{qs[0]:.9g} {root:.9g}\n{qs[-1]:.9g} {root:.9g}\n")
        blocks.append(f"# levels {branch}\n" + "\n".join(seg))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n\n".join(blocks) + "\n")


# ---------------------------------------------------------------------------
# certify-g


def cmd_certify_g(args) -> int:
    mf = load_model_file(args.model)
    family = mf.family()
    cert = g_structure_certificate(family)
    splits = {}
    worst_split = 0.0
    if cert.ok:
        g_ref = max(abs(g) for g in family.gs)
        for n_index in range(1, family.n + 1):
            r = f_split_check(family, g_ref, n_index)
            splits[str(n_index)] = r
            worst_split = max(worst_split, r)
    passed = cert.ok and worst_split < 1e-8
    results = {"certificate": cert.to_dict(),
               "f_split_residuals": splits}
    print(f"certify-g {mf.name}: " + ("PASS" if passed else "FAIL")
          + (f"  (detm fit {cert.detm_fit_residual:.2e},"
             f" worst split {worst_split:.2e})" if cert.ok else
             f"  ({cert.error or 'structure violated'})"))
    _emit(_envelope("certify-g", mf, args, passed, results), args)
    return EXIT_OK if passed else EXIT_MATH_FAIL


# ---------------------------------------------------------------------------
# index


def cmd_index(args) -> int:
    mf = load_model_file(args.model)
    model = mf.build_typea()
    result = witten_index(model)
    flag = "  (uncertain verdicts present)" if result.uncertain else ""
    print(f"index {mf.name}: {result.value}{flag}")
    for branch, verdicts in (("minus", result.minus_verdicts),
                             ("plus", result.plus_verdicts)):
        text = ", ".join({True: "normalizable", False: "non-normalizable",
                          None: "inconclusive"}[v] for v in verdicts)
        print(f"  kernel states [{branch}]: {text}")
    _emit(_envelope("index", mf, args, True, result.to_dict()), args)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nfoldsusy",
        description="Build, verify and solve quantum-mechanical models "
                    "with polynomial supercharges.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("model", help="path to a .model file")
        p.add_argument("--json", help="write a JSON report here")
        p.add_argument("--seed", type=int, default=0,
                       help="sampling seed recorded in reports")
        p.add_argument("--tol", type=float, default=None,
                       help="override the command's default tolerance")

    p = sub.add_parser("verify", help="check the algebra closes")
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("spectrum",
                       help="algebraic levels vs grid eigensolver")
    common(p)
    p.add_argument("--branch", choices=("minus", "plus", "both"),
                   default="minus")
    p.add_argument("--levels", type=int, default=None,
                   help="grid levels to compute (default from the file)")
    p.add_argument("--grid", type=int, default=None,
                   help="grid points (default from the file)")
    p.add_argument("--csv", help="write the matching table as CSV")
    p.add_argument("--plot-data", dest="plot_data",
                   help="write gnuplot-ready potential/levels data")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("certify-g",
                       help="coupling-grading certificate for the family")
    common(p)
    p.set_defaults(func=cmd_certify_g)

    p = sub.add_parser("index", help="kernel-counting index")
    common(p)
    p.set_defaults(func=cmd_index)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NFoldError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MATH_FAIL


if __name__ == "__main__":
    sys.exit(main())
