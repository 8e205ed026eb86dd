"""Batch front-end: ``flexbeam {solve,search,verify,sweep,poincare}``.

Exit codes: 0 success, 2 invalid input (problem file, parameters, breaks),
3 solver failure, 64 unknown subcommand.  ``verify`` only reports and
exits 0 whenever the result file can be read.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .energy import eval_energy
from .fem import Mesh, PiecewiseDisplacement, build_mesh
from .model import BreakConfig, FlexbeamError, ParamViolation, InvalidBreaks, DegenerateMesh, MeshMismatch, Problem
from .problem_spec import ProblemSpec, SpecError, from_dict, parse_file
from .search import SearchPolicy, search
from .solvers import STATIONARITY_TOL, SolveReport, solve_fixed, solve_G1_fixed, stationarity_residual
from .verify import _jsonable, poincare_constant, verify_solution

log = logging.getLogger("flexbeam")

SUBCOMMANDS = ("solve", "search", "verify", "sweep", "poincare")
EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_USAGE = 0, 2, 3, 64
_INPUT_ERRORS = (SpecError, ParamViolation, InvalidBreaks, DegenerateMesh, MeshMismatch)
FORMAT = "flexbeam-result"


class SolverFailure(FlexbeamError):
    pass


def configure_logging() -> None:
    level = os.environ.get("FLEXBEAM_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


# ------------------------------------------------------------ output


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc) -> str:
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def solution_csv(report: SolveReport) -> str:
    """Node samples; break nodes get an L and an R row."""
    buf = io.StringIO()
    wr = csv.writer(buf)
    two = report.u_p is not None
    wr.writerow(["x", "side", "u_r", "du_r", "u_p", "du_p"] if two else ["x", "side", "u", "du"])
    plate = {}
    if two:
        plate = {x: (v, s) for x, _, v, s in report.u_p.node_table()}
    for x, side, v, s in report.u.node_table():
        row = [repr(float(x)), side, repr(float(v)), repr(float(s))]
        if two:
            pv, ps = plate[x]
            row += [repr(float(pv)), repr(float(ps))]
        wr.writerow(row)
    return buf.getvalue()


def result_document(command: str, spec: ProblemSpec, report: SolveReport, tol: float, search_result=None) -> dict:
    with_threshold = spec.problem is not Problem.G1 and not report.constrained
    ver = verify_solution(spec.problem, report, spec.params, spec.w, spec.loads, with_threshold=with_threshold)
    sol = {
        "nodes": report.mesh.nodes.tolist(),
        "dofs_r": report.u.coeffs.tolist(),
        "dofs_p": None if report.u_p is None else report.u_p.coeffs.tolist(),
        "active_set": report.active_set,
        "constraint_sites": [list(s) for s in report.constraint_sites],
        "multipliers": None if report.multipliers is None else np.asarray(report.multipliers).tolist(),
        "gaps": None if report.gaps is None else np.asarray(report.gaps).tolist(),
        "jumps": None if report.jumps is None else np.asarray(report.jumps).tolist(),
        "jump_gradients": None if report.jump_gradients is None else np.asarray(report.jump_gradients).tolist(),
    }
    doc = {
        "format": FORMAT,
        "version": 1,
        "command": command,
        "problem": spec.problem.value,
        "constrained": report.constrained,
        "spec": spec.echo(),
        "breaks": report.breaks.to_list(),
        "energy": report.energy.as_dict(),
        "solution": sol,
        "solver": {"method": report.method, "iterations": report.iterations,
                   "kkt_residual": report.kkt_residual, "tol": tol, "n_elements": spec.n},
        "search": None,
        "verification": ver.as_dict(),
    }
    if search_result is not None:
        doc["search"] = {
            "certificate": search_result.certificate,
            "explored": search_result.explored,
            "refined": search_result.refined,
            "near_optimal": [{"breaks": K.to_list(), "energy": e} for K, e in search_result.near_optimal],
        }
    return doc


# ------------------------------------------------------------ pipelines


def _checked(report: SolveReport, tol: float) -> SolveReport:
    if not report.kkt_residual <= tol:
        raise SolverFailure(f"stationarity residual {report.kkt_residual:.3e} exceeds tolerance {tol:.1e}")
    return report


def run_solve(spec: ProblemSpec, tol: float = STATIONARITY_TOL):
    mesh = build_mesh(spec.n, spec.breaks)
    if spec.problem is Problem.G1 and not spec.constrained:
        report = solve_G1_fixed(spec.params, spec.w, spec.loads.f_r, spec.loads.f_p, spec.breaks, mesh, tol=tol)
    else:
        report = solve_fixed(spec.problem, spec.params, spec.w, spec.loads, spec.breaks, mesh, spec.constrained)
    return _checked(report, tol), None


def run_search(spec: ProblemSpec, tol: float = STATIONARITY_TOL, jobs: int = 1):
    pol = spec.policy
    policy = SearchPolicy(pol.candidate_nodes, pol.k_max, pol.exhaustive_cap, pol.refine_positions,
                          pol.mode, jobs, pol.refine_tol)
    res = search(spec.problem, spec.params, spec.w, spec.loads, build_mesh(spec.n), policy, spec.constrained)
    return _checked(res.report, tol), res


def _write_outputs(out: Path, stem: str, doc: dict, report: SolveReport) -> Path:
    path = out / f"{stem}.json"
    atomic_write(path, dumps(doc))
    atomic_write(out / f"{stem}.csv", solution_csv(report))
    return path


def _job(command: str, spec: ProblemSpec, tol: float, jobs: int):
    if command == "search":
        report, res = run_search(spec, tol, jobs)
    else:
        report, res = run_solve(spec, tol)
    return report, result_document(command, spec, report, tol, res)


def cmd_solve_or_search(args, command: str) -> int:
    spec = _load_spec(args)
    out = Path(args.out)
    report, doc = _job(command, spec, args.tol, args.jobs)
    path = _write_outputs(out, spec.name, doc, report)
    print(f"{command}: energy {report.energy.total:.12g}, breaks {report.breaks.to_list()} -> {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec = _load_spec(args)
    if not spec.sweep_field or not spec.sweep_values:
        raise SpecError("[sweep]: sweep needs 'field' and 'values'")
    command = "search" if "search" in spec.raw else "solve"
    specs = [spec.with_value(spec.sweep_field, v) for v in spec.sweep_values]
    out = Path(args.out)

    def one(k):
        report, doc = _job(command, specs[k], args.tol, 1)
        stem = f"{spec.name}_{k:03d}"
        _write_outputs(out, stem, doc, report)
        return stem, report

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(one, range(len(specs))))
    else:
        results = [one(k) for k in range(len(specs))]
    buf = io.StringIO()
    wr = csv.writer(buf)
    wr.writerow([spec.sweep_field, "n_breaks", "energy", "file"])
    for value, (stem, report) in zip(spec.sweep_values, results):
        wr.writerow([value, len(report.breaks), repr(report.energy.total), f"{stem}.json"])
    atomic_write(out / f"{spec.name}_index.csv", buf.getvalue())
    print(f"sweep over {spec.sweep_field}: {len(specs)} runs -> {out / (spec.name + '_index.csv')}")
    return EXIT_OK


def reload_solution(doc: dict):
    """Rebuild (spec, SolveReport) from a result document."""
    spec = from_dict(doc["spec"])
    problem = Problem(doc["problem"])
    breaks = BreakConfig.from_list(doc["breaks"])
    sol = doc["solution"]
    mesh = Mesh(np.asarray(sol["nodes"], dtype=float), breaks)
    u = PiecewiseDisplacement(mesh, np.asarray(sol["dofs_r"], dtype=float))
    u_p = None
    if sol.get("dofs_p") is not None:
        u_p = PiecewiseDisplacement(mesh.unbroken(), np.asarray(sol["dofs_p"], dtype=float))
    fields = u if u_p is None else (u, u_p)
    energy = eval_energy(problem, spec.params, spec.w, spec.loads, breaks, fields)
    arr = lambda k: None if sol.get(k) is None else np.asarray(sol[k], dtype=float)  # noqa: E731
    report = SolveReport(
        problem, breaks, u, u_p, energy, kkt_residual=float("nan"),
        method=doc["solver"]["method"], iterations=doc["solver"]["iterations"],
        constrained=bool(doc["constrained"]), active_set=sol.get("active_set") or [],
        multipliers=arr("multipliers"), gaps=arr("gaps"), jumps=arr("jumps"),
        jump_gradients=arr("jump_gradients"),
        constraint_sites=[tuple(s) for s in sol.get("constraint_sites") or []],
    )
    return spec, report


def verify_document(doc: dict) -> dict:
    spec, report = reload_solution(doc)
    x = report.dofs
    stat = stationarity_residual(spec.problem, spec.params, spec.w, spec.loads, report.breaks, x,
                                 report.mesh, report.constrained)
    report.kkt_residual = stat
    ver = verify_solution(spec.problem, report, spec.params, spec.w, spec.loads)
    stored = doc["energy"]["total"]
    return {
        "format": FORMAT + "-verify",
        "problem": spec.problem.value,
        "breaks": report.breaks.to_list(),
        "energy_stored": stored,
        "energy_recomputed": report.energy.total,
        "energy_abs_diff": abs(report.energy.total - stored),
        "stationarity_residual": stat,
        "stored_kkt_residual": doc["solver"].get("kkt_residual"),
        "verification": ver.as_dict(),
    }


def cmd_verify(args) -> int:
    try:
        with open(args.result, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("format") != FORMAT:
            raise SpecError(f"{args.result}: not a {FORMAT} document")
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"cannot read result {args.result}: {exc}") from exc
    rep = verify_document(doc)
    text = dumps(rep)
    if args.out:
        atomic_write(Path(args.out) / (Path(args.result).stem + "_verify.json"), text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_poincare(args) -> int:
    c = poincare_constant(args.n, args.a, args.b)
    print(f"C_P(n={args.n}, ({args.a:g}, {args.b:g})) = {c!r}")
    return EXIT_OK


def _load_spec(args) -> ProblemSpec:
    if not args.spec:
        raise SpecError("--spec PATH is required")
    spec = parse_file(args.spec)
    if args.n is not None:
        spec = spec.with_value("mesh.n", args.n)
    return spec


# ------------------------------------------------------------ entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flexbeam", description="Free-discontinuity beam solver")
    sub = ap.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")

    def common(p, out_default="."):
        p.add_argument("--spec", help="problem file (INI key = value)")
        p.add_argument("--n", type=int, help="number of elements (overrides [mesh] n)")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker threads")
        p.add_argument("--tol", type=float, default=STATIONARITY_TOL, help="stationarity tolerance")

    common(sub.add_parser("solve", help="fixed-break inner solve"))
    common(sub.add_parser("search", help="search over break sets"))
    common(sub.add_parser("sweep", help="grid over one field of the problem file"))
    pv = sub.add_parser("verify", help="re-check a stored result")
    pv.add_argument("result", help="result JSON")
    pv.add_argument("--out", default=None, help="also write the report here")
    pp = sub.add_parser("poincare", help="print the clamped Poincare constant")
    pp.add_argument("--n", type=int, default=512)
    pp.add_argument("--a", type=float, default=-1.0)
    pp.add_argument("--b", type=float, default=1.0)
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    configure_logging()
    ap = build_parser()
    if not argv or argv[0] not in SUBCOMMANDS:
        if argv and argv[0] in ("-h", "--help"):
            ap.print_help()
            return EXIT_OK
        ap.print_usage(sys.stderr)
        print(f"flexbeam: unknown subcommand {argv[0]!r}" if argv else "flexbeam: missing subcommand",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "poincare":
            return cmd_poincare(args)
        if args.command == "sweep":
            return cmd_sweep(args)
        return cmd_solve_or_search(args, args.command)
    except _INPUT_ERRORS as exc:
        print(f"flexbeam: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"flexbeam: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FlexbeamError as exc:
        print(f"flexbeam: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
