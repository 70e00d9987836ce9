"""Command-line entry point: ``intervalest <command> ...``.

Exit codes: 0 pass/feasible, 1 verification failure, 2 infeasible,
3 unknown or undetermined, 4 invalid input.  The log level is read from the
``INTERVALEST_LOG_LEVEL`` environment variable (default WARNING).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import IntervalEstError, JsrBudgetError, RealizationError
from .harness.io import dumps, write_run_csv, write_sidecar
from .harness.sampling import sample_trajectory
from .harness.scenario import load_document, load_scenario, parse_box, parse_system
from .harness.verify import Fault, resolve_gains, run_estimators, verify
from .realization import ho_kalman, radius_impulse_response, realizability_test
from .sls import SlsSystem
from .spectral import MatrixSet, jsr_bounds, ues_check
from .synthesis import synthesize_lti, synthesize_sls_diagonal, synthesize_sls_nondiagonal

EXIT_PASS, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_UNKNOWN, EXIT_INPUT = 0, 1, 2, 3, 4
LOG_ENV = "INTERVALEST_LOG_LEVEL"

log = logging.getLogger("intervalest")


def _emit(doc, out):
    text = dumps(doc)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _system_doc(path):
    doc = load_document(path)
    if not isinstance(doc, dict):
        raise IntervalEstError(f"{path}: expected a mapping")
    return doc, doc.get("system", doc)


def cmd_simulate(args):
    sc = load_scenario(args.scenario)
    if args.sls and not sc.is_sls:
        raise IntervalEstError("--sls given but the scenario describes an LTI system")
    gains, syn = resolve_gains(sc)
    if sc.closed_loop and gains is None:
        _emit({"status": syn.status.value, "message": syn.message}, None)
        return syn.status.exit_code
    traj = sample_trajectory(sc, 0)
    runs = run_estimators(sc, gains, traj.outputs)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    sigma = sc.sigma.sequence if sc.is_sls else None
    files = []
    for label, run in runs.items():
        files.append(str(write_run_csv(run, out / f"{label}.csv", sigma)))
        write_sidecar(run, out / f"{label}.json", sc, None if syn is None else syn.certificate.to_dict())
    states = out / "trajectory_0.csv"
    header = "t," + ",".join(f"x_{i}" for i in range(1, sc.n + 1))
    np.savetxt(states, np.column_stack([np.arange(sc.horizon + 1), traj.states]),
               delimiter=",", header=header, comments="", fmt="%.17g")
    _emit({"scenario": sc.name, "outputs": files, "trajectory": str(states)}, None)
    return EXIT_PASS


def cmd_verify(args):
    sc = load_scenario(args.scenario)
    if args.trajectories is not None:
        sc.num_trajectories = args.trajectories
    fault = Fault.parse(args.inject_fault) if args.inject_fault else None
    report = verify(sc, fault=fault)
    for line in report.summary_lines():
        print(line)
    if args.json:
        Path(args.json).write_text(dumps(report.to_dict()) + "\n")
    return report.exit_code


def cmd_synthesize(args):
    _, sysdoc = _system_doc(args.system)
    system = parse_system(sysdoc)
    method = args.method
    if method == "auto":
        method = "sls-diagonal" if isinstance(system, SlsSystem) else "lti"
    if isinstance(system, SlsSystem):
        pairs = [(m.A, m.require_output()) for m in system.modes]
    else:
        pairs = [(system.A, system.require_output())]
    if method == "lti":
        if len(pairs) != 1:
            raise IntervalEstError("method lti needs a single-mode system")
        res = synthesize_lti(*pairs[0])
    elif method == "sls-diagonal":
        res = synthesize_sls_diagonal(pairs)
    else:
        res = synthesize_sls_nondiagonal(pairs)
    doc = res.to_dict()
    doc["method"] = method
    _emit(doc, args.output)
    return res.status.exit_code


def cmd_realize(args):
    doc, sysdoc = _system_doc(args.system)
    system = parse_system(sysdoc)
    if isinstance(system, SlsSystem):
        raise IntervalEstError("realization is only available for LTI systems")
    if "x0" in doc:
        p0 = parse_box(doc["x0"], system.n).radius
    else:
        p0 = np.zeros(system.n)
        log.warning("no x0 given; using a zero initial radius")
    length = args.length or 2 * args.r_max + 2
    H = radius_impulse_response(system.A, system.B, p0, length)
    test = realizability_test(H, args.r_max)
    out = {"realizability": test.to_dict(), "rank_table": test.rank_table}
    table = args.rank_table or (Path(args.output).with_name(Path(args.output).stem + "_ranks.csv")
                                if args.output else None)
    if table:
        _write_rank_table(test.rank_table, table)
    code = EXIT_UNKNOWN
    if test.realizable:
        try:
            out["realization"] = ho_kalman(H, test.rank).to_dict()
            code = EXIT_PASS
        except RealizationError as exc:
            out["error"] = str(exc)
    _emit(out, args.output)
    return code


def _write_rank_table(rows, path):
    cols = ["r", "l", "rows", "cols", "rank", "ambiguous"]
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(cols)
        for row in rows:
            wr.writerow([int(row[c]) if c != "ambiguous" else str(bool(row[c])).lower() for c in cols])


def cmd_jsr(args):
    doc = load_document(args.matrixset)
    if isinstance(doc, dict):
        mats, labels = doc.get("matrices"), doc.get("labels")
    else:
        mats, labels = doc, None
    if not mats:
        raise IntervalEstError(f"{args.matrixset}: no matrices found")
    S = MatrixSet(tuple(np.asarray(M, dtype=float) for M in mats), None if labels is None else tuple(labels))
    if args.abs:
        S = S.abs()
    b = jsr_bounds(S, args.depth, args.norm)
    cert = ues_check(S, args.depth, args.norm)
    _emit({"bounds": b.to_dict(), "stability": cert.status.value, "certifying_length": cert.certifying_length}, args.output)
    return EXIT_PASS


def build_parser():
    p = argparse.ArgumentParser(prog="intervalest", description="Interval-valued state estimation toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run the configured estimators and write CSV/JSON files")
    s.add_argument("scenario")
    s.add_argument("-o", "--output", default=".", help="output directory")
    s.add_argument("--sls", action="store_true", help="require a switched-system scenario")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("verify", help="Monte Carlo containment and ordering checks")
    s.add_argument("scenario")
    s.add_argument("--json", help="write the full report to this file")
    s.add_argument("--trajectories", type=int, help="override num_trajectories")
    s.add_argument("--inject-fault", metavar="LABEL:T:COORD:EPS[:SIDE]",
                   help="corrupt one bound to check that the harness detects it")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("synthesize", help="compute observer gains and a certificate")
    s.add_argument("system")
    s.add_argument("--method", choices=["auto", "lti", "sls-diagonal", "sls-nondiagonal"], default="auto")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_synthesize)

    s = sub.add_parser("realize", help="Hankel rank test and minimal realization of the tight radius")
    s.add_argument("system")
    s.add_argument("--r-max", type=int, default=10)
    s.add_argument("--length", type=int)
    s.add_argument("-o", "--output")
    s.add_argument("--rank-table", help="CSV of Hankel ranks (default: next to --output)")
    s.set_defaults(func=cmd_realize)

    s = sub.add_parser("jsr", help="joint spectral radius bounds of a matrix set")
    s.add_argument("matrixset")
    s.add_argument("--depth", type=int, default=8)
    s.add_argument("--norm", choices=["frobenius", "spectral"], default="frobenius")
    s.add_argument("--abs", action="store_true", help="use elementwise absolute values of the members")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_jsr)
    return p


def main(argv=None):
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (IntervalEstError, JsrBudgetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
