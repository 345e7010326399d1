"""Command-line driver: run an adaptive loop on a preset and write its results.

Exit status is 0 when the tolerance was reached, 2 when a DOF or iteration
budget ended the run, and 1 on error.
"""
import argparse
import csv
from dataclasses import dataclass
import logging
import os
import sys

from . import presets
from .export import export_mesh
from .strategy import AdaptConfig, ConvergenceLog, Status, StrategyKind, adapt_loop

CSV_COLUMNS = ["iter", "n_elem", "n_dof", "eta", "energy_error",
               "n_h", "n_p", "n_hp", "pcg_iters", "seconds"]

# geometry is two-dimensional: exponential rate exp(-b N^(1/(2d-1)))
PLOT_EXPONENT = "1/3"

PLOT_SCRIPT = '''\
"""Convergence plot generated by hpadapt; run with python."""
import csv
import math
import os
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
path = sys.argv[1] if len(sys.argv) > 1 else os.path.join(here, "{csv_name}")
with open(path) as fh:
    rows = list(csv.DictReader(fh))
use_error = all(r["energy_error"] for r in rows)
key = "energy_error" if use_error else "eta"
x = [int(r["n_dof"]) ** ({exponent}) for r in rows]
y = [math.log10(float(r[key])) for r in rows]
plt.plot(x, y, "o-", label="{label}")
plt.xlabel("N_d^({exponent})")
plt.ylabel("log10 " + ("energy error" if use_error else "eta"))
plt.title("{problem}")
plt.legend()
plt.grid(True)
plt.savefig(os.path.join(here, "convergence.png"), dpi=150)
'''


@dataclass
class RunReport:
    log: ConvergenceLog
    n_elem: int
    n_dof: int
    eta: float
    energy_error: float | None
    csv_path: str
    plot_path: str

    @property
    def status(self):
        return self.log.status


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def write_csv(clog, path, record_time=False):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in clog:
            writer.writerow([
                r.iteration, r.n_elem, r.n_dof, _fmt(float(r.eta)), _fmt(r.energy_error),
                r.n_h, r.n_p, r.n_hp, r.pcg_iters,
                f"{r.seconds:.6f}" if record_time else "",
            ])
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments, which here means "budget"
    def error(self, message):
        raise UsageError(message)


def build_parser():
    ap = _Parser(prog="hpadapt", description=__doc__.splitlines()[0])
    ap.add_argument("--problem", required=True, help=f"one of {', '.join(sorted(presets.PRESETS))}")
    ap.add_argument("--strategy", default="hp", choices=[k.value for k in StrategyKind])
    ap.add_argument("--alpha", type=float, default=0.5, help="maximum-marking parameter")
    ap.add_argument("--tol", type=float, default=1e-6, help="stop when eta <= tol")
    ap.add_argument("--max-dof", type=int, default=50_000)
    ap.add_argument("--max-iters", type=int, default=100)
    ap.add_argument("--initial-degree", type=int, default=2)
    ap.add_argument("--d", type=int, default=2, choices=[2, 3],
                    help="dimension used in the expected reduction factors")
    ap.add_argument("--out", default="hpadapt-out", help="output directory")
    ap.add_argument("--export-mesh", action="store_true",
                    help="write a VTK file of the mesh at every iteration")
    ap.add_argument("--pcg-tol", type=float, default=1e-10)
    ap.add_argument("--record-time", action="store_true",
                    help="fill the seconds column (makes the CSV run-dependent)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run(args):
    """Execute one run described by parsed ``args``; returns a :class:`RunReport`."""
    problem = presets.get_problem(args.problem)
    config = AdaptConfig(
        alpha=args.alpha, epsilon=args.tol, d=args.d, max_dof=args.max_dof,
        max_iterations=args.max_iters, strategy_kind=StrategyKind(args.strategy),
        initial_degree=args.initial_degree, pcg_tol=args.pcg_tol,
    )
    os.makedirs(args.out, exist_ok=True)

    observer = None
    if args.export_mesh:
        def observer(state):
            path = os.path.join(args.out, f"mesh_{state.iteration:03d}.vtk")
            export_mesh(state.mesh, state.space, state.field, path)

    result = adapt_loop(problem, config, observer=observer)
    csv_path = write_csv(result.log, os.path.join(args.out, "convergence.csv"), args.record_time)
    plot_path = os.path.join(args.out, "plot_convergence.py")
    with open(plot_path, "w") as fh:
        fh.write(PLOT_SCRIPT.format(csv_name="convergence.csv", exponent=PLOT_EXPONENT,
                                    label=f"{args.strategy}", problem=args.problem))
    last = result.log.rows[-1]
    return RunReport(result.log, last.n_elem, last.n_dof, last.eta, last.energy_error,
                     csv_path, plot_path)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.problem not in presets.PRESETS:
            raise UsageError(f"unknown problem {args.problem!r}; choose from "
                             f"{', '.join(sorted(presets.PRESETS))}")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hpadapt: error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        report = run(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"hpadapt: error: {exc}", file=sys.stderr)
        return 1
    err = "n/a" if report.energy_error is None else f"{report.energy_error:.4e}"
    print(f"{args.problem} [{args.strategy}] {report.status.value}: "
          f"elements={report.n_elem} N_d={report.n_dof} eta={report.eta:.4e} energy_error={err}")
    print(f"wrote {report.csv_path}")
    return 0 if report.status is Status.TOLERANCE else 2


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
