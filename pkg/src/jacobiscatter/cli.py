"""Command-line front end: scenario files in, CSV/JSON reports out.

Subcommands: spectrum, alpha, det, shift, traces, evolve.  Exit codes:
0 success, 2 input/schema error, 3 numerical runtime error.  Identical
scenario files produce byte-identical outputs; `--jobs N` parallelizes
grid evaluation without changing row order.  `--figures DIR` additionally
renders a PNG of each report next to the delimited output.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import formats
from .errors import ScatterError, SchemaError

_DEFAULT_FORMAT = {
    "spectrum": "json",
    "alpha": "csv",
    "det": "csv",
    "shift": "csv",
    "traces": "json",
    "evolve": "csv",
}


def _emit(text: str, out: str):
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _figure_path(figures_dir: str, command: str) -> str:
    os.makedirs(figures_dir, exist_ok=True)
    return os.path.join(figures_dir, f"{command}.png")


def _grid_worker(task):
    p, z, excluded, with_alpha = task
    if with_alpha:
        return formats.alpha_row(p, z, excluded)
    return formats.det_row(p, z, excluded)


def _grid_rows(scn, with_alpha: bool, jobs: int):
    zs = scn.params.get("z_grid")
    if not zs:
        raise SchemaError("schema: z_grid is required for this command")
    excluded = formats.excluded_points(scn.perturbation, zs)
    tasks = [(scn.perturbation, z, ex, with_alpha) for z, ex in zip(zs, excluded)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_grid_worker, tasks))
    else:
        rows = [_grid_worker(t) for t in tasks]
    return rows


def cmd_spectrum(scn, args) -> str:
    doc = formats.spectrum_document(scn.perturbation)
    if args.figures:
        from . import figures

        figures.spectrum_figure(doc, _figure_path(args.figures, "spectrum"))
    if args.format == "csv":
        return formats.spectrum_csv(doc)
    return formats.dump_json(doc)


def _cmd_grid(scn, args, with_alpha: bool) -> str:
    command = "alpha" if with_alpha else "det"
    rows = _grid_rows(scn, with_alpha, args.jobs)
    n_warn = sum(1 for _, status in rows if status != "ok")
    if n_warn:
        print(f"warnings: {n_warn} grid points skipped", file=sys.stderr)
    if args.figures:
        from . import figures

        figures.alpha_figure(rows, _figure_path(args.figures, command),
                             with_alpha=with_alpha)
    header = formats.ALPHA_HEADER if with_alpha else formats.DET_HEADER
    if args.format == "json":
        return formats.dump_json(formats.rows_to_json(header, rows))
    return formats.rows_to_csv(header, rows)


def cmd_alpha(scn, args) -> str:
    return _cmd_grid(scn, args, with_alpha=True)


def cmd_det(scn, args) -> str:
    return _cmd_grid(scn, args, with_alpha=False)


def _shift_profile(scn):
    from .krein import DEFAULT_EPSILONS, spectral_shift

    kw = {}
    if "lambda_grid" in scn.params:
        kw["lambda_grid"] = scn.params["lambda_grid"]
    if "epsilons" in scn.params:
        kw["epsilons"] = scn.params["epsilons"]
    for key in ("band_nodes", "gap_samples", "pad"):
        if key in scn.params:
            kw[key] = scn.params[key]
    return spectral_shift(scn.perturbation, **kw)


def cmd_shift(scn, args) -> str:
    profile = _shift_profile(scn)
    if args.figures:
        from . import figures

        figures.shift_figure(profile, _figure_path(args.figures, "shift"))
    if args.format == "json":
        return formats.dump_json(profile.to_dict())
    return formats.shift_csv(profile)


def cmd_traces(scn, args) -> str:
    from .krein import trace_reports

    reports = trace_reports(
        scn.perturbation,
        orders=scn.params.get("orders", 8),
        moment_orders=scn.params.get("moment_orders", 4),
    )
    doc = {name: rep.to_dict() for name, rep in reports.items()}
    if args.figures:
        from . import figures

        figures.traces_figure(doc, _figure_path(args.figures, "traces"))
    if args.format == "csv":
        return formats.traces_csv(doc)
    return formats.dump_json(doc)


def cmd_evolve(scn, args) -> str:
    from .toda import TodaState, conserved_report, evolve

    ev = scn.params.get("evolve", {})
    if "times" in ev:
        times = ev["times"]
    elif "t_final" in ev:
        times = [0.0, ev["t_final"]]
    else:
        raise SchemaError("schema: evolve.times or evolve.t_final is required")
    state0 = TodaState(0.0, scn.perturbation, scn.background)
    report = conserved_report(
        state0,
        times,
        orders=ev.get("orders", 3),
        dt=ev.get("dt", 1e-3),
        pad=ev.get("pad", 80),
    )
    if args.figures:
        from . import figures

        figures.evolve_figure(report, _figure_path(args.figures, "evolve"))
    if args.format == "json":
        final = evolve(state0, times[-1], dt=ev.get("dt", 1e-3),
                       pad=ev.get("pad", 80))
        doc = {"report": report.to_dict(),
               "checkpoint": formats.checkpoint_document(final)}
        return formats.dump_json(doc)
    return formats.evolve_csv(report)


_COMMANDS = {
    "spectrum": cmd_spectrum,
    "alpha": cmd_alpha,
    "det": cmd_det,
    "shift": cmd_shift,
    "traces": cmd_traces,
    "evolve": cmd_evolve,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jacobiscatter",
        description="scattering reports for compactly perturbed periodic "
                    "Jacobi operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", default="-", help="output file (default stdout)")
        sp.add_argument("--format", choices=("csv", "json"),
                        default=_DEFAULT_FORMAT[name])
        sp.add_argument("--jobs", type=int, default=1,
                        help="parallel grid evaluation (row order preserved)")
        sp.add_argument("--figures", default=None, metavar="DIR",
                        help="also render a PNG report into DIR")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario = formats.read_scenario(args.scenario)
        payload = _COMMANDS[args.command](scenario, args)
    except SchemaError as exc:
        print(json.dumps({"error": "schema", "detail": str(exc)}),
              file=sys.stderr)
        return 2
    except ScatterError as exc:
        print(json.dumps({"error": "numerical",
                          "kind": exc.__class__.__name__,
                          "detail": str(exc)}), file=sys.stderr)
        return 3
    _emit(payload, args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
