"""Command-line entry point: ``modaldiv run|crosstalk|distances|validate``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .channel import crosstalk_matrix, write_crosstalk_csv
from .experiments import (
    BUILTIN_PLANS,
    PlanValidationError,
    RunSettings,
    builtin_plan,
    distance_gain_table,
    format_distance_table,
    load_config,
    read_curve_csv,
    render_plot_data,
    resolve_output_dir,
    run_sweep,
)
from .turbulence import AtmosphereModel


def _settings(args) -> RunSettings:
    """Resolve ``<plan>`` as a config file if it exists, else a built-in name."""
    if Path(args.plan).is_file():
        s = load_config(args.plan, full_scale=getattr(args, "full", False))
    else:
        plan = builtin_plan(args.plan, full_scale=getattr(args, "full", False))
        s = RunSettings(plan, resolve_output_dir())
    link_kw = {}
    if getattr(args, "bits", None):
        link_kw["bits_per_screen"] = args.bits
    if getattr(args, "screens", None):
        link_kw["n_screens"] = args.screens
    if getattr(args, "seed", None) is not None:
        link_kw["master_seed"] = args.seed
    if link_kw:
        s = replace(s, plan=replace(s.plan, link=replace(s.plan.link, **link_kw)))
    if getattr(args, "workers", None):
        s = replace(s, workers=args.workers)
    return s


def cmd_run(args) -> int:
    s = _settings(args)
    out = s.output_dir
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{s.plan.name}.csv"
    curve = run_sweep(s.plan, workers=s.workers, csv_path=csv_path)
    data, script = render_plot_data(s.plan, curve, out / f"{s.plan.name}_plot.csv")
    sys.stdout.write(csv_path.read_text())
    print(f"wrote {csv_path}, {data}, {script}", file=sys.stderr)
    return 0


def cmd_crosstalk(args) -> int:
    s = _settings(args)
    plan = s.plan
    plan.validate()
    r0_values = [x * 1e-3 for x in args.r0] if args.r0 else [plan.r0_sweep[-1]]
    out = s.output_dir
    out.mkdir(parents=True, exist_ok=True)
    np.set_printoptions(precision=4, suppress=True)
    for r0 in r0_values:
        params = plan.link.turbulence.with_r0(r0)
        m = crosstalk_matrix(plan.mode_pair, params, plan.link.n_screens, plan.link.master_seed, s.workers)
        path = out / f"{plan.name}_crosstalk_r0_{r0 * 1e3:g}mm.csv"
        write_crosstalk_csv(path, plan.mode_pair, m)
        print(f"r0 = {r0 * 1e3:g} mm (rows launch, columns detect: {', '.join(plan.labels)})")
        print(m)
    return 0


def cmd_distances(args) -> int:
    r0, series = read_curve_csv(args.csv)
    egc = [k for k in series if k.startswith("EGC")]
    if len(egc) != 1:
        print(f"{args.csv}: expected one EGC column", file=sys.stderr)
        return 2
    div = series.pop(egc[0])
    labels = [args.siso] if args.siso else list(series)
    atm = AtmosphereModel(args.cn2, args.wavelength)
    for lab in labels:
        if lab not in series:
            print(f"{args.csv}: no column {lab!r}", file=sys.stderr)
            return 2
        rows = distance_gain_table((r0, series[lab]), (r0, div), args.bers, atm)
        print(f"{lab} vs diversity (Cn2 = {args.cn2:g} m^-2/3, wavelength = {args.wavelength:g} m)")
        print(format_distance_table(rows, lab))
    return 0


def cmd_validate(args) -> int:
    s = _settings(args)
    s.plan.validate()
    p = s.plan
    print(f"{p.name}: OK ({', '.join(p.labels)}; {len(p.r0_sweep)} r0 points; "
          f"{p.link.bits_per_screen} bits x {p.link.n_screens} screens)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="modaldiv", description="Modal diversity FSO link simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    plan_help = f"built-in plan ({', '.join(BUILTIN_PLANS)}) or INI config file"

    def plan_args(p):
        p.add_argument("plan", help=plan_help)
        p.add_argument("--full", action="store_true", help="full-scale bits, screens and sweep")
        p.add_argument("--bits", type=int, help="bits per screen")
        p.add_argument("--screens", type=int, help="number of phase screens")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--workers", type=int, help="worker processes")

    p = sub.add_parser("run", help="BER sweep to CSV and plot files")
    plan_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("crosstalk", help="mean modal crosstalk matrix")
    plan_args(p)
    p.add_argument("--r0", type=float, nargs="+", help="r0 values in mm (default: weakest sweep point)")
    p.set_defaults(func=cmd_crosstalk)

    p = sub.add_parser("distances", help="distance-gain table from a run CSV")
    p.add_argument("csv")
    p.add_argument("--cn2", type=float, required=True, help="C_n^2 in m^-2/3")
    p.add_argument("--wavelength", type=float, required=True, help="wavelength in m")
    p.add_argument("--bers", type=float, nargs="+", required=True, help="target BERs")
    p.add_argument("--siso", help="SISO column to compare against (default: all)")
    p.set_defaults(func=cmd_distances)

    p = sub.add_parser("validate", help="check a plan's invariants")
    plan_args(p)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PlanValidationError, KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
