"""Canned BER-vs-r0 experiments, distance gains and plot-ready output.

A plan bundles a pair of orthogonal same-order modes, an r0 sweep and a link
template. Running it simulates every SISO arm and the diversity receiver on
shared screens and writes a CSV with one row per r0.
"""
from __future__ import annotations

import configparser
import csv
import io
import math
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .field_core import GridSpec, inner_product
from .link_sim import Arm, BerResult, LinkConfig, ber_sweep, format_ber
from .modes import DEFAULT_WAIST, ModeSpec, check_fits, default_grid, evaluate
from .turbulence import AtmosphereModel, TurbulenceParams, strehl_estimate, z_from_r0

OUTPUT_DIR_ENV = "MODALDIV_OUTPUT_DIR"

R0_MIN = 1e-4
R0_MAX = 5e-2
ORTHOGONALITY_TOL = 1e-6

DESK_SWEEP_MM = (0.5, 1.0, 1.4, 2.0, 3.0, 4.5, 6.0, 8.0, 10.0, 12.0, 14.0, 17.0)
# below ~0.5 mm every series saturates at 0.5; only worth the time at full scale
FULL_EXTRA_MM = (0.1,)
DESK_BITS, DESK_SCREENS = 10_000, 256
FULL_BITS, FULL_SCREENS = 1_000_000, 1024


class PlanValidationError(ValueError):
    """A plan violates one of its structural invariants."""


@dataclass(frozen=True)
class ExperimentPlan:
    """One BER sweep.

    Parameters
    ----------
    name : str
    mode_pair : tuple of ModeSpec
        Launch modes, in arm order. They share the waist and must be orthogonal.
    r0_sweep : tuple of float
        Fried parameters in metres, strictly increasing.
    link : LinkConfig
        Template; its turbulence r0 is replaced point by point.
    outputs : tuple of str
        Artifact paths. The first one, if any, receives the CSV.
    """

    name: str
    mode_pair: tuple[ModeSpec, ModeSpec]
    r0_sweep: tuple[float, ...]
    link: LinkConfig
    outputs: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mode_pair", tuple(self.mode_pair))
        object.__setattr__(self, "r0_sweep", tuple(float(r) for r in self.r0_sweep))
        object.__setattr__(self, "outputs", tuple(str(p) for p in self.outputs))

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.mode_pair]

    @property
    def diversity_label(self) -> str:
        """``EGC`` followed by the index digits of each arm, e.g. ``EGC2221``."""
        return "EGC" + "".join(lab[2:] for lab in self.labels)

    @property
    def beam_diameter(self) -> float:
        return max(2.0 * m.second_moment_radius() for m in self.mode_pair)

    def validate(self) -> None:
        """Raise :class:`PlanValidationError` on the first broken invariant."""
        if len(self.mode_pair) != 2:
            raise PlanValidationError("a plan needs exactly two modes")
        a, b = self.mode_pair
        if a.waist != b.waist:
            raise PlanValidationError(f"modes must share a waist ({a.waist} != {b.waist})")
        if self.link.modes != self.mode_pair:
            raise PlanValidationError("link arms do not match the plan's mode pair")
        grid = self.link.turbulence.grid
        for m in self.mode_pair:
            try:
                check_fits(m, grid)
            except ValueError as exc:
                raise PlanValidationError(str(exc)) from None
        ov = abs(inner_product(evaluate(a, grid), evaluate(b, grid)))
        if not ov < ORTHOGONALITY_TOL:
            raise PlanValidationError(f"{a.long_label} and {b.long_label} overlap by {ov:.3g}")
        r = np.asarray(self.r0_sweep)
        if r.size == 0:
            raise PlanValidationError("empty r0 sweep")
        if np.any(np.diff(r) <= 0):
            raise PlanValidationError("r0 sweep must be strictly increasing")
        if r[0] < R0_MIN or r[-1] > R0_MAX:
            raise PlanValidationError(f"r0 sweep must lie in [{R0_MIN}, {R0_MAX}] m")


def make_plan(
    name: str,
    modes: Sequence[ModeSpec],
    r0_sweep_mm: Sequence[float] = DESK_SWEEP_MM,
    samples_per_axis: int = 256,
    extent: float | None = None,
    **link_kwargs,
) -> ExperimentPlan:
    """Equal-weight two-arm plan on a grid sized for the widest mode."""
    modes = tuple(modes)
    grid = default_grid(modes, samples_per_axis) if extent is None else GridSpec(samples_per_axis, extent)
    r0 = [x * 1e-3 for x in r0_sweep_mm]
    turb = TurbulenceParams(r0[-1], grid)
    link = LinkConfig(tuple(Arm(m, 1.0 / len(modes)) for m in modes), turb, **link_kwargs)
    return ExperimentPlan(name, modes, tuple(r0), link)


def _builtin_modes(name: str, waist: float) -> tuple[ModeSpec, ModeSpec]:
    if name == "paper-n4":
        return ModeSpec.hg(2, 2, waist), ModeSpec.lg(2, 1, waist)
    return ModeSpec.hg(4, 4, waist), ModeSpec.lg(6, 1, waist)


BUILTIN_PLANS = ("paper-n4", "paper-n8")


def builtin_plan(name: str, full_scale: bool = False, waist: float = DEFAULT_WAIST, **overrides) -> ExperimentPlan:
    """``paper-n4`` (HG22 + LG21) or ``paper-n8`` (HG44 + LG61).

    Desk scale is 1e4 bits x 256 screens; ``full_scale`` switches to
    1e6 x 1024 and adds the 0.1 mm point.
    """
    if name not in BUILTIN_PLANS:
        raise KeyError(f"unknown plan {name!r}; built-ins are {', '.join(BUILTIN_PLANS)}")
    sweep = (FULL_EXTRA_MM + DESK_SWEEP_MM) if full_scale else DESK_SWEEP_MM
    kw = dict(bits_per_screen=FULL_BITS if full_scale else DESK_BITS,
              n_screens=FULL_SCREENS if full_scale else DESK_SCREENS)
    kw.update(overrides)
    return make_plan(name, _builtin_modes(name, waist), sweep, **kw)


# -- running -------------------------------------------------------------------

def run_curve(plan: ExperimentPlan, workers: int = 1) -> list[BerResult]:
    return ber_sweep(plan.link, plan.r0_sweep, workers=workers)


def csv_header(plan: ExperimentPlan) -> list[str]:
    return ["r0", "SR"] + plan.labels + ["EGC", "bits", "screens"]


def curve_csv(plan: ExperimentPlan, curve: Sequence[BerResult]) -> str:
    """CSV text for a curve; r0 in mm, zero BERs shown as ``<1/bits``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(plan))
    d = plan.beam_diameter
    for res in curve:
        bers = list(res.ber_per_arm) + [res.ber_diversity]
        w.writerow(
            [f"{res.r0 * 1e3:.6g}", f"{strehl_estimate(d, res.r0):.6g}"]
            + [format_ber(b, res.bits_tested) for b in bers]
            + [res.bits_tested, res.screens_used]
        )
    return buf.getvalue()


def run_sweep(plan: ExperimentPlan, workers: int = 1, csv_path=None) -> list[BerResult]:
    """Validate, simulate and write the CSV.

    The CSV goes to ``csv_path``, else to ``plan.outputs[0]``; with neither,
    nothing is written.
    """
    plan.validate()
    curve = run_curve(plan, workers)
    target = csv_path if csv_path is not None else (plan.outputs[0] if plan.outputs else None)
    if target is not None:
        Path(target).parent.mkdir(parents=True, exist_ok=True)
        Path(target).write_text(curve_csv(plan, curve))
    return curve


def _parse_ber(text: str) -> float:
    # "<x" marks an unresolved zero
    return 0.0 if text.startswith("<") else float(text)


def read_curve_csv(path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Return r0 in metres and a BER array per series column."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    r0 = np.array([float(r["r0"]) for r in rows]) * 1e-3
    skip = {"r0", "SR", "bits", "screens"}
    series = {k: np.array([_parse_ber(r[k]) for r in rows]) for k in rows[0] if k not in skip}
    return r0, series


# -- distance gain -------------------------------------------------------------

def crossing_r0(r0: Sequence[float], ber: Sequence[float], target: float) -> float | None:
    """Smallest r0 at which a BER curve falls to ``target``.

    The curve is first made non-increasing with a running minimum, then
    interpolated linearly in ``(log BER, r0)``. Zero BERs cannot be placed on
    a log axis and are dropped. Returns ``None`` when ``target`` lies
    outside the resolved range.
    """
    r0 = np.asarray(r0, dtype=float)
    ber = np.minimum.accumulate(np.asarray(ber, dtype=float))
    keep = ber > 0
    r0, ber = r0[keep], ber[keep]
    if r0.size == 0 or not 0 < target:
        return None
    if target > ber[0] or target < ber[-1]:
        return None
    k = int(np.argmax(ber <= target))
    if k == 0 or ber[k] == target:
        return float(r0[k])
    la, lb, lt = math.log(ber[k - 1]), math.log(ber[k]), math.log(target)
    t = (la - lt) / (la - lb)
    return float(r0[k - 1] + t * (r0[k] - r0[k - 1]))


@dataclass(frozen=True)
class DistanceRow:
    target_ber: float
    r0_siso: float | None
    r0_div: float | None
    z_siso: float | None
    z_div: float | None

    @property
    def achievable(self) -> bool:
        return self.r0_siso is not None and self.r0_div is not None

    @property
    def gain_percent(self) -> float | None:
        if not self.achievable:
            return None
        return (self.z_div / self.z_siso - 1.0) * 100.0


def distance_gain_table(
    siso_curve: tuple[Sequence[float], Sequence[float]],
    div_curve: tuple[Sequence[float], Sequence[float]],
    target_bers: Sequence[float],
    atmosphere: AtmosphereModel,
) -> list[DistanceRow]:
    """Equivalent path length each receiver tolerates at each target BER.

    Curves are ``(r0, ber)`` pairs. The gain depends only on the ratio of
    the two crossing r0 values, not on ``atmosphere``.
    """
    rows = []
    for t in target_bers:
        a = crossing_r0(*siso_curve, t)
        b = crossing_r0(*div_curve, t)
        rows.append(DistanceRow(
            float(t), a, b,
            None if a is None else z_from_r0(atmosphere, a),
            None if b is None else z_from_r0(atmosphere, b),
        ))
    return rows


def format_distance_table(rows: Sequence[DistanceRow], siso_label: str = "SISO") -> str:
    lines = [f"{'BER':>8} {'r0 ' + siso_label + ' (mm)':>16} {'r0 div (mm)':>12} "
             f"{'z ' + siso_label + ' (m)':>14} {'z div (m)':>11} {'gain %':>8}"]
    for r in rows:
        if not r.achievable:
            lines.append(f"{r.target_ber:>8.3g}   not achievable within the sweep")
            continue
        lines.append(f"{r.target_ber:>8.3g} {r.r0_siso * 1e3:>16.3f} {r.r0_div * 1e3:>12.3f} "
                     f"{r.z_siso:>14.4g} {r.z_div:>11.4g} {r.gain_percent:>8.1f}")
    return "\n".join(lines)


# -- plot data -----------------------------------------------------------------

_GNUPLOT = """\
set datafile separator ","
set key autotitle columnhead
set logscale y
set xlabel "r0 (mm)"
set ylabel "BER"
set yrange [*:1]
set grid
set terminal pngcairo size 800,600
set output "{png}"
plot {plots}
"""


def render_plot_data(plan: ExperimentPlan, curve: Sequence[BerResult], path) -> tuple[Path, Path]:
    """Write semilog-ready columns and a gnuplot script next to them.

    Data columns are ``r0`` (mm), one BER per series, then the Monte-Carlo
    standard error of each series. Zero BERs are written as blanks so a log
    axis skips them. Returns ``(data_path, script_path)``.
    """
    if not curve:
        raise ValueError("cannot render an empty curve")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = plan.labels + [plan.diversity_label]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r0"] + names + [n + "_err" for n in names])
        for res in curve:
            idx = range(len(names))
            bers = [res.ber(i) for i in idx]
            errs = [res.stderr(i) for i in idx]
            w.writerow([f"{res.r0 * 1e3:.6g}"]
                       + [f"{b:.6g}" if b > 0 else "" for b in bers]
                       + [f"{e:.3g}" for e in errs])
    script = path.with_suffix(".gp")
    plots = ", ".join(
        f'"{path.name}" using 1:{i + 2}:{i + 2 + len(names)} with yerrorlines title "{n}"'
        for i, n in enumerate(names)
    )
    script.write_text(_GNUPLOT.format(png=path.with_suffix(".png").name, plots=plots))
    return path, script


# -- config files --------------------------------------------------------------

_INT_KEYS = {"bits": "bits_per_screen", "screens": "n_screens", "seed": "master_seed"}
_FLOAT_KEYS = {"noise": "noise_sigma", "gamma": "threshold_fraction", "sensitivity": "receiver_sensitivity"}
_STR_KEYS = {"combining": "combining", "receiver": "receiver"}


@dataclass(frozen=True)
class RunSettings:
    plan: ExperimentPlan
    output_dir: Path
    workers: int = 1


def load_config(path, full_scale: bool = False) -> RunSettings:
    """Build a plan from an INI file.

    ``[plan]`` names a built-in (``name``) and may set ``full_scale``,
    ``workers`` and ``output_dir``. ``[overrides]`` accepts ``bits``,
    ``screens``, ``seed``, ``noise``, ``gamma``, ``sensitivity``,
    ``combining``, ``receiver``, ``waist`` (m), ``grid`` (samples per axis),
    ``extent`` (m) and ``r0_mm`` (comma separated).
    """
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise FileNotFoundError(path)
    if not cp.has_section("plan") or "name" not in cp["plan"]:
        raise PlanValidationError(f"{path}: missing [plan] name")
    sec = cp["plan"]
    full_scale = full_scale or sec.getboolean("full_scale", fallback=False)
    ov = cp["overrides"] if cp.has_section("overrides") else {}
    known = set(_INT_KEYS) | set(_FLOAT_KEYS) | set(_STR_KEYS) | {"waist", "grid", "extent", "r0_mm"}
    unknown = set(ov) - known
    if unknown:
        raise PlanValidationError(f"{path}: unknown override(s) {', '.join(sorted(unknown))}")
    plan = builtin_plan(sec["name"], full_scale=full_scale, waist=float(ov.get("waist", DEFAULT_WAIST)))
    link_kw = {}
    for key, attr in _INT_KEYS.items():
        if key in ov:
            link_kw[attr] = int(ov[key])
    for key, attr in _FLOAT_KEYS.items():
        if key in ov:
            link_kw[attr] = float(ov[key])
    for key, attr in _STR_KEYS.items():
        if key in ov:
            link_kw[attr] = ov[key].strip()
    if "r0_mm" in ov:
        sweep = tuple(float(x) * 1e-3 for x in ov["r0_mm"].split(","))
    else:
        sweep = plan.r0_sweep
    turb = plan.link.turbulence
    if "grid" in ov or "extent" in ov:
        grid = GridSpec(int(ov.get("grid", turb.grid.samples_per_axis)),
                        float(ov.get("extent", turb.grid.physical_extent)))
        turb = replace(turb, grid=grid)
    link = replace(plan.link, turbulence=turb, **link_kw)
    plan = replace(plan, r0_sweep=sweep, link=link)
    out = resolve_output_dir(sec.get("output_dir"))
    return RunSettings(plan, out, sec.getint("workers", fallback=1))


def resolve_output_dir(configured: str | None = None) -> Path:
    """The environment variable wins over the configured directory."""
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    return Path(configured) if configured else Path(".")
