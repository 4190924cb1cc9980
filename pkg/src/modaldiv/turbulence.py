"""Kolmogorov phase screens and Fried-parameter path calculus.

Screens are synthesised with the FFT spectral method and augmented with
subharmonics (three-by-three frequency grids at 1/3, 1/9, ... of the
fundamental spacing) to restore the tip/tilt content the FFT grid misses.
Low-frequency cells carry their cell-integrated tilt power rather than the
PSD sampled at the cell centre, and the power left below the innermost
subharmonic cell is added as a random plane (pure Kolmogorov only).

The phase power spectral density is written in ordinary spatial frequency
``f`` (cycles per metre)::

    PSD(f) = 0.023 r0**(-5/3) f**(-11/3)

which is the normalisation giving ``D(r) = 6.88 (r / r0)**(5/3)``. In angular
wavenumber the same spectrum reads ``0.49 r0**(-5/3) kappa**(-11/3)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .field_core import GridMismatchError, GridSpec, read_matrix, write_matrix

KOLMOGOROV_PSD_COEFF = 0.023
STRUCTURE_COEFF = 6.88
FRIED_COEFF = 0.185
# exact inverse of the r0(z) relation; 0.185**(5/3) = 0.0600647...
DISTANCE_COEFF = FRIED_COEFF ** (5.0 / 3.0)
STREHL_COEFF = 1.03


@dataclass(frozen=True)
class TurbulenceParams:
    """Single-screen turbulence description.

    ``outer_scale`` switches to a von Karman spectrum when finite; the
    default (``inf``) is pure Kolmogorov.
    """

    r0: float
    grid: GridSpec
    subharmonic_levels: int = 3
    outer_scale: float = math.inf

    def __post_init__(self):
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0!r}")
        if self.subharmonic_levels < 0:
            raise ValueError("subharmonic_levels must be >= 0")
        if not self.outer_scale > 0:
            raise ValueError("outer_scale must be positive")

    def with_r0(self, r0: float) -> "TurbulenceParams":
        return TurbulenceParams(r0, self.grid, self.subharmonic_levels, self.outer_scale)


@dataclass(frozen=True, eq=False)
class PhaseScreen:
    grid: GridSpec
    phase: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.phase, dtype=float, copy=True)
        if arr.shape != self.grid.shape:
            raise ValueError(f"phase shape {arr.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("phase screen must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "phase", arr)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "PhaseScreen":
        return cls(grid, np.zeros(grid.shape))

    def __add__(self, offset: float) -> "PhaseScreen":
        return PhaseScreen(self.grid, self.phase + offset)

    def __mul__(self, scale: float) -> "PhaseScreen":
        return PhaseScreen(self.grid, self.phase * scale)

    __rmul__ = __mul__


@dataclass(frozen=True)
class AtmosphereModel:
    cn2: float
    wavelength: float

    def __post_init__(self):
        if not self.cn2 > 0:
            raise ValueError(f"cn2 must be positive, got {self.cn2!r}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength!r}")


# -- seeding ------------------------------------------------------------------

def derive_seed(master_seed: int, *keys: int) -> int:
    """Mix ``master_seed`` with integer keys into an independent 64-bit seed.

    The mixing function is numpy's ``SeedSequence(master_seed,
    spawn_key=keys)``; the first two 32-bit words of its state form the
    result. Serial and parallel runs therefore draw identical streams.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def screen_seed(master_seed: int, screen_index: int) -> int:
    return derive_seed(master_seed, 0, screen_index)


# -- synthesis ----------------------------------------------------------------

def phase_psd(f: np.ndarray, r0: float, outer_scale: float = math.inf) -> np.ndarray:
    """Phase PSD in rad^2 m^2 at spatial frequency ``f`` (cycles/m)."""
    f0sq = 0.0 if math.isinf(outer_scale) else (1.0 / outer_scale) ** 2
    with np.errstate(divide="ignore"):
        return KOLMOGOROV_PSD_COEFF * r0 ** (-5.0 / 3.0) * (np.asarray(f) ** 2 + f0sq) ** (-11.0 / 6.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _cell_tilt_factor(i: int, j: int) -> float:
    """Ratio of cell-integrated to centre-sampled tilt power for a unit cell.

    For the cell of side 1 centred on ``(i, j)`` this returns
    ``int |u|**(-11/3) |u|**2 d2u / |c|**2`` divided by ``|c|**(-11/3)``.
    The PSD is steep near the origin, so sampling at the cell centre
    underweights the innermost cells.
    """
    ux = i + 0.5 * _GL_NODES
    uy = j + 0.5 * _GL_NODES
    u2 = ux[None, :] ** 2 + uy[:, None] ** 2
    integral = 0.25 * np.sum(np.outer(_GL_WEIGHTS, _GL_WEIGHTS) * u2 ** (-5.0 / 6.0))
    c2 = float(i * i + j * j)
    return float(integral / c2 / c2 ** (-11.0 / 6.0))


_EDGE_FACTOR = _cell_tilt_factor(1, 0)
_CORNER_FACTOR = _cell_tilt_factor(1, 1)


def _square_tilt_integral() -> float:
    # int over the square |fx|,|fy| <= 1 of |f|**(-11/3) fx**2 d2f
    # nodes on [0, pi/4]; by symmetry the full circle is four quarter turns
    a = 0.125 * np.pi * (_GL_NODES + 1.0)
    w = 0.125 * np.pi * _GL_WEIGHTS
    lower = np.sum(w * np.cos(a) ** (5.0 / 3.0))
    upper = np.sum(w * np.cos(a + 0.25 * np.pi) ** 2 * np.sin(a + 0.25 * np.pi) ** (-1.0 / 3.0))
    return float(4.0 * 3.0 * (lower + upper))


_SQUARE_TILT = _square_tilt_integral()


def _fft_screen(params: TurbulenceParams, rng: np.random.Generator) -> np.ndarray:
    grid = params.grid
    n = grid.samples_per_axis
    df = 1.0 / grid.physical_extent
    fx = np.fft.fftfreq(n, d=grid.pitch)
    f = np.hypot(fx[None, :], fx[:, None])
    psd = phase_psd(f, params.r0, params.outer_scale)
    psd[0, 0] = 0.0
    if params.subharmonic_levels:
        for iy in (-1, 0, 1):
            for ix in (-1, 0, 1):
                if ix or iy:
                    psd[iy, ix] *= _CORNER_FACTOR if ix and iy else _EDGE_FACTOR
    cn = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * np.sqrt(psd) * df
    return np.fft.ifft2(cn).real * (n * n)


def _subharmonics(params: TurbulenceParams, rng: np.random.Generator) -> np.ndarray:
    grid = params.grid
    ax = grid.axis()
    offsets = np.array([-1, 0, 1])
    weight = np.array([[_CORNER_FACTOR, _EDGE_FACTOR, _CORNER_FACTOR],
                       [_EDGE_FACTOR, 0.0, _EDGE_FACTOR],
                       [_CORNER_FACTOR, _EDGE_FACTOR, _CORNER_FACTOR]])
    radius = np.hypot(offsets[:, None], offsets[None, :])
    low = np.zeros(grid.shape)
    for level in range(1, params.subharmonic_levels + 1):
        d = 1.0 / (3**level * grid.physical_extent)
        draws = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        with np.errstate(divide="ignore", invalid="ignore"):
            psd = np.where(weight > 0, phase_psd(radius * d, params.r0, params.outer_scale) * weight, 0.0)
        coeff = draws * np.sqrt(psd) * d
        basis = np.exp(2j * np.pi * d * np.outer(offsets, ax))
        # sum_{iy, ix} coeff[iy, ix] exp(2 pi i d (ix x + iy y))
        low += (basis.T @ coeff @ basis).real
    return low


def residual_tilt_std(params: TurbulenceParams) -> float:
    """Per-axis std (rad/m) of the tilt carried by frequencies below the innermost subharmonic cell.

    Those wavelengths are much longer than the window, so their contribution
    is a plane. Zero when subharmonics are off or the outer scale is finite.
    """
    if not params.subharmonic_levels or not math.isinf(params.outer_scale):
        return 0.0
    half_width = 0.5 / (3**params.subharmonic_levels * params.grid.physical_extent)
    var = (2 * np.pi) ** 2 * KOLMOGOROV_PSD_COEFF * params.r0 ** (-5.0 / 3.0) \
        * half_width ** (1.0 / 3.0) * _SQUARE_TILT
    return math.sqrt(var)


def unit_screen(params: TurbulenceParams, seed: int) -> np.ndarray:
    """Phase for ``r0 = 1 m`` with the given draws.

    Every component scales as ``r0**(-5/6)``, so one unit screen serves a
    whole r0 sweep with common random numbers.
    """
    unit = TurbulenceParams(1.0, params.grid, params.subharmonic_levels, params.outer_scale)
    rng = np.random.default_rng(int(seed))
    phase = _fft_screen(unit, rng)
    if unit.subharmonic_levels:
        phase = phase + _subharmonics(unit, rng)
        sigma = residual_tilt_std(unit)
        if sigma:
            ax = unit.grid.axis()
            tx, ty = rng.normal(0.0, sigma, size=2)
            phase = phase + tx * ax[None, :] + ty * ax[:, None]
    return phase - phase.mean()


def scale_unit_screen(phase: np.ndarray, r0: float) -> np.ndarray:
    return phase * r0 ** (-5.0 / 6.0)


def generate_screen(params: TurbulenceParams, seed: int) -> PhaseScreen:
    """Draw one piston-free Kolmogorov screen; a pure function of its inputs.

    With ``subharmonic_levels == 0`` this is the plain FFT screen, which
    lacks low-frequency power.
    """
    return PhaseScreen(params.grid, scale_unit_screen(unit_screen(params, seed), params.r0))


def generate_screens(params: TurbulenceParams, n_screens: int, master_seed: int) -> list[PhaseScreen]:
    return [generate_screen(params, screen_seed(master_seed, i)) for i in range(n_screens)]


# -- diagnostics ----------------------------------------------------------------

def structure_function(screens: Sequence[PhaseScreen], separation: float) -> float:
    """Mean of ``(phi(x + r) - phi(x))**2`` over screens, positions and both axes."""
    if len(screens) < 2:
        raise ValueError("need at least two screens")
    grid = screens[0].grid
    for s in screens[1:]:
        if s.grid != grid:
            raise GridMismatchError("screens do not share a grid")
    shift = separation / grid.pitch
    k = int(round(shift))
    if separation < 0 or abs(shift - k) > 1e-6 * max(1.0, shift):
        raise ValueError(f"separation {separation!r} m is not a multiple of the pitch {grid.pitch!r} m")
    if separation >= grid.physical_extent / 2:
        raise ValueError("separation must be below half the grid extent")
    if k == 0:
        return 0.0
    acc = 0.0
    for s in screens:
        ph = s.phase
        acc += np.mean((ph[:, k:] - ph[:, :-k]) ** 2) + np.mean((ph[k:, :] - ph[:-k, :]) ** 2)
    return float(acc / (2 * len(screens)))


def kolmogorov_structure(r, r0: float):
    return STRUCTURE_COEFF * (np.asarray(r) / r0) ** (5.0 / 3.0)


def radial_power_spectrum(screens: Sequence[PhaseScreen]) -> tuple[np.ndarray, np.ndarray]:
    """Azimuthally averaged periodogram, in units of the FFT bin index.

    Returns ``(f, psd)`` with ``f`` in cycles/m for integer radial bins
    ``1..N/2 - 1``. A Hann window suppresses leakage from the non-periodic
    subharmonic component.
    """
    grid = screens[0].grid
    n = grid.samples_per_axis
    win = np.outer(np.hanning(n), np.hanning(n))
    acc = np.zeros(grid.shape)
    for s in screens:
        acc += np.abs(np.fft.fft2(s.phase * win)) ** 2
    acc /= len(screens)
    k = np.fft.fftfreq(n, d=1.0 / n)
    kr = np.rint(np.hypot(k[None, :], k[:, None])).astype(int)
    bins = np.arange(1, n // 2)
    sums = np.bincount(kr.ravel(), weights=acc.ravel(), minlength=n)
    counts = np.bincount(kr.ravel(), minlength=n)
    psd = sums[bins] / counts[bins]
    return bins / grid.physical_extent, psd


def spectral_slope(screens: Sequence[PhaseScreen], f_lo: float, f_hi: float) -> float:
    """Least-squares log-log slope of :func:`radial_power_spectrum` on ``[f_lo, f_hi]``."""
    f, psd = radial_power_spectrum(screens)
    sel = (f >= f_lo) & (f <= f_hi)
    if sel.sum() < 3:
        raise ValueError("frequency band contains fewer than three bins")
    slope, _ = np.polyfit(np.log(f[sel]), np.log(psd[sel]), 1)
    return float(slope)


# -- path calculus --------------------------------------------------------------

def r0_from_path(atmosphere: AtmosphereModel, z: float) -> float:
    if not z > 0:
        raise ValueError(f"path length must be positive, got {z!r}")
    return FRIED_COEFF * (atmosphere.wavelength**2 / (atmosphere.cn2 * z)) ** 0.6


def z_from_r0(atmosphere: AtmosphereModel, r0: float) -> float:
    if not r0 > 0:
        raise ValueError(f"r0 must be positive, got {r0!r}")
    return DISTANCE_COEFF * atmosphere.wavelength**2 / (atmosphere.cn2 * r0 ** (5.0 / 3.0))


def distance_gain(r0_reference: float, r0_improved: float) -> float:
    """Fractional path-length gain when tolerable r0 drops from reference to improved.

    Independent of wavelength and C_n^2 because ``z`` scales as ``r0**(-5/3)``.
    """
    return (r0_reference / r0_improved) ** (5.0 / 3.0) - 1.0


def strehl_estimate(beam_diameter: float, r0: float) -> float:
    """``exp(-1.03 (D / r0)**(5/3))``; used for reporting only."""
    if not beam_diameter > 0 or not r0 > 0:
        raise ValueError("beam diameter and r0 must be positive")
    if math.isinf(r0):
        return 1.0
    return math.exp(-STREHL_COEFF * (beam_diameter / r0) ** (5.0 / 3.0))


def r0_for_strehl(beam_diameter: float, strehl: float) -> float:
    if not 0 < strehl < 1:
        raise ValueError("strehl must lie in (0, 1)")
    return beam_diameter / (-math.log(strehl) / STREHL_COEFF) ** 0.6


def write_screen(path, screen: PhaseScreen) -> None:
    write_matrix(path, screen.grid, screen.phase)


def read_screen(path) -> PhaseScreen:
    grid, data = read_matrix(path)
    if np.iscomplexobj(data):
        raise ValueError(f"{path}: expected a real-valued phase matrix")
    return PhaseScreen(grid, data)
