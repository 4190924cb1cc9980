"""Hermite-Gauss and Laguerre-Gauss modes at the waist plane.

Index conventions
-----------------
``HG(n, m)`` has ``n`` nodal lines crossing the x axis direction and ``m``
along y: ``HG(n, m)(x, y) = u_n(x) u_m(y)``.

``LG(l, p)`` has azimuthal index ``l`` and radial index ``p``. The mode is
*defined* through its Hermite-Gauss expansion

    LG(l, p) = sum_k i**k b(n, m, k) HG(N - k, k),   l = n - m, p = min(n, m)

so that expansion holds with no extra global phase. Evaluated on the grid
this equals ``(-1)**p * R_p^|l|(r) * exp(-1j * l * phi)`` with
``phi = atan2(y, x)``, i.e. the phase winds by ``-2*pi*l`` on a
counter-clockwise loop. The helicity sign is a consequence of the expansion
convention and has no effect on turbulence statistics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .field_core import ComplexField2D, GridSpec, normalize

# w0 * sqrt(N + 1) = 1.4 mm for the order-4 modes
DEFAULT_WAIST = 1.4e-3 / math.sqrt(5.0)


class ModeTooLargeError(ValueError):
    """The requested mode does not fit in the sampling window."""


@dataclass(frozen=True)
class ModeSpec:
    """Algebraic identifier of a spatial mode.

    For ``family == "HG"`` the indices are ``(n, m)``; for ``"LG"`` they are
    ``(l, p)``.
    """

    family: str
    first: int
    second: int
    waist: float = DEFAULT_WAIST

    def __post_init__(self):
        fam = self.family.upper()
        object.__setattr__(self, "family", fam)
        if fam not in ("HG", "LG"):
            raise ValueError(f"unknown mode family {self.family!r}")
        if int(self.first) != self.first or int(self.second) != self.second:
            raise ValueError("mode indices must be integers")
        object.__setattr__(self, "first", int(self.first))
        object.__setattr__(self, "second", int(self.second))
        if fam == "HG" and (self.first < 0 or self.second < 0):
            raise ValueError(f"HG indices must be >= 0, got ({self.first}, {self.second})")
        if fam == "LG" and self.second < 0:
            raise ValueError(f"LG radial index must be >= 0, got {self.second}")
        if not self.waist > 0:
            raise ValueError(f"waist must be positive, got {self.waist!r}")

    @classmethod
    def hg(cls, n: int, m: int, waist: float = DEFAULT_WAIST) -> "ModeSpec":
        return cls("HG", n, m, waist)

    @classmethod
    def lg(cls, l: int, p: int, waist: float = DEFAULT_WAIST) -> "ModeSpec":
        return cls("LG", l, p, waist)

    @property
    def order(self) -> int:
        return mode_order(self)

    @property
    def label(self) -> str:
        """Compact label used for BER columns, e.g. ``HG22`` or ``LG21``."""
        a = f"m{-self.first}" if self.first < 0 else str(self.first)
        return f"{self.family}{a}{self.second}"

    @property
    def long_label(self) -> str:
        """Underscore label used in crosstalk tables, e.g. ``LG_2_1``."""
        return f"{self.family}_{self.first}_{self.second}"

    @classmethod
    def parse(cls, text: str, waist: float = DEFAULT_WAIST) -> "ModeSpec":
        """Parse ``HG_2_2``, ``LG_-2_1``, ``HG22`` or ``LG21`` (single digits)."""
        t = text.strip().upper()
        fam, rest = t[:2], t[2:].lstrip("_")
        if "_" in rest or "," in rest:
            parts = rest.replace(",", "_").split("_")
            a, b = int(parts[0]), int(parts[1])
        else:
            neg = rest.startswith("M") or rest.startswith("-")
            digits = rest.lstrip("M-")
            if len(digits) != 2:
                raise ValueError(f"ambiguous mode label {text!r}; use e.g. LG_10_1")
            a, b = int(digits[0]), int(digits[1])
            a = -a if neg else a
        return cls(fam, a, b, waist)

    def second_moment_radius(self) -> float:
        """Largest Siegman second-moment beam radius ``W = 2 sigma``."""
        if self.family == "HG":
            return self.waist * math.sqrt(2 * max(self.first, self.second) + 1)
        return self.waist * math.sqrt(self.order + 1)


def mode_order(spec: ModeSpec) -> int:
    if spec.family == "HG":
        return spec.first + spec.second
    return 2 * spec.second + abs(spec.first)


def lg_to_hg_indices(l: int, p: int) -> tuple[int, int]:
    """Return ``(n, m)`` with ``n - m == l`` and ``min(n, m) == p``."""
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    return (p + l, p) if l >= 0 else (p, p - l)


@lru_cache(maxsize=None)
def _taylor_coefficients(n: int, m: int) -> tuple[int, ...]:
    # coefficients of t**k in (1 - t)**n (1 + t)**m, exact integers
    out = []
    for k in range(n + m + 1):
        s = 0
        for j in range(max(0, k - m), min(n, k) + 1):
            s += (-1) ** j * math.comb(n, j) * math.comb(m, k - j)
        out.append(s)
    return tuple(out)


def transform_coefficient(n: int, m: int, k: int) -> float:
    """Real weight ``b(n, m, k)`` of ``HG(N-k, k)`` in the expansion of ``LG_{n,m}``.

    ``b = sqrt((N-k)! k! / (2**N n! m!)) * [t**k] (1-t)**n (1+t)**m``.
    The bracket is the Taylor coefficient, i.e. the k-th derivative at zero
    divided by ``k!``.
    """
    if n < 0 or m < 0:
        raise ValueError(f"n and m must be >= 0, got ({n}, {m})")
    N = n + m
    if not 0 <= k <= N:
        raise ValueError(f"k={k} outside [0, {N}]")
    c = _taylor_coefficients(n, m)[k]
    if c == 0:
        return 0.0
    scale = Fraction(math.factorial(N - k) * math.factorial(k),
                     2**N * math.factorial(n) * math.factorial(m))
    return math.copysign(math.sqrt(scale * c * c), c)


@dataclass(frozen=True)
class HgExpansion:
    """Coefficients ``c_k`` multiplying ``HG(N-k, k)`` for ``k = 0..N``."""

    order: int
    coefficients: tuple[complex, ...]

    def __post_init__(self):
        if len(self.coefficients) != self.order + 1:
            raise ValueError("an order-N expansion needs N + 1 coefficients")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=np.complex128)

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.as_array()) ** 2))

    def synthesize(self, waist: float, grid: GridSpec) -> ComplexField2D:
        """Evaluate ``sum_k c_k HG(N-k, k)`` on ``grid``."""
        N = self.order
        total = np.zeros(grid.shape, dtype=np.complex128)
        for k, c in enumerate(self.coefficients):
            if c != 0:
                total += c * evaluate_hg(N - k, k, waist, grid).samples
        return ComplexField2D(grid, total)


_I_POWERS = (1, 1j, -1, -1j)


def lg_as_hg_superposition(l: int, p: int) -> HgExpansion:
    n, m = lg_to_hg_indices(l, p)
    N = n + m
    coeffs = tuple(complex(_I_POWERS[k % 4] * transform_coefficient(n, m, k)) for k in range(N + 1))
    return HgExpansion(N, coeffs)


# -- grid evaluation ----------------------------------------------------------

def hermite_functions(nmax: int, xi: np.ndarray) -> np.ndarray:
    """Orthonormal Hermite functions ``psi_0..psi_nmax`` at ``xi``.

    Uses the three-term recurrence on the normalised functions, which stays
    finite well past order 20.
    """
    xi = np.asarray(xi, dtype=float)
    out = np.empty((nmax + 1,) + xi.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * xi**2)
    if nmax >= 1:
        out[1] = math.sqrt(2.0) * xi * out[0]
    for k in range(1, nmax):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * xi * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def _hg_1d(n: int, x: np.ndarray, w0: float) -> np.ndarray:
    # unit-norm on the real line: int |u_n(x)|^2 dx = 1
    return hermite_functions(n, math.sqrt(2.0) * x / w0)[n] * math.sqrt(math.sqrt(2.0) / w0)


def generalized_laguerre(p: int, alpha: int, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    l_prev = np.ones_like(x)
    if p == 0:
        return l_prev
    l_cur = 1.0 + alpha - x
    for k in range(1, p):
        l_prev, l_cur = l_cur, ((2 * k + 1 + alpha - x) * l_cur - (k + alpha) * l_prev) / (k + 1)
    return l_cur


def _lg_radial(l: int, p: int, r: np.ndarray, w0: float) -> np.ndarray:
    a = abs(l)
    log_norm = 0.5 * (math.log(2.0 / math.pi) + math.lgamma(p + 1) - math.lgamma(p + a + 1))
    rho = math.sqrt(2.0) * r / w0
    return (math.exp(log_norm) / w0) * rho**a * generalized_laguerre(p, a, rho**2) * np.exp(-0.5 * rho**2)


def check_fits(spec: ModeSpec, grid: GridSpec) -> None:
    diameter = 2.0 * spec.second_moment_radius()
    if diameter > grid.physical_extent / 3.0:
        raise ModeTooLargeError(
            f"{spec.long_label} (w0={spec.waist:.4g} m) has second-moment diameter "
            f"{diameter:.4g} m; grid extent must be at least {3.0 * diameter:.4g} m "
            f"(got {grid.physical_extent:.4g} m)"
        )


def evaluate_hg(n: int, m: int, w0: float, grid: GridSpec) -> ComplexField2D:
    """Real-valued ``HG(n, m)`` at the waist, normalised on ``grid``."""
    check_fits(ModeSpec.hg(n, m, w0), grid)
    ax = grid.axis()
    samples = np.outer(_hg_1d(m, ax, w0), _hg_1d(n, ax, w0))
    return normalize(ComplexField2D(grid, samples))


def evaluate_lg(l: int, p: int, w0: float, grid: GridSpec) -> ComplexField2D:
    """``LG(l, p)`` at the waist, normalised on ``grid``.

    Phase convention is fixed by the HG expansion (see module docstring).
    """
    check_fits(ModeSpec.lg(l, p, w0), grid)
    X, Y = grid.coordinates()
    r = np.hypot(X, Y)
    phi = np.arctan2(Y, X)
    sign = -1.0 if p % 2 else 1.0
    samples = sign * _lg_radial(l, p, r, w0) * np.exp(-1j * l * phi)
    return normalize(ComplexField2D(grid, samples))


def evaluate(spec: ModeSpec, grid: GridSpec) -> ComplexField2D:
    if spec.family == "HG":
        return evaluate_hg(spec.first, spec.second, spec.waist, grid)
    return evaluate_lg(spec.first, spec.second, spec.waist, grid)


def default_grid(modes, samples_per_axis: int = 256, extent_factor: float = 10.0) -> GridSpec:
    """Grid whose side is ``extent_factor`` times the widest mode diameter."""
    widest = max(2.0 * s.second_moment_radius() for s in modes)
    return GridSpec(samples_per_axis, extent_factor * widest)


def lg_ring_radii(l: int, p: int, w0: float) -> np.ndarray:
    """Radii (m) of the intensity maxima of ``LG(l, p)``, innermost first."""
    r = np.linspace(0.0, 6.0 * w0 * math.sqrt(2 * p + abs(l) + 1), 20001)
    inten = _lg_radial(l, p, r, w0) ** 2
    peaks = np.flatnonzero((inten[1:-1] > inten[:-2]) & (inten[1:-1] >= inten[2:])) + 1
    if l == 0:
        # on-axis maximum (a spot rather than a ring)
        peaks = np.concatenate([[0], peaks])
    return r[peaks]


def phase_winding(f: ComplexField2D, radius: float, n_points: int = 1440) -> float:
    """Accumulated phase (radians) along a counter-clockwise circle.

    Samples are taken at the nearest pixel; the circle must lie where the
    field is non-negligible.
    """
    grid = f.grid
    theta = np.linspace(0.0, 2.0 * np.pi, n_points, endpoint=False)
    c = grid.samples_per_axis // 2
    ix = np.rint(radius * np.cos(theta) / grid.pitch).astype(int) + c
    iy = np.rint(radius * np.sin(theta) / grid.pitch).astype(int) + c
    vals = f.samples[iy, ix]
    steps = np.angle(np.roll(vals, -1) / vals)
    return float(np.sum(steps))
