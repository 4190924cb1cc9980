"""Scalar optical fields sampled on a square, uniform grid.

All integrals are pixel-area weighted sums, so overlaps and powers do not
depend on the sampling density as long as the field is resolved.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class GridMismatchError(ValueError):
    """Raised when two sampled quantities live on different grids."""


@dataclass(frozen=True)
class GridSpec:
    """Square sampling window centred on the optical axis.

    Parameters
    ----------
    samples_per_axis : int
        Number of pixels along each side. Must be even and >= 2.
    physical_extent : float
        Full side length of the window in metres.
    """

    samples_per_axis: int
    physical_extent: float

    def __post_init__(self):
        n = self.samples_per_axis
        if int(n) != n or n < 2 or n % 2:
            raise ValueError(f"samples_per_axis must be an even integer >= 2, got {n!r}")
        if not np.isfinite(self.physical_extent) or self.physical_extent <= 0:
            raise ValueError(f"physical_extent must be positive, got {self.physical_extent!r}")

    @property
    def pitch(self) -> float:
        return self.physical_extent / self.samples_per_axis

    @property
    def pixel_area(self) -> float:
        return self.pitch**2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.samples_per_axis, self.samples_per_axis)

    def axis(self) -> np.ndarray:
        """Pixel-centre coordinates along one axis; index N/2 sits on the axis."""
        n = self.samples_per_axis
        return (np.arange(n) - n // 2) * self.pitch

    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` meshes. Rows index y, columns index x."""
        ax = self.axis()
        return np.meshgrid(ax, ax, indexing="xy")


@dataclass(frozen=True, eq=False)
class ComplexField2D:
    """Complex amplitude samples on a :class:`GridSpec`.

    The sample array is copied and made read-only on construction.
    """

    grid: GridSpec
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.complex128, copy=True)
        if arr.shape != self.grid.shape:
            raise ValueError(f"samples shape {arr.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field samples must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    def __mul__(self, scalar):
        return ComplexField2D(self.grid, self.samples * scalar)

    __rmul__ = __mul__

    def __add__(self, other: "ComplexField2D"):
        _check_grids(self.grid, other.grid)
        return ComplexField2D(self.grid, self.samples + other.samples)

    def __sub__(self, other: "ComplexField2D"):
        _check_grids(self.grid, other.grid)
        return ComplexField2D(self.grid, self.samples - other.samples)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2


def _check_grids(a: GridSpec, b: GridSpec):
    if a != b:
        raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def inner_product(a: ComplexField2D, b: ComplexField2D) -> complex:
    """Discrete overlap integral ``sum(conj(a) * b) * dA``."""
    _check_grids(a.grid, b.grid)
    return complex(np.vdot(a.samples, b.samples) * a.grid.pixel_area)


def total_power(f: ComplexField2D) -> float:
    return float(np.vdot(f.samples, f.samples).real * f.grid.pixel_area)


def normalize(f: ComplexField2D) -> ComplexField2D:
    """Scale ``f`` to unit power. Zero-power fields raise ``ValueError``."""
    p = total_power(f)
    if not p > 0:
        raise ValueError("cannot normalize a field with zero power")
    return ComplexField2D(f.grid, f.samples / np.sqrt(p))


# -- plain-text matrix dumps ------------------------------------------------

_HEADER_PREFIX = "# modaldiv-matrix"


def write_matrix(path, grid: GridSpec, data: np.ndarray) -> None:
    """Dump a real or complex sample matrix as text.

    The first line records the grid; each following line is one row of the
    array. Complex data is written as interleaved ``real imag`` pairs.
    """
    data = np.asarray(data)
    if data.shape != grid.shape:
        raise ValueError(f"data shape {data.shape} does not match grid {grid.shape}")
    is_complex = np.iscomplexobj(data)
    kind = "complex" if is_complex else "real"
    header = (
        f"{_HEADER_PREFIX} samples_per_axis={grid.samples_per_axis} "
        f"physical_extent={grid.physical_extent!r} kind={kind}"
    )
    if is_complex:
        rows = np.empty((grid.samples_per_axis, 2 * grid.samples_per_axis))
        rows[:, 0::2] = data.real
        rows[:, 1::2] = data.imag
    else:
        rows = data.astype(float)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, rows, fmt="%.17g")


def read_matrix(path) -> tuple[GridSpec, np.ndarray]:
    """Inverse of :func:`write_matrix`."""
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith(_HEADER_PREFIX):
            raise ValueError(f"{path}: missing matrix header")
        meta = dict(tok.split("=", 1) for tok in header[len(_HEADER_PREFIX):].split())
        grid = GridSpec(int(meta["samples_per_axis"]), float(meta["physical_extent"]))
        rows = np.loadtxt(fh, ndmin=2)
    if meta.get("kind") == "complex":
        data = rows[:, 0::2] + 1j * rows[:, 1::2]
    else:
        data = rows
    if data.shape != grid.shape:
        raise ValueError(f"{path}: body shape {data.shape} does not match header {grid.shape}")
    return grid, data


def write_field(path, f: ComplexField2D) -> None:
    write_matrix(path, f.grid, f.samples)


def read_field(path) -> ComplexField2D:
    grid, data = read_matrix(path)
    return ComplexField2D(grid, data)
