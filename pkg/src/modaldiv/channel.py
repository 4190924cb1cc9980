"""Thin-screen fading channel and modal match-filter receiver.

A launched mode picks up the screen phase in a single plane; the receiver
projects the distorted field onto a detection mode. The squared magnitude of
that projection is what the pinhole photodiode behind a modal-decomposition
hologram measures.
"""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field_core import ComplexField2D, GridMismatchError, GridSpec, inner_product
from .modes import ModeSpec, evaluate
from .turbulence import PhaseScreen, TurbulenceParams, generate_screen, screen_seed


@dataclass(frozen=True)
class ChannelGainSample:
    launch: ModeSpec
    detect: ModeSpec
    screen_seed: int
    gain: complex

    def __post_init__(self):
        if abs(self.gain) > 1 + 1e-9:
            raise ValueError(f"|h| = {abs(self.gain)} exceeds unity")

    @property
    def power(self) -> float:
        return abs(self.gain) ** 2


def apply_screen(f: ComplexField2D, s: PhaseScreen) -> ComplexField2D:
    if f.grid != s.grid:
        raise GridMismatchError(f"field grid {f.grid} does not match screen grid {s.grid}")
    return ComplexField2D(f.grid, f.samples * np.exp(1j * s.phase))


def coupling_gain(launch: ModeSpec, detect: ModeSpec, screen: PhaseScreen, grid: GridSpec) -> complex:
    """``<detect | exp(i phi) | launch>`` on ``grid``."""
    return inner_product(evaluate(detect, grid), apply_screen(evaluate(launch, grid), screen))


def coupling_sample(launch: ModeSpec, detect: ModeSpec, params: TurbulenceParams, seed: int) -> ChannelGainSample:
    screen = generate_screen(params, seed)
    return ChannelGainSample(launch, detect, seed, coupling_gain(launch, detect, screen, params.grid))


class ModeBank:
    """Pre-evaluated launch/detect fields for repeated projections on one grid.

    ``gains(screen)`` returns ``H[j, i] = <detect_j | exp(i phi) | launch_i>``
    for every pair in one pass.
    """

    def __init__(self, launch: Sequence[ModeSpec], grid: GridSpec, detect: Sequence[ModeSpec] | None = None):
        self.grid = grid
        self.launch = tuple(launch)
        self.detect = tuple(launch if detect is None else detect)
        self._launch = np.stack([evaluate(m, grid).samples.ravel() for m in self.launch])
        self._detect_conj = np.stack([evaluate(m, grid).samples.ravel() for m in self.detect]).conj()

    def gains(self, screen: PhaseScreen) -> np.ndarray:
        if screen.grid != self.grid:
            raise GridMismatchError(f"screen grid {screen.grid} does not match bank grid {self.grid}")
        e = np.exp(1j * screen.phase.ravel())
        distorted = self._launch * e
        return (self._detect_conj @ distorted.T) * self.grid.pixel_area


def _crosstalk_chunk(modes, params, master_seed, indices):
    bank = ModeBank(modes, params.grid)
    out = np.empty((len(indices), len(modes), len(modes)))
    for k, i in enumerate(indices):
        H = bank.gains(generate_screen(params, screen_seed(master_seed, i)))
        out[k] = np.abs(H.T) ** 2
    return out


def split_indices(n: int, parts: int) -> list[range]:
    """Contiguous, ordered index blocks for ``parts`` workers."""
    parts = max(1, min(parts, n))
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [range(a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def crosstalk_matrix(
    modes: Sequence[ModeSpec],
    params: TurbulenceParams,
    n_screens: int,
    master_seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Ensemble-mean ``|h|**2`` with rows indexing the launched mode.

    Entry ``(i, j)`` is the mean power coupled from ``modes[i]`` into
    ``modes[j]``. Per-screen values are reduced in screen order, so the
    result does not depend on ``workers``.
    """
    if not modes:
        raise ValueError("need at least one mode")
    if n_screens < 1:
        raise ValueError("n_screens must be >= 1")
    blocks = split_indices(n_screens, workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_crosstalk_chunk, *zip(*[(modes, params, master_seed, b) for b in blocks])))
    else:
        parts = [_crosstalk_chunk(modes, params, master_seed, b) for b in blocks]
    return np.concatenate(parts).mean(axis=0)


def write_crosstalk_csv(path, modes: Sequence[ModeSpec], matrix: np.ndarray) -> None:
    labels = [m.long_label for m in modes]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["launch\\detect"] + labels)
        for lab, row in zip(labels, matrix):
            w.writerow([lab] + [f"{v:.10g}" for v in row])


def read_crosstalk_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    labels = rows[0][1:]
    return labels, np.array([[float(v) for v in r[1:]] for r in rows[1:]])
