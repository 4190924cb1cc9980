"""OOK link over the modal fading channel: SISO arms and transmit diversity.

Received signal for one bit ``s`` on one screen (incoherent combining)::

    y = r * sum_i g_i |h_i|**2 * s + n,      n ~ N(0, sigma**2)

Gains are quasi-static: one draw per screen, held for all bits of that
screen. Bits, noise and screens are drawn from streams keyed on
``(master_seed, screen index)``, so every SISO arm, the diversity receiver
and every r0 of a sweep see the same random numbers. Comparisons between
them are paired.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .channel import ModeBank, split_indices
from .field_core import GridSpec
from .modes import ModeSpec
from .turbulence import (
    PhaseScreen,
    TurbulenceParams,
    derive_seed,
    scale_unit_screen,
    screen_seed,
    unit_screen,
)

DIVERSITY = "diversity"
COMBINING_MODES = ("incoherent", "coherent")
RECEIVER_MODES = ("matched", "superposition")

# default AWGN std as a fraction of the unfaded SISO one-level
DEFAULT_NOISE_FRACTION = 0.25


@dataclass(frozen=True)
class Arm:
    mode: ModeSpec
    weight: float

    def __post_init__(self):
        if not self.weight >= 0:
            raise ValueError(f"arm weight must be >= 0, got {self.weight!r}")


@dataclass(frozen=True)
class LinkConfig:
    """Everything needed to simulate one r0 point.

    ``noise_sigma`` is absolute (detected-power units); ``None`` means
    ``DEFAULT_NOISE_FRACTION * receiver_sensitivity``, i.e. a fixed fraction
    of the unfaded SISO one-level. ``combining`` and
    ``receiver`` select alternatives to the default incoherent sum of
    matched projections.
    """

    arms: tuple[Arm, ...]
    turbulence: TurbulenceParams
    receiver_sensitivity: float = 1.0
    noise_sigma: float | None = None
    threshold_fraction: float = 0.5
    bits_per_screen: int = 10_000
    n_screens: int = 256
    master_seed: int = 0
    combining: str = "incoherent"
    receiver: str = "matched"

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if not self.arms:
            raise ValueError("a link needs at least one arm")
        total = sum(a.weight for a in self.arms)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"arm weights must sum to 1, got {total!r}")
        if not 0 < self.threshold_fraction < 1:
            raise ValueError("threshold_fraction must lie in (0, 1)")
        if not self.receiver_sensitivity > 0:
            raise ValueError("receiver_sensitivity must be positive")
        if self.noise_sigma is not None and not self.noise_sigma >= 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.bits_per_screen < 1 or self.n_screens < 1:
            raise ValueError("bits_per_screen and n_screens must be positive")
        if self.combining not in COMBINING_MODES:
            raise ValueError(f"combining must be one of {COMBINING_MODES}")
        if self.receiver not in RECEIVER_MODES:
            raise ValueError(f"receiver must be one of {RECEIVER_MODES}")

    @property
    def modes(self) -> tuple[ModeSpec, ...]:
        return tuple(a.mode for a in self.arms)

    @property
    def weights(self) -> np.ndarray:
        return np.array([a.weight for a in self.arms])

    @property
    def sigma(self) -> float:
        if self.noise_sigma is not None:
            return self.noise_sigma
        return DEFAULT_NOISE_FRACTION * self.receiver_sensitivity

    def siso(self, index: int) -> "LinkConfig":
        """Single-arm link carrying the full transmit intensity on ``arms[index]``.

        The noise level is pinned to this config's so SISO and diversity
        runs share one receiver.
        """
        arm = self.arms[index]
        return replace(self, arms=(Arm(arm.mode, 1.0),), noise_sigma=self.sigma)

    def with_r0(self, r0: float) -> "LinkConfig":
        return replace(self, turbulence=self.turbulence.with_r0(r0))


# -- per-bit model -------------------------------------------------------------

def modulate_ook(bits) -> np.ndarray:
    """OOK-NRZ at one sample per bit: a 1 is light on, a 0 is light off."""
    arr = np.asarray(bits, dtype=np.int8).ravel()
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("bits must be 0 or 1")
    return arr


def _effective_gains(H: np.ndarray, config: LinkConfig) -> np.ndarray:
    """Per-arm complex gains seen by the receiver from cross-gain matrices ``H[..., j, i]``."""
    H = np.asarray(H)
    if config.receiver == "matched":
        return np.diagonal(H, axis1=-2, axis2=-1)
    # single detection mode sum_j sqrt(g_j) M_j
    return np.einsum("j,...ji->...i", np.sqrt(config.weights), H)


def signal_level(gains, config: LinkConfig) -> np.ndarray:
    """Noise-free one-level ``r * combine(g, h)`` for per-arm gains ``h`` (last axis)."""
    h = np.asarray(gains)
    g = config.weights
    if h.shape[-1] != g.size:
        raise ValueError(f"expected {g.size} gains, got {h.shape[-1]}")
    if config.combining == "incoherent":
        comb = np.abs(h) ** 2 @ g
    else:
        comb = np.abs(h @ np.sqrt(g)) ** 2
    return config.receiver_sensitivity * comb


def reference_power(config: LinkConfig) -> float:
    """Unfaded one-level: gains from an identity cross-gain matrix."""
    eye = np.eye(len(config.arms))
    return float(signal_level(_effective_gains(eye, config), config))


def received_power(symbol: int, gains: Sequence[complex], config: LinkConfig, noise_sample: float) -> float:
    """Detected power ``y`` for one bit given matched per-arm gains."""
    if len(gains) != len(config.arms):
        raise ValueError(f"got {len(gains)} gains for {len(config.arms)} arms")
    return float(signal_level(np.asarray(gains, dtype=complex), config) * symbol + noise_sample)


def detect(y, config: LinkConfig):
    """Threshold decision: 1 iff ``y >= threshold_fraction * reference_power``."""
    decision = np.asarray(y) >= config.threshold_fraction * reference_power(config)
    return int(decision) if decision.ndim == 0 else decision.astype(np.int8)


def diversity_error_product(pe: Sequence[float]) -> float:
    """Joint error probability of independent arms: ``prod(pe)``."""
    pe = [float(p) for p in pe]
    if any(not 0.0 <= p <= 1.0 for p in pe):
        raise ValueError(f"error probabilities must lie in [0, 1], got {pe}")
    return math.prod(pe)


# -- Monte Carlo -----------------------------------------------------------------

def _bit_stream(master_seed: int, screen_index: int, n_bits: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(derive_seed(master_seed, 1, screen_index))
    bits = rng.integers(0, 2, size=n_bits, dtype=np.int8)
    noise = rng.standard_normal(n_bits)
    return bits, noise


def count_errors(level: float, bits: np.ndarray, unit_noise: np.ndarray, config: LinkConfig) -> int:
    """Bit errors for one screen whose noise-free one-level is ``level``."""
    y = level * bits + config.sigma * unit_noise
    return int(np.count_nonzero(detect(y, config) != bits))


def series_labels(config: LinkConfig) -> list[str]:
    return [m.label for m in config.modes] + [DIVERSITY]


def _series_configs(config: LinkConfig) -> list[LinkConfig]:
    return [config.siso(i) for i in range(len(config.arms))] + [config]


def errors_from_gains(H: np.ndarray, config: LinkConfig, screen_indices: Sequence[int]) -> np.ndarray:
    """Error counts ``(n_series, n_screens)`` given cross-gain matrices per screen.

    Series are the SISO arms in order followed by the diversity receiver.
    ``H`` has shape ``(n_screens, n_arms, n_arms)``; this is the entry point
    for synthetic channels that bypass phase screens.
    """
    H = np.asarray(H)
    configs = _series_configs(config)
    out = np.zeros((len(configs), len(screen_indices)), dtype=np.int64)
    levels = []
    for k, c in enumerate(configs):
        if k < len(config.arms):
            sub = H[:, k:k + 1, k:k + 1]
        else:
            sub = H
        levels.append(signal_level(_effective_gains(sub, c), c))
    for s, idx in enumerate(screen_indices):
        bits, noise = _bit_stream(config.master_seed, idx, config.bits_per_screen)
        for k, c in enumerate(configs):
            out[k, s] = count_errors(levels[k][s], bits, noise, c)
    return out


def _sweep_block(config: LinkConfig, r0_values: Sequence[float], indices: Sequence[int]) -> np.ndarray:
    """Error counts ``(n_r0, n_series, len(indices))`` for a block of screens."""
    params = config.turbulence
    bank = ModeBank(config.modes, params.grid)
    n_arms = len(config.arms)
    H = np.empty((len(r0_values), len(indices), n_arms, n_arms), dtype=np.complex128)
    for s, idx in enumerate(indices):
        base = unit_screen(params, screen_seed(config.master_seed, idx))
        for k, r0 in enumerate(r0_values):
            H[k, s] = bank.gains(PhaseScreen(params.grid, scale_unit_screen(base, r0)))
    return np.stack([errors_from_gains(H[k], config.with_r0(r0), indices) for k, r0 in enumerate(r0_values)])


def simulate_errors(config: LinkConfig, r0_values: Sequence[float] | None = None, workers: int = 1) -> np.ndarray:
    """Per-screen error counts ``(n_r0, n_series, n_screens)``.

    Screens are split into contiguous blocks and results concatenated in
    screen order, so the output is identical for any ``workers``.
    """
    if r0_values is None:
        r0_values = [config.turbulence.r0]
    blocks = split_indices(config.n_screens, workers)
    if workers > 1 and len(blocks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_sweep_block, [config] * len(blocks), [list(r0_values)] * len(blocks), blocks))
    else:
        parts = [_sweep_block(config, r0_values, b) for b in blocks]
    return np.concatenate(parts, axis=2)


@dataclass(frozen=True, eq=False)
class BerResult:
    """BER estimates at one r0.

    ``errors`` holds per-screen error counts, one row per series (SISO arms
    then diversity); rows of series that were not simulated are ``None`` in
    the BER fields.
    """

    r0: float
    ber_per_arm: tuple[float | None, ...]
    ber_diversity: float | None
    bits_tested: int
    screens_used: int
    labels: tuple[str, ...] = ()
    errors: np.ndarray | None = field(default=None, repr=False)

    @property
    def bits_per_screen(self) -> int:
        return self.bits_tested // self.screens_used

    def ber(self, series: int | str) -> float:
        k = self._row(series)
        return float(self.errors[k].sum() / self.bits_tested)

    def _row(self, series: int | str) -> int:
        if isinstance(series, str):
            return self.labels.index(series)
        return series

    def per_screen_ber(self, series: int | str) -> np.ndarray:
        return self.errors[self._row(series)] / self.bits_per_screen

    def binomial_stderr(self, series: int | str) -> float:
        p = self.ber(series)
        return math.sqrt(p * (1 - p) / self.bits_tested)

    def stderr(self, series: int | str) -> float:
        """Monte-Carlo standard error with screens as the sampling unit.

        Never smaller than the binomial figure; fading makes bits within a
        screen strongly correlated.
        """
        b = self.per_screen_ber(series)
        cluster = float(np.std(b, ddof=1) / math.sqrt(b.size)) if b.size > 1 else math.inf
        return max(cluster, self.binomial_stderr(series))

    def paired_stderr(self, a: int | str, b: int | str) -> float:
        """Standard error of ``ber(a) - ber(b)`` from shared screens and bits."""
        d = self.per_screen_ber(a) - self.per_screen_ber(b)
        if d.size < 2:
            return math.inf
        cluster = float(np.std(d, ddof=1) / math.sqrt(d.size))
        # floor: two independent binomial estimates at the pooled rate
        pooled = 0.5 * (self.ber(a) + self.ber(b))
        floor = math.sqrt(2 * pooled * (1 - pooled) / self.bits_tested) if self.bits_tested else math.inf
        return max(cluster, floor) if cluster > 0 else floor


def _result(r0: float, errors: np.ndarray, config: LinkConfig, wanted: Sequence[int]) -> BerResult:
    n_arms = len(config.arms)
    total_bits = config.bits_per_screen * config.n_screens
    bers = [float(errors[k].sum() / total_bits) if k in wanted else None for k in range(n_arms + 1)]
    return BerResult(
        r0=r0,
        ber_per_arm=tuple(bers[:n_arms]),
        ber_diversity=bers[n_arms],
        bits_tested=total_bits,
        screens_used=config.n_screens,
        labels=tuple(series_labels(config)),
        errors=errors,
    )


def ber_monte_carlo(config: LinkConfig, mode_selection: int | str | None = None, workers: int = 1) -> BerResult:
    """BER at ``config.turbulence.r0``.

    ``mode_selection`` is a SISO arm index, :data:`DIVERSITY`, or ``None``
    for every series at once. Values do not depend on the selection because
    all series share random streams.
    """
    n_arms = len(config.arms)
    if mode_selection is None:
        wanted = list(range(n_arms + 1))
    elif mode_selection == DIVERSITY:
        wanted = [n_arms]
    elif isinstance(mode_selection, (int, np.integer)) and 0 <= mode_selection < n_arms:
        wanted = [int(mode_selection)]
    else:
        raise ValueError(f"unknown mode selection {mode_selection!r}")
    errors = simulate_errors(config, workers=workers)[0]
    return _result(config.turbulence.r0, errors, config, wanted)


def ber_sweep(config: LinkConfig, r0_values: Sequence[float], workers: int = 1) -> list[BerResult]:
    """All series at every r0, sharing screens, bits and noise across r0."""
    errors = simulate_errors(config, r0_values, workers)
    everything = list(range(len(config.arms) + 1))
    return [_result(r0, errors[k], config.with_r0(r0), everything) for k, r0 in enumerate(r0_values)]


def format_ber(ber: float, bits: int) -> str:
    """Render a BER, replacing zero with the resolvable bound ``<1/bits``."""
    if ber == 0:
        return f"<{1.0 / bits:.3g}"
    return f"{ber:.6g}"


def outage_error_rates(
    outage_probs: Sequence[float],
    n_trials: int,
    seed: int,
) -> tuple[np.ndarray, float]:
    """Synthetic check of the independent-arm product law.

    Each trial sends a 1 through equal-weight arms whose gains are 0 (outage,
    probability ``p_i``) or 1, independently. With no noise, the
    equal-gain receiver fails only when every arm is out; that decision runs through :func:`received_power` and
    :func:`detect`. Returns (per-arm SISO error rates, joint diversity rate).
    """
    k = len(outage_probs)
    rng = np.random.default_rng(seed)
    out = rng.random((n_trials, k)) < np.asarray(outage_probs)
    gains = np.where(out, 0.0, 1.0)
    dummy = TurbulenceParams(1.0, GridSpec(2, 1.0))
    modes = tuple(ModeSpec.hg(i, 0) for i in range(k))
    # one surviving arm delivers 1/k of the unfaded level; threshold sits below it
    div = LinkConfig(tuple(Arm(m, 1.0 / k) for m in modes), dummy, noise_sigma=0.0,
                     threshold_fraction=0.5 / k)
    arm_rates = np.empty(k)
    for i in range(k):
        siso = div.siso(i)
        y = signal_level(gains[:, i:i + 1], siso)
        arm_rates[i] = np.mean(detect(y, siso) != 1)
    y = signal_level(gains, div)
    joint = float(np.mean(detect(y, div) != 1))
    return arm_rates, joint

