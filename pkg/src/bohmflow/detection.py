"""Event-by-event detection Monte Carlo on a one-dimensional pixel array.

Arrival positions are independent draws from the density at the detection
time. Binned into pixels and topped up with Poisson background counts, a
series of growing exposures shows fringes emerging from sparse hits.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import sampling


@dataclass(frozen=True)
class PixelGrid:
    x_min: float
    x_max: float
    n_pixels: int

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.n_pixels < 1:
            raise ValueError("n_pixels must be at least 1")

    @property
    def pixel_width(self) -> float:
        return (self.x_max - self.x_min) / self.n_pixels

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_pixels + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])


@dataclass(frozen=True)
class DetectionFrame:
    """Pixel counts of one exposure.

    ``n_events`` counts binned signal events and ``n_noise`` background
    events, so ``counts.sum() == n_events + n_noise``. Signal events that
    missed the grid are tallied in ``n_discarded``.
    """

    counts: np.ndarray
    n_events: int
    n_noise: int = 0
    n_discarded: int = 0
    exposure_label: int = 0


def sample_arrivals(rho_T: Callable, n_events: int, seed: int, domain: tuple, start: int = 0,
                    table: sampling.TabulatedDensity | None = None) -> np.ndarray:
    """Draw arrival positions from ``rho_T`` restricted to ``domain``.

    Event ``i`` always uses the same uniform variate for a given seed, so a
    longer run extends a shorter one.
    """
    if n_events < 0:
        raise ValueError("n_events must be non-negative")
    if n_events == 0:
        return np.empty(0)
    if table is None:
        table = sampling.TabulatedDensity(rho_T, *domain)
    return sampling.iid_draws(table, n_events, seed, sampling.TAG_ARRIVALS, start=start)


def bin_to_pixels(positions, grid: PixelGrid, exposure_label: int = 0) -> DetectionFrame:
    """Bin events into half-open pixels [left, right); the rest are discarded."""
    positions = np.asarray(positions, dtype=float)
    idx = np.searchsorted(grid.edges, positions, side="right") - 1
    inside = (idx >= 0) & (idx < grid.n_pixels)
    counts = np.bincount(idx[inside], minlength=grid.n_pixels).astype(np.int64)
    n_in = int(inside.sum())
    return DetectionFrame(counts=counts, n_events=n_in, n_noise=0,
                          n_discarded=int(positions.size - n_in), exposure_label=exposure_label)


def add_background_noise(frame: DetectionFrame, noise_rate: float, seed: int) -> DetectionFrame:
    """Add independent Poisson(noise_rate) counts to every pixel."""
    if noise_rate < 0:
        raise ValueError("noise_rate must be non-negative")
    if noise_rate == 0:
        return frame
    rng = sampling.substream(seed, sampling.TAG_NOISE, frame.exposure_label)
    noise = rng.poisson(noise_rate, size=frame.counts.size)
    return replace(frame, counts=frame.counts + noise, n_noise=frame.n_noise + int(noise.sum()))


def exposure_series(rho_T: Callable, grid: PixelGrid, counts: Sequence[int], noise_rate: float,
                    seed: int) -> list:
    """Cumulative frames for increasing event totals.

    All frames share one arrival stream, so the signal of frame k is a prefix
    of frame k+1. Background noise is drawn afresh for every frame.
    """
    counts = [int(c) for c in counts]
    if any(b < a for a, b in zip(counts, counts[1:])):
        raise ValueError("counts must be ascending")
    if not counts:
        return []
    arrivals = sample_arrivals(rho_T, counts[-1], seed, (grid.x_min, grid.x_max))
    frames = []
    for k, n in enumerate(counts):
        frame = bin_to_pixels(arrivals[:n], grid, exposure_label=k)
        frames.append(add_background_noise(frame, noise_rate, seed))
    return frames


def fringe_visibility(frame: DetectionFrame, grid: PixelGrid, maxima, minima, half_width: float):
    """Visibility (I_max - I_min) / (I_max + I_min) and its Poisson standard error.

    I_max and I_min are mean counts per pixel over pixels whose centers lie
    within ``half_width`` of a listed maximum or minimum. The error is the
    standard deviation of the estimate for a flat (fringe-free) frame of the
    same mean level, so ``V / err`` is a z-score against zero visibility.
    """
    c = grid.centers

    def window(points):
        d = np.abs(c[:, None] - np.asarray(points, dtype=float)[None, :])
        return np.any(d <= half_width, axis=1)

    wmax, wmin = window(maxima), window(minima)
    n_max, n_min = int(wmax.sum()), int(wmin.sum())
    if n_max == 0 or n_min == 0:
        raise ValueError("no pixels inside the fringe windows")
    i_max = frame.counts[wmax].mean()
    i_min = frame.counts[wmin].mean()
    total = i_max + i_min
    if total == 0:
        return 0.0, np.inf
    v = (i_max - i_min) / total
    level = 0.5 * total
    err = np.sqrt((1.0 / n_max + 1.0 / n_min) / (4.0 * level))
    return float(v), float(err)


def frame_l1(frame: DetectionFrame, grid: PixelGrid, table: sampling.TabulatedDensity,
             signal_counts=None) -> float:
    """L1 distance between a normalized histogram and the density's pixel masses."""
    counts = frame.counts if signal_counts is None else np.asarray(signal_counts)
    total = counts.sum()
    if total == 0:
        raise ValueError("empty frame")
    masses = table.bin_masses(grid.edges)
    masses = masses / masses.sum()
    return float(np.abs(counts / total - masses).sum())
