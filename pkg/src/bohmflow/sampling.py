"""Inverse-transform sampling from tabulated densities, and seeded substreams.

Random streams
--------------
Every draw comes from a PCG64 generator keyed by ``(seed, tag, block)``
through :class:`numpy.random.SeedSequence`. ``tag`` separates independent
uses (initial positions, detector arrivals, background noise) and ``block``
indexes consecutive runs of ``BLOCK_SIZE`` sample indices. Sample ``i`` of a
stream is therefore always produced by substream ``i // BLOCK_SIZE``, so a
sharded computation reproduces the serial one bit for bit.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DegenerateDensity

BLOCK_SIZE = 4096

TAG_INITIAL = 0
TAG_ARRIVALS = 1
TAG_NOISE = 2


def substream(seed: int, tag: int, block: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(tag), int(block)))
    return np.random.Generator(np.random.PCG64(ss))


def uniforms(seed: int, tag: int, n: int, start: int = 0) -> np.ndarray:
    """Uniform variates for sample indices ``start .. start + n - 1``."""
    out = np.empty(n)
    i = start
    while i < start + n:
        block, offset = divmod(i, BLOCK_SIZE)
        take = min(BLOCK_SIZE - offset, start + n - i)
        u = substream(seed, tag, block).random(offset + take)[offset:]
        out[i - start:i - start + take] = u
        i += take
    return out


class TabulatedDensity:
    """A 1-D density tabulated on a uniform grid with a piecewise-linear CDF.

    The grid starts at ``n_points`` nodes and doubles until the first two
    moments move by less than ``moment_tol`` (relative to the width) between
    refinements, or ``max_points`` is reached.
    """

    def __init__(self, rho, x_min: float, x_max: float, n_points: int = 2**14,
                 moment_tol: float = 1e-4, max_points: int = 2**20, mass_floor: float = 1e-300):
        if not x_max > x_min:
            raise ValueError("x_max must exceed x_min")
        self.x_min, self.x_max = float(x_min), float(x_max)
        prev = None
        n = n_points
        while True:
            grid, cdf, total, mean, std = self._tabulate(rho, n)
            if total <= mass_floor or not np.isfinite(total):
                raise DegenerateDensity(f"density has no mass on [{x_min}, {x_max}]")
            if prev is not None:
                drift = max(abs(mean - prev[0]), abs(std - prev[1])) / max(std, 1e-300)
                if drift < moment_tol:
                    break
            if n >= max_points:
                break
            prev = (mean, std)
            n *= 2
        self.grid = grid
        self.cdf = cdf
        self.total = total
        self.mean = mean
        self.std = std

    def _tabulate(self, rho, n):
        grid = np.linspace(self.x_min, self.x_max, n)
        dens = np.asarray(rho(grid), dtype=float)
        if np.any(dens < 0) or not np.all(np.isfinite(dens)):
            raise DegenerateDensity("density must be finite and non-negative")
        cum = cumulative_trapezoid(dens, grid, initial=0.0)
        total = cum[-1]
        if total <= 0:
            return grid, cum, total, 0.0, 0.0
        w = dens / total
        mean = np.trapezoid(w * grid, grid)
        var = np.trapezoid(w * (grid - mean) ** 2, grid)
        return grid, cum / total, total, mean, np.sqrt(max(var, 0.0))

    def quantile(self, u):
        """Inverse CDF by linear interpolation of the tabulated CDF."""
        u = np.asarray(u, dtype=float)
        cdf, grid = self.cdf, self.grid
        # segment i satisfies cdf[i] < u <= cdf[i+1]; zero-mass segments are never chosen
        i = np.searchsorted(cdf, u, side="left") - 1
        # u = 0 belongs to the first segment that carries mass
        i = np.where(u <= cdf[0], np.searchsorted(cdf, cdf[0], side="right") - 1, i)
        i = np.clip(i, 0, len(cdf) - 2)
        width = cdf[i + 1] - cdf[i]
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(width > 0, (u - cdf[i]) / width, 0.0)
        return grid[i] + np.clip(frac, 0.0, 1.0) * (grid[i + 1] - grid[i])

    def cdf_at(self, x):
        return np.interp(x, self.grid, self.cdf)

    def bin_masses(self, edges):
        """Probability mass of each bin [edges[i], edges[i+1])."""
        return np.diff(self.cdf_at(np.asarray(edges, dtype=float)))


def equidistant_quantiles(table: TabulatedDensity, n: int) -> np.ndarray:
    """Positions at CDF levels (i + 1/2) / n."""
    return table.quantile((np.arange(n) + 0.5) / n)


def iid_draws(table: TabulatedDensity, n: int, seed: int, tag: int, start: int = 0) -> np.ndarray:
    return table.quantile(uniforms(seed, tag, n, start=start))
