"""Diagnostics built on the fields: fringe extrema, channel ladder, energy split."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from . import fields as fe
from . import packet as single
from . import superposition as sp
from .errors import ResolutionError

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class ExtremaReport:
    """Interior extrema of a density on a grid at time ``t``.

    ``plateau`` lists maxima positions that came from flat runs rather than
    a strict sign change of the slope.
    """

    minima: np.ndarray
    maxima: np.ndarray
    t: float
    grid_min: float
    grid_max: float
    n_points: int
    plateau: np.ndarray = field(default_factory=lambda: np.empty(0))


@dataclass(frozen=True)
class Channel:
    nu: int
    interval: tuple
    mean_velocity: float


@dataclass
class ChannelLadder:
    channels: list

    @property
    def nu(self):
        return np.array([c.nu for c in self.channels])

    @property
    def mean_velocity(self):
        return np.array([c.mean_velocity for c in self.channels])

    def get(self, nu: int) -> Channel:
        for c in self.channels:
            if c.nu == nu:
                return c
        raise KeyError(nu)


def golden_section(f, a: float, b: float, xtol: float) -> float:
    """Minimizer of a unimodal ``f`` on [a, b] to within ``xtol``."""
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > xtol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _polish(rho, t, x, lo, hi, xtol):
    """Sharpen a golden-section estimate by a root of the numerical slope.

    Near a quadratic extremum, function values only resolve the position to
    about sqrt(machine epsilon); the slope has a simple root and does better.
    """
    h = 1e-3 * (hi - lo)

    def slope(y):
        return float(fe.d1(lambda z: rho(z, t), y, h))

    w = max(100 * xtol, 1e-6 * (hi - lo))
    a, b = max(lo, x - w), min(hi, x + w)
    fa, fb = slope(a), slope(b)
    if fa * fb >= 0:
        return x
    return brentq(slope, a, b, xtol=1e-15 * max(1.0, abs(x)), rtol=4 * np.finfo(float).eps)


def find_extrema(rho: Callable, grid, t: float, fringe_spacing: Optional[float] = None,
                 xtol: Optional[float] = None, flat_tol: float = 1e-12) -> ExtremaReport:
    """Locate and refine interior extrema of ``rho(x, t)`` sampled on ``grid``.

    Slope sign changes bracket each extremum, golden-section search refines
    it to ``xtol`` and the sign of the second difference classifies it. A
    final root search on the numerical slope sharpens each position.
    Slope changes smaller than ``flat_tol`` times the peak are treated as
    flat.

    Raises
    ------
    ResolutionError
        If ``fringe_spacing`` is given and the grid step exceeds half of it.
    """
    grid = np.asarray(grid, dtype=float)
    dx = np.diff(grid)
    if fringe_spacing is not None and dx.max() > 0.5 * fringe_spacing:
        raise ResolutionError(f"grid step {dx.max():.3g} exceeds half the fringe spacing {fringe_spacing:.3g}")
    if xtol is None:
        xtol = 1e-9 * (grid[-1] - grid[0])
    vals = np.asarray(rho(grid, t), dtype=float)
    slope = np.diff(vals)
    sgn = np.sign(slope)
    sgn[np.abs(slope) <= flat_tol * np.abs(vals).max()] = 0
    nz = np.flatnonzero(sgn)
    minima, maxima, plateau = [], [], []
    for j, k in zip(nz[:-1], nz[1:]):
        if sgn[j] == sgn[k]:
            continue
        if k > j + 1:
            # flat run between slopes of opposite sign
            mid = 0.5 * (grid[j + 1] + grid[k])
            maxima.append(mid)
            plateau.append(mid)
            continue
        i = k  # slope changes sign at grid[i]
        lo, hi = grid[i - 1], grid[i + 1]
        curvature = vals[i - 1] - 2 * vals[i] + vals[i + 1]
        if curvature < 0:
            x = golden_section(lambda y: -float(rho(y, t)), lo, hi, xtol)
            maxima.append(_polish(rho, t, x, lo, hi, xtol))
        else:
            x = golden_section(lambda y: float(rho(y, t)), lo, hi, xtol)
            minima.append(_polish(rho, t, x, lo, hi, xtol))
    return ExtremaReport(np.array(minima), np.array(maxima), t, grid[0], grid[-1], grid.size,
                         np.array(plateau))


def channel_ladder_extract(v: Callable, t: float, grid, rho: Callable, tau: Optional[float] = None,
                           n_sub: int = 2001, fringe_spacing: Optional[float] = None) -> ChannelLadder:
    """Split the grid at density minima and average v over each channel with weight rho.

    Only intervals bounded by two minima count as channels; the one holding
    x = 0 (or the middle one) is channel 0.
    """
    if tau is not None and t < 10 * tau:
        warnings.warn("channel ladder requested outside the asymptotic regime (t < 10 tau)", stacklevel=2)
    report = find_extrema(rho, grid, t, fringe_spacing=fringe_spacing)
    mins = np.sort(report.minima)
    if mins.size < 2:
        return ChannelLadder([])
    intervals = list(zip(mins[:-1], mins[1:]))
    center = [i for i, (a, b) in enumerate(intervals) if a <= 0.0 < b]
    c = center[0] if center else len(intervals) // 2
    channels = []
    for i, (a, b) in enumerate(intervals):
        x = np.linspace(a, b, n_sub)
        r = np.asarray(rho(x, t), dtype=float)
        flux = r * np.asarray(v(x, t), dtype=float)
        mean = simpson(flux, x=x) / simpson(r, x=x)
        channels.append(Channel(i - c, (float(a), float(b)), float(mean)))
    return ChannelLadder(channels)


@dataclass(frozen=True)
class EnergyDecomposition:
    mean_K: float
    mean_Q: float
    total: float


def energy_decomposition(source, t: float, grid, h: Optional[float] = None) -> EnergyDecomposition:
    """Density-weighted averages of the kinetic term and quantum potential.

    ``source`` is a :class:`PacketParams` (closed forms), a
    :class:`SuperpositionConfig` or any :class:`WaveFunction` (numerical
    fields). Quadrature is Simpson's rule on ``grid``.
    """
    grid = np.asarray(grid, dtype=float)
    if isinstance(source, single.PacketParams):
        r = single.density(source, grid, t)
        k = single.kinetic_term(source, grid, t)
        q = single.quantum_potential(source, grid, t)
    else:
        if isinstance(source, sp.SuperpositionConfig):
            source = fe.WaveFunction.from_superposition(source)
        sample = fe.fields_at(source, grid, t, h=h, on_node="nan")
        r = sample.rho
        ok = np.isfinite(sample.quantum_potential)
        k = np.where(ok, sample.kinetic, 0.0)
        q = np.where(ok, sample.quantum_potential, 0.0)
    if max(r[0], r[-1]) > 1e-12 * r.max():
        warnings.warn("grid does not cover the density support; energy quadrature truncated",
                      stacklevel=2)
    norm = simpson(r, x=grid)
    mean_k = simpson(k * r, x=grid) / norm
    mean_q = simpson(q * r, x=grid) / norm
    return EnergyDecomposition(float(mean_k), float(mean_q), float(mean_k + mean_q))


def dispersion_regime(p: single.PacketParams, t: float, early: float = 0.1,
                      asymptotic: float = 10.0) -> str:
    """``early`` below ``early`` tau, ``asymptotic`` above ``asymptotic`` tau, else ``transition``."""
    if t < 0:
        raise ValueError("time must be non-negative")
    if t < early * p.tau:
        return "early"
    if t > asymptotic * p.tau:
        return "asymptotic"
    return "transition"
