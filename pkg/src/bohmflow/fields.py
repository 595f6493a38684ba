"""Bohmian fields extracted numerically from any complex wave function.

The only input is an evaluator ``psi(x, t)``; density, flux, velocity,
quantum potential and phase follow from fourth-order central differences.
The residual helpers check that the extracted fields satisfy the continuity
and quantum Hamilton-Jacobi equations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import packet as single
from . import superposition as sp
from .errors import BranchMismatch, DomainError, NodeOnGrid, NodeProximity


@dataclass(frozen=True)
class WaveFunction:
    """A vectorized complex amplitude ``func(x, t)`` plus the metadata needed
    to differentiate it.

    ``func`` must be safe to call concurrently and twice differentiable in x
    on ``domain``. ``step`` is the recommended spatial step, either a number
    or a function of t; ``timescale`` sets the default temporal step.
    """

    func: Callable
    mass: float = 1.0
    hbar: float = 1.0
    domain: tuple = (-np.inf, np.inf)
    step: Union[float, Callable, None] = None
    timescale: float = 1.0

    def __call__(self, x, t):
        return self.func(x, t)

    def default_step(self, t) -> float:
        if self.step is None:
            return 1e-4
        if callable(self.step):
            return float(self.step(t))
        return float(self.step)

    @classmethod
    def from_packet(cls, p: single.PacketParams) -> "WaveFunction":
        return cls(
            func=lambda x, t: single.psi(p, x, t),
            mass=p.mass,
            hbar=p.hbar,
            step=lambda t: 1e-3 * float(single.sigma_t(p, t)),
            timescale=p.tau,
        )

    @classmethod
    def from_superposition(cls, s: sp.SuperpositionConfig) -> "WaveFunction":
        return cls(
            func=lambda x, t: sp.psi(s, x, t),
            mass=s.packet.mass,
            hbar=s.packet.hbar,
            step=lambda t: 1e-3 * float(single.sigma_t(s.packet, t)),
            timescale=s.tau,
        )

    def with_phase(self, phase: float) -> "WaveFunction":
        """Same state multiplied by the global factor exp(i phase)."""
        factor = np.exp(1j * phase)
        return WaveFunction(lambda x, t: factor * self.func(x, t), self.mass, self.hbar,
                            self.domain, self.step, self.timescale)


@dataclass(frozen=True)
class FieldSample:
    """Co-located field values; every attribute broadcasts with ``x``."""

    x: np.ndarray
    t: float
    rho: np.ndarray
    flux: np.ndarray
    velocity: np.ndarray
    quantum_potential: np.ndarray
    kinetic: np.ndarray
    phase: np.ndarray


def d1(f, x, h):
    """Fourth-order central first derivative of ``f`` at ``x``."""
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)


def d2(f, x, h):
    """Fourth-order central second derivative of ``f`` at ``x``."""
    return (-f(x - 2 * h) + 16 * f(x - h) - 30 * f(x) + 16 * f(x + h) - f(x + 2 * h)) / (12 * h * h)


def _check_stencil(psi: WaveFunction, x, h):
    lo, hi = psi.domain
    if np.any(np.asarray(x) - 2 * h < lo) or np.any(np.asarray(x) + 2 * h > hi):
        raise DomainError("finite-difference stencil leaves the domain")


def fields_at(psi: WaveFunction, x, t, h: Optional[float] = None, rho_floor: float = 0.0,
              on_node: str = "raise") -> FieldSample:
    """Evaluate rho, J, v, Q, K and the phase at ``x`` (scalar or 1-D array).

    Parameters
    ----------
    h : float, optional
        Spatial step; defaults to ``psi.default_step(t)``.
    rho_floor : float
        Points with rho <= rho_floor are treated as nodes.
    on_node : {"raise", "nan"}
        Raise :class:`NodeProximity` at nodes, or fill v, Q and K with NaN.
    """
    if h is None:
        h = psi.default_step(t)
    if h <= 0:
        raise ValueError("h must be positive")
    x = np.asarray(x, dtype=float)
    _check_stencil(psi, x, h)

    def f(y):
        return psi(y, t)

    def amp(y):
        return np.abs(psi(y, t))

    val = f(x)
    rho = np.abs(val) ** 2
    node = rho <= rho_floor
    if np.any(node) and on_node == "raise":
        raise NodeProximity("density below floor", positions=np.broadcast_to(x, node.shape)[node])
    dpsi = d1(f, x, h)
    flux = psi.hbar / psi.mass * np.imag(np.conj(val) * dpsi)
    a = np.sqrt(rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = np.where(node, np.nan, flux / rho)
        q = np.where(node, np.nan, -psi.hbar**2 / (2 * psi.mass) * d2(amp, x, h) / a)
    k = 0.5 * psi.mass * v**2
    phase = np.angle(val)
    if phase.ndim == 1:
        phase = np.unwrap(phase)
    return FieldSample(x=x, t=t, rho=rho, flux=flux, velocity=v, quantum_potential=q,
                       kinetic=k, phase=phase)


def velocity_field(psi: WaveFunction, h: Optional[float] = None, rho_floor: float = 0.0):
    """Return ``v(x, t)`` backed by :func:`fields_at`, usable by the integrator."""

    def v(x, t):
        t_arr = np.asarray(t, dtype=float)
        if t_arr.ndim == 0:
            return fields_at(psi, x, float(t_arr), h=h, rho_floor=rho_floor).velocity
        x_arr, t_arr = np.broadcast_arrays(np.asarray(x, dtype=float), t_arr)
        out = np.empty_like(x_arr)
        for i, (xi, ti) in enumerate(zip(x_arr, t_arr)):
            out[i] = fields_at(psi, xi, float(ti), h=h, rho_floor=rho_floor).velocity
        return out

    return v


def phase_profile(psi: WaveFunction, t, grid, rho_floor: float = 0.0):
    """Unwrapped phase S/hbar along ``grid``, anchored to 0 at the first point.

    Raises
    ------
    NodeOnGrid
        If any grid point has rho <= rho_floor.
    """
    grid = np.asarray(grid, dtype=float)
    val = psi(grid, t)
    rho = np.abs(val) ** 2
    if np.any(rho <= rho_floor):
        raise NodeOnGrid("phase cannot be unwrapped across a node")
    phase = np.unwrap(np.angle(val))
    return phase - phase[0]


def _time_derivative(g, t, dt):
    if t - dt >= 0:
        return (g(t + dt) - g(t - dt)) / (2 * dt)
    return (-3 * g(t) + 4 * g(t + dt) - g(t + 2 * dt)) / (2 * dt)


def continuity_residual(psi: WaveFunction, grid, t, dt: Optional[float] = None,
                        h: Optional[float] = None, return_rate: bool = False):
    """Pointwise d(rho)/dt + dJ/dx on ``grid``.

    With ``return_rate=True`` also returns d(rho)/dt, the natural scale
    against which the residual is judged.
    """
    if dt is None:
        dt = 1e-5 * psi.timescale
    if h is None:
        h = psi.default_step(t)
    grid = np.asarray(grid, dtype=float)
    _check_stencil(psi, grid, 2 * h)
    drho = _time_derivative(lambda s: np.abs(psi(grid, s)) ** 2, t, dt)

    def j(y):
        val = psi(y, t)
        return psi.hbar / psi.mass * np.imag(np.conj(val) * d1(lambda z: psi(z, t), y, h))

    residual = drho + d1(j, grid, h)
    if return_rate:
        return residual, drho
    return residual


PotentialFunction = Callable


def hamilton_jacobi_residual(psi: WaveFunction, V: Union[PotentialFunction, float, None], grid, t,
                             dt: Optional[float] = None, h: Optional[float] = None,
                             rho_floor: float = 0.0, max_increment: float = 0.5 * np.pi):
    """Pointwise dS/dt + (dS/dx)^2/2m + V + Q on ``grid``.

    dS/dt is taken from the phase change of psi between t - dt and t + dt at
    each grid point, which is branch-free as long as that change stays below
    ``max_increment``.

    Raises
    ------
    NodeOnGrid
        If the density vanishes on the grid.
    BranchMismatch
        If the temporal phase increment is too large to align unambiguously.
    """
    if dt is None:
        dt = 1e-5 * psi.timescale
    grid = np.asarray(grid, dtype=float)
    if t - dt < 0:
        raise ValueError("t must be at least dt")
    after = psi(grid, t + dt)
    before = psi(grid, t - dt)
    if np.any(np.abs(after) ** 2 <= rho_floor) or np.any(np.abs(before) ** 2 <= rho_floor):
        raise NodeOnGrid("density vanishes on the grid")
    increment = np.angle(after * np.conj(before))
    if np.any(np.abs(increment) >= max_increment):
        raise BranchMismatch("phase increment too large; reduce dt")
    ds_dt = psi.hbar * increment / (2 * dt)
    sample = fields_at(psi, grid, t, h=h, rho_floor=rho_floor)
    ds_dx = psi.mass * sample.velocity
    if V is None:
        pot = 0.0
    elif callable(V):
        pot = V(grid, t)
    else:
        pot = float(V)
    return ds_dt + ds_dx**2 / (2 * psi.mass) + pot + sample.quantum_potential
