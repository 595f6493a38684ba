"""Closed-form free Gaussian wave packet.

All functions broadcast over ``x`` and ``t`` (numpy arrays or scalars) and
are pure.  A nonzero ``drift_momentum`` applies the Galilean boost of the
packet; with the default of zero every expression reduces to the textbook
form for a packet released at rest.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    return t


@dataclass(frozen=True)
class PacketParams:
    """Physical constants and Gaussian packet parameters.

    Parameters
    ----------
    mass, hbar : float
        Positive mass and reduced Planck constant (default units ħ = m = 1).
    sigma0 : float
        Initial width of the packet (position standard deviation).
    center : float
        Initial center of the packet.
    drift_momentum : float
        Initial mean momentum. Zero for every released-at-rest scenario.
    """

    mass: float = 1.0
    hbar: float = 1.0
    sigma0: float = 0.5
    center: float = 0.0
    drift_momentum: float = 0.0

    def __post_init__(self):
        for name in ("mass", "hbar", "sigma0"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
        for name in ("center", "drift_momentum"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def tau(self) -> float:
        """Dispersion timescale 2 m sigma0^2 / hbar."""
        return 2.0 * self.mass * self.sigma0**2 / self.hbar

    @property
    def spreading_momentum(self) -> float:
        return self.hbar / (2.0 * self.sigma0)

    @property
    def spreading_velocity(self) -> float:
        return self.spreading_momentum / self.mass

    def shifted(self, center: float) -> "PacketParams":
        return PacketParams(self.mass, self.hbar, self.sigma0, center, self.drift_momentum)

    def _offset(self, x, t):
        # coordinate relative to the (possibly drifting) packet center
        return np.asarray(x, dtype=float) - self.center - self.drift_momentum * t / self.mass


def sigma_tilde(p: PacketParams, t):
    """Complex spreading factor sigma0 (1 + i hbar t / 2 m sigma0^2)."""
    t = _check_time(t)
    return p.sigma0 * (1.0 + 1j * p.hbar * t / (2.0 * p.mass * p.sigma0**2))


def sigma_t(p: PacketParams, t):
    """Time-dependent width, equal to ``abs(sigma_tilde(p, t))``."""
    t = _check_time(t)
    return p.sigma0 * np.sqrt(1.0 + (p.hbar * t / (2.0 * p.mass * p.sigma0**2)) ** 2)


def psi(p: PacketParams, x, t):
    """Normalized complex amplitude of the freely evolving packet."""
    t = _check_time(t)
    st = sigma_tilde(p, t)
    # sigma_tilde lies in the first quadrant, so sigma_tilde**2 never reaches
    # the negative real axis and the principal quarter power is continuous in t.
    assert np.all(np.angle(st**2) < np.pi)
    xi = p._offset(x, t)
    amp = np.power(1.0 / (2.0 * np.pi * st**2), 0.25)
    out = amp * np.exp(-(xi**2) / (4.0 * p.sigma0 * st))
    if p.drift_momentum:
        p0 = p.drift_momentum
        x_rel = np.asarray(x, dtype=float) - p.center
        out = out * np.exp(1j * (p0 * x_rel - p0**2 * t / (2.0 * p.mass)) / p.hbar)
    return out


def density(p: PacketParams, x, t):
    """|psi|^2 in closed form."""
    st = sigma_t(p, t)
    xi = p._offset(x, t)
    return np.exp(-(xi**2) / (2.0 * st**2)) / (np.sqrt(2.0 * np.pi) * st)


def velocity(p: PacketParams, x, t):
    """Local velocity field hbar^2 t x / (4 m^2 sigma0^2 sigma_t^2)."""
    t = _check_time(t)
    st2 = sigma_t(p, t) ** 2
    xi = p._offset(x, t)
    v = p.hbar**2 * t * xi / (4.0 * p.mass**2 * p.sigma0**2 * st2)
    return v + p.drift_momentum / p.mass


def energy_expectation(p: PacketParams) -> float:
    """Mean energy hbar^2 / (8 m sigma0^2) (plus p0^2/2m for a drifting packet)."""
    return p.hbar**2 / (8.0 * p.mass * p.sigma0**2) + p.drift_momentum**2 / (2.0 * p.mass)


def kinetic_term(p: PacketParams, x, t):
    """Kinetic part (dS/dx)^2 / 2m of the quantum Hamilton-Jacobi equation."""
    t = _check_time(t)
    st2 = sigma_t(p, t) ** 2
    s02 = p.sigma0**2
    xi = p._offset(x, t)
    k = p.hbar**2 / (8.0 * p.mass * s02) * ((st2 - s02) / st2) * (xi**2 / st2)
    if p.drift_momentum:
        p0 = p.drift_momentum
        v_rest = velocity(p, x, t) - p0 / p.mass
        k = k + p0 * v_rest + p0**2 / (2.0 * p.mass)
    return k


def quantum_potential(p: PacketParams, x, t):
    """Bohm's quantum potential of the free Gaussian packet."""
    t = _check_time(t)
    st2 = sigma_t(p, t) ** 2
    s02 = p.sigma0**2
    xi = p._offset(x, t)
    return p.hbar**2 / (8.0 * p.mass * s02) * (s02 / st2) * (2.0 - xi**2 / st2)


def trajectory_closed_form(p: PacketParams, x_init, t):
    """Position at time ``t`` of the trajectory that starts at ``x_init``."""
    t = _check_time(t)
    scale = sigma_t(p, t) / p.sigma0
    x_rel = np.asarray(x_init, dtype=float) - p.center
    return p.center + p.drift_momentum * t / p.mass + scale * x_rel


def support(p: PacketParams, t, width: float = 10.0):
    """Interval holding all but a negligible tail of the density at ``t``."""
    c = p.center + p.drift_momentum * float(t) / p.mass
    half = width * float(sigma_t(p, t))
    return c - half, c + half
