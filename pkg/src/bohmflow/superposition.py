"""Coherent superposition of two Gaussian packets (the Young two-slit model).

Density and flux follow the closed forms with the common time-dependent
normalizing prefactor dropped; it cancels in the velocity ``v = J / rho``.
``norm`` recovers it when a unit-normalized density is needed.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import packet as single
from .errors import NodeProximity
from .packet import PacketParams, _check_time


@dataclass(frozen=True)
class SuperpositionConfig:
    """Two packets of identical shape centered at ``+x0`` and ``-x0``."""

    packet: PacketParams = PacketParams()
    half_separation: float = 5.0

    def __post_init__(self):
        if not np.isfinite(self.half_separation) or self.half_separation <= 0:
            raise ValueError("half_separation must be positive")
        if self.half_separation < 3.0 * self.packet.sigma0:
            warnings.warn(
                "packets overlap at t=0 (half_separation < 3 sigma0); "
                "the two-slit picture assumes well separated sources",
                stacklevel=2,
            )

    @property
    def slit_separation(self) -> float:
        return 2.0 * self.half_separation

    @property
    def tau(self) -> float:
        return self.packet.tau

    @property
    def plus(self) -> PacketParams:
        return self.packet.shifted(self.half_separation)

    @property
    def minus(self) -> PacketParams:
        return self.packet.shifted(-self.half_separation)

    @property
    def ladder_step(self) -> float:
        """Velocity spacing pi hbar / (m x0) between adjacent channels."""
        p = self.packet
        return np.pi * p.hbar / (p.mass * self.half_separation)


@dataclass(frozen=True)
class PhaseDifference:
    """Relative phase of the two packets, phi(x) = -kappa x."""

    kappa: float

    def phi_at(self, x):
        return -self.kappa * np.asarray(x, dtype=float)


def kappa(s: SuperpositionConfig, t):
    p = s.packet
    t = _check_time(t)
    st2 = single.sigma_t(p, t) ** 2
    return p.hbar * t * s.half_separation / (2.0 * p.mass * p.sigma0**2 * st2)


def phase_difference(s: SuperpositionConfig, t) -> PhaseDifference:
    return PhaseDifference(float(kappa(s, t)))


def _scaled_terms(s, x, t):
    """Density and flux divided by exp(-(|x| - x0)^2 / 2 sigma_t^2).

    Factoring out the dominant Gaussian keeps both finite far in the tails,
    where each unscaled term underflows. Returns (rho_hat, j_hat, q, log_scale)
    with q = |x| x0 / sigma_t^2, so that the interference envelope is
    exp(-q) in scaled units.
    """
    p = s.packet
    x0 = s.half_separation
    x = np.asarray(x, dtype=float)
    t = _check_time(t)
    st2 = single.sigma_t(p, t) ** 2
    k = kappa(s, t)
    ax = np.abs(x)
    q = ax * x0 / st2
    e1 = np.exp(-q)
    e2 = e1 * e1
    cos_kx = np.cos(k * x)
    sin_kx = np.sin(k * x)
    near = np.where(x >= 0, x0, -x0)
    rho_hat = 1.0 + e2 + 2.0 * e1 * cos_kx
    pre = p.hbar**2 * t / (4.0 * p.mass**2 * p.sigma0**2 * st2)
    j_hat = pre * ((x - near) + (x + near) * e2 + 2.0 * x * e1 * cos_kx)
    j_hat = j_hat - p.hbar * x0 / (p.mass * st2) * e1 * sin_kx
    log_scale = -((ax - x0) ** 2) / (2.0 * st2)
    return rho_hat, j_hat, q, log_scale


def rho(s: SuperpositionConfig, x, t):
    """Density of the superposition (unnormalized, peak value ~ 4)."""
    rho_hat, _, _, log_scale = _scaled_terms(s, x, t)
    return np.exp(log_scale) * rho_hat


def flux(s: SuperpositionConfig, x, t):
    """Probability flux with the same normalization as :func:`rho`."""
    _, j_hat, _, log_scale = _scaled_terms(s, x, t)
    return np.exp(log_scale) * j_hat


def velocity(s: SuperpositionConfig, x, t, rho_floor: float = 1e-12):
    """Local velocity J / rho.

    Raises
    ------
    NodeProximity
        If rho falls below ``rho_floor`` times the interference envelope
        exp(-(x^2 + x0^2) / 2 sigma_t^2) at any x other than the symmetry axis.
    """
    rho_hat, j_hat, q, _ = _scaled_terms(s, x, t)
    x = np.asarray(x, dtype=float)
    axis = x == 0.0
    bad = (rho_hat < rho_floor * np.exp(-q)) & ~axis
    if np.any(bad):
        raise NodeProximity(
            "density below floor near an interference node",
            positions=np.broadcast_to(x, bad.shape)[bad],
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        v = j_hat / rho_hat
    return np.where(axis, 0.0, v)


def norm(s: SuperpositionConfig, t):
    """Integral of :func:`rho` over the real line (constant shape factor times sigma_t)."""
    p = s.packet
    overlap = np.exp(-(s.half_separation**2) / (2.0 * p.sigma0**2))
    return 2.0 * np.sqrt(2.0 * np.pi) * single.sigma_t(p, t) * (1.0 + overlap)


def psi(s: SuperpositionConfig, x, t):
    """Unit-normalized complex amplitude psi_+ + psi_-."""
    p = s.packet
    overlap = np.exp(-(s.half_separation**2) / (2.0 * p.sigma0**2))
    total = single.psi(s.plus, x, t) + single.psi(s.minus, x, t)
    return total / np.sqrt(2.0 * (1.0 + overlap))


def density_normalized(s: SuperpositionConfig, x, t):
    return rho(s, x, t) / norm(s, t)


def interference_term(s: SuperpositionConfig, x, t):
    """2 sqrt(rho_+ rho_-) cos(phi), in the same units as :func:`rho`."""
    p = s.packet
    st2 = single.sigma_t(p, t) ** 2
    x = np.asarray(x, dtype=float)
    x0 = s.half_separation
    rp = np.exp(-((x - x0) ** 2) / (2.0 * st2))
    rm = np.exp(-((x + x0) ** 2) / (2.0 * st2))
    phi = -kappa(s, t) * x
    return 2.0 * np.sqrt(rp * rm) * np.cos(phi)


def _longtime_args(s, x, t):
    p = s.packet
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("long-time forms need t > 0")
    x = np.asarray(x, dtype=float)
    x0 = s.half_separation
    ht = p.hbar * t
    gauss = np.exp(-2.0 * p.mass**2 * p.sigma0**2 * x**2 / ht**2)
    hyp = 4.0 * p.mass**2 * p.sigma0**2 * x0 * x / ht**2
    theta = p.mass * x0 * x / ht
    return x, t, gauss, hyp, theta


def rho_longtime(s: SuperpositionConfig, x, t, simplified: bool = False):
    """Asymptotic (t >> tau) density: cosh/cos form, or the cos^2 form if ``simplified``."""
    x, t, gauss, hyp, theta = _longtime_args(s, x, t)
    if simplified:
        return 4.0 * gauss * np.cos(theta) ** 2
    return 2.0 * gauss * (np.cosh(hyp) + np.cos(2.0 * theta))


def flux_longtime(s: SuperpositionConfig, x, t, simplified: bool = False):
    """Asymptotic flux matching :func:`rho_longtime`.

    The sinh term survives in both variants and stays finite where the
    simplified density vanishes.
    """
    x, t, gauss, hyp, theta = _longtime_args(s, x, t)
    kick = 2.0 * s.half_separation / t * gauss * np.sinh(hyp)
    if simplified:
        return 4.0 * x / t * gauss * np.cos(theta) ** 2 - kick
    return 2.0 * x / t * gauss * (np.cosh(hyp) + np.cos(2.0 * theta)) - kick


def velocity_longtime(s: SuperpositionConfig, x, t):
    """x/t minus the node kick (x0/2t) sinh(.)/cos^2(.)."""
    x, t, _, hyp, theta = _longtime_args(s, x, t)
    with np.errstate(divide="ignore"):
        return x / t - s.half_separation / (2.0 * t) * np.sinh(hyp) / np.cos(theta) ** 2


def channel_velocity(s: SuperpositionConfig, nu):
    """Quantized mean velocity nu pi hbar / (m x0) of interference channel ``nu``."""
    return np.asarray(nu) * s.ladder_step


def fringe_rates(s: SuperpositionConfig, nu):
    """Drift rates (min_rate, max_rate) of the order-``nu`` minimum and maximum.

    Minima travel along x = min_rate t and maxima along x = max_rate t.
    """
    p = s.packet
    unit = np.pi * p.hbar / (p.mass * s.slit_separation)
    nu = np.asarray(nu)
    return (2 * nu + 1) * unit, 2 * nu * unit


def support(s: SuperpositionConfig, t, width: float = 10.0):
    half = s.half_separation + width * float(single.sigma_t(s.packet, t))
    return -half, half
