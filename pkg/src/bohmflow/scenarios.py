"""Uniform view of the two analytic models for the CLI and the verify suite."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import fields as fe
from . import packet as single
from . import superposition as sp
from .trajectories import _evaluate


@dataclass(frozen=True)
class Scenario:
    """Closed-form normalized density, flux and velocity of one model.

    ``two_slit`` is set for the superposition and ``None`` for the single packet.
    """

    packet: single.PacketParams
    two_slit: Optional[sp.SuperpositionConfig] = None

    @classmethod
    def from_config(cls, cfg) -> "Scenario":
        return cls(cfg.packet, cfg.superposition)

    @property
    def name(self) -> str:
        return "single_packet" if self.two_slit is None else "two_slit"

    @property
    def tau(self) -> float:
        return self.packet.tau

    def rho(self, x, t):
        if self.two_slit is None:
            return single.density(self.packet, x, t)
        return sp.density_normalized(self.two_slit, x, t)

    def flux(self, x, t):
        if self.two_slit is None:
            return single.density(self.packet, x, t) * single.velocity(self.packet, x, t)
        return sp.flux(self.two_slit, x, t) / sp.norm(self.two_slit, t)

    def velocity(self, x, t):
        if self.two_slit is None:
            return single.velocity(self.packet, x, t)
        return sp.velocity(self.two_slit, x, t)

    def velocity_or_nan(self, x, t):
        """Velocity with NaN wherever the density is too small to define it."""
        x = np.asarray(x, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), x.shape)
        return _evaluate(self.velocity, x, t)

    def wavefunction(self) -> fe.WaveFunction:
        if self.two_slit is None:
            return fe.WaveFunction.from_packet(self.packet)
        return fe.WaveFunction.from_superposition(self.two_slit)

    def support(self, t, width: float = 10.0):
        if self.two_slit is None:
            return single.support(self.packet, t, width)
        return sp.support(self.two_slit, t, width)

    def fringe_spacing(self, t) -> Optional[float]:
        """Distance pi hbar t / (m x0) between neighbouring minima, if any."""
        if self.two_slit is None or t <= 0:
            return None
        p = self.packet
        return np.pi * p.hbar * t / (p.mass * self.two_slit.half_separation)
