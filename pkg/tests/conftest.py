import numpy as np
import pytest

from bohmflow import PacketParams, SuperpositionConfig

_ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance verdict; printed in the terminal summary."""

    def _record(key, passed, detail):
        _ACCEPTANCE[key] = (bool(passed), detail)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        passed, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  criterion {key:<4} {detail}")


@pytest.fixture
def packet():
    return PacketParams(mass=1.0, hbar=1.0, sigma0=0.5)


@pytest.fixture
def two_slit():
    return SuperpositionConfig(PacketParams(mass=1.0, hbar=1.0, sigma0=0.5), half_separation=5.0)


def fft_evolve(psi0, x, t, mass=1.0, hbar=1.0):
    """Free evolution of samples psi0(x) by exact propagation in momentum space."""
    dx = x[1] - x[0]
    k = 2 * np.pi * np.fft.fftfreq(x.size, d=dx)
    return np.fft.ifft(np.fft.fft(psi0) * np.exp(-1j * hbar * k**2 * t / (2 * mass)))
