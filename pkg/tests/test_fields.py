import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bohmflow import BranchMismatch, DomainError, NodeOnGrid, NodeProximity, PacketParams
from bohmflow import fields as fe
from bohmflow import packet as pk
from bohmflow import superposition as sp


@pytest.fixture
def wf(packet):
    return fe.WaveFunction.from_packet(packet)


def test_q_matches_closed_form(packet, wf):
    t = packet.tau
    s = float(pk.sigma_t(packet, t))
    x = np.array([0.0, s, 2 * s])
    f = fe.fields_at(wf, x, t)
    np.testing.assert_allclose(f.quantum_potential, pk.quantum_potential(packet, x, t), atol=1e-5)


def test_superposition_velocity_matches(two_slit):
    wf = fe.WaveFunction.from_superposition(two_slit)
    for t in (1.0, 10.0):
        s = float(pk.sigma_t(two_slit.packet, t))
        x = np.linspace(-5 - 3 * s, 5 + 3 * s, 801)
        f = fe.fields_at(wf, x, t)
        exact = sp.velocity(two_slit, x, t)
        np.testing.assert_allclose(f.velocity, exact, rtol=1e-6, atol=1e-6 * np.abs(exact).max())


def test_real_initial_packet_has_no_flux(packet, wf):
    f = fe.fields_at(wf, np.linspace(-2, 2, 41), 0.0)
    np.testing.assert_allclose(f.flux, 0.0, atol=1e-15)


def test_fieldsample_invariants(two_slit):
    wf = fe.WaveFunction.from_superposition(two_slit)
    x = np.linspace(-20, 20, 401)
    f = fe.fields_at(wf, x, 10.0)
    np.testing.assert_allclose(f.velocity * f.rho, f.flux, rtol=1e-12)
    np.testing.assert_allclose(f.rho, np.abs(wf(x, 10.0)) ** 2, rtol=0)
    np.testing.assert_allclose(f.kinetic, 0.5 * f.velocity**2, rtol=1e-15)


def test_domain_and_node_errors(packet):
    bounded = fe.WaveFunction(lambda x, t: pk.psi(packet, x, t), domain=(-1.0, 1.0), step=1e-3)
    with pytest.raises(DomainError):
        fe.fields_at(bounded, 0.999, 0.5)
    node = fe.WaveFunction(lambda x, t: np.asarray(x, dtype=complex) * np.exp(-x**2), step=1e-4)
    with pytest.raises(NodeProximity):
        fe.fields_at(node, np.array([-1.0, 0.0, 1.0]), 0.0)
    f = fe.fields_at(node, np.array([-1.0, 0.0, 1.0]), 0.0, on_node="nan")
    assert np.isnan(f.velocity[1]) and np.isfinite(f.velocity[0])
    with pytest.raises(ValueError):
        fe.fields_at(node, 0.5, 0.0, h=0.0)


def test_phase_profile(packet, wf):
    grid = np.linspace(-2, 2, 401)
    np.testing.assert_allclose(fe.phase_profile(wf, 0.0, grid), 0.0, atol=1e-15)
    t = packet.tau
    s = float(pk.sigma_t(packet, t))
    grid = np.linspace(-3 * s, 3 * s, 6001)
    phase = fe.phase_profile(wf, t, grid)
    assert phase[0] == 0.0
    grad = np.gradient(packet.hbar * phase, grid, edge_order=2)
    v = pk.velocity(packet, grid, t)
    np.testing.assert_allclose(packet.mass * v[2:-2], grad[2:-2], atol=1e-5)


def test_phase_profile_superposition_smooth(two_slit):
    wf = fe.WaveFunction.from_superposition(two_slit)
    grid = np.linspace(-np.pi, np.pi, 2001)  # central channel at t = 10
    phase = fe.phase_profile(wf, 10.0, grid)
    assert np.abs(np.diff(phase)).max() < np.pi


def test_phase_profile_rejects_node():
    node = fe.WaveFunction(lambda x, t: np.asarray(x, dtype=complex) * np.exp(-x**2))
    with pytest.raises(NodeOnGrid):
        fe.phase_profile(node, 0.0, np.linspace(-1, 1, 11))


def test_continuity_single(packet, wf):
    t = packet.tau
    grid = np.linspace(*pk.support(packet, t, 6.0), 801)
    res, rate = fe.continuity_residual(wf, grid, t, return_rate=True)
    assert np.abs(res).max() < 1e-4 * np.abs(rate).max()


def test_continuity_superposition_channels(two_slit):
    wf = fe.WaveFunction.from_superposition(two_slit)
    t = 10 * two_slit.tau
    grid = np.linspace(-25, 25, 1001)
    res, rate = fe.continuity_residual(wf, grid, t, return_rate=True)
    assert np.abs(res).max() < 1e-4 * np.abs(rate).max()


def test_continuity_negative_control(packet):
    # a 1% time-dependent amplitude error breaks conservation
    bad = fe.WaveFunction(lambda x, t: pk.psi(packet, x, t) * (1 + 0.01 * np.sin(3 * t) * np.cos(x)),
                          step=lambda t: 1e-3 * float(pk.sigma_t(packet, t)), timescale=packet.tau)
    t = packet.tau
    grid = np.linspace(*pk.support(packet, t, 6.0), 801)
    good_rate = fe.continuity_residual(fe.WaveFunction.from_packet(packet), grid, t, return_rate=True)[1]
    res = fe.continuity_residual(bad, grid, t)
    assert np.abs(res).max() > 1e-4 * np.abs(good_rate).max()


def test_hamilton_jacobi(packet, wf):
    t = packet.tau
    s = float(pk.sigma_t(packet, t))
    grid = np.linspace(-2 * s, 2 * s, 201)
    e = pk.energy_expectation(packet)
    res = fe.hamilton_jacobi_residual(wf, None, grid, t)
    assert np.abs(res).max() < 1e-3 * e
    shifted = fe.hamilton_jacobi_residual(wf.with_phase(2.0), None, grid, t)
    np.testing.assert_allclose(shifted, res, atol=1e-8)
    const = fe.hamilton_jacobi_residual(wf, 0.75, grid, t)
    np.testing.assert_allclose(const - res, 0.75, atol=1e-12)
    fn = fe.hamilton_jacobi_residual(wf, lambda x, t: 0.75 + 0 * x, grid, t)
    np.testing.assert_allclose(fn, const, atol=0)


def test_hamilton_jacobi_errors(packet, wf):
    with pytest.raises(BranchMismatch):
        fe.hamilton_jacobi_residual(wf, None, np.linspace(-10, 10, 41), 1.0, dt=0.9)
    node = fe.WaveFunction(lambda x, t: np.asarray(x, dtype=complex) * np.exp(-x**2 - 1j * t))
    with pytest.raises(NodeOnGrid):
        fe.hamilton_jacobi_residual(node, None, np.linspace(-1, 1, 5), 1.0)


def _oracle_error(packet, h):
    wf = fe.WaveFunction.from_packet(packet)
    t = packet.tau
    s = float(pk.sigma_t(packet, t))
    x = np.linspace(-3 * s, 3 * s, 61)
    f = fe.fields_at(wf, x, t, h=h * s)
    return (np.abs(f.velocity - pk.velocity(packet, x, t)).max()
            + np.abs(f.quantum_potential - pk.quantum_potential(packet, x, t)).max())


def test_richardson_order(packet):
    for h in (0.1, 0.05):
        assert _oracle_error(packet, h / 2) < _oracle_error(packet, h) / 8


def test_flux_identity_with_phase(packet, wf):
    t = 2 * packet.tau
    s = float(pk.sigma_t(packet, t))
    grid = np.linspace(-3 * s, 3 * s, 3001)
    f = fe.fields_at(wf, grid, t)
    grad = np.gradient(fe.phase_profile(wf, t, grid), grid, edge_order=2)
    lhs = f.flux[5:-5]
    rhs = (f.rho * packet.hbar * grad / packet.mass)[5:-5]
    np.testing.assert_allclose(lhs, rhs, rtol=1e-6, atol=1e-6 * np.abs(lhs).max())


def test_velocity_field_callable(packet, wf):
    v = fe.velocity_field(wf)
    x = np.array([-1.0, 0.3, 2.0])
    np.testing.assert_allclose(v(x, 1.0), pk.velocity(packet, x, 1.0), rtol=1e-8)
    np.testing.assert_allclose(v(x, np.array([0.5, 1.0, 2.0])),
                               pk.velocity(packet, x, np.array([0.5, 1.0, 2.0])), rtol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(0.0, 5.0), st.floats(-2.0, 2.0))
def test_oracle_equivalence_property(sigma0, t_over_tau, u):
    p = PacketParams(sigma0=sigma0)
    t = t_over_tau * p.tau
    x = u * float(pk.sigma_t(p, t))
    f = fe.fields_at(fe.WaveFunction.from_packet(p), x, t)
    e = pk.energy_expectation(p)
    assert f.velocity == pytest.approx(pk.velocity(p, x, t), abs=1e-6 * p.spreading_velocity)
    assert f.quantum_potential == pytest.approx(pk.quantum_potential(p, x, t), abs=1e-5 * e)
    assert f.rho == pytest.approx(pk.density(p, x, t), rel=1e-12)
