import numpy as np
import pytest

from bohmflow import NodeProximity, PacketParams, StepUnderflow, SwarmFailure, SwarmSpec
from bohmflow import packet as pk
from bohmflow import superposition as sp
from bohmflow import trajectories as tr


def single_v(p):
    return lambda x, t: pk.velocity(p, x, t)


def test_single_packet_endpoint(packet):
    traj = tr.integrate_trajectory(single_v(packet), 1.0, 0.0, 0.5)
    assert traj.status == tr.COMPLETED
    assert traj.positions[-1] == pytest.approx(np.sqrt(2), abs=1e-6)
    assert np.all(np.diff(traj.times) > 0)


def test_axis_is_stationary(two_slit):
    traj = tr.integrate_trajectory(lambda x, t: sp.velocity(two_slit, x, t), 0.0, 0.0, 10.0,
                                   t_eval=np.linspace(0, 10, 11))
    np.testing.assert_array_equal(traj.positions, 0.0)


def test_time_reversal(two_slit):
    v = lambda x, t: sp.velocity(two_slit, x, t)
    fwd = tr.integrate_trajectory(v, 4.2, 0.0, 10.0)
    back = tr.integrate_trajectory(v, fwd.positions[-1], 10.0, 0.0)
    assert back.positions[-1] == pytest.approx(4.2, abs=1e-5)


def test_closed_form_agreement_bound(packet):
    # integrator endpoints: |x_num - x_exact| < rtol sigma_t at every end time
    x0 = np.linspace(-1.5, 1.5, 31)
    rtol = 1e-8
    for t1 in np.linspace(0.05, 10, 12) * packet.tau:
        out, status = tr.integrate_batch(single_v(packet), x0, 0.0, t1, rtol=rtol, atol=1e-10)
        assert np.all(status == tr.COMPLETED)
        exact = pk.trajectory_closed_form(packet, x0, t1)
        assert np.abs(out[:, -1] - exact).max() < rtol * pk.sigma_t(packet, t1)


def test_dense_output_error_bound(packet):
    # 4th-order interpolation inside steps costs a few rtol (|x| reaches 3 sigma_t here)
    t1 = 10 * packet.tau
    times = np.linspace(0, t1, 101)
    x0 = np.linspace(-1.5, 1.5, 31)
    rtol = 1e-8
    out, _ = tr.integrate_batch(single_v(packet), x0, 0.0, t1, t_eval=times, rtol=rtol, atol=1e-10)
    exact = pk.trajectory_closed_form(packet, x0[:, None], times[None, :])
    assert np.all(np.abs(out - exact) < 5 * rtol * pk.sigma_t(packet, times)[None, :])


def test_convergence_with_rtol(packet):
    t1 = 10 * packet.tau
    x0 = np.linspace(-1.5, 1.5, 31)
    times = np.linspace(0, t1, 101)
    # max over the whole path; a single endpoint can benefit from error cancellation
    exact = pk.trajectory_closed_form(packet, x0[:, None], times[None, :])
    scale = pk.sigma_t(packet, times)[None, :]
    errs = []
    for rtol in (1e-6, 1e-7, 1e-8, 1e-9):
        out, _ = tr.integrate_batch(single_v(packet), x0, 0.0, t1, t_eval=times, rtol=rtol, atol=1e-3 * rtol)
        errs.append((np.abs(out - exact) / scale).max())
    for coarse, fine in zip(errs, errs[1:]):
        assert fine <= coarse / 5


def test_dense_output_accuracy(two_slit):
    v = lambda x, t: sp.velocity(two_slit, x, t)
    times = np.linspace(0, 10, 201)
    dense = tr.integrate_trajectory(v, 3.0, 0.0, 10.0, t_eval=times)
    for k in (37, 120, 200):
        direct = tr.integrate_trajectory(v, 3.0, 0.0, times[k])
        assert dense.positions[k] == pytest.approx(direct.positions[-1], abs=1e-6)


def test_node_abort():
    def v(x, t):
        x = np.asarray(x)
        if np.any(x >= 1.0):
            raise NodeProximity("wall")
        return np.ones_like(x)

    traj = tr.integrate_trajectory(v, 0.0, 0.0, 3.0, t_eval=np.linspace(0, 3, 31))
    assert traj.status == tr.ABORTED_NEAR_NODE
    assert traj.times[-1] < 1.0 + 1e-9 and traj.times.size < 31
    assert np.all(np.isfinite(traj.positions))


def test_step_underflow():
    # finite-time blow-up: x' = x^2 from x = 1 escapes at t = 1
    with pytest.raises(StepUnderflow):
        tr.integrate_trajectory(lambda x, t: np.asarray(x) ** 2, 1.0, 0.0, 2.0, h_min=1e-6)


def _swarm_spec(two_slit, **kw):
    args = dict(n_trajectories=200, t0=0.0, t1=10.0, output_times=np.linspace(0, 10, 500),
                domain=sp.support(two_slit, 0.0))
    args.update(kw)
    return SwarmSpec(**args)


def test_swarm_spec_validation(two_slit):
    with pytest.raises(ValueError):
        SwarmSpec(0, 0.0, 1.0, domain=(-1, 1))
    with pytest.raises(ValueError):
        SwarmSpec(5, 1.0, 1.0, domain=(-1, 1))
    with pytest.raises(ValueError):
        SwarmSpec(5, 0.0, 1.0, sampling="grid", domain=(-1, 1))
    with pytest.raises(ValueError):
        SwarmSpec(5, 0.0, 1.0, sampling="explicit_list", positions=[1, 2])
    with pytest.raises(ValueError):
        SwarmSpec(5, 0.0, 1.0)


def test_superposition_swarm_topology(two_slit):
    v = lambda x, t: sp.velocity(two_slit, x, t)
    rho0 = lambda x: sp.rho(two_slit, x, 0.0)
    swarm = tr.integrate_swarm(v, _swarm_spec(two_slit), rho0)
    assert swarm.completed.all()
    assert tr.check_non_crossing(swarm).ordered
    x0 = swarm.initial_positions
    assert np.all(np.sign(swarm.positions) == np.sign(x0)[:, None])
    # trajectories leave the source region and fan out into channels
    final = swarm.positions[:, -1]
    assert np.abs(final).max() > 20
    mins = (2 * np.arange(0, 4) + 1) * np.pi
    pockets = np.histogram(np.abs(final), bins=np.concatenate(([0], mins)))[0]
    assert np.all(pockets > 0)


def test_swarm_determinism_and_indexing(two_slit):
    v = lambda x, t: sp.velocity(two_slit, x, t)
    rho0 = lambda x: sp.rho(two_slit, x, 0.0)
    spec = _swarm_spec(two_slit, n_trajectories=40, sampling="iid_from_rho", seed=99)
    a = tr.integrate_swarm(v, spec, rho0)
    b = tr.integrate_swarm(v, spec, rho0)
    np.testing.assert_array_equal(a.positions, b.positions)
    assert len(a) == 40
    traj = a[3]
    assert isinstance(traj, tr.Trajectory)
    assert traj.initial_condition == a.initial_positions[3]
    assert len(list(a)) == 40


def test_single_member_swarm_matches_trajectory(packet):
    spec = SwarmSpec(1, 0.0, 2.0, sampling="explicit_list", positions=[0.7],
                     output_times=np.linspace(0, 2, 9))
    swarm = tr.integrate_swarm(single_v(packet), spec)
    traj = tr.integrate_trajectory(single_v(packet), 0.7, 0.0, 2.0, t_eval=np.linspace(0, 2, 9))
    np.testing.assert_array_equal(swarm.positions[0], traj.positions)


def test_single_packet_swarm_ordered(packet):
    spec = SwarmSpec(100, 0.0, 5.0, domain=pk.support(packet, 0.0), output_times=np.linspace(0, 5, 51))
    swarm = tr.integrate_swarm(single_v(packet), spec, lambda x: pk.density(packet, x, 0.0))
    assert tr.check_non_crossing(swarm).ordered


def test_swarm_failure():
    def v(x, t):
        x = np.asarray(x)
        if np.any(x > 0):
            raise NodeProximity("right half blocked")
        return np.ones_like(x)

    spec = SwarmSpec(10, 0.0, 3.0, sampling="explicit_list", positions=np.linspace(-5, -0.5, 10))
    with pytest.raises(SwarmFailure):
        tr.integrate_swarm(v, spec)
    loose = SwarmSpec(10, 0.0, 3.0, sampling="explicit_list", positions=np.linspace(-5, -0.5, 10),
                      min_completed_fraction=0.1)
    swarm = tr.integrate_swarm(v, loose)
    assert swarm.completed.sum() == 5  # x0 <= -3 never enters x > 0


def test_crossing_negative_control():
    times = np.linspace(0, 1, 11)
    lines = np.array([1 - 2 * times, -0.5 + times])  # they meet at t = 0.5
    report = tr.check_non_crossing(lines, times=times)
    assert not report.ordered
    assert report.first_violation[0] == pytest.approx(0.5)
    assert set(report.first_violation[1:]) == {0, 1}
    ok = tr.check_non_crossing(lines, times=times, check_times=times[:5])
    assert ok.ordered
    with pytest.raises(ValueError):
        tr.check_non_crossing(lines)


def test_transport_single_packet(packet):
    t1 = 10 * packet.tau
    rho = lambda x, t: pk.density(packet, x, t)
    report = tr.transport_density_check(single_v(packet), rho, 0.0, t1, 10**5, pk.support(packet, 0.0),
                                        pk.support(packet, t1))
    assert report.distance < 0.02
    assert report.observed.sum() == pytest.approx(1.0, abs=1e-9)


def test_transport_identity_is_binning_error(packet):
    rho = lambda x, t: pk.density(packet, x, t)
    dom = pk.support(packet, 0.0)
    report = tr.transport_density_check(single_v(packet), rho, 0.0, 0.0, 10**6, dom, dom)
    assert report.distance < 0.01


def test_transport_detects_wrong_field(packet):
    # a velocity field twice too strong breaks equivariance
    t1 = 10 * packet.tau
    rho = lambda x, t: pk.density(packet, x, t)
    wrong = lambda x, t: 2 * pk.velocity(packet, x, t)
    report = tr.transport_density_check(wrong, rho, 0.0, t1, 10**4, pk.support(packet, 0.0),
                                        pk.support(packet, t1))
    assert report.distance > 0.2
