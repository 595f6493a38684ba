"""Trajectory integration under a velocity field dx/dt = v(x, t).

The integrator is an embedded Dormand-Prince 5(4) pair with PI step control
and the standard quartic dense output. It advances many trajectories at
once, but each one carries its own time, step size and error history, so a
trajectory's result does not depend on which others share the batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import sampling
from .errors import NodeProximity, StepUnderflow, SwarmFailure

COMPLETED = "completed"
ABORTED_NEAR_NODE = "aborted_near_node"
STEP_UNDERFLOW = "step_underflow"
_RUNNING = 0
_STATUS = {1: COMPLETED, 2: ABORTED_NEAR_NODE, 3: STEP_UNDERFLOW}

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# quartic continuous extension, columns multiply theta, theta^2, theta^3, theta^4
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
# PI gains of Hairer's DOPRI5 (beta = 0.04, alpha = 0.2 - 0.75 beta)
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA


@dataclass
class Trajectory:
    """Positions of one tracer at monotone ``times``."""

    times: np.ndarray
    positions: np.ndarray
    initial_condition: float
    status: str = COMPLETED


def _evaluate_masked(v, x, t):
    """Call ``v`` on a batch; return values (NaN at nodes) and the node mask."""
    try:
        out = np.asarray(v(x, t), dtype=float)
        return np.broadcast_to(out, x.shape).copy(), np.zeros(x.shape, dtype=bool)
    except NodeProximity:
        out = np.empty_like(x)
        hit = np.zeros(x.shape, dtype=bool)
        for i in range(x.size):
            try:
                out[i] = float(v(x[i:i + 1], t[i:i + 1])[0])
            except NodeProximity:
                out[i] = np.nan
                hit[i] = True
        return out, hit


def _evaluate(v, x, t):
    """Call ``v`` on a batch; points raising NodeProximity come back as NaN."""
    return _evaluate_masked(v, x, t)[0]


def _initial_step(v, x, t, f0, direction, span, rtol, atol):
    scale = atol + rtol * np.abs(x)
    d0 = np.abs(x) / scale
    d1 = np.abs(f0) / scale
    h0 = np.where((d0 < 1e-5) | (d1 < 1e-5), 1e-6, 0.01 * d0 / np.where(d1 > 0, d1, 1.0))
    h0 = np.minimum(h0, span)
    f1 = _evaluate(v, x + direction * h0 * f0, t + direction * h0)
    d2 = np.abs(f1 - f0) / scale / h0
    dmax = np.maximum(d1, d2)
    with np.errstate(divide="ignore"):
        h1 = np.where(dmax <= 1e-15, np.maximum(1e-6, h0 * 1e-3), (0.01 / dmax) ** 0.2)
    h = np.minimum(100 * h0, h1)
    return np.where(np.isfinite(h) & (h > 0), np.minimum(h, span), 1e-6 * span)


def integrate_batch(v: Callable, x_init, t0: float, t1: float, t_eval=None,
                    rtol: float = 1e-8, atol: float = 1e-10, h_min: Optional[float] = None,
                    max_steps: int = 1_000_000):
    """Integrate many trajectories from a common start time ``t0`` to ``t1``.

    ``v`` is called as ``v(x, t)`` with equally shaped 1-D arrays and must be
    elementwise. ``t1 < t0`` integrates backwards.

    Returns
    -------
    positions : ndarray, shape (n, len(t_eval))
        Dense-output positions; NaN after a trajectory aborts.
    status : ndarray of str
        ``completed``, ``aborted_near_node`` or ``step_underflow``.
    """
    x = np.atleast_1d(np.asarray(x_init, dtype=float)).copy()
    n = x.size
    t0, t1 = float(t0), float(t1)
    if t1 == t0:
        raise ValueError("t1 must differ from t0")
    direction = 1.0 if t1 > t0 else -1.0
    span = abs(t1 - t0)
    if t_eval is None:
        t_eval = np.array([t0, t1])
    t_eval = np.asarray(t_eval, dtype=float)
    if np.any(direction * np.diff(t_eval) <= 0):
        raise ValueError("t_eval must be strictly monotone in the integration direction")
    if np.any(direction * (t_eval - t0) < 0) or np.any(direction * (t_eval - t1) > 0):
        raise ValueError("t_eval must lie within [t0, t1]")
    if h_min is None:
        h_min = 1e-12 * span
    n_eval = t_eval.size

    out = np.full((n, n_eval), np.nan)
    next_idx = np.zeros(n, dtype=int)
    at_start = t_eval == t0
    if at_start.any():
        out[:, 0] = x
        next_idx[:] = 1

    t = np.full(n, t0)
    f, hit0 = _evaluate_masked(v, x, t)
    status = np.zeros(n, dtype=int)
    status[~np.isfinite(f)] = 3
    status[hit0] = 2
    h = np.zeros(n)
    live = status == _RUNNING
    if live.any():
        h[live] = _initial_step(v, x[live], t[live], f[live], direction, span, rtol, atol)
    err_prev = np.full(n, 1e-4)
    rejected_last = np.zeros(n, dtype=bool)

    steps = 0
    while True:
        idx = np.flatnonzero(status == _RUNNING)
        if idx.size == 0:
            break
        steps += 1
        if steps > max_steps:
            status[idx] = 3
            break
        xa, ta = x[idx], t[idx]
        remaining = np.abs(t1 - ta)
        ha = np.minimum(h[idx], remaining)
        last = ha >= remaining
        hs = direction * ha
        K = np.empty((7, idx.size))
        K[0] = f[idx]
        node = np.zeros(idx.size, dtype=bool)
        for s in range(1, 6):
            dx = hs * np.dot(_A[s], K[:s])
            K[s], hit = _evaluate_masked(v, xa + dx, ta + _C[s] * hs)
            node |= hit
        x_new = xa + hs * np.dot(_B, K[:6])
        t_new = np.where(last, t1, ta + hs)
        K[6], hit = _evaluate_masked(v, x_new, t_new)
        node |= hit

        finite = np.all(np.isfinite(K), axis=0) & np.isfinite(x_new)
        scale = atol + rtol * np.maximum(np.abs(xa), np.abs(x_new))
        with np.errstate(invalid="ignore"):
            err = np.abs(hs * np.dot(_E, K)) / scale
        err = np.where(finite, err, np.inf)
        accept = err <= 1.0

        # step size update
        with np.errstate(divide="ignore"):
            safe_err = np.maximum(err, 1e-10)
            fac_acc = _SAFETY * safe_err ** -_ALPHA * err_prev[idx] ** _BETA
            fac_acc = np.clip(fac_acc, _FAC_MIN, _FAC_MAX)
            fac_acc = np.where(rejected_last[idx], np.minimum(fac_acc, 1.0), fac_acc)
            fac_rej = np.where(np.isfinite(err), np.maximum(_FAC_MIN, _SAFETY * safe_err ** -0.2), 0.25)
        h_next = ha * np.where(accept, fac_acc, np.minimum(fac_rej, 0.9))

        acc = idx[accept]
        if acc.size:
            a = accept
            _fill_dense(out, next_idx, acc, t_eval, direction, xa[a], ta[a], hs[a], K[:, a],
                        x_new[a], t_new[a], last[a])
            x[acc] = x_new[a]
            t[acc] = t_new[a]
            f[acc] = K[6, a]
            err_prev[acc] = np.maximum(err[a], 1e-4)
            status[acc[last[a]]] = 1
        rejected_last[idx] = ~accept

        rej = ~accept
        h[idx] = h_next
        under = rej & (h_next < h_min)
        if np.any(under):
            # a step that keeps shrinking because of a node aborts; anything else
            # (blow-up, stiffness) is a genuine step-size underflow
            status[idx[under & node]] = 2
            status[idx[under & ~node]] = 3

    labels = np.array([_STATUS.get(s, STEP_UNDERFLOW) for s in status], dtype=object)
    return out, labels


def _fill_dense(out, next_idx, rows, t_eval, direction, x_old, t_old, hs, K, x_new, t_new, last):
    n_eval = t_eval.size
    Q = K.T @ _P  # (m, 4)
    while True:
        j = next_idx[rows]
        pending = j < n_eval
        if not pending.any():
            return
        tj = t_eval[np.minimum(j, n_eval - 1)]
        reached = pending & (direction * (tj - t_new) <= 0)
        if not reached.any():
            return
        r = np.flatnonzero(reached)
        theta = (tj[r] - t_old[r]) / hs[r]
        powers = np.stack([theta, theta**2, theta**3, theta**4], axis=1)
        val = x_old[r] + hs[r] * np.sum(Q[r] * powers, axis=1)
        exact_end = last[r] & (tj[r] == t_new[r])
        val = np.where(exact_end, x_new[r], val)
        out[rows[r], j[r]] = val
        next_idx[rows[r]] += 1


def integrate_trajectory(v: Callable, x_init: float, t0: float, t1: float, rtol: float = 1e-8,
                         atol: float = 1e-10, t_eval=None, h_min: Optional[float] = None) -> Trajectory:
    """Integrate a single trajectory.

    A trajectory that runs into a node is returned truncated with status
    ``aborted_near_node``; pure step-size underflow raises StepUnderflow.
    """
    if t_eval is None:
        t_eval = np.array([t0, t1], dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    out, status = integrate_batch(v, [x_init], t0, t1, t_eval=t_eval, rtol=rtol, atol=atol, h_min=h_min)
    if status[0] == STEP_UNDERFLOW:
        raise StepUnderflow(f"step size underflow integrating from x={x_init}")
    pos = out[0]
    keep = np.isfinite(pos)
    return Trajectory(times=t_eval[keep], positions=pos[keep], initial_condition=float(x_init),
                      status=status[0])


@dataclass
class SwarmSpec:
    """How to seed and integrate a swarm of trajectories.

    ``sampling`` is ``equidistant_quantiles``, ``iid_from_rho`` or
    ``explicit_list`` (which uses ``positions``). ``domain`` bounds the
    tabulation of the initial density.
    """

    n_trajectories: int
    t0: float
    t1: float
    sampling: str = "equidistant_quantiles"
    seed: int = 0
    output_times: Optional[np.ndarray] = None
    domain: Optional[tuple] = None
    positions: Optional[Sequence[float]] = None
    rtol: float = 1e-8
    atol: float = 1e-10
    h_min: Optional[float] = None
    min_completed_fraction: float = 0.95

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be at least 1")
        if not (self.t1 > self.t0 >= 0):
            raise ValueError("need t1 > t0 >= 0")
        if self.sampling not in ("equidistant_quantiles", "iid_from_rho", "explicit_list"):
            raise ValueError(f"unknown sampling mode {self.sampling!r}")
        if self.sampling == "explicit_list":
            if self.positions is None or len(self.positions) != self.n_trajectories:
                raise ValueError("explicit_list needs n_trajectories positions")
        elif self.domain is None:
            raise ValueError("sampling from a density needs a domain")
        if self.output_times is None:
            self.output_times = np.array([self.t0, self.t1])
        self.output_times = np.asarray(self.output_times, dtype=float)


def sample_initial_positions(rho0: Optional[Callable], spec: SwarmSpec) -> np.ndarray:
    """Initial conditions distributed according to ``rho0`` (quantum equilibrium).

    Points where ``rho0`` vanishes are redrawn (iid) or rejected (quantiles).
    """
    if spec.sampling == "explicit_list":
        return np.asarray(spec.positions, dtype=float)
    table = sampling.TabulatedDensity(rho0, *spec.domain)
    n = spec.n_trajectories
    if spec.sampling == "equidistant_quantiles":
        pos = sampling.equidistant_quantiles(table, n)
        if np.any(np.asarray(rho0(pos)) <= 0):
            raise ValueError("quantile landed on a node of the initial density")
        return pos
    pos = sampling.iid_draws(table, n, spec.seed, sampling.TAG_INITIAL)
    start = n
    for _ in range(100):
        bad = np.asarray(rho0(pos)) <= 0
        if not bad.any():
            break
        pos[bad] = sampling.iid_draws(table, int(bad.sum()), spec.seed, sampling.TAG_INITIAL, start=start)
        start += int(bad.sum())
    return pos


@dataclass
class Swarm:
    """Trajectories sharing ``times``; ``positions[i]`` belongs to trajectory ``i``."""

    times: np.ndarray
    positions: np.ndarray
    initial_positions: np.ndarray
    status: np.ndarray = field(default=None)

    def __len__(self):
        return self.positions.shape[0]

    def __getitem__(self, i) -> Trajectory:
        pos = self.positions[i]
        keep = np.isfinite(pos)
        return Trajectory(self.times[keep], pos[keep], float(self.initial_positions[i]), self.status[i])

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def completed(self):
        return self.status == COMPLETED


def integrate_swarm(v: Callable, spec: SwarmSpec, rho0: Optional[Callable] = None) -> Swarm:
    """Sample initial conditions and integrate them all; deterministic given the seed.

    Raises
    ------
    SwarmFailure
        If fewer than ``spec.min_completed_fraction`` of the trajectories complete.
    """
    x_init = sample_initial_positions(rho0, spec)
    out, status = integrate_batch(v, x_init, spec.t0, spec.t1, t_eval=spec.output_times,
                                  rtol=spec.rtol, atol=spec.atol, h_min=spec.h_min)
    swarm = Swarm(times=spec.output_times, positions=out, initial_positions=x_init, status=status)
    frac = swarm.completed.mean()
    if frac < spec.min_completed_fraction:
        raise SwarmFailure(f"only {frac:.1%} of trajectories completed")
    return swarm


@dataclass(frozen=True)
class NonCrossingReport:
    ordered: bool
    first_violation: Optional[tuple] = None  # (time, i, j): trajectories i and j out of order


def check_non_crossing(swarm, times=None, check_times=None) -> NonCrossingReport:
    """Check that the initial ordering of positions survives at every check time.

    ``swarm`` is a :class:`Swarm` or an array of shape (n_traj, n_times) with
    ``times`` given. Aborted trajectories (NaN) are ignored.
    """
    if isinstance(swarm, Swarm):
        positions, times = swarm.positions, swarm.times
    else:
        positions = np.asarray(swarm, dtype=float)
        if times is None:
            raise ValueError("times required with a raw position array")
    times = np.asarray(times, dtype=float)
    cols = np.arange(times.size)
    if check_times is not None:
        check_times = np.asarray(check_times, dtype=float)
        cols = np.searchsorted(times, check_times)
        cols = np.clip(cols, 0, times.size - 1)
        if not np.allclose(times[cols], check_times, rtol=0, atol=1e-12 * max(1.0, np.abs(times).max())):
            raise ValueError("check_times must be a subset of the output times")
    keep = np.all(np.isfinite(positions), axis=1)
    rows = np.flatnonzero(keep)
    order = rows[np.argsort(positions[rows, 0], kind="stable")]
    sub = positions[order][:, cols]
    gaps = np.diff(sub, axis=0)
    bad = gaps <= 0
    if not bad.any():
        return NonCrossingReport(True, None)
    col = int(np.flatnonzero(bad.any(axis=0))[0])
    k = int(np.flatnonzero(bad[:, col])[0])
    return NonCrossingReport(False, (float(times[cols[col]]), int(order[k]), int(order[k + 1])))


@dataclass(frozen=True)
class TransportReport:
    distance: float
    edges: np.ndarray
    observed: np.ndarray
    expected: np.ndarray


def equal_mass_edges(table: sampling.TabulatedDensity, n_bins: int) -> np.ndarray:
    inner = table.quantile(np.arange(1, n_bins) / n_bins)
    return np.concatenate(([table.x_min], inner, [table.x_max]))


def histogram_l1(samples, table: sampling.TabulatedDensity, edges) -> tuple:
    """L1 distance between the normalized histogram of ``samples`` and the table's bin masses."""
    samples = np.asarray(samples, dtype=float)
    counts, _ = np.histogram(samples[np.isfinite(samples)], bins=edges)
    observed = counts / samples.size
    expected = table.bin_masses(edges)
    # mass falling outside the edges counts as one more bin
    outside = abs(expected.sum() - observed.sum())
    return float(np.abs(observed - expected).sum() + outside), observed, expected


def transport_density_check(v: Callable, rho: Callable, t0: float, t1: float, n: int,
                            domain0: tuple, domain1: tuple, seed: int = 0, n_bins: int = 24,
                            rtol: float = 1e-6, atol: float = 1e-8) -> TransportReport:
    """Equivariance test: transport iid samples of rho(., t0) to t1 and compare
    their histogram with rho(., t1).

    Bins hold equal probability under rho(., t1), so the expected statistical
    L1 floor is about sqrt(2 (n_bins - 1) / (pi n)).
    """
    table0 = sampling.TabulatedDensity(lambda x: rho(x, t0), *domain0)
    x0 = sampling.iid_draws(table0, n, seed, sampling.TAG_INITIAL)
    if t1 == t0:
        x1 = x0
    else:
        out, _ = integrate_batch(v, x0, t0, t1, rtol=rtol, atol=atol)
        x1 = out[:, -1]
    table1 = sampling.TabulatedDensity(lambda x: rho(x, t1), *domain1)
    edges = equal_mass_edges(table1, n_bins)
    distance, observed, expected = histogram_l1(x1, table1, edges)
    return TransportReport(distance, edges, observed, expected)
