import numpy as np
import pytest

from bohmflow import detection as de
from bohmflow import sampling
from bohmflow import superposition as sp

T = 10.0


def _rho_t(two_slit):
    return lambda x: sp.density_normalized(two_slit, x, T)


def _fringes(two_slit):
    min_rate, _ = sp.fringe_rates(two_slit, np.array([-2, -1, 0, 1]))
    _, max_rate = sp.fringe_rates(two_slit, np.array([-1, 0, 1]))
    return max_rate * T, min_rate * T, np.pi * T / two_slit.half_separation


def test_pixel_grid_geometry():
    grid = de.PixelGrid(-2.0, 2.0, 4)
    assert grid.pixel_width == 1.0
    np.testing.assert_allclose(grid.edges, [-2, -1, 0, 1, 2])
    np.testing.assert_allclose(grid.centers, [-1.5, -0.5, 0.5, 1.5])
    with pytest.raises(ValueError):
        de.PixelGrid(1.0, 1.0, 4)
    with pytest.raises(ValueError):
        de.PixelGrid(0.0, 1.0, 0)


def test_uniform_density_fills_pixels_evenly():
    grid = de.PixelGrid(0.0, 1.0, 4)
    x = de.sample_arrivals(lambda x: np.ones_like(x), 10**6, seed=3, domain=(0.0, 1.0))
    frame = de.bin_to_pixels(x, grid)
    # binomial(1e6, 1/4): sd = sqrt(1e6 * 0.1875)
    assert np.all(np.abs(frame.counts - 250_000) < 3 * np.sqrt(1e6 * 0.1875))
    assert frame.counts.sum() == 10**6


def test_zero_events_gives_empty_frame():
    grid = de.PixelGrid(0.0, 1.0, 8)
    x = de.sample_arrivals(lambda x: np.ones_like(x), 0, seed=0, domain=(0.0, 1.0))
    assert x.size == 0
    frame = de.bin_to_pixels(x, grid)
    assert frame.counts.sum() == 0 and frame.n_events == 0
    with pytest.raises(ValueError):
        de.sample_arrivals(lambda x: np.ones_like(x), -1, seed=0, domain=(0.0, 1.0))


def test_binning_edges_and_discards():
    grid = de.PixelGrid(0.0, 4.0, 4)
    frame = de.bin_to_pixels([1.0, 2.5, 2.6, 2.7, 4.0, -0.1], grid)
    # a point on an inner edge goes to the right-hand pixel; x_max is outside
    np.testing.assert_array_equal(frame.counts, [0, 1, 3, 0])
    assert frame.n_events == 4 and frame.n_discarded == 2
    empty = de.bin_to_pixels([], grid)
    np.testing.assert_array_equal(empty.counts, np.zeros(4))


def test_background_noise_mean():
    grid = de.PixelGrid(0.0, 1.0, 768)
    frame = de.add_background_noise(de.bin_to_pixels([], grid), 5.0, seed=11)
    assert abs(frame.counts.sum() - 3840) < 4 * np.sqrt(3840)
    assert frame.n_noise == frame.counts.sum()
    assert de.add_background_noise(frame, 0.0, seed=11) is frame
    with pytest.raises(ValueError):
        de.add_background_noise(frame, -1.0, seed=0)


def test_seeded_runs_are_identical_and_extend(two_slit):
    grid = de.PixelGrid(-40.0, 40.0, 256)
    a = de.exposure_series(_rho_t(two_slit), grid, [100, 1000], 1.0, seed=42)
    b = de.exposure_series(_rho_t(two_slit), grid, [100, 1000], 1.0, seed=42)
    c = de.exposure_series(_rho_t(two_slit), grid, [100, 1000], 1.0, seed=43)
    for fa, fb in zip(a, b):
        np.testing.assert_array_equal(fa.counts, fb.counts)
    assert not np.array_equal(a[1].counts, c[1].counts)
    short = de.sample_arrivals(_rho_t(two_slit), 100, 42, (-40.0, 40.0))
    long = de.sample_arrivals(_rho_t(two_slit), 1000, 42, (-40.0, 40.0))
    np.testing.assert_array_equal(long[:100], short)
    tail = de.sample_arrivals(_rho_t(two_slit), 900, 42, (-40.0, 40.0), start=100)
    np.testing.assert_array_equal(long[100:], tail)


def test_event_conservation(two_slit):
    grid = de.PixelGrid(-10.0, 10.0, 64)
    frames = de.exposure_series(_rho_t(two_slit), grid, [10, 1000, 5000], 2.0, seed=1)
    for frame, n in zip(frames, [10, 1000, 5000]):
        assert frame.counts.sum() == frame.n_events + frame.n_noise
        assert frame.n_events + frame.n_discarded == n
    with pytest.raises(ValueError):
        de.exposure_series(_rho_t(two_slit), grid, [10, 5], 0.0, seed=1)


def test_visibility_grows_with_exposure(two_slit):
    grid = de.PixelGrid(-40.0, 40.0, 256)
    maxima, minima, spacing = _fringes(two_slit)
    frames = de.exposure_series(_rho_t(two_slit), grid, [100, 10_000, 1_000_000], 1.0, seed=0)
    vis = [de.fringe_visibility(f, grid, maxima, minima, spacing / 4)[0] for f in frames]
    assert vis[0] <= vis[1] <= vis[2]
    assert vis[2] > 0.5


def test_noise_dominated_frame_is_consistent_with_flat(two_slit):
    grid = de.PixelGrid(-40.0, 40.0, 256)
    maxima, minima, spacing = _fringes(two_slit)
    (frame,) = de.exposure_series(_rho_t(two_slit), grid, [100], 10.0, seed=0)
    v, err = de.fringe_visibility(frame, grid, maxima, minima, spacing / 4)
    assert abs(v / err) < 3


def test_visibility_of_flat_frame_and_empty_windows():
    grid = de.PixelGrid(-5.0, 5.0, 100)
    flat = de.DetectionFrame(np.full(100, 7), n_events=700)
    v, err = de.fringe_visibility(flat, grid, [0.0], [2.0], 0.5)
    assert v == 0.0 and err > 0
    with pytest.raises(ValueError):
        de.fringe_visibility(flat, grid, [50.0], [2.0], 0.5)


def test_histogram_approaches_density(two_slit):
    grid = de.PixelGrid(-40.0, 40.0, 256)
    table = sampling.TabulatedDensity(_rho_t(two_slit), -40.0, 40.0)
    frames = de.exposure_series(_rho_t(two_slit), grid, [10_000, 1_000_000], 0.0, seed=0)
    l1 = [de.frame_l1(f, grid, table) for f in frames]
    assert l1[1] < l1[0]
    assert l1[1] < 0.02
