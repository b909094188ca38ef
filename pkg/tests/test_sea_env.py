import math

import numpy as np
import pytest

from seacollect import (
    ConfigError,
    DomainError,
    VortexSpec,
    advance_to,
    cfl_limit,
    make_grid,
    sample_sea,
    step_wave,
    vortex_velocity,
)

TIDAL_OMEGA = 2.0 * math.pi / 43200.0


def gaussian_bump(grid, cx, cy, sigma, amp=1.0):
    nx, ny = grid.eta.shape
    x = np.arange(nx) * grid.dx
    y = np.arange(ny) * grid.dy
    gx, gy = np.meshgrid(x, y, indexing="ij")
    grid.eta[:] = amp * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2 * sigma**2))


def test_zero_state_is_fixed_point():
    grid = make_grid(200, 200)
    for _ in range(500):
        step_wave(grid, forcing_amplitude=0.0)
    assert np.all(grid.eta == 0.0)
    assert np.all(grid.u == 0.0)
    assert np.all(grid.v == 0.0)


def test_operating_point_accepted_and_runs():
    # amplitude 5 m, 12-hour angular frequency, 4 m spacing, 120 m depth
    grid = make_grid(200, 200, dx=4.0, depth_h=120.0, dt_sub=0.05)
    advance_to(grid, 10.0, forcing_amplitude=5.0, forcing_omega=TIDAL_OMEGA)
    assert np.isfinite(grid.eta).all()
    assert abs(grid.eta[0, 5] - 5.0 * math.sin(TIDAL_OMEGA * grid.t)) < 1e-12


def test_cfl_violation_rejected_at_construction():
    limit = cfl_limit(4.0, 4.0, 120.0)
    with pytest.raises(ConfigError):
        make_grid(200, 200, dt_sub=limit * 1.01)
    make_grid(200, 200, dt_sub=limit * 0.99)  # just inside the bound


def test_grid_shape_validation():
    with pytest.raises(ConfigError):
        make_grid(4, 4, dx=4.0, dy=4.0)  # would be 2x2 before the floor of 3
    z = np.zeros((5, 5))
    from seacollect import WaveGrid

    with pytest.raises(ConfigError):
        WaveGrid(eta=z, u=np.zeros((5, 4)), v=z.copy())


def test_pulse_front_speed_matches_shallow_water_speed():
    grid = make_grid(800, 800)
    gaussian_bump(grid, 400.0, 400.0, 20.0)
    ny = grid.eta.shape[1]
    times, radii = [], []
    for target in (2.0, 4.0, 6.0, 8.0):
        advance_to(grid, target)
        profile = np.abs(grid.eta[:, ny // 2])
        front = np.nonzero(profile > 0.05 * profile.max())[0].max() * grid.dx - 400.0
        times.append(grid.t)
        radii.append(front)
    speed = np.polyfit(times, radii, 1)[0]
    expected = math.sqrt(9.81 * 120.0)
    assert abs(speed - expected) / expected < 0.05


def test_mass_conserved_unforced_reflective():
    grid = make_grid(200, 200)
    gaussian_bump(grid, 100.0, 100.0, 30.0, amp=2.0)
    total0 = grid.eta.sum()
    for _ in range(1000):
        step_wave(grid)
    assert abs(grid.eta.sum() - total0) / abs(total0) < 1e-6


def test_advance_to_substep_counts():
    grid = make_grid(200, 200, dt_sub=0.05)
    advance_to(grid, grid.t)
    assert grid.step_count == 0
    advance_to(grid, 10.0)
    assert grid.step_count == 200
    advance_to(grid, 20.0)
    assert grid.step_count == 400


def test_advance_preserves_zero_fixed_point():
    grid = make_grid(200, 200)
    advance_to(grid, 1000.0)
    assert np.all(grid.eta == 0.0) and np.all(grid.u == 0.0) and np.all(grid.v == 0.0)


def test_determinism_bit_identical():
    def run():
        grid = make_grid(200, 200)
        gaussian_bump(grid, 80.0, 120.0, 25.0)
        for _ in range(300):
            step_wave(grid, 5.0, TIDAL_OMEGA)
        return grid

    a, b = run(), run()
    assert np.array_equal(a.eta, b.eta)
    assert np.array_equal(a.u, b.u)
    assert np.array_equal(a.v, b.v)


def test_vortex_center_values():
    vtx = VortexSpec(30.0, 40.0, gamma=45.0, delta=15.0)
    vx, vy, vort = vortex_velocity([vtx], 30.0, 40.0)
    assert vx == 0.0 and vy == 0.0
    assert vort == pytest.approx(45.0 / (math.pi * 15.0**2), rel=0, abs=0)


def test_vortex_far_field_speed():
    vtx = VortexSpec(0.0, 0.0, gamma=45.0, delta=15.0)
    r = 10 * 15.0
    vx, vy, _ = vortex_velocity([vtx], r, 0.0)
    speed = math.hypot(vx, vy)
    assert abs(speed - 45.0 / (2 * math.pi * r)) / (45.0 / (2 * math.pi * r)) < 1e-3


def test_opposite_vortices_cancel():
    pair = [VortexSpec(10.0, 20.0, 33.0, 12.0), VortexSpec(10.0, 20.0, -33.0, 12.0)]
    rng = np.random.default_rng(7)
    for _ in range(50):
        x, y = rng.uniform(-100, 100, 2)
        vx, vy, vort = vortex_velocity(pair, x, y)
        assert vx == 0.0 and vy == 0.0 and vort == 0.0


def test_circulation_closes_on_gamma():
    vtx = VortexSpec(0.0, 0.0, gamma=45.0, delta=15.0)
    radius = 20 * vtx.delta
    n = 4096
    theta = np.linspace(0.0, 2 * math.pi, n, endpoint=False)
    circ = 0.0
    for th in theta:
        vx, vy, _ = vortex_velocity([vtx], radius * math.cos(th), radius * math.sin(th))
        circ += (-math.sin(th) * vx + math.cos(th) * vy) * radius * (2 * math.pi / n)
    assert abs(circ - vtx.gamma) / vtx.gamma < 0.01


def test_vorticity_integral_closes_on_gamma():
    vtx = VortexSpec(0.0, 0.0, gamma=45.0, delta=15.0)
    h = vtx.delta / 10.0
    lim = 10 * vtx.delta
    xs = np.arange(-lim, lim + h / 2, h)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    r2 = gx**2 + gy**2
    vort = vtx.gamma / (math.pi * vtx.delta**2) * np.exp(-r2 / vtx.delta**2)
    total = vort[r2 <= lim**2].sum() * h * h
    assert abs(total - vtx.gamma) / vtx.gamma < 0.01


def test_rotation_symmetry_of_vortex_velocity():
    vtx = VortexSpec(50.0, 60.0, gamma=38.0, delta=14.0)
    for r in (5.0, 20.0, 90.0):
        vx1, vy1, _ = vortex_velocity([vtx], 50.0 + r, 60.0)
        vx2, vy2, _ = vortex_velocity([vtx], 50.0, 60.0 + r)
        assert math.hypot(vx1, vy1) == pytest.approx(math.hypot(vx2, vy2), rel=1e-12)
        # each perpendicular to its radius vector
        assert abs(vx1 * 1.0 + vy1 * 0.0) < 1e-15 or abs(vx1) < 1e-12
        assert vx1 * r == pytest.approx(0.0, abs=1e-9)
        assert vy2 * r == pytest.approx(0.0, abs=1e-9)


def test_sample_sea_interpolation_and_domain():
    grid = make_grid(200, 200)
    gaussian_bump(grid, 100.0, 100.0, 30.0)
    vortices = [VortexSpec(60.0, 60.0, 45.0, 15.0)]
    s = sample_sea(grid, vortices, 100.0, 100.0)
    assert s.eta == pytest.approx(1.0, rel=1e-12)  # node value at the bump peak
    mid = sample_sea(grid, vortices, 102.0, 100.0)  # midpoint between nodes
    assert mid.eta == pytest.approx(0.5 * (grid.eta[25, 25] + grid.eta[26, 25]), rel=1e-12)
    with pytest.raises(DomainError):
        sample_sea(grid, vortices, 200.5, 100.0)
    with pytest.raises(DomainError):
        sample_sea(grid, vortices, 100.0, -0.1)


def test_turbulence_far_field_bound():
    vortices = [VortexSpec(50.0, 50.0, 45.0, 15.0), VortexSpec(150.0, 150.0, 60.0, 20.0)]
    grid = make_grid(200, 200)
    rng = np.random.default_rng(3)
    for _ in range(200):
        x, y = rng.uniform(0, 200, 2)
        s = sample_sea(grid, vortices, x, y)
        bound = sum(
            abs(v.gamma) / (2 * math.pi * max(math.hypot(x - v.x0, y - v.y0), 1e-9))
            for v in vortices
        )
        assert math.hypot(*s.turb_vel) <= bound + 1e-12
