"""Extreme sea condition simulation.

Two ingredients:

* a 2-D shallow-water tidal field (free-surface elevation ``eta`` plus depth
  velocities ``u``, ``v``) advanced with an explicit finite-difference scheme
  on a regular grid, driven by a sinusoidal elevation at the ``x = 0`` edge
  and closed by reflective walls elsewhere;
* an analytic turbulence model made of Gaussian-core vortices, each defined
  by a center, an intensity ``gamma`` (circulation, m^2/s) and a core radius
  ``delta`` (m).

``sample_sea`` combines both into one disturbance sample at an arbitrary
continuous coordinate inside the grid extent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, SimulationFault

GRAVITY = 9.81


def cfl_limit(dx: float, dy: float, depth_h: float, g: float = GRAVITY) -> float:
    """Largest stable solver substep for the explicit scheme."""
    return min(dx, dy) / math.sqrt(2.0 * g * depth_h)


@dataclass
class WaveGrid:
    """Discretized tidal-wave state.

    ``eta``, ``u`` and ``v`` share one shape ``(nx, ny)``; index ``[i, j]``
    is the node at ``(i * dx, j * dy)``.  ``u[i, j]`` carries the transport
    through the east face of cell ``i`` so the reflective east wall is
    simply ``u[-1, :] = 0`` (and likewise ``v[:, -1] = 0`` in y).
    """

    eta: np.ndarray
    u: np.ndarray
    v: np.ndarray
    depth_h: float = 120.0
    dx: float = 4.0
    dy: float = 4.0
    dt_sub: float = 0.05
    g: float = GRAVITY
    t: float = 0.0
    step_count: int = field(default=0)

    def __post_init__(self) -> None:
        self.eta = np.asarray(self.eta, dtype=np.float64)
        self.u = np.asarray(self.u, dtype=np.float64)
        self.v = np.asarray(self.v, dtype=np.float64)
        if self.eta.ndim != 2 or min(self.eta.shape) < 3:
            raise ConfigError(f"wave grid must be 2-D with >=3 nodes per axis, got {self.eta.shape}")
        if not (self.eta.shape == self.u.shape == self.v.shape):
            raise ConfigError("eta, u, v grids must share one shape")
        if self.depth_h <= 0 or self.dx <= 0 or self.dy <= 0 or self.dt_sub <= 0:
            raise ConfigError("depth_h, dx, dy, dt_sub must all be positive")
        limit = cfl_limit(self.dx, self.dy, self.depth_h, self.g)
        if self.dt_sub > limit * (1.0 + 1e-12):
            raise ConfigError(
                f"dt_sub={self.dt_sub} violates the CFL bound {limit:.6g} s "
                f"for dx={self.dx}, dy={self.dy}, depth={self.depth_h}"
            )

    @property
    def extent(self) -> tuple[float, float]:
        """(x_max, y_max) covered by the node lattice."""
        nx, ny = self.eta.shape
        return ((nx - 1) * self.dx, (ny - 1) * self.dy)


def make_grid(
    extent_x: float,
    extent_y: float,
    dx: float = 4.0,
    dy: float = 4.0,
    depth_h: float = 120.0,
    dt_sub: float = 0.05,
    g: float = GRAVITY,
) -> WaveGrid:
    """Quiescent grid whose node lattice covers [0, extent_x] x [0, extent_y]."""
    nx = int(round(extent_x / dx)) + 1
    ny = int(round(extent_y / dy)) + 1
    zeros = np.zeros((nx, ny), dtype=np.float64)
    return WaveGrid(eta=zeros.copy(), u=zeros.copy(), v=zeros.copy(),
                    depth_h=depth_h, dx=dx, dy=dy, dt_sub=dt_sub, g=g)


def step_wave(grid: WaveGrid, forcing_amplitude: float = 0.0,
              forcing_omega: float = 0.0) -> WaveGrid:
    """Advance the field by one solver substep.

    Momentum picks up the elevation gradient first, then continuity moves
    elevation with the freshly updated transports (the standard
    forward-backward sequencing; updating both sides from the old time level
    is linearly unstable for gravity waves).  With zero forcing every wall is
    reflective; with forcing the ``x = 0`` edge elevation is pinned to
    ``amplitude * sin(omega * t)``.
    """
    eta, u, v = grid.eta, grid.u, grid.v
    g_dt = grid.g * grid.dt_sub

    u[:-1, :] -= g_dt * (eta[1:, :] - eta[:-1, :]) / grid.dx
    u[-1, :] = 0.0
    v[:, :-1] -= g_dt * (eta[:, 1:] - eta[:, :-1]) / grid.dy
    v[:, -1] = 0.0

    # Flux divergence with zero flux through the west/south walls.
    uh = u * grid.depth_h
    vh = v * grid.depth_h
    div = np.empty_like(eta)
    div[0, :] = uh[0, :] / grid.dx
    div[1:, :] = (uh[1:, :] - uh[:-1, :]) / grid.dx
    div[:, 0] += vh[:, 0] / grid.dy
    div[:, 1:] += (vh[:, 1:] - vh[:, :-1]) / grid.dy
    eta -= grid.dt_sub * div

    grid.t += grid.dt_sub
    grid.step_count += 1
    if forcing_amplitude != 0.0:
        eta[0, :] = forcing_amplitude * math.sin(forcing_omega * grid.t)

    if not np.isfinite(eta).all():
        raise SimulationFault(f"wave solver blew up at substep {grid.step_count}")
    return grid


def advance_to(grid: WaveGrid, target_time: float, forcing_amplitude: float = 0.0,
               forcing_omega: float = 0.0) -> WaveGrid:
    """Substep until ``grid.t >= target_time``.

    Runs ``ceil((target_time - t) / dt_sub)`` substeps; a target at or before
    the current time is a no-op.
    """
    if target_time < grid.t - 1e-9:
        raise DomainError(f"target_time {target_time} lies before grid.t {grid.t}")
    n = max(0, math.ceil((target_time - grid.t) / grid.dt_sub - 1e-12))
    for _ in range(n):
        step_wave(grid, forcing_amplitude, forcing_omega)
    return grid


@dataclass(frozen=True)
class VortexSpec:
    """One Gaussian-core vortex: center, circulation gamma, core radius delta."""

    x0: float
    y0: float
    gamma: float
    delta: float

    def __post_init__(self) -> None:
        if not (self.delta > 0):
            raise ConfigError(f"vortex core radius must be positive, got {self.delta}")
        if not all(math.isfinite(f) for f in (self.x0, self.y0, self.gamma)):
            raise ConfigError("vortex parameters must be finite")


def vortex_velocity(vortices: list[VortexSpec] | tuple[VortexSpec, ...],
                    x: float, y: float) -> tuple[float, float, float]:
    """Summed turbulent velocity (vx, vy) and vorticity at one point.

    Each vortex contributes the azimuthal speed
    ``gamma / (2 pi r) * (1 - exp(-r^2 / delta^2))`` and the vorticity
    ``gamma / (pi delta^2) * exp(-r^2 / delta^2)``; the velocity limit at the
    center is zero (removable singularity).
    """
    vx = 0.0
    vy = 0.0
    vort = 0.0
    for vtx in vortices:
        rx = x - vtx.x0
        ry = y - vtx.y0
        r2 = rx * rx + ry * ry
        d2 = vtx.delta * vtx.delta
        vort += vtx.gamma / (math.pi * d2) * math.exp(-r2 / d2)
        if r2 > 0.0:
            factor = vtx.gamma * (1.0 - math.exp(-r2 / d2)) / (2.0 * math.pi * r2)
            vx += -ry * factor
            vy += rx * factor
    return vx, vy, vort


@dataclass(frozen=True)
class SeaSample:
    """Disturbance sample at one continuous coordinate."""

    eta: float
    wave_vel: tuple[float, float]
    turb_vel: tuple[float, float]
    vorticity: float


def _bilinear(a: np.ndarray, fx: float, fy: float, ix: int, iy: int) -> float:
    return float(
        a[ix, iy] * (1 - fx) * (1 - fy)
        + a[ix + 1, iy] * fx * (1 - fy)
        + a[ix, iy + 1] * (1 - fx) * fy
        + a[ix + 1, iy + 1] * fx * fy
    )


def sample_sea(grid: WaveGrid, vortices: list[VortexSpec] | tuple[VortexSpec, ...],
               x: float, y: float) -> SeaSample:
    """Bilinear wave-field sample plus analytic vortex sum at (x, y)."""
    ex, ey = grid.extent
    if not (0.0 <= x <= ex and 0.0 <= y <= ey):
        raise DomainError(f"({x}, {y}) outside grid extent [0, {ex}] x [0, {ey}]")
    nx, ny = grid.eta.shape
    ix = min(int(x / grid.dx), nx - 2)
    iy = min(int(y / grid.dy), ny - 2)
    fx = x / grid.dx - ix
    fy = y / grid.dy - iy
    eta = _bilinear(grid.eta, fx, fy, ix, iy)
    wu = _bilinear(grid.u, fx, fy, ix, iy)
    wv = _bilinear(grid.v, fx, fy, ix, iy)
    tx, ty, vort = vortex_velocity(vortices, x, y)
    return SeaSample(eta=eta, wave_vel=(wu, wv), turb_vel=(tx, ty), vorticity=vort)


def default_vortices(area_x: float, area_y: float, rng: np.random.Generator,
                     gamma_range: tuple[float, float] = (30.0, 60.0),
                     delta_range: tuple[float, float] = (10.0, 20.0),
                     quadrant: float = 100.0) -> list[VortexSpec]:
    """One randomly placed vortex per ``quadrant x quadrant`` block of the area."""
    nqx = max(1, math.ceil(area_x / quadrant))
    nqy = max(1, math.ceil(area_y / quadrant))
    out: list[VortexSpec] = []
    for qi in range(nqx):
        for qj in range(nqy):
            x0 = min((qi + rng.uniform(0.0, 1.0)) * quadrant, area_x)
            y0 = min((qj + rng.uniform(0.0, 1.0)) * quadrant, area_y)
            gamma = rng.uniform(*gamma_range)
            delta = rng.uniform(*delta_range)
            out.append(VortexSpec(x0=x0, y0=y0, gamma=gamma, delta=delta))
    return out
