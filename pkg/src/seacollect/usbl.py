"""Acoustic short-baseline positioning model.

A surface vehicle carries a compact hydrophone array and measures, for each
submerged vehicle, the inter-element phase differences along x and y plus a
two-way-travel-time slant range.  The phase model is

    dphi_x = (2 pi f d / c) * (x_k - x) / S_k
    dphi_y = (2 pi f d / c) * (y_k - y) / S_k
    S_k    = sqrt((x_k - x)^2 + (y_k - y)^2 + z_eff^2)

with ``z_eff = z_k + eta`` coupling the surface displacement of the carrier
vehicle into the geometry.  Inversion recovers the horizontal position from a
measurement and the carrier's own position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateGeometryError

DEFAULT_FREQS = (12_000.0, 14_000.0, 16_000.0, 18_000.0)


@dataclass(frozen=True)
class UsblConfig:
    """Per-link acoustic configuration (one submerged vehicle = one carrier freq)."""

    freq: float = 12_000.0
    spacing_d: float = 0.033
    sound_speed_c: float = 1500.0
    sigma_phase: float = 0.05
    sigma_range: float = 0.3
    kappa_sea: float = 0.0  # optional sea-state noise inflation, off by default

    def __post_init__(self) -> None:
        if self.freq <= 0 or self.spacing_d <= 0 or self.sound_speed_c <= 0:
            raise ConfigError("freq, spacing_d and sound_speed_c must be positive")
        if self.sigma_phase < 0 or self.sigma_range < 0 or self.kappa_sea < 0:
            raise ConfigError("noise parameters must be non-negative")

    @property
    def phase_gain(self) -> float:
        """K = 2 pi f d / c; also the geometric bound on |dphi|."""
        return 2.0 * math.pi * self.freq * self.spacing_d / self.sound_speed_c


def default_configs(n: int, **overrides) -> tuple[UsblConfig, ...]:
    """One config per submerged vehicle, on the standard frequency ladder."""
    if not (1 <= n <= len(DEFAULT_FREQS)):
        raise ConfigError(f"supported vehicle counts are 1..{len(DEFAULT_FREQS)}, got {n}")
    base = UsblConfig(**overrides) if overrides else UsblConfig()
    return tuple(replace(base, freq=f) for f in DEFAULT_FREQS[:n])


@dataclass
class UsvState:
    """Surface vehicle: horizontal position and vertical wave displacement."""

    x: float
    y: float
    eta: float = 0.0


@dataclass
class AuvTruth:
    """Ground-truth submerged position; z_k is depth below the mean surface."""

    x_k: float
    y_k: float
    z_k: float

    def __post_init__(self) -> None:
        if not (self.z_k > 0):
            raise ConfigError(f"depth must be positive, got {self.z_k}")


@dataclass(frozen=True)
class UsblMeasurement:
    dphi_x: float
    dphi_y: float
    slant: float


@dataclass
class PositionEstimate:
    x_hat: float
    y_hat: float
    error: float = math.nan
    phase_in_bound: bool = True


def true_phases(usv: UsvState, auv: AuvTruth, cfg: UsblConfig) -> tuple[float, float, float]:
    """Noiseless (dphi_x, dphi_y, slant) for one link."""
    ux = auv.x_k - usv.x
    uy = auv.y_k - usv.y
    z_eff = auv.z_k + usv.eta
    slant = math.sqrt(ux * ux + uy * uy + z_eff * z_eff)
    if slant <= 0.0:
        raise DegenerateGeometryError("coincident surface and submerged positions")
    k = cfg.phase_gain
    return k * ux / slant, k * uy / slant, slant


def measure(usv: UsvState, auv: AuvTruth, cfg: UsblConfig,
            rng: np.random.Generator, wave_speed: float = 0.0) -> UsblMeasurement:
    """Noisy measurement; deterministic given the generator state.

    Draw order is fixed (phase x, phase y, range).  ``wave_speed`` only
    matters when ``cfg.kappa_sea`` is non-zero, inflating the phase noise by
    ``1 + kappa_sea * wave_speed``.
    """
    px, py, slant = true_phases(usv, auv, cfg)
    sigma = cfg.sigma_phase * (1.0 + cfg.kappa_sea * abs(wave_speed))
    if sigma > 0.0:
        px += rng.normal(0.0, sigma)
        py += rng.normal(0.0, sigma)
    if cfg.sigma_range > 0.0:
        slant += rng.normal(0.0, cfg.sigma_range)
    return UsblMeasurement(dphi_x=px, dphi_y=py, slant=max(slant, 1e-9))


def localize(meas: UsblMeasurement, usv: UsvState, cfg: UsblConfig) -> PositionEstimate:
    """Invert a measurement to a horizontal position estimate.

    Phases beyond the geometric bound K cannot come from any real geometry;
    the estimate is still returned but flagged inconsistent.
    """
    if meas.slant <= 0.0:
        raise DegenerateGeometryError("non-positive slant range")
    k = cfg.phase_gain
    scale = meas.slant / k
    bound = k * (1.0 + 1e-12)
    in_bound = abs(meas.dphi_x) <= bound and abs(meas.dphi_y) <= bound
    return PositionEstimate(
        x_hat=usv.x + meas.dphi_x * scale,
        y_hat=usv.y + meas.dphi_y * scale,
        phase_in_bound=in_bound,
    )


def positioning_error(est: PositionEstimate, truth: AuvTruth) -> float:
    """Horizontal Euclidean distance between estimate and truth."""
    return math.hypot(est.x_hat - truth.x_k, est.y_hat - truth.y_k)
