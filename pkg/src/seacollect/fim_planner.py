"""Information-driven waypoint planning for the surface vehicle.

The position information carried by the phase-difference measurements is
summarized by the 2x2 information matrix

    J = sum_k (K_k^2 / sigma_k^2) * M_k,     K_k = 2 pi f_k d / c,

where ``M_k = (S^4 I - (2 S^2 - p^2) u u^T) / S^6`` follows from the analytic
Jacobian of the phase model with respect to the surface position (``u`` the
horizontal offset to vehicle k, ``p = |u|``, ``S`` the slant range).  Its
determinant is the planning objective: larger determinant, tighter accuracy
bound.  Waypoints are found with a seeded rand/1/bin differential-evolution
search over the mission area; an exhaustive grid search is provided as an
independent cross-check.

``det_symmetric`` evaluates the equal-slant / equal-depth closed form
(angular spread enters only through ``chi = sum sin^2(alpha_ij)``), kept as a
reference formula for the symmetric configuration studies.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateGeometryError
from .usbl import AuvTruth, UsblConfig, UsvState

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class FimMatrix:
    """Symmetric 2x2 information matrix and its determinant."""

    j11: float
    j12: float
    j22: float
    det: float

    @classmethod
    def from_entries(cls, j11: float, j12: float, j22: float) -> "FimMatrix":
        return cls(j11=j11, j12=j12, j22=j22, det=j11 * j22 - j12 * j12)

    def as_array(self) -> np.ndarray:
        return np.array([[self.j11, self.j12], [self.j12, self.j22]])


@dataclass(frozen=True)
class GeometryTerms:
    """Per-vehicle geometry factors seen from the surface position.

    ``weight_a`` is the pairwise coupling weight
    ``A_k = (p_k^4 - 2 S_k^2 p_k^2) / (2 S_k^6)``.
    """

    slant: np.ndarray
    elevation: np.ndarray
    azimuth: np.ndarray
    radius: np.ndarray
    weight_a: np.ndarray


@dataclass(frozen=True)
class SymmetricCase:
    """Equal-slant, equal-depth configuration of m vehicles."""

    s0: float
    gamma0: float
    m: int
    chi: float

    def __post_init__(self) -> None:
        if not (self.s0 > 0):
            raise ConfigError(f"common slant must be positive, got {self.s0}")
        if self.m < 1:
            raise ConfigError("at least one vehicle required")
        max_chi = self.m * (self.m - 1) / 2.0
        if not (-1e-12 <= self.chi <= max_chi + 1e-12):
            raise ConfigError(f"chi={self.chi} outside [0, {max_chi}]")


@dataclass(frozen=True)
class PlannerConfig:
    """Differential-evolution settings for the waypoint search."""

    bounds: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 200.0), (0.0, 200.0))
    pop_size: int = 30
    nit: int = 24
    f_weight: tuple[float, float] = (0.5, 1.0)  # dithered per generation
    cr: float = 0.9
    seed: int = 0
    standoff_r_min: float = 0.0

    def __post_init__(self) -> None:
        if self.pop_size < 8:
            raise ConfigError(f"population must be >= 8, got {self.pop_size}")
        if self.nit < 1:
            raise ConfigError(f"iteration count must be >= 1, got {self.nit}")
        if not (0.0 < self.cr <= 1.0):
            raise ConfigError(f"crossover rate must lie in (0, 1], got {self.cr}")
        lo, hi = self.f_weight
        if not (0.0 < lo <= hi < 2.0):
            raise ConfigError(f"differential weight range must lie in (0, 2), got {self.f_weight}")
        (xlo, xhi), (ylo, yhi) = self.bounds
        if not (xlo < xhi and ylo < yhi):
            raise ConfigError(f"degenerate search bounds {self.bounds}")
        if self.standoff_r_min < 0:
            raise ConfigError("standoff radius must be non-negative")


def _as_configs(cfg: UsblConfig | Sequence[UsblConfig], n: int) -> list[UsblConfig]:
    if isinstance(cfg, UsblConfig):
        return [cfg] * n
    cfgs = list(cfg)
    if len(cfgs) != n:
        raise ConfigError(f"{len(cfgs)} link configs for {n} vehicles")
    return cfgs


def _fim_entries(xs: np.ndarray, ys: np.ndarray, eta: float,
                 auvs: Sequence[AuvTruth],
                 cfgs: Sequence[UsblConfig]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Accumulate (j11, j12, j22) over vehicles, broadcasting over positions."""
    j11 = np.zeros_like(xs, dtype=np.float64)
    j12 = np.zeros_like(j11)
    j22 = np.zeros_like(j11)
    for auv, cfg in zip(auvs, cfgs):
        ux = auv.x_k - xs
        uy = auv.y_k - ys
        z = auv.z_k + eta
        p2 = ux * ux + uy * uy
        s2 = p2 + z * z
        w = (cfg.phase_gain / cfg.sigma_phase) ** 2
        c = (2.0 * s2 - p2) / (s2 * s2 * s2)
        j11 += w * (1.0 / s2 - c * ux * ux)
        j22 += w * (1.0 / s2 - c * uy * uy)
        j12 += w * (-c * ux * uy)
    return j11, j12, j22


def fim(usv: UsvState, auvs: Sequence[AuvTruth],
        cfg: UsblConfig | Sequence[UsblConfig]) -> FimMatrix:
    """Assemble the information matrix for one geometry."""
    if not auvs:
        raise ConfigError("at least one submerged vehicle required")
    cfgs = _as_configs(cfg, len(auvs))
    for k, auv in enumerate(auvs):
        ux = auv.x_k - usv.x
        uy = auv.y_k - usv.y
        z = auv.z_k + usv.eta
        if ux * ux + uy * uy + z * z <= 0.0:
            raise DegenerateGeometryError(f"vehicle {k} coincides with the surface position")
    j11, j12, j22 = _fim_entries(np.float64(usv.x), np.float64(usv.y), usv.eta, auvs, cfgs)
    return FimMatrix.from_entries(float(j11), float(j12), float(j22))


def det_fim(usv: UsvState, auvs: Sequence[AuvTruth],
            cfg: UsblConfig | Sequence[UsblConfig]) -> float:
    return fim(usv, auvs, cfg).det


def det_fim_batch(xy: np.ndarray, auvs: Sequence[AuvTruth],
                  cfg: UsblConfig | Sequence[UsblConfig], eta: float = 0.0) -> np.ndarray:
    """Vectorized determinant over an (n, 2) array of candidate positions."""
    xy = np.asarray(xy, dtype=np.float64)
    cfgs = _as_configs(cfg, len(auvs))
    j11, j12, j22 = _fim_entries(xy[..., 0], xy[..., 1], eta, auvs, cfgs)
    return j11 * j22 - j12 * j12


def phase_jacobian(usv: UsvState, auv: AuvTruth, cfg: UsblConfig) -> np.ndarray:
    """Analytic 2x2 Jacobian of the phase pair w.r.t. the surface (x, y)."""
    ux = auv.x_k - usv.x
    uy = auv.y_k - usv.y
    z = auv.z_k + usv.eta
    s2 = ux * ux + uy * uy + z * z
    if s2 <= 0.0:
        raise DegenerateGeometryError("coincident surface and submerged positions")
    s3 = s2 * math.sqrt(s2)
    k = cfg.phase_gain
    return (k / s3) * np.array(
        [[ux * ux - s2, ux * uy], [ux * uy, uy * uy - s2]]
    )


def fix_rms_error(usv: UsvState, auvs: Sequence[AuvTruth],
                  cfg: UsblConfig | Sequence[UsblConfig]) -> float:
    """RMS positioning error (m) of the joint weighted least-squares fix.

    The fix combines all phase pairs; its linearized covariance is the
    inverse of the information matrix, so the root-sum-variance is
    ``sqrt(trace(J^-1))``.
    """
    j = fim(usv, auvs, cfg)
    if j.det <= 0.0:
        return math.inf
    return math.sqrt((j.j11 + j.j22) / j.det)


def geometry_terms(usv: UsvState, auvs: Sequence[AuvTruth]) -> GeometryTerms:
    """Slant, elevation, azimuth, horizontal radius and pair weight per vehicle."""
    ux = np.array([a.x_k - usv.x for a in auvs])
    uy = np.array([a.y_k - usv.y for a in auvs])
    z = np.array([a.z_k + usv.eta for a in auvs])
    p2 = ux * ux + uy * uy
    slant = np.sqrt(p2 + z * z)
    weight = (p2 * p2 - 2.0 * slant**2 * p2) / (2.0 * slant**6)
    return GeometryTerms(
        slant=slant,
        elevation=np.arcsin(np.clip(z / slant, -1.0, 1.0)),
        azimuth=np.arctan2(uy, ux),
        radius=np.sqrt(p2),
        weight_a=weight,
    )


def det_symmetric(case: SymmetricCase, cfg: UsblConfig) -> float:
    """Closed-form determinant for the equal-slant, equal-depth configuration."""
    const = (cfg.phase_gain / cfg.sigma_phase) ** 2  # 4 pi^2 f^2 d^2 / (sigma^2 c^2)
    s = math.sin(case.gamma0)
    s4 = case.s0**4
    return const * const * (3.0 * case.m * s * s / s4 + (s**4 + 1.0) ** 2 / s4 * case.chi)


def optimal_radius(depth_z: float, m: int, chi: float, cfg: UsblConfig,
                   r_min: float, r_max: float, tol: float = 1e-3) -> float:
    """Horizontal standoff maximizing the symmetric closed form on [r_min, r_max].

    Golden-section search; endpoints are compared explicitly so boundary
    optima are returned exactly.
    """
    if not (0.0 <= r_min < r_max):
        raise ConfigError(f"need 0 <= r_min < r_max, got [{r_min}, {r_max}]")

    def objective(r: float) -> float:
        s0 = math.sqrt(r * r + depth_z * depth_z)
        gamma0 = math.asin(depth_z / s0)
        return det_symmetric(SymmetricCase(s0=s0, gamma0=gamma0, m=m, chi=chi), cfg)

    a, b = r_min, r_max
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = objective(d)
    interior = 0.5 * (a + b)
    candidates = [r_min, interior, r_max]
    values = [objective(r) for r in candidates]
    best = max(range(3), key=lambda i: (values[i], -candidates[i]))
    return candidates[best]


def _objective_batch(xy: np.ndarray, auvs: Sequence[AuvTruth],
                     cfgs: Sequence[UsblConfig], standoff: float) -> np.ndarray:
    det = det_fim_batch(xy, auvs, cfgs)
    if standoff > 0.0:
        for auv in auvs:
            d = np.hypot(xy[..., 0] - auv.x_k, xy[..., 1] - auv.y_k)
            det = np.where(d < standoff, -np.inf, det)
    return det


def plan_waypoint(auvs: Sequence[AuvTruth], cfg: UsblConfig | Sequence[UsblConfig],
                  plan: PlannerConfig,
                  rng: np.random.Generator | None = None) -> tuple[float, float, float]:
    """Best surface position found by differential evolution.

    rand/1/bin strategy: per generation one dithered differential weight,
    binomial crossover at rate ``cr``, greedy one-to-one selection.  Fully
    deterministic for a given generator state (``plan.seed`` when none is
    passed).  Returns ``(x, y, det)``.
    """
    if not auvs:
        raise ConfigError("cannot plan without submerged vehicles")
    if len(auvs) == 1:
        warnings.warn("planning against a single vehicle is degenerate: the "
                      "optimum sits directly above it", stacklevel=2)
    cfgs = _as_configs(cfg, len(auvs))
    if rng is None:
        rng = np.random.default_rng(plan.seed)
    (xlo, xhi), (ylo, yhi) = plan.bounds
    lo = np.array([xlo, ylo])
    hi = np.array([xhi, yhi])
    npop = plan.pop_size

    pop = lo + rng.uniform(size=(npop, 2)) * (hi - lo)
    fit = _objective_batch(pop, auvs, cfgs, plan.standoff_r_min)

    f_lo, f_hi = plan.f_weight
    rows = np.arange(npop)
    base = np.tile(rows, (npop, 1))
    for _ in range(plan.nit):
        f = rng.uniform(f_lo, f_hi)
        r1, r2, r3 = _pick_three(rng, base, rows)
        mutants = pop[r1] + f * (pop[r2] - pop[r3])
        cross = rng.uniform(size=(npop, 2)) < plan.cr
        cross[rows, rng.integers(0, 2, size=npop)] = True
        trials = np.where(cross, mutants, pop)
        np.clip(trials, lo, hi, out=trials)
        trial_fit = _objective_batch(trials, auvs, cfgs, plan.standoff_r_min)
        better = trial_fit >= fit
        pop[better] = trials[better]
        fit[better] = trial_fit[better]

    best = int(np.argmax(fit))  # first index wins ties
    return float(pop[best, 0]), float(pop[best, 1]), float(fit[best])


def _pick_three(rng: np.random.Generator, base: np.ndarray,
                rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per row, three distinct partner indices none equal to the row itself."""
    perm = rng.permuted(base, axis=1)[:, :4]
    picks = perm[:, :3]
    self_hit = picks == rows[:, None]
    picks = np.where(self_hit, perm[:, 3:4], picks)
    return picks[:, 0], picks[:, 1], picks[:, 2]


def grid_search_waypoint(auvs: Sequence[AuvTruth], cfg: UsblConfig | Sequence[UsblConfig],
                         bounds: tuple[tuple[float, float], tuple[float, float]],
                         step_m: float = 1.0) -> tuple[float, float, float]:
    """Exhaustive lattice maximum of the determinant; the planner's oracle."""
    (xlo, xhi), (ylo, yhi) = bounds
    xs = np.arange(xlo, xhi + step_m / 2, step_m)
    ys = np.arange(ylo, yhi + step_m / 2, step_m)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    xy = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    det = det_fim_batch(xy, auvs, cfg)
    best = int(np.argmax(det))
    return float(xy[best, 0]), float(xy[best, 1]), float(det[best])
