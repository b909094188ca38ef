"""Underwater data-collection mission environment.

A team of 1-4 submerged vehicles services seabed sensor nodes inside a
rectangular area while a surface vehicle shadows them for acoustic
positioning.  Each mission step (default 10 s):

* every agent's normalized action ``[v_norm, theta_norm]`` maps linearly to a
  speed in ``[v_min, v_max]`` and an absolute heading in ``[-pi, pi]``;
* the border flag is raised when the action-only predicted position exits the
  area; the realized displacement adds the local turbulent velocity plus an
  attenuated share of the surface wave velocity, and is clamped to the area;
* node buffers fill and latch an overflow flag at capacity; the assigned
  target node drains at a sonar link-budget rate while the agent is inside
  communication range, and a fully drained node counts as serviced;
* the surface vehicle re-plans an information-optimal waypoint and moves
  toward it at bounded speed (or holds a fixed position), then measures and
  localizes every agent, logging positioning errors;
* each agent receives the shaped reward

      R = -0.6 d_target - 0.05 N_DO + 12 I_TL - 0.085 E_k
          - sum_{j != k, d_kj < 12} 6 (12 - d_kj) - 0.1 I_border

  (weights configurable; the separation penalty is gated to the safety
  radius so the term never rewards dispersal).

Per-agent observations follow the fixed layout
``[rel. positions of the other agents, rel. target, own position,
overflow ratio, border flag]`` with all coordinates normalized by the area
diagonal, giving ``6 + 2 (m - 1)`` entries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, SimulationFault
from .fim_planner import PlannerConfig, plan_waypoint
from .sea_env import (
    VortexSpec,
    WaveGrid,
    advance_to,
    default_vortices,
    make_grid,
    sample_sea,
)
from .usbl import AuvTruth, UsblConfig, UsvState, default_configs, localize, measure, positioning_error


@dataclass(frozen=True)
class MissionConfig:
    x_max: float = 200.0
    y_max: float = 200.0
    n_poi: int = 60
    depth: float = 120.0
    auv_depth: float = 120.0
    dt: float = 10.0
    episode_steps: int = 1000
    v_min: float = 0.5
    v_max: float = 2.0
    comm_range: float = 15.0
    collision_dist: float = 12.0
    usv_speed_max: float = 5.0
    n_auv: int = 2
    sn_capacity_bits: float = 4.0e6
    sn_fill_rate_bps: float = 1000.0
    hotel_power_w: float = 25.0
    prop_power_coeff: float = 35.0  # W s^3 / m^3
    link_freq_khz: float = 20.0
    source_level_db: float = 135.0
    noise_level_db: float = 50.0
    bandwidth_hz: float = 5000.0

    def __post_init__(self) -> None:
        positive = (
            self.x_max, self.y_max, self.n_poi, self.depth, self.auv_depth, self.dt,
            self.episode_steps, self.v_max, self.comm_range, self.collision_dist,
            self.usv_speed_max, self.sn_capacity_bits, self.sn_fill_rate_bps,
            self.bandwidth_hz,
        )
        if any(p <= 0 for p in positive):
            raise ConfigError("mission dimensions, rates and ranges must be positive")
        if not (0 <= self.v_min <= self.v_max):
            raise ConfigError(f"need 0 <= v_min <= v_max, got [{self.v_min}, {self.v_max}]")
        if not (1 <= self.n_auv <= 4):
            raise ConfigError(f"supported team sizes are 1..4, got {self.n_auv}")
        if not (self.collision_dist < self.x_max / 4):
            raise ConfigError("collision distance too large for the area")
        if not (0 < self.auv_depth <= self.depth):
            raise ConfigError("agent depth must lie in (0, water depth]")

    @property
    def state_dim(self) -> int:
        return 6 + 2 * (self.n_auv - 1)

    @property
    def diag_norm(self) -> float:
        return math.hypot(self.x_max, self.y_max)


@dataclass(frozen=True)
class RewardWeights:
    w_dist: float = 0.6
    w_overflow: float = 0.05
    w_tl: float = 12.0
    w_energy: float = 0.085
    w_safety: float = 6.0
    safety_radius: float = 12.0
    w_border: float = 0.1
    task_scale: float = 1.0
    energy_scale: float = 1.0
    safety_scale: float = 1.0

    def __post_init__(self) -> None:
        if any(
            w < 0
            for w in (self.w_dist, self.w_overflow, self.w_tl, self.w_energy,
                      self.w_safety, self.safety_radius, self.w_border,
                      self.task_scale, self.energy_scale, self.safety_scale)
        ):
            raise ConfigError("reward weights must be non-negative")


@dataclass(frozen=True)
class SeaConfig:
    """Disturbance settings: tidal forcing plus per-episode random vortices."""

    enabled: bool = True
    eta0: float = 5.0
    omega: float = 2.0 * math.pi / 43200.0
    dx: float = 4.0
    dy: float = 4.0
    dt_sub: float = 0.05
    wave_drift_beta: float = 0.2
    gamma_min: float = 30.0
    gamma_max: float = 60.0
    delta_min: float = 10.0
    delta_max: float = 20.0
    quadrant: float = 100.0


@dataclass
class SensorNode:
    pos: np.ndarray
    buffer: float
    capacity: float
    fill_rate: float
    overflowed: bool = False
    serviced: bool = False
    delivered_total: float = 0.0
    filled_total: float = 0.0


@dataclass
class AuvAgentState:
    pos: np.ndarray
    speed: float = 0.0
    heading: float = 0.0
    target_id: int = -1
    energy_step: float = 0.0
    trajectory_len: float = 0.0
    border_flag: int = 0


@dataclass(frozen=True)
class EpisodeMetrics:
    sdr: float
    ec: float
    arpt: float
    ssn: int
    traj_lens: tuple[float, ...]
    pos_error_mean: float
    violations: int


def map_action(action: Sequence[float], cfg: MissionConfig) -> tuple[float, float]:
    """Normalized action -> (speed m/s, absolute heading rad)."""
    v_norm = min(max(float(action[0]), -1.0), 1.0)
    th_norm = min(max(float(action[1]), -1.0), 1.0)
    speed = cfg.v_min + (v_norm + 1.0) * (cfg.v_max - cfg.v_min) / 2.0
    return speed, math.pi * th_norm


def thorp_absorption_db_per_km(f_khz: float) -> float:
    f2 = f_khz * f_khz
    return 0.11 * f2 / (1.0 + f2) + 44.0 * f2 / (4100.0 + f2) + 2.75e-4 * f2 + 0.003


def link_rate(dist: float, cfg: MissionConfig) -> float:
    """Sonar link budget in bits/s; zero beyond communication range."""
    if dist < 0:
        raise ConfigError("distance must be non-negative")
    if dist > cfg.comm_range:
        return 0.0
    snr_db = (
        cfg.source_level_db
        - 20.0 * math.log10(max(dist, 1.0))
        - thorp_absorption_db_per_km(cfg.link_freq_khz) * dist / 1000.0
        - cfg.noise_level_db
    )
    return cfg.bandwidth_hz * math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def reward_terms(
    d_target: float,
    n_do: int,
    i_tl: int,
    energy_w: float,
    neighbor_dists: Sequence[float],
    border: int,
    w: RewardWeights,
) -> dict[str, float]:
    """Shaped reward split into its six components plus the total."""
    terms = {
        "dist": -w.w_dist * w.task_scale * d_target,
        "overflow": -w.w_overflow * w.task_scale * n_do,
        "tl": w.w_tl * w.task_scale * i_tl,
        "energy": -w.w_energy * w.energy_scale * energy_w,
        "safety": -sum(
            w.w_safety * w.safety_scale * (w.safety_radius - d)
            for d in neighbor_dists
            if d < w.safety_radius
        ),
        "border": -w.w_border * w.safety_scale * border,
    }
    terms["total"] = (
        terms["dist"] + terms["overflow"] + terms["tl"]
        + terms["energy"] + terms["safety"] + terms["border"]
    )
    return terms


def collect_metrics(records: Sequence[dict], dt: float,
                    initial_positions: Sequence[Sequence[float]]) -> EpisodeMetrics:
    """Fold a step log into episode metrics.

    Each record carries ``delivered_bits``, ``energy_w`` (list, W per agent),
    ``rewards`` (list), ``positions`` (list of [x, y] after the step),
    ``pos_errors`` (list, m), ``violations`` (int) and ``ssn`` (int).
    """
    if not records:
        raise ConfigError("empty episode log")
    n_auv = len(initial_positions)
    wall_time = len(records) * dt
    delivered = sum(r["delivered_bits"] for r in records)
    ec = float(np.mean([sum(r["energy_w"]) for r in records]))
    arpt = float(np.mean([sum(r["rewards"]) for r in records]))
    traj = [0.0] * n_auv
    prev = [np.asarray(p, dtype=float) for p in initial_positions]
    for r in records:
        for k in range(n_auv):
            cur = np.asarray(r["positions"][k], dtype=float)
            traj[k] += float(np.hypot(*(cur - prev[k])))
            prev[k] = cur
    errors = [e for r in records for e in r["pos_errors"]]
    return EpisodeMetrics(
        sdr=delivered / wall_time / 1e6,
        ec=ec,
        arpt=arpt,
        ssn=int(records[-1]["ssn"]),
        traj_lens=tuple(traj),
        pos_error_mean=float(np.mean(errors)) if errors else 0.0,
        violations=int(sum(r["violations"] for r in records)),
    )


class MissionEnv:
    """Stepped mission simulation; one instance runs one episode at a time."""

    def __init__(
        self,
        cfg: MissionConfig | None = None,
        weights: RewardWeights | None = None,
        sea: SeaConfig | None = None,
        usbl_cfgs: Sequence[UsblConfig] | None = None,
        planner: PlannerConfig | None = None,
        usv_mode: str = "fim",
        usv_fixed: tuple[float, float] = (0.0, 0.0),
    ) -> None:
        self.cfg = cfg or MissionConfig()
        self.weights = weights or RewardWeights()
        self.sea = sea or SeaConfig()
        self.usbl_cfgs = tuple(usbl_cfgs) if usbl_cfgs else default_configs(self.cfg.n_auv)
        if len(self.usbl_cfgs) != self.cfg.n_auv:
            raise ConfigError(
                f"{len(self.usbl_cfgs)} acoustic configs for {self.cfg.n_auv} agents"
            )
        self.planner = planner or PlannerConfig(
            bounds=((0.0, self.cfg.x_max), (0.0, self.cfg.y_max))
        )
        if usv_mode not in ("fim", "fixed"):
            raise ConfigError(f"usv_mode must be 'fim' or 'fixed', got {usv_mode!r}")
        self.usv_mode = usv_mode
        self.usv_fixed = (float(usv_fixed[0]), float(usv_fixed[1]))
        self._active = False

    # -- episode lifecycle -------------------------------------------------

    def reset(self, seed) -> list[np.ndarray]:
        cfg = self.cfg
        if isinstance(seed, np.random.SeedSequence):
            ss = seed
        else:
            ss = np.random.SeedSequence(seed)
        layout, vortex, noise, plan = [np.random.default_rng(s) for s in ss.spawn(4)]
        self._noise_rng = noise
        self._plan_rng = plan

        self.sns = [
            SensorNode(
                pos=layout.uniform((0.0, 0.0), (cfg.x_max, cfg.y_max)),
                buffer=0.0,
                capacity=cfg.sn_capacity_bits,
                fill_rate=cfg.sn_fill_rate_bps,
            )
            for _ in range(cfg.n_poi)
        ]
        for sn in self.sns:
            sn.buffer = float(layout.uniform(0.0, 0.5) * sn.capacity)

        self.auvs: list[AuvAgentState] = []
        for _ in range(cfg.n_auv):
            for attempt in range(1000):
                cand = layout.uniform((0.0, 0.0), (cfg.x_max, cfg.y_max))
                if all(
                    np.hypot(*(cand - a.pos)) >= 2.0 * cfg.collision_dist for a in self.auvs
                ):
                    self.auvs.append(AuvAgentState(pos=cand))
                    break
            else:
                raise ConfigError("could not place agents with the required separation")

        if self.usv_mode == "fixed":
            self.usv = UsvState(*self.usv_fixed)
        else:
            self.usv = UsvState(cfg.x_max / 2.0, cfg.y_max / 2.0)
        self.waypoint: tuple[float, float] | None = None

        if self.sea.enabled:
            self.grid: WaveGrid | None = make_grid(
                cfg.x_max, cfg.y_max, dx=self.sea.dx, dy=self.sea.dy,
                depth_h=cfg.depth, dt_sub=self.sea.dt_sub,
            )
            self.vortices: list[VortexSpec] = default_vortices(
                cfg.x_max, cfg.y_max, vortex,
                gamma_range=(self.sea.gamma_min, self.sea.gamma_max),
                delta_range=(self.sea.delta_min, self.sea.delta_max),
                quadrant=self.sea.quadrant,
            )
        else:
            self.grid = None
            self.vortices = []

        self.step_idx = 0
        self.records: list[dict] = []
        self.initial_positions = [a.pos.copy() for a in self.auvs]
        self._assign_targets(set(range(cfg.n_auv)))
        self._active = True
        return [self.state_vector(k) for k in range(cfg.n_auv)]

    @property
    def n_do(self) -> int:
        return sum(1 for sn in self.sns if sn.overflowed and not sn.serviced)

    @property
    def ssn(self) -> int:
        return sum(1 for sn in self.sns if sn.serviced)

    def state_vector(self, k: int) -> np.ndarray:
        cfg = self.cfg
        b = cfg.diag_norm
        me = self.auvs[k]
        parts: list[float] = []
        for j, other in enumerate(self.auvs):
            if j == k:
                continue
            parts.extend((other.pos - me.pos) / b)
        target = self.sns[me.target_id].pos if me.target_id >= 0 else me.pos
        parts.extend((target - me.pos) / b)
        parts.extend(me.pos / b)
        parts.append(self.n_do / cfg.n_poi)
        parts.append(float(me.border_flag))
        return np.asarray(parts, dtype=np.float64)

    # -- stepping ----------------------------------------------------------

    def step(self, actions: Sequence[Sequence[float]]):
        if not self._active:
            raise ConfigError("no active episode: call reset() first")
        if len(actions) != self.cfg.n_auv:
            raise ConfigError(f"{len(actions)} actions for {self.cfg.n_auv} agents")
        cfg = self.cfg
        dt = cfg.dt

        transfers = [0.0] * cfg.n_auv
        i_tl = [0] * cfg.n_auv

        # agent kinematics with disturbance drift
        for k, agent in enumerate(self.auvs):
            speed, heading = map_action(actions[k], cfg)
            agent.speed, agent.heading = speed, heading
            direction = np.array([math.cos(heading), math.sin(heading)])
            predicted = agent.pos + speed * dt * direction
            agent.border_flag = int(
                not (0.0 <= predicted[0] <= cfg.x_max and 0.0 <= predicted[1] <= cfg.y_max)
            )
            drift = np.zeros(2)
            if self.grid is not None:
                s = sample_sea(self.grid, self.vortices, float(agent.pos[0]), float(agent.pos[1]))
                drift[0] = s.turb_vel[0] + self.sea.wave_drift_beta * s.wave_vel[0]
                drift[1] = s.turb_vel[1] + self.sea.wave_drift_beta * s.wave_vel[1]
            new_pos = agent.pos + (speed * direction + drift) * dt
            new_pos = np.clip(new_pos, (0.0, 0.0), (cfg.x_max, cfg.y_max))
            agent.trajectory_len += float(np.hypot(*(new_pos - agent.pos)))
            agent.pos = new_pos
            agent.energy_step = cfg.hotel_power_w + cfg.prop_power_coeff * speed**3
            if not np.isfinite(agent.pos).all():
                raise SimulationFault(f"non-finite agent state at step {self.step_idx}")

        # node buffers fill, then assigned targets drain
        newly_overflowed: set[int] = set()
        for i, sn in enumerate(self.sns):
            if sn.serviced:
                continue
            fill = min(sn.fill_rate * dt, sn.capacity - sn.buffer)
            sn.buffer += fill
            sn.filled_total += fill
            if sn.buffer >= sn.capacity and not sn.overflowed:
                sn.overflowed = True
                newly_overflowed.add(i)
        for k, agent in enumerate(self.auvs):
            if agent.target_id < 0:
                continue
            sn = self.sns[agent.target_id]
            if sn.serviced:
                continue
            dist = float(np.hypot(*(sn.pos - agent.pos)))
            if dist <= cfg.comm_range:
                amount = min(sn.buffer, link_rate(dist, cfg) * dt)
                sn.buffer -= amount
                sn.delivered_total += amount
                transfers[k] += amount
                if sn.buffer <= 0.0:
                    sn.buffer = 0.0
                    sn.serviced = True
                    sn.overflowed = False
                    i_tl[k] = 1

        # sea field advances through the mission step
        if self.grid is not None:
            advance_to(self.grid, (self.step_idx + 1) * dt, self.sea.eta0, self.sea.omega)

        # surface vehicle: plan, move, ride the surface
        if self.usv_mode == "fim":
            truths = [
                AuvTruth(float(a.pos[0]), float(a.pos[1]), cfg.auv_depth) for a in self.auvs
            ]
            wx, wy, _ = plan_waypoint(truths, self.usbl_cfgs, self.planner, rng=self._plan_rng)
            self.waypoint = (wx, wy)
            to_wp = np.array([wx - self.usv.x, wy - self.usv.y])
            dist_wp = float(np.hypot(*to_wp))
            if dist_wp > 0.0:
                move = min(cfg.usv_speed_max * dt, dist_wp)
                self.usv.x += to_wp[0] / dist_wp * move
                self.usv.y += to_wp[1] / dist_wp * move
            self.usv.x = min(max(self.usv.x, 0.0), cfg.x_max)
            self.usv.y = min(max(self.usv.y, 0.0), cfg.y_max)
        wave_speed = 0.0
        if self.grid is not None:
            surface = sample_sea(self.grid, self.vortices, self.usv.x, self.usv.y)
            self.usv.eta = surface.eta
            wave_speed = math.hypot(*surface.wave_vel)
        else:
            self.usv.eta = 0.0

        # acoustic positioning of every agent
        pos_errors: list[float] = []
        for k, agent in enumerate(self.auvs):
            truth = AuvTruth(float(agent.pos[0]), float(agent.pos[1]), cfg.auv_depth)
            meas = measure(self.usv, truth, self.usbl_cfgs[k], self._noise_rng,
                           wave_speed=wave_speed)
            est = localize(meas, self.usv, self.usbl_cfgs[k])
            err = positioning_error(est, truth)
            est.error = err
            pos_errors.append(err)

        # rewards and safety bookkeeping
        n_do = self.n_do
        rewards: list[float] = []
        terms_log: list[dict[str, float]] = []
        violations = 0
        for k, agent in enumerate(self.auvs):
            if agent.target_id >= 0:
                d_target = float(np.hypot(*(self.sns[agent.target_id].pos - agent.pos)))
            else:
                d_target = 0.0
            neighbor = [
                float(np.hypot(*(other.pos - agent.pos)))
                for j, other in enumerate(self.auvs)
                if j != k
            ]
            terms = reward_terms(
                d_target, n_do, i_tl[k], agent.energy_step, neighbor,
                agent.border_flag, self.weights,
            )
            rewards.append(terms["total"])
            terms_log.append(terms)
            violations += agent.border_flag
        for i in range(cfg.n_auv):
            for j in range(i + 1, cfg.n_auv):
                if float(np.hypot(*(self.auvs[i].pos - self.auvs[j].pos))) < cfg.collision_dist:
                    violations += 1

        # retarget agents whose node was serviced or just overflowed
        stale = {
            k
            for k, agent in enumerate(self.auvs)
            if agent.target_id < 0
            or self.sns[agent.target_id].serviced
            or agent.target_id in newly_overflowed
        }
        if stale:
            self._assign_targets(stale)

        self.step_idx += 1
        done = self.step_idx >= cfg.episode_steps
        if done:
            self._active = False
        record = {
            "t": self.step_idx * dt,
            "positions": [[float(a.pos[0]), float(a.pos[1])] for a in self.auvs],
            "actions": [[float(a[0]), float(a[1])] for a in actions],
            "rewards": rewards,
            "reward_terms": terms_log,
            "delivered_bits": float(sum(transfers)),
            "transfers": transfers,
            "energy_w": [a.energy_step for a in self.auvs],
            "pos_errors": pos_errors,
            "usv": [self.usv.x, self.usv.y, self.usv.eta],
            "waypoint": list(self.waypoint) if self.waypoint else None,
            "n_do": n_do,
            "ssn": self.ssn,
            "violations": violations,
            "border": [a.border_flag for a in self.auvs],
        }
        self.records.append(record)
        states = [self.state_vector(k) for k in range(cfg.n_auv)]
        return states, rewards, done, record

    def _assign_targets(self, pool: set[int]) -> None:
        taken = {
            a.target_id
            for j, a in enumerate(self.auvs)
            if j not in pool and a.target_id >= 0
        }
        candidates = [
            i for i, sn in enumerate(self.sns) if not sn.serviced and i not in taken
        ]
        for k in sorted(pool):
            if not candidates:
                continue  # assignment holds the last target
            agent = self.auvs[k]
            best = min(
                candidates,
                key=lambda i: (float(np.hypot(*(self.sns[i].pos - agent.pos))), i),
            )
            agent.target_id = best
            candidates.remove(best)

    def episode_metrics(self) -> EpisodeMetrics:
        return collect_metrics(self.records, self.cfg.dt, self.initial_positions)
