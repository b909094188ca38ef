"""Run orchestration: training/evaluation runs, sweeps, field dumps, reports.

Every run writes into ``<out>/<run_id>/`` where ``run_id`` combines the seed
with a hash of the resolved configuration.  The directory holds
``config.resolved`` (the exact configuration echo; re-running from it
reproduces every CSV/JSONL/checkpoint byte for byte), ``curves.csv``,
``metrics.csv``, ``episodes.jsonl``, ``checkpoint.bin`` and ``report.json``
as applicable.  Wall-clock timings go only into ``report.json``.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np
from scipy import stats

from .config import RunConfig, make_env, resolved_with
from .errors import ConfigError
from .fim_planner import PlannerConfig, fix_rms_error, grid_search_waypoint, plan_waypoint
from .mission_env import EpisodeMetrics, MissionEnv
from .sea_env import default_vortices, make_grid, vortex_velocity
from .td3 import Td3Agent, greedy_rollout, random_rollout, restore_agent, save_checkpoint, train
from .usbl import AuvTruth, UsvState

METRICS_HEADER = (
    "episode,seed,sdr_mbps,ec_w,arpt,ssn,"
    "traj_len_auv1,traj_len_auv2,traj_len_auv3,traj_len_auv4,"
    "pos_err_mean_m,violations"
)
CURVES_HEADER = "episode,arpt,sdr_mbps,ec_w,ssn"
TRACE_HEADER = "t,auv_id,error_m,mode"


def fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_id(seed: int, resolved: str) -> str:
    digest = hashlib.md5(resolved.encode()).hexdigest()[:10]
    return f"s{seed}-{digest}"


def metrics_row(episode: int, seed: int, m: EpisodeMetrics) -> str:
    traj = list(m.traj_lens) + [0.0] * (4 - len(m.traj_lens))
    cells = [episode, seed, m.sdr, m.ec, m.arpt, m.ssn, *traj[:4], m.pos_error_mean,
             m.violations]
    return ",".join(fmt(c) for c in cells)


def write_lines(path: Path, header: str, rows: list[str]) -> None:
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")


def write_report(path: Path, report: dict) -> None:
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def aggregate(metrics: list[EpisodeMetrics]) -> dict:
    """Mean and standard deviation per metric over episodes/seeds."""
    if not metrics:
        raise ConfigError("nothing to aggregate")
    fields = {
        "sdr_mbps": [m.sdr for m in metrics],
        "ec_w": [m.ec for m in metrics],
        "arpt": [m.arpt for m in metrics],
        "ssn": [float(m.ssn) for m in metrics],
        "pos_err_mean_m": [m.pos_error_mean for m in metrics],
        "violations": [float(m.violations) for m in metrics],
    }
    out = {"count": len(metrics)}
    for name, vals in fields.items():
        arr = np.asarray(vals)
        out[name] = {"mean": float(arr.mean()), "std": float(arr.std())}
    return out


# -- training ---------------------------------------------------------------


def run_train(run_cfg: RunConfig, seed: int, out_root) -> Path:
    """One training run for one seed; returns the run directory."""
    resolved = resolved_with(run_cfg, seeds=(seed,))
    rdir = Path(out_root) / run_id(seed, resolved)
    rdir.mkdir(parents=True, exist_ok=True)
    (rdir / "config.resolved").write_text(resolved, encoding="utf-8")

    env = make_env(run_cfg)
    t0 = time.perf_counter()

    def progress(ep, arpt_ma, converged):
        print(f"episode {ep:4d}  arpt_ma {arpt_ma:10.3f}  converged {converged}")

    result = train(env, run_cfg.hyper, seed, progress=progress)
    runtime = time.perf_counter() - t0

    curve_rows = [
        ",".join(fmt(v) for v in (ep, arpt, sdr, ec, ssn))
        for ep, arpt, sdr, ec, ssn in zip(
            result.curves["episode"], result.curves["arpt"],
            result.curves["sdr_mbps"], result.curves["ec_w"], result.curves["ssn"],
        )
    ]
    write_lines(rdir / "curves.csv", CURVES_HEADER, curve_rows)
    write_lines(
        rdir / "metrics.csv", METRICS_HEADER,
        [metrics_row(ep, seed, m) for ep, m in enumerate(result.episode_metrics)],
    )
    save_checkpoint(rdir / "checkpoint.bin", result.agent, seed)
    tail = result.episode_metrics[-min(25, len(result.episode_metrics)):]
    write_report(rdir / "report.json", {
        "command": "train",
        "seed": seed,
        "episodes": run_cfg.hyper.episodes,
        "env_steps": result.env_steps,
        "convergence_episode": result.convergence,
        "converged": result.convergence is not None,
        "final_window": aggregate(tail),
        "runtime_s": runtime,
    })
    return rdir


# -- evaluation ---------------------------------------------------------------


class PatrolPolicy:
    """Deterministic serpentine sweep of the area with per-agent lateral offsets.

    Scripted stand-in for a trained policy: every agent tracks its own offset
    copy of a shared lawnmower route, so the team covers the whole area while
    keeping a safe formation spacing.
    """

    def __init__(self, env: MissionEnv, start_leg: int = 0, cruise_speed: float = 1.5):
        cfg = env.cfg
        # full-coverage survey: lane gap ~ twice the communication range
        margin = 0.05 * min(cfg.x_max, cfg.y_max)
        n_lanes = max(2, round((cfg.y_max - 2 * margin) / (2.0 * cfg.comm_range)) + 1)
        lanes = np.linspace(margin, cfg.y_max - margin, n_lanes)
        route = []
        for i, y in enumerate(lanes):
            xs = (margin, cfg.x_max - margin) if i % 2 == 0 else (cfg.x_max - margin, margin)
            route.append((xs[0], y))
            route.append((xs[1], y))
        self.route = route
        self.idx = [start_leg % len(route)] * cfg.n_auv
        self.offsets = [
            np.array([0.0, 0.0]) if k == 0 else
            np.array([(k % 2 * 2 - 1) * 15.0 * ((k + 1) // 2), 0.0])
            for k in range(cfg.n_auv)
        ]
        span = cfg.v_max - cfg.v_min
        speed = min(max(cruise_speed, cfg.v_min), cfg.v_max)
        self.v_norm = 2.0 * (speed - cfg.v_min) / span - 1.0 if span > 0 else 0.0

    def actions(self, env: MissionEnv) -> np.ndarray:
        cfg = env.cfg
        acts = np.zeros((cfg.n_auv, 2))
        for k, agent in enumerate(env.auvs):
            wp = np.clip(
                np.asarray(self.route[self.idx[k]]) + self.offsets[k],
                (0.0, 0.0), (cfg.x_max, cfg.y_max),
            )
            if float(np.hypot(*(wp - agent.pos))) < 12.0:
                self.idx[k] = (self.idx[k] + 1) % len(self.route)
                wp = np.clip(
                    np.asarray(self.route[self.idx[k]]) + self.offsets[k],
                    (0.0, 0.0), (cfg.x_max, cfg.y_max),
                )
            heading = math.atan2(wp[1] - agent.pos[1], wp[0] - agent.pos[0])
            acts[k] = (self.v_norm, heading / math.pi)
        return acts


def rollout_policy(env: MissionEnv, policy: str, seed, agent: Td3Agent | None,
                   episode_index: int = 0):
    """One evaluation episode; returns (EpisodeMetrics, records)."""
    if policy == "greedy":
        if agent is None:
            raise ConfigError("greedy evaluation needs a checkpoint")
        out = greedy_rollout(env, agent, seed)
        return out["metrics"], out["records"]
    if policy == "random":
        rng = np.random.default_rng(np.random.SeedSequence(episode_index + 1))
        out = random_rollout(env, rng, seed)
        return out["metrics"], out["records"]
    if policy == "patrol":
        env.reset(seed)
        patrol = PatrolPolicy(env, start_leg=episode_index)
        done = False
        while not done:
            _, _, done, _ = env.step(patrol.actions(env))
        return env.episode_metrics(), env.records
    raise ConfigError(f"unknown policy {policy!r}")


def run_eval(run_cfg: RunConfig, seed: int, out_root, checkpoint=None,
             policy: str = "greedy", usv_modes: list[str] | None = None,
             episodes: int | None = None, episode_steps: int | None = None) -> Path:
    """Evaluation rollouts per surface-vehicle mode; writes metrics and traces."""
    resolved = resolved_with(run_cfg, seeds=(seed,))
    rdir = Path(out_root) / run_id(seed, resolved)
    rdir.mkdir(parents=True, exist_ok=True)
    (rdir / "config.resolved").write_text(resolved, encoding="utf-8")

    agent = None
    if checkpoint is not None:
        agent = restore_agent(checkpoint, run_cfg.hyper,
                              expect_state_dim=run_cfg.mission.state_dim)
    n_eps = episodes or run_cfg.eval_episodes
    mode_tokens = usv_modes or [
        run_cfg.usv_mode if run_cfg.usv_mode == "fim"
        else f"fixed:{run_cfg.usv_fixed[0]},{run_cfg.usv_fixed[1]}"
    ]

    mission = run_cfg.mission
    if episode_steps:
        from dataclasses import replace

        mission = replace(mission, episode_steps=episode_steps)

    t0 = time.perf_counter()
    metric_rows: list[str] = []
    trace_rows: list[str] = []
    jsonl_lines: list[str] = []
    per_mode: dict[str, list[EpisodeMetrics]] = {}
    from .config import parse_usv_mode

    for token in mode_tokens:
        mode, fixed = parse_usv_mode(token)
        label = token.replace(":", "_").replace(",", "_")  # comma-safe CSV cell
        env = MissionEnv(
            cfg=mission, weights=run_cfg.weights, sea=run_cfg.sea,
            usbl_cfgs=run_cfg.usbl_cfgs[: mission.n_auv], planner=run_cfg.planner,
            usv_mode=mode, usv_fixed=fixed,
        )
        root = np.random.SeedSequence(seed)
        collected: list[EpisodeMetrics] = []
        for ep, ep_ss in enumerate(root.spawn(n_eps)):
            metrics, records = rollout_policy(env, policy, ep_ss, agent, episode_index=ep)
            collected.append(metrics)
            metric_rows.append(metrics_row(ep, seed, metrics))
            for rec in records:
                for k, err in enumerate(rec["pos_errors"]):
                    trace_rows.append(
                        ",".join(fmt(v) for v in (rec["t"], k + 1, err, label))
                    )
                jsonl_lines.append(json.dumps(
                    {"mode": token, "episode": ep, **rec}, sort_keys=False
                ))
        per_mode[token] = collected
    runtime = time.perf_counter() - t0

    write_lines(rdir / "metrics.csv", METRICS_HEADER, metric_rows)
    write_lines(rdir / "positioning.csv", TRACE_HEADER, trace_rows)
    (rdir / "episodes.jsonl").write_text("\n".join(jsonl_lines) + "\n", encoding="utf-8")
    write_report(rdir / "report.json", {
        "command": "eval",
        "seed": seed,
        "policy": policy,
        "episodes": n_eps,
        "modes": {token: aggregate(ms) for token, ms in per_mode.items()},
        "runtime_s": runtime,
    })
    return rdir


# -- waypoint planning ----------------------------------------------------------


def run_plan(auvs: list[AuvTruth], run_cfg: RunConfig, nit: int | None = None,
             seed: int | None = None, oracle_grid: float | None = None) -> dict:
    """Plan one waypoint; optionally cross-check against the exhaustive grid."""
    base = run_cfg.planner
    plan = PlannerConfig(
        bounds=base.bounds, pop_size=base.pop_size,
        nit=nit or base.nit, f_weight=base.f_weight, cr=base.cr,
        seed=base.seed if seed is None else seed,
        standoff_r_min=base.standoff_r_min,
    )
    cfgs = run_cfg.usbl_cfgs[: len(auvs)]
    if len(cfgs) < len(auvs):
        raise ConfigError(f"configured for {len(cfgs)} agents, got {len(auvs)} positions")
    t0 = time.perf_counter()
    x, y, det = plan_waypoint(auvs, cfgs, plan)
    runtime_ms = (time.perf_counter() - t0) * 1000.0
    out = {
        "waypoint": [x, y],
        "det": det,
        "nit": plan.nit,
        "pop_size": plan.pop_size,
        "seed": plan.seed,
        "runtime_ms": runtime_ms,
        "oracle": None,
    }
    if oracle_grid:
        gx, gy, gdet = grid_search_waypoint(auvs, cfgs, plan.bounds, oracle_grid)
        out["oracle"] = {
            "step_m": oracle_grid,
            "waypoint": [gx, gy],
            "det": gdet,
            "planner_over_oracle": det / gdet if gdet > 0 else math.inf,
        }
    return out


# -- sweeps -----------------------------------------------------------------


def parse_sweep_spec(spec: str) -> tuple[str, list[float]]:
    if ":" not in spec:
        raise ConfigError(f"sweep spec {spec!r} must look like 'energy:0.25,0.5,1,2'")
    name, _, body = spec.partition(":")
    name = name.strip().lower()
    if name not in ("energy", "safety", "nit"):
        raise ConfigError(f"sweep parameter must be energy, safety or nit, got {name!r}")
    try:
        values = [float(t) for t in body.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"cannot parse sweep values {body!r}") from exc
    if not values:
        raise ConfigError("sweep needs at least one value")
    return name, values


def _spearman(xs, ys) -> float:
    rho = stats.spearmanr(xs, ys).statistic
    return float(rho) if rho == rho else 0.0


def run_sweep(run_cfg: RunConfig, spec: str, out_root) -> Path:
    """Cross-product of sweep values and seeds; trend statistics in the report.

    Reward-weight sweeps (energy, safety) train per point; the planner
    iteration sweep evaluates waypoint quality and positioning error on
    frozen scenarios.
    """
    name, values = parse_sweep_spec(spec)
    resolved = resolved_with(run_cfg, seeds=run_cfg.seeds)
    rdir = Path(out_root) / f"sweep-{name}-{run_id(run_cfg.seeds[0], resolved)}"
    rdir.mkdir(parents=True, exist_ok=True)
    (rdir / "config.resolved").write_text(resolved, encoding="utf-8")

    t0 = time.perf_counter()
    if name == "nit":
        report = _sweep_nit(run_cfg, values, rdir)
    else:
        report = _sweep_weights(run_cfg, name, values, rdir)
    report["command"] = "sweep"
    report["spec"] = spec
    report["runtime_s"] = time.perf_counter() - t0
    write_report(rdir / "report.json", report)
    return rdir


def _sweep_weights(run_cfg: RunConfig, name: str, values: list[float], rdir) -> dict:
    from dataclasses import replace

    rows = []
    per_value: dict[float, list[EpisodeMetrics]] = {}
    for value in values:
        if name == "energy":
            weights = replace(run_cfg.weights, energy_scale=value)
        else:
            weights = replace(run_cfg.weights, safety_scale=value)
        for seed in run_cfg.seeds:
            env = make_env(run_cfg)
            env.weights = weights
            result = train(env, run_cfg.hyper, seed)
            window = result.episode_metrics[-min(25, len(result.episode_metrics)):]
            for m in window:
                per_value.setdefault(value, []).append(m)
            agg = aggregate(window)
            rows.append(",".join(fmt(v) for v in (
                value, seed, agg["sdr_mbps"]["mean"], agg["ec_w"]["mean"],
                agg["arpt"]["mean"], agg["ssn"]["mean"], agg["violations"]["mean"],
            )))
    write_lines(rdir / "sweep.csv",
                f"{name}_scale,seed,sdr_mbps,ec_w,arpt,ssn,violations", rows)
    means = {
        metric: [float(np.mean([getattr(m, attr) for m in per_value[v]])) for v in values]
        for metric, attr in (
            ("sdr_mbps", "sdr"), ("ec_w", "ec"), ("ssn", "ssn"), ("violations", "violations"),
        )
    }
    return {
        "parameter": name,
        "values": values,
        "aggregates": {str(v): aggregate(ms) for v, ms in per_value.items()},
        "spearman_vs_value": {m: _spearman(values, ys) for m, ys in means.items()},
        "seeds": list(run_cfg.seeds),
    }


def planning_scenarios(run_cfg: RunConfig, team_sizes: list[int], seed: int = 1234):
    """Frozen random constellations used by iteration sweeps and acceptance."""
    cfg = run_cfg.mission
    root = np.random.SeedSequence(seed)
    out = []
    for m, ss in zip(team_sizes, root.spawn(len(team_sizes))):
        rng = np.random.default_rng(ss)
        auvs = [
            AuvTruth(rng.uniform(0.0, cfg.x_max), rng.uniform(0.0, cfg.y_max),
                     cfg.auv_depth)
            for _ in range(m)
        ]
        out.append((auvs, int(rng.integers(0, 2**31 - 1))))
    return out


def _sweep_nit(run_cfg: RunConfig, values: list[float], rdir) -> dict:
    """Waypoint quality vs iteration budget on frozen mixed-size scenarios.

    The positioning error per scenario is the RMS error of the joint acoustic
    fix at the planned waypoint (root of the summed estimate variances).
    """
    nits = [int(v) for v in values]
    scenarios = planning_scenarios(run_cfg, [2] * 10 + [3] * 10 + [4] * 10)
    rows = []
    det_means, err_means, times = [], [], []
    for nit in nits:
        dets, errs = [], []
        t0 = time.perf_counter()
        for auvs, plan_seed in scenarios:
            plan = PlannerConfig(
                bounds=run_cfg.planner.bounds, pop_size=run_cfg.planner.pop_size,
                nit=nit, f_weight=run_cfg.planner.f_weight, cr=run_cfg.planner.cr,
                seed=plan_seed, standoff_r_min=run_cfg.planner.standoff_r_min,
            )
            cfgs = run_cfg.usbl_cfgs[: len(auvs)]
            x, y, det = plan_waypoint(auvs, cfgs, plan)
            dets.append(det)
            errs.append(fix_rms_error(UsvState(x, y), auvs, cfgs))
        elapsed_ms = (time.perf_counter() - t0) * 1000.0 / len(scenarios)
        det_means.append(float(np.mean(dets)))
        err_means.append(float(np.mean(errs)))
        times.append(elapsed_ms)
        # timing goes to report.json only, keeping the CSV reproducible
        rows.append(",".join(fmt(v) for v in (nit, det_means[-1], err_means[-1])))
    write_lines(rdir / "sweep.csv", "nit,det_mean,pos_err_mean_m", rows)
    return {
        "parameter": "nit",
        "values": nits,
        "det_mean": det_means,
        "pos_err_mean_m": err_means,
        "plan_ms": times,
        "spearman_det_vs_nit": _spearman(nits, det_means),
        "spearman_err_vs_nit": _spearman(nits, err_means),
        "scenarios": len(scenarios),
    }


# -- sea field dumps ----------------------------------------------------------


def run_simulate_sea(run_cfg: RunConfig, times: list[float], out_root,
                     amplitude: float | None = None, omega: float | None = None) -> Path:
    """Advance the tidal field and dump eta/u/v/vorticity snapshots as CSV.

    Rows are y nodes, columns x nodes, with a header row of x coordinates.
    Prints a surface-sum conservation diagnostic per dump.
    """
    resolved = resolved_with(run_cfg, seeds=run_cfg.seeds)
    rdir = Path(out_root) / f"sea-{run_id(run_cfg.seeds[0], resolved)}"
    rdir.mkdir(parents=True, exist_ok=True)
    (rdir / "config.resolved").write_text(resolved, encoding="utf-8")

    sea = run_cfg.sea
    mission = run_cfg.mission
    amp = sea.eta0 if amplitude is None else amplitude
    om = sea.omega if omega is None else omega
    grid = make_grid(mission.x_max, mission.y_max, dx=sea.dx, dy=sea.dy,
                     depth_h=mission.depth, dt_sub=sea.dt_sub)
    vortices = default_vortices(
        mission.x_max, mission.y_max,
        np.random.default_rng(np.random.SeedSequence(run_cfg.seeds[0])),
        gamma_range=(sea.gamma_min, sea.gamma_max),
        delta_range=(sea.delta_min, sea.delta_max), quadrant=sea.quadrant,
    )
    nx, ny = grid.eta.shape
    xs = [i * grid.dx for i in range(nx)]
    ys = [j * grid.dy for j in range(ny)]
    vort = np.zeros((nx, ny))
    for i, x in enumerate(xs):
        for j, y in enumerate(ys):
            vort[i, j] = vortex_velocity(vortices, x, y)[2]

    def dump(array: np.ndarray, path: Path) -> None:
        header = "y/x," + ",".join(fmt(float(x)) for x in xs)
        rows = [
            fmt(float(ys[j])) + "," + ",".join(fmt(float(array[i, j])) for i in range(nx))
            for j in range(ny)
        ]
        write_lines(path, header, rows)

    base_sum = float(grid.eta.sum())
    written = []
    for target in sorted(times):
        from .sea_env import advance_to

        advance_to(grid, target, amp, om)
        total = float(grid.eta.sum())
        print(f"t={grid.t:.2f}s  sum(eta)={total:.6e}  drift from t0: {total - base_sum:.6e}")
        tag = f"{target:g}"
        for field_name, arr in (("eta", grid.eta), ("u", grid.u), ("v", grid.v),
                                ("vorticity", vort)):
            path = rdir / f"{field_name}_t{tag}.csv"
            dump(arr, path)
            written.append(path.name)
    write_report(rdir / "report.json", {
        "command": "simulate-sea",
        "times": sorted(times),
        "amplitude": amp,
        "omega": om,
        "files": written,
        "vortices": [
            {"x0": v.x0, "y0": v.y0, "gamma": v.gamma, "delta": v.delta}
            for v in vortices
        ],
    })
    return rdir


# -- positioning comparison (fixed vs planned surface vehicle) -------------------


def positioning_comparison(run_cfg: RunConfig, episodes: int, steps: int,
                           modes: list[str], seed: int = 0,
                           policy: str = "patrol") -> dict[str, float]:
    """Mean positioning error per surface-vehicle mode under a scripted patrol.

    Episode seeds are shared across modes (common random numbers), so the
    comparison isolates the effect of the surface vehicle's motion policy.
    """
    from dataclasses import replace

    from .config import parse_usv_mode

    mission = replace(run_cfg.mission, episode_steps=steps)
    means: dict[str, float] = {}
    for token in modes:
        mode, fixed = parse_usv_mode(token)
        env = MissionEnv(
            cfg=mission, weights=run_cfg.weights, sea=run_cfg.sea,
            usbl_cfgs=run_cfg.usbl_cfgs[: mission.n_auv], planner=run_cfg.planner,
            usv_mode=mode, usv_fixed=fixed,
        )
        errors: list[float] = []
        root = np.random.SeedSequence(seed)
        for ep, ep_ss in enumerate(root.spawn(episodes)):
            metrics, _ = rollout_policy(env, policy, ep_ss, None, episode_index=ep)
            errors.append(metrics.pos_error_mean)
        means[token] = float(np.mean(errors))
    return means
