"""Command-line interface.

Subcommands: ``train``, ``eval``, ``plan``, ``sweep``, ``simulate-sea``.
Exit codes: 0 success, 2 configuration error, 3 runtime fault.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import parse_config, parse_config_text
from .errors import CheckpointError, ConfigError, DomainError, SimulationFault, TrainingFault
from .harness import run_eval, run_plan, run_simulate_sea, run_sweep, run_train
from .usbl import AuvTruth


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="config file (omit for full defaults)")
    p.add_argument("--profile", default="full", help="preset: full, desk or toy")
    p.add_argument("--seeds", default=None, help="comma list, e.g. 1,2,3")
    p.add_argument("--out", default=None, help="output directory root")


def _parse_seeds(token: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(t) for t in token.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"cannot parse seed list {token!r}") from exc
    if not seeds:
        raise ConfigError("empty seed list")
    return seeds


def _load_config(args) -> "RunConfig":
    overrides = {}
    if args.seeds:
        overrides[("run", "seeds")] = _parse_seeds(args.seeds)
    mode_token = getattr(args, "usv_mode", None)
    if mode_token and ";" not in mode_token:
        overrides[("run", "usv_mode")] = mode_token
    if args.config:
        return parse_config(args.config, profile=args.profile, overrides=overrides)
    return parse_config_text("", profile=args.profile, overrides=overrides)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="seacollect",
        description="Underwater data-collection missions: train, evaluate, plan, sweep, "
                    "and dump sea-state fields.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the shared policy, one run per seed")
    _common_flags(p)

    p = sub.add_parser("eval", help="roll out a policy and aggregate metrics")
    _common_flags(p)
    p.add_argument("--checkpoint", default=None, help="checkpoint.bin from a training run")
    p.add_argument("--policy", default=None, choices=("greedy", "patrol", "random"),
                   help="default: greedy with a checkpoint, else patrol")
    p.add_argument("--usv-mode", default=None,
                   help="fim or fixed:x,y; several modes separated by ';', "
                        "e.g. 'fim;fixed:0,0;fixed:100,100'")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--steps", type=int, default=None, help="override episode length")

    p = sub.add_parser("plan", help="plan one surface waypoint for given agent positions")
    _common_flags(p)
    p.add_argument("--auvs", required=True,
                   help="semicolon list of x,y[,depth] positions, e.g. '25,93;95,40'")
    p.add_argument("--depth", type=float, default=None, help="default depth for --auvs")
    p.add_argument("--nit", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--oracle-grid", type=float, default=None, metavar="STEP_M",
                   help="cross-check against an exhaustive grid at this spacing")

    p = sub.add_parser("sweep", help="parameter sweep with trend statistics")
    _common_flags(p)
    p.add_argument("--sweep", required=True, help="e.g. energy:0.25,0.5,1,2 or nit:6,12,18,24")

    p = sub.add_parser("simulate-sea", help="dump tidal/turbulence field snapshots")
    _common_flags(p)
    p.add_argument("--times", default="25,50,75", help="comma list of dump times (s)")
    p.add_argument("--amplitude", type=float, default=None, help="override forcing amplitude")
    p.add_argument("--omega", type=float, default=None, help="override forcing frequency")

    return ap


def _parse_auvs(token: str, default_depth: float) -> list[AuvTruth]:
    out = []
    for part in token.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            nums = [float(t) for t in part.split(",")]
        except ValueError as exc:
            raise ConfigError(f"cannot parse agent position {part!r}") from exc
        if len(nums) == 2:
            out.append(AuvTruth(nums[0], nums[1], default_depth))
        elif len(nums) == 3:
            out.append(AuvTruth(nums[0], nums[1], nums[2]))
        else:
            raise ConfigError(f"agent position {part!r} must be x,y or x,y,depth")
    if not out:
        raise ConfigError("no agent positions given")
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run_cfg = _load_config(args)
        out_root = args.out or run_cfg.output_dir

        if args.command == "train":
            for seed in run_cfg.seeds:
                rdir = run_train(run_cfg, seed, out_root)
                print(f"run written to {rdir}")
            return 0

        if args.command == "eval":
            policy = args.policy or ("greedy" if args.checkpoint else "patrol")
            modes = args.usv_mode.split(";") if args.usv_mode else None
            for seed in run_cfg.seeds:
                rdir = run_eval(
                    run_cfg, seed, out_root, checkpoint=args.checkpoint,
                    policy=policy, usv_modes=modes, episodes=args.episodes,
                    episode_steps=args.steps,
                )
                print(f"run written to {rdir}")
            return 0

        if args.command == "plan":
            auvs = _parse_auvs(args.auvs, args.depth or run_cfg.mission.auv_depth)
            result = run_plan(auvs, run_cfg, nit=args.nit, seed=args.seed,
                              oracle_grid=args.oracle_grid)
            print(json.dumps(result, sort_keys=False))
            return 0

        if args.command == "sweep":
            rdir = run_sweep(run_cfg, args.sweep, out_root)
            print(f"sweep written to {rdir}")
            return 0

        if args.command == "simulate-sea":
            times = [float(t) for t in args.times.split(",") if t.strip()]
            rdir = run_simulate_sea(run_cfg, times, out_root,
                                    amplitude=args.amplitude, omega=args.omega)
            print(f"fields written to {rdir}")
            return 0

        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (SimulationFault, TrainingFault, CheckpointError, DomainError, OSError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
