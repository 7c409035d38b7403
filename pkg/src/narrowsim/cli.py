"""Command-line entry point: train, eval, bench-collision, serve, inspect.

Configuration resolves in three layers: subcommand defaults, then a flat
JSON config file (--config), then explicit flags. The resolved document is
dumped next to the outputs with a content hash so any run can be replayed
from its own artifacts. Exit codes are stable: 0 success, 1 runtime fault,
2 usage or config error.
"""

from __future__ import annotations

import argparse
import fnmatch
import glob
import json
import os
import sys
from pathlib import Path

from .agents import config_hash, load_checkpoint, train
from .env import EnvConfig, MODES, RewardParams
from .evaluation import collision_benchmark, emit_report, run_eval, write_episode_log
from .geometry import Footprint, TrackWorld, bundled_track_names, load_bundled_track, load_track
from .safety import build_table

OUT_ROOT_VAR = "NARROWSIM_OUT"


class UsageError(Exception):
    """Bad flags or config; maps to exit code 2."""


def _out_root() -> Path:
    return Path(os.environ.get(OUT_ROOT_VAR, "runs"))


def _resolve_world(name: str) -> TrackWorld:
    """A track is a file path or a bundled name; anything else is usage."""
    path = Path(name)
    if path.suffix == ".json" or path.exists():
        if not path.exists():
            raise UsageError(f"track file not found: {name}")
        try:
            return load_track(path)
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"bad track file {name}: {exc}") from exc
    if name in bundled_track_names():
        return load_bundled_track(name)
    raise UsageError(f"unknown track '{name}' (not a file, not bundled; "
                     f"bundled: {', '.join(bundled_track_names())})")


def _env_config(args, world: TrackWorld) -> EnvConfig:
    try:
        return EnvConfig(world=world, reward=RewardParams(mode=args.reward),
                         max_steps=args.max_steps)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _dump_config(args, out_dir: Path) -> str:
    doc = {k: v for k, v in sorted(vars(args).items())
           if k not in ("func", "config") and not isinstance(v, Path)}
    doc = {"command": args.command, **doc}
    digest = config_hash(doc)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.json", "w") as fh:
        json.dump({"hash": digest, "config": doc}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return digest


def cmd_train(args) -> int:
    world = _resolve_world(args.world)
    config = _env_config(args, world)
    if args.seeds < 1 or args.episodes < 1:
        raise UsageError("--seeds and --episodes must be positive")
    out_dir = Path(args.out) if args.out else _out_root() / "train"
    digest = _dump_config(args, out_dir)
    print(f"config {digest} -> {out_dir}")
    results = train(config, args.algo, range(args.seeds), args.episodes,
                    fine_tune_episodes=args.fine_tune, out_dir=out_dir,
                    warmup=args.warmup, eval_every=args.eval_every,
                    stop_success_rate=args.stop_success_rate, progress=args.progress)
    for seed, res in sorted(results.items()):
        print(f"seed {seed}: episodes {len(res['returns'])} "
              f"best_return {res['best_return']:.1f}"
              + (f" stopped_at {res['stopped_at']}" if res["stopped_at"] else ""))
    return 0


def _resolve_track_patterns(patterns: str) -> list[TrackWorld]:
    worlds: dict[str, TrackWorld] = {}
    for entry in patterns.split(","):
        entry = entry.strip()
        if not entry:
            continue
        for path in sorted(glob.glob(entry)):
            world = load_track(path)
            worlds[world.name] = world
        for name in fnmatch.filter(bundled_track_names(), entry):
            worlds.setdefault(name, load_bundled_track(name))
    if not worlds:
        raise UsageError(f"no tracks match '{patterns}'")
    return [worlds[k] for k in sorted(worlds)]


def cmd_eval(args) -> int:
    model = Path(args.model)
    if not model.exists():
        raise UsageError(f"model checkpoint not found: {model}")
    worlds = _resolve_track_patterns(args.tracks)
    agent, meta = load_checkpoint(model, seed=args.seed)
    config = _env_config(args, worlds[0])
    out_dir = Path(args.out) if args.out else _out_root() / "eval"
    digest = _dump_config(args, out_dir)
    method = args.method or f"{agent.algo}-{args.reward}"
    try:
        report = run_eval(agent, worlds, config, episodes_per_track=args.episodes,
                          seed=args.seed, method=method)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    write_episode_log(out_dir / "episodes.jsonl", report)
    csv_path, txt_path = emit_report(report.aggregate(), out_dir / "report",
                                     meta={"config_hash": digest, "model": str(model),
                                           **{f"ckpt_{k}": v for k, v in meta.items()}})
    print(txt_path.read_text(), end="")
    print(f"report: {csv_path}")
    return 0


def cmd_bench_collision(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    world = _resolve_world(args.world)
    counts = collision_benchmark(Footprint(), [world], n_trials=args.trials,
                                 seed=args.seed, sampler=args.sampler)
    sr, fi, ff = counts["sr"], counts["firect"], counts["fifr"]
    print(f"trials {counts['trials']}  beams/table {counts['beams_per_table']}  "
          f"seed {counts['seed']}  sampler {counts['sampler']}")
    print(f"adaptive table   detected {sr:4d}  ({sr / counts['trials']:.1%} of contacts)")
    print(f"fixed rectangle  detected {fi:4d}  ({(sr - fi) / sr:.1%} fewer than adaptive)")
    print(f"fixed range      detected {ff:4d}  ({(sr - ff) / sr:.1%} fewer than adaptive)")
    if args.out:
        out_dir = Path(args.out)
        digest = _dump_config(args, out_dir)
        with open(out_dir / "bench.json", "w") as fh:
            json.dump({"hash": digest, **counts}, fh, indent=2)
            fh.write("\n")
        print(f"results: {out_dir / 'bench.json'}")
    return 0


def cmd_serve(args) -> int:
    from .service import serve

    world = _resolve_world(args.world)
    config = _env_config(args, world)
    try:
        serve(config, bind=args.bind, tick_seconds=args.tick)
    except (OSError, SystemExit) as exc:
        print(f"serve failed: {exc}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        pass
    return 0


def cmd_inspect(args) -> int:
    world = _resolve_world(args.world)
    config = EnvConfig(world=world)
    table = build_table(config.footprint, config.n_scans, config.resolution)
    if args.json:
        doc = {"track": {"name": world.name, "description": world.description,
                         "segments": len(world.segments),
                         "spawn": [world.spawn.x, world.spawn.y, world.spawn.theta],
                         "waypoints": 0 if world.waypoints is None else len(world.waypoints)},
               "table": {"n_scans": table.n_scans, "resolution": table.resolution,
                         "indices": table.indices.tolist(),
                         "angles": table.angles.tolist(),
                         "ranges": table.ranges.tolist()}}
        print(json.dumps(doc, indent=2))
        return 0
    print(f"track {world.name}: {len(world.segments)} wall segments, "
          f"spawn ({world.spawn.x:.2f}, {world.spawn.y:.2f}, {world.spawn.theta:.2f}), "
          f"{0 if world.waypoints is None else len(world.waypoints)} waypoints")
    print(f"  {world.description}")
    if args.table:
        print(table.dump())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="narrowsim",
                                     description="Narrow-space simulation toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="flat JSON file of flag defaults")

    p = sub.add_parser("train", help="train an agent over seeds")
    common(p)
    p.add_argument("--algo", choices=("ddpg", "dqn"), default="ddpg")
    p.add_argument("--reward", choices=MODES, default="fomt")
    p.add_argument("--world", default="track1", help="bundled name or track file")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds (0..N-1)")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--fine-tune", type=int, default=0, dest="fine_tune")
    p.add_argument("--max-steps", type=int, default=1000, dest="max_steps")
    p.add_argument("--warmup", type=int, default=1000)
    p.add_argument("--eval-every", type=int, default=0, dest="eval_every")
    p.add_argument("--stop-success-rate", type=float, default=None, dest="stop_success_rate")
    p.add_argument("--progress", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint over tracks")
    common(p)
    p.add_argument("--model", required=True, help="checkpoint .npz")
    p.add_argument("--tracks", default="track*", help="comma list of globs or bundled names")
    p.add_argument("--episodes", type=int, default=70)
    p.add_argument("--reward", choices=MODES, default="fomt")
    p.add_argument("--max-steps", type=int, default=1000, dest="max_steps")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", default=None, help="row label in reports")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-collision", help="compare collision detectors")
    common(p)
    p.add_argument("--world", default="big_track")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sampler", choices=("drive", "band"), default="drive")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench_collision)

    p = sub.add_parser("serve", help="run the teleop service")
    common(p)
    p.add_argument("--world", default="big_track")
    p.add_argument("--reward", choices=MODES, default="fomt")
    p.add_argument("--max-steps", type=int, default=1000, dest="max_steps")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--tick", type=float, default=0.2, help="seconds per frame")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("inspect", help="print track / safety table details")
    common(p)
    p.add_argument("--world", default="big_track")
    p.add_argument("--table", action="store_true", help="include the table dump")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_inspect)
    return parser


def _apply_config_file(parser, argv) -> None:
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    if not known.config:
        return
    try:
        with open(known.config) as fh:
            values = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"bad config file {known.config}: {exc}") from exc
    if not isinstance(values, dict):
        raise UsageError("config file must hold a flat JSON object")
    # Defaults apply to every subparser that knows the key; flags still win.
    subparsers = parser._subparsers._group_actions[0].choices.values()
    for sub in subparsers:
        known_keys = {a.dest for a in sub._actions}
        sub.set_defaults(**{k: v for k, v in values.items() if k in known_keys})
    leftovers = set(values) - {a.dest for sub in subparsers for a in sub._actions}
    if leftovers:
        raise UsageError(f"unknown config keys: {', '.join(sorted(leftovers))}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config_file(parser, argv)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return int(exc.code or 0)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 1
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports, not raises
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
