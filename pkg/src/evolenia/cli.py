"""Command line front end: run, serve, calibrate, bench."""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
import time
from importlib import resources

import numpy as np

from .calibrate import run_calibration
from .engine import Engine, Seed, SimConfig
from .fields import ConfigError
from .gateway import CommandError, SimulationService, apply_command, serve, validate_command
from .worldio import RecordingWriter, load_pattern, save_snapshot

DEFAULT_SEED_RESOURCE = "primordium.json"


def _load_config(path: str | None) -> SimConfig:
    if path is None:
        return SimConfig()
    with open(path, "r", encoding="utf-8") as f:
        return SimConfig.from_json(f.read())


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise ConfigError(f"size must look like 256x256, got {text!r}") from exc


def _default_pattern_path():
    return resources.files("evolenia").joinpath("data", DEFAULT_SEED_RESOURCE)


def _seed_from_spec(spec: str, config: SimConfig) -> Seed:
    """Parse ``FILE`` or ``FILE@X,Y`` into a seed at that position (default center)."""
    path, at = (spec.rsplit("@", 1) + [None])[:2] if "@" in spec else (spec, None)
    sample, schema = load_pattern(path)
    if schema.to_dict() != config.schema.to_dict():
        print(f"note: {path} was bred under a different gene schema", file=sys.stderr)
    if sample.averaged_genotype is None:
        raise ConfigError(f"{path}: pattern has no averaged genotype; cannot seed from it")
    if at is not None:
        try:
            x, y = (int(v) for v in at.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad position {at!r}; want X,Y") from exc
    else:
        x, y = config.width // 2, config.height // 2
    return Seed(sample.phenotype, np.clip(sample.averaged_genotype, 0.0, 1.0), (x, y))


def _build_engine(args) -> Engine:
    if getattr(args, "snapshot_in", None):
        if args.config or getattr(args, "seed_pattern", None):
            raise ConfigError("--snapshot-in already carries config and state; drop --config/--seed-pattern")
        engine = Engine.from_snapshot(args.snapshot_in)
        return engine
    config = _load_config(args.config)
    if getattr(args, "size", None):
        config.width, config.height = _parse_size(args.size)
    if getattr(args, "rng_seed", None) is not None:
        config.rng_seed = args.rng_seed
    config.validate()
    engine = Engine(config)
    specs = getattr(args, "seed_pattern", None) or []
    if specs:
        seeds = [_seed_from_spec(s, config) for s in specs]
    else:
        with resources.as_file(_default_pattern_path()) as p:
            seeds = [_seed_from_spec(str(p), config)]
    engine.seed_world(seeds)
    return engine


def _load_schedule(path: str) -> list[dict]:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for n, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
                step = int(entry["step"])
                validate_command(entry["command"])
            except (json.JSONDecodeError, KeyError, TypeError, CommandError) as exc:
                raise ConfigError(f"{path}:{n}: bad schedule entry: {exc}") from exc
            entries.append({"step": step, "command": entry["command"]})
    entries.sort(key=lambda e: e["step"])
    return entries


def cmd_run(args) -> int:
    engine = _build_engine(args)
    schedule = _load_schedule(args.replay) if args.replay else []
    recorder = None
    if args.record:
        recorder = RecordingWriter(args.record, png_every=args.png_every, downsample=args.downsample)
        recorder.write_config(engine.config)
    view = {"genome_layer": None, "downsample": 1}
    i = 0
    try:
        for _ in range(args.steps):
            applied = []
            while i < len(schedule) and schedule[i]["step"] <= engine.state.step:
                cmd = schedule[i]["command"]
                apply_command(engine, validate_command(cmd), view)
                applied.append(cmd)
                i += 1
            engine.step()
            if recorder is not None:
                recorder.write_step(engine, applied or None)
            if args.log_every and engine.state.step % args.log_every == 0:
                s = engine.stats()
                mass = " ".join(f"{m:9.1f}" for m in s["mass"])
                print(
                    f"step {s['step']:7d}  mass {mass}  occupied {s['occupied_fraction']:6.3f}  "
                    f"alpha {s['alpha_fraction']:6.3f}  mut {s['mutations']}  pen {s['penalizations']}  "
                    f"{s['steps_per_sec']:5.2f} steps/s"
                )
    finally:
        if recorder is not None:
            recorder.close()
    if args.snapshot_out:
        save_snapshot(args.snapshot_out, engine.config, engine.state)
        print(f"snapshot written to {args.snapshot_out}")
    return 0


def cmd_serve(args) -> int:
    engine = _build_engine(args)
    try:
        host, port_text = args.listen.rsplit(":", 1)
        port = int(port_text)
    except ValueError:
        raise ConfigError(f"--listen wants HOST:PORT, got {args.listen!r}")
    service = SimulationService(
        engine,
        steps_per_frame=args.steps_per_frame,
        downsample=args.downsample,
        max_fps=args.fps,
    )
    service.start()
    print(f"serving ws://{host}:{port} (downsample {args.downsample}, <= {args.fps} fps)")
    try:
        asyncio.run(serve(service, host, port))
    except KeyboardInterrupt:
        pass
    finally:
        service.stop()
    return 0


def cmd_calibrate(args) -> int:
    report = run_calibration(n_samples=args.samples, rng_seed=args.rng_seed)
    print(f"ring decomposition, radius {report['radius']}, {report['n_ring']} rings, "
          f"{report['samples']} random genotypes (seed {report['rng_seed']}):")
    print(f"  relative L2 error  mean {report['mean']:.4f}  median {report['median']:.4f}  "
          f"p95 {report['p95']:.4f}  max {report['max']:.4f}")
    print(f"  quarter-turn asymmetry {report['rotation_asymmetry_max']:.2e}")
    if args.write:
        with open(args.write, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2, sort_keys=True)
            f.write("\n")
        print(f"report written to {args.write}")
    return 0


def cmd_bench(args) -> int:
    config = SimConfig()
    config.width, config.height = _parse_size(args.size)
    config.validate()
    engine = Engine(config)
    with resources.as_file(_default_pattern_path()) as p:
        engine.seed_world([_seed_from_spec(str(p), config)])
    for _ in range(args.warmup):
        engine.step()
    phases: dict[str, float] = {}
    marks: list[tuple[str, float]] = []

    def hook(name: str) -> None:
        marks.append((name, time.perf_counter()))

    t0 = time.perf_counter()
    for _ in range(args.steps):
        marks.clear()
        engine.step(phase_hook=hook)
        end = time.perf_counter()
        for (name, start), (_, nxt) in zip(marks, marks[1:] + [("", end)]):
            phases[name] = phases.get(name, 0.0) + (nxt - start)
    total = time.perf_counter() - t0
    sps = args.steps / total
    print(f"{config.width}x{config.height}, {args.steps} steps: "
          f"{sps:.2f} steps/s ({1000 * total / args.steps:.1f} ms/step)")
    for name, spent in sorted(phases.items(), key=lambda kv: -kv[1]):
        print(f"  {name:<16} {1000 * spent / args.steps:7.2f} ms")
    print(f"  real-time target is 20 steps/s at 512x1024: {'met' if sps >= 20 else 'not met'} at this size")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="evolenia",
        description="Continuous cellular automaton with per-pixel genomes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run headless, optionally recording")
    p.add_argument("--config", help="JSON config file (defaults used if omitted)")
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--size", help="override grid size, e.g. 256x256")
    p.add_argument("--rng-seed", type=int, default=None)
    p.add_argument("--seed-pattern", action="append", metavar="FILE[@X,Y]",
                   help="pattern file to seed with; repeatable")
    p.add_argument("--snapshot-in", help="resume from a snapshot instead of seeding")
    p.add_argument("--snapshot-out", help="write a snapshot when done")
    p.add_argument("--record", metavar="DIR", help="write stats.jsonl (and frames) here")
    p.add_argument("--png-every", type=int, default=0, metavar="N", help="PNG frame every N steps")
    p.add_argument("--downsample", type=int, default=4, help="downsample factor for PNGs")
    p.add_argument("--replay", metavar="FILE", help="JSONL command schedule to apply")
    p.add_argument("--log-every", type=int, default=100, metavar="N", help="print stats every N steps (0 = quiet)")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("serve", help="run the engine behind a WebSocket server")
    p.add_argument("--config")
    p.add_argument("--listen", default="127.0.0.1:8765", metavar="HOST:PORT")
    p.add_argument("--size", help="override grid size")
    p.add_argument("--rng-seed", type=int, default=None)
    p.add_argument("--seed-pattern", action="append", metavar="FILE[@X,Y]")
    p.add_argument("--snapshot-in")
    p.add_argument("--steps-per-frame", type=int, default=1)
    p.add_argument("--downsample", type=int, default=4)
    p.add_argument("--fps", type=float, default=20.0, help="frame rate cap")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("calibrate", help="measure ring-decomposition error")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--rng-seed", type=int, default=104)
    p.add_argument("--write", metavar="FILE", help="write the JSON report here")
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("bench", help="measure step throughput")
    p.add_argument("--size", default="512x1024")
    p.add_argument("--steps", type=int, default=20)
    p.add_argument("--warmup", type=int, default=3)
    p.set_defaults(fn=cmd_bench)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
