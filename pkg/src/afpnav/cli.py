"""Command-line entry point.

Every subcommand reads one optional config file (JSON or ``key=value`` lines),
applies flag overrides on top and writes its outputs atomically.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acoustics import DEFAULT_ABSORPTION, GridEnv, read_field_records, write_field_records
from .afp import DEFAULT_ALPHA, DEFAULT_BETA, ERROR_FLOOR, BandErrorPrior, NoiseModel, calibrate_band_errors
from .agent import AgentConfig, run_episode
from .eikonal import field_to_csv, fmm_solve
from .episodes import EpisodeConstraints, curate_field_dataset, generate_episodes, read_episodes, write_episodes
from .evaluation import NEEDS_PRIOR, evaluate, parse_strategy, static_samples
from .gridworld import OccupancyGrid, load_map
from .mapgen import LayoutParams, generate_layout


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    out: str = "out"
    workers: int = 1
    # maps
    maps: list = field(default_factory=list)
    map_dir: str = ""
    n_maps: int = 10
    map_width: int = 48
    map_height: int = 48
    rooms: int = 4
    door_width: int = 4
    min_room: int = 8
    furniture: int = 0
    map_resolution: float = 0.25
    # episodes
    episodes: str = ""
    episodes_per_map: int = 50
    spectra: list = field(default_factory=lambda: ["flat", "tone", "telephone"])
    min_distance: float = 1.5
    max_distance: float = 30.0
    # acoustics and prediction
    absorption: list = field(default_factory=lambda: list(DEFAULT_ABSORPTION))
    sigma: list = field(default_factory=lambda: [0.8, 0.4, 0.2, 0.1, 0.3])
    noise_floor: list = field(default_factory=lambda: [0.02] * 5)
    prior: str = ""
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    error_floor: float = ERROR_FLOOR
    field_size: int = 9
    n_bands: int = 5
    field_pitch: float = 0.5
    calibration_samples: int = 600
    # evaluation
    strategies: list = field(default_factory=lambda: ["oracle", "freq_adaptive"])
    mode: str = "both"
    max_steps: int = 500
    success_radius: float = 1.0
    sample_spacing: float = 1.0
    log_trajectories: bool = False
    # curation
    bands: list = field(default_factory=list)

    def validate(self):
        if len(self.absorption) != self.n_bands:
            raise UsageError("absorption needs one entry per band")
        if len(self.sigma) != self.n_bands or len(self.noise_floor) != self.n_bands:
            raise UsageError("sigma and noise_floor need one entry per band")
        if self.field_size < 3 or self.field_size % 2 == 0:
            raise UsageError("field_size must be odd and >= 3")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        for s in self.strategies:
            try:
                parse_strategy(s)
            except ValueError as e:
                raise UsageError(str(e)) from None

    def noise(self) -> NoiseModel:
        return NoiseModel(tuple(self.sigma), tuple(self.noise_floor), self.seed)

    def agent(self) -> AgentConfig:
        return AgentConfig(
            max_steps=self.max_steps,
            success_radius=self.success_radius,
            field_size=self.field_size,
            field_pitch=self.field_pitch,
        )

    def layout(self) -> LayoutParams:
        return LayoutParams(self.map_width, self.map_height, self.rooms, self.door_width, self.min_room, self.furniture, self.map_resolution)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _coerce(name: str, value):
    default = getattr(RunConfig(), name)
    if isinstance(default, bool):
        if isinstance(value, str):
            if value.lower() in ("1", "true", "yes"):
                return True
            if value.lower() in ("0", "false", "no"):
                return False
            raise UsageError(f"{name}: expected a boolean, got {value!r}")
        return bool(value)
    if isinstance(default, list):
        if isinstance(value, str):
            value = [v.strip() for v in value.split(",") if v.strip()]
        items = list(value)
        if name in ("absorption", "sigma", "noise_floor"):
            return [float(v) for v in items]
        if name == "bands":
            return [int(v) for v in items]
        return [str(v) for v in items]
    try:
        return type(default)(value)
    except (TypeError, ValueError):
        raise UsageError(f"{name}: cannot parse {value!r}") from None


def parse_config_text(text: str) -> dict:
    """JSON object, or ``key=value`` lines with ``#`` comments."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise UsageError(f"bad JSON config: {e}") from None
    else:
        doc = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"config line {n}: expected key=value")
            k, v = line.split("=", 1)
            v = v.strip()
            try:
                doc[k.strip()] = json.loads(v)
            except json.JSONDecodeError:
                doc[k.strip()] = v
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    return {k: _coerce(k, v) for k, v in doc.items()}


def build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(parse_config_text(Path(args.config).read_text()))
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from None
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = _coerce(name, v)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


# ----------------------------------------------------------------------
# I/O helpers
# ----------------------------------------------------------------------


def atomic_write(path, data) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _map_paths(cfg: RunConfig) -> list[Path]:
    if cfg.maps:
        paths = [Path(p) for p in cfg.maps]
    else:
        d = Path(cfg.map_dir) if cfg.map_dir else Path(cfg.out) / "maps"
        paths = sorted(p for p in d.glob("*") if p.suffix in (".txt", ".json"))
    if not paths:
        raise FileNotFoundError("no map files found; run gen-maps or set maps/map_dir")
    return paths


def load_envs(cfg: RunConfig) -> dict[str, GridEnv]:
    envs = {}
    for p in _map_paths(cfg):
        envs[p.stem] = GridEnv(load_map(p), tuple(cfg.absorption), p.stem)
    return envs


def _episodes_path(cfg: RunConfig) -> Path:
    return Path(cfg.episodes) if cfg.episodes else Path(cfg.out) / "episodes.jsonl"


def load_prior(cfg: RunConfig) -> BandErrorPrior | None:
    path = Path(cfg.prior) if cfg.prior else Path(cfg.out) / "prior.json"
    if not path.exists():
        return None
    p = BandErrorPrior.from_json(path.read_text())
    return BandErrorPrior(p.errors, cfg.alpha, cfg.beta)


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------


def cmd_gen_maps(cfg: RunConfig) -> list[Path]:
    params = cfg.layout()
    out = Path(cfg.out) / "maps"
    written = []
    for k in range(cfg.n_maps):
        grid = generate_layout(params, cfg.seed + k)
        path = out / f"map_{k:03d}.txt"
        atomic_write(path, grid.to_ascii())
        written.append(path)
    return written


def cmd_gen_episodes(cfg: RunConfig) -> Path:
    envs = load_envs(cfg)
    cons = EpisodeConstraints(cfg.min_distance, cfg.max_distance, tuple(cfg.spectra))
    episodes = []
    for k, (name, env) in enumerate(sorted(envs.items())):
        episodes += generate_episodes(env, cfg.episodes_per_map, [cfg.seed, k], cons, name)
    path = _episodes_path(cfg)
    atomic_write(path, write_episodes(episodes))
    return path


def cmd_curate(cfg: RunConfig) -> Path:
    envs = load_envs(cfg)
    episodes = read_episodes(_episodes_path(cfg).read_text())
    bands = cfg.bands or list(range(cfg.n_bands))
    records = []
    for ep in sorted(episodes, key=lambda e: e.episode_id):
        records += curate_field_dataset(envs[ep.scene], [ep], bands, cfg.field_size, cfg.field_pitch, cfg.sample_spacing)
    path = Path(cfg.out) / "fields.csv"
    atomic_write(path, write_field_records(records))
    return path


def calibration_set(envs, episodes, cfg: RunConfig, limit: int):
    """White-noise samples: flat-spectrum episodes' receivers, capped at ``limit``."""
    flat = [ep for ep in episodes if ep.spectrum.is_flat()]
    if not flat:
        raise ValueError("calibration requires flat-spectrum (white-noise) episodes")
    samples = static_samples(envs, flat, cfg.sample_spacing)[:limit]
    return [(envs[s.episode.scene], s.episode.goal, s.episode.spectrum, s.receiver) for s in samples]


def cmd_calibrate(cfg: RunConfig) -> tuple[Path, Path]:
    envs = load_envs(cfg)
    path = _episodes_path(cfg)
    if path.exists():
        episodes = read_episodes(path.read_text())
    else:
        cons = EpisodeConstraints(cfg.min_distance, cfg.max_distance, ("flat",))
        episodes = []
        for k, (name, env) in enumerate(sorted(envs.items())):
            episodes += generate_episodes(env, cfg.episodes_per_map, [cfg.seed, k], cons, name)
    eval_set = calibration_set(envs, episodes, cfg, cfg.calibration_samples)
    report = calibrate_band_errors(eval_set, cfg.noise(), cfg.field_size, cfg.field_pitch)
    prior = report.prior(cfg.alpha, cfg.beta, cfg.error_floor)
    out = Path(cfg.out)
    atomic_write(out / "prior.json", prior.to_json() + "\n")
    atomic_write(out / "calibration.csv", report.to_csv())
    return out / "prior.json", out / "calibration.csv"


def cmd_evaluate(cfg: RunConfig) -> tuple[Path, Path]:
    envs = load_envs(cfg)
    episodes = read_episodes(_episodes_path(cfg).read_text())
    prior = load_prior(cfg)
    if prior is None and any(parse_strategy(s)[1] in NEEDS_PRIOR for s in cfg.strategies):
        raise FileNotFoundError("strategies need a prior; run calibrate or set prior")
    report = evaluate(envs, episodes, cfg.strategies, cfg.noise(), prior, cfg.agent(), cfg.mode, cfg.workers, cfg.sample_spacing)
    out = Path(cfg.out)
    atomic_write(out / "results.csv", report.results_csv())
    atomic_write(out / "aggregate.csv", report.aggregate_csv())
    if cfg.log_trajectories and cfg.mode != "prediction":
        for ep in sorted(episodes, key=lambda e: e.episode_id):
            for s in cfg.strategies:
                name, strat, policy = parse_strategy(s)
                agent_cfg = dataclasses.replace(cfg.agent(), policy=policy)
                tr = run_episode(envs[ep.scene], ep, strat, cfg.noise(), prior, agent_cfg, name)
                text = "".join(json.dumps(r.to_json()) + "\n" for r in tr.steps)
                atomic_write(out / "trajectories" / f"{ep.episode_id}_{name}.jsonl", text)
    return out / "results.csv", out / "aggregate.csv"


def render_ascii(grid: OccupancyGrid, points=(), goal=None) -> str:
    """Map rows top first; ``*`` marks visited cells, ``S`` the first and ``E`` the last."""
    rows = [list(r) for r in grid.to_rows()]
    h = grid.height

    def put(cell, ch):
        i, j = cell
        if grid.in_bounds(cell):
            rows[h - 1 - j][i] = ch

    cells = [grid.world_to_cell(p) for p in points if grid.contains(p)]
    for c in cells:
        put(c, "*")
    if cells:
        put(cells[0], "S")
        put(cells[-1], "E")
    if goal is not None and grid.contains(goal):
        put(grid.world_to_cell(goal), "G")
    return "\n".join("".join(r) for r in rows) + "\n"


def to_pgm(values: np.ndarray) -> bytes:
    """Binary 8-bit PGM; image row 0 is the top (max iy), brightest pixel = largest value."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    scaled = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    img = np.round(scaled * 255).astype(np.uint8).T[::-1]
    h, w = img.shape
    return f"P5\n{w} {h}\n255\n".encode() + img.tobytes()


def read_trajectory(text: str) -> list[dict]:
    recs = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            x, y = float(rec["pose"][0]), float(rec["pose"][1])
        except (ValueError, KeyError, TypeError, IndexError):
            raise ValueError(f"malformed trajectory record on line {n}") from None
        recs.append({"pose": (x, y), "goal": rec.get("goal")})
    return recs


def cmd_render(cfg: RunConfig, trajectory: str | None, fields: str | None, map_path: str | None) -> list[Path]:
    out = Path(cfg.out) / "render"
    written = []
    if trajectory is not None:
        if map_path is None:
            raise UsageError("--map is required to render a trajectory")
        grid = load_map(map_path)
        recs = read_trajectory(Path(trajectory).read_text())
        goal = next((r["goal"] for r in reversed(recs) if r["goal"] is not None), None)
        path = out / (Path(trajectory).stem + ".txt")
        atomic_write(path, render_ascii(grid, [r["pose"] for r in recs], goal))
        written.append(path)
    elif map_path is not None:
        path = out / (Path(map_path).stem + ".txt")
        atomic_write(path, render_ascii(load_map(map_path)))
        written.append(path)
    if fields is not None:
        for k, rec in enumerate(read_field_records(Path(fields).read_text())):
            path = out / f"field_{k:05d}_b{rec.band}.pgm"
            atomic_write(path, to_pgm(rec.values))
            written.append(path)
    if not written:
        raise UsageError("render needs --trajectory/--map or --fields")
    return written


def cmd_distance_field(cfg: RunConfig, map_path: str, source: str) -> Path:
    grid = load_map(map_path)
    try:
        x, y = (float(v) for v in source.split(","))
    except ValueError:
        raise UsageError("--source must be x,y") from None
    if not grid.is_free_point((x, y)):
        raise ValueError("source must lie on a free cell")
    d = fmm_solve(grid, [grid.world_to_cell((x, y))])
    path = Path(cfg.out) / f"distance_{Path(map_path).stem}.csv"
    atomic_write(path, field_to_csv(d))
    return path


# ----------------------------------------------------------------------
# Argument parsing
# ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON or key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afpnav", description="Audio-goal navigation experiments on grid worlds.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-maps", help="procedural multi-room maps")
    _common(p)
    p.add_argument("--n-maps", dest="n_maps", type=int)
    p.add_argument("--rooms", type=int)
    p.add_argument("--door-width", dest="door_width", type=int)
    p.add_argument("--map-width", dest="map_width", type=int)
    p.add_argument("--map-height", dest="map_height", type=int)
    p.add_argument("--min-room", dest="min_room", type=int)
    p.add_argument("--furniture", type=int)

    p = sub.add_parser("gen-episodes", help="sample episodes on the maps")
    _common(p)
    p.add_argument("--map-dir", dest="map_dir")
    p.add_argument("--episodes-per-map", dest="episodes_per_map", type=int)
    p.add_argument("--spectra")
    p.add_argument("--episodes", help="output episode file")

    p = sub.add_parser("curate", help="per-band field dataset along episode paths")
    _common(p)
    p.add_argument("--map-dir", dest="map_dir")
    p.add_argument("--episodes")
    p.add_argument("--field-size", dest="field_size", type=int)
    p.add_argument("--bands")

    p = sub.add_parser("calibrate", help="per-band error prior from white-noise samples")
    _common(p)
    p.add_argument("--map-dir", dest="map_dir")
    p.add_argument("--episodes")
    p.add_argument("--sigma")
    p.add_argument("--noise-floor", dest="noise_floor")
    p.add_argument("--samples", dest="calibration_samples", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)

    p = sub.add_parser("evaluate", help="navigation and prediction metrics per strategy")
    _common(p)
    p.add_argument("--map-dir", dest="map_dir")
    p.add_argument("--episodes")
    p.add_argument("--prior")
    p.add_argument("--strategies")
    p.add_argument("--mode", choices=["navigation", "prediction", "both"])
    p.add_argument("--sigma")
    p.add_argument("--noise-floor", dest="noise_floor")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--log-trajectories", dest="log_trajectories", action="store_const", const=True)

    p = sub.add_parser("render", help="ASCII trajectory overlay and PGM field heatmaps")
    _common(p)
    p.add_argument("--map", dest="render_map")
    p.add_argument("--trajectory")
    p.add_argument("--fields")

    p = sub.add_parser("distance-field", help="geodesic distance CSV from a source point")
    _common(p)
    p.add_argument("--map", dest="render_map", required=True)
    p.add_argument("--source", required=True, help="x,y in metres")
    return parser


def run(argv) -> list:
    args = build_parser().parse_args(argv)
    cfg = build_config(args)
    cmd = args.command
    if cmd == "gen-maps":
        return cmd_gen_maps(cfg)
    if cmd == "gen-episodes":
        return [cmd_gen_episodes(cfg)]
    if cmd == "curate":
        return [cmd_curate(cfg)]
    if cmd == "calibrate":
        return list(cmd_calibrate(cfg))
    if cmd == "evaluate":
        return list(cmd_evaluate(cfg))
    if cmd == "render":
        return cmd_render(cfg, args.trajectory, args.fields, args.render_map)
    if cmd == "distance-field":
        return [cmd_distance_field(cfg, args.render_map, args.source)]
    raise UsageError(f"unknown command {cmd}")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        for path in run(argv):
            print(path)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
