"""Episodes, navigation metrics and field-dataset curation."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .acoustics import (
    FIELD_PITCH,
    FIELD_SIZE,
    BandSpectrum,
    FieldRecord,
    compute_field,
    downsample_field,
)
from .eikonal import descent_path
from .gridworld import TURN_ANGLE, Pose


def spl(S, l: float, p: float) -> float:
    """Success weighted by path length."""
    if not l > 0:
        raise ValueError("shortest-path length must be positive")
    if p < 0:
        raise ValueError("path length must be non-negative")
    return float(S) * l / max(p, l)


def soft_spl(l: float, p: float) -> float:
    return spl(1, l, p)


@dataclass(frozen=True)
class Episode:
    episode_id: str
    scene: str
    start: Pose
    goal: tuple[float, float]
    spectrum: BandSpectrum
    seed: int

    def to_json(self) -> str:
        return json.dumps({
            "episode_id": self.episode_id,
            "scene": self.scene,
            "start": [self.start.x, self.start.y, math.degrees(self.start.heading)],
            "goal": [float(self.goal[0]), float(self.goal[1])],
            "spectrum": self.spectrum.tolist(),
            "seed": int(self.seed),
        })

    @classmethod
    def from_json(cls, line: str) -> "Episode":
        d = json.loads(line)
        x, y, hd = d["start"]
        return cls(
            str(d["episode_id"]),
            str(d["scene"]),
            Pose(float(x), float(y), math.radians(float(hd))),
            (float(d["goal"][0]), float(d["goal"][1])),
            BandSpectrum(d["spectrum"]),
            int(d["seed"]),
        )


def write_episodes(episodes) -> str:
    return "".join(ep.to_json() + "\n" for ep in episodes)


def read_episodes(text: str) -> list[Episode]:
    return [Episode.from_json(ln) for ln in text.splitlines() if ln.strip()]


@dataclass(frozen=True)
class EpisodeResult:
    episode_id: str
    strategy: str
    S: int
    l: float
    p: float
    steps: int
    status: str
    spl: float
    soft_spl: float

    @classmethod
    def build(cls, episode_id, strategy, success, l, p, steps, status) -> "EpisodeResult":
        S = int(bool(success))
        if math.isfinite(l) and l > 0:
            return cls(episode_id, strategy, S, l, p, steps, status, spl(S, l, p), soft_spl(l, p))
        # goal unreachable from the start: nothing to score against
        return cls(episode_id, strategy, S, l, p, steps, status, 0.0, 0.0)

    def to_row(self) -> str:
        return f"{self.episode_id},{self.strategy},{self.S},{self.l!r},{self.p!r},{self.steps},{self.spl!r},{self.soft_spl!r},{self.status}"


RESULT_HEADER = "episode_id,strategy,S,l,p,steps,spl,soft_spl,status"


# ----------------------------------------------------------------------
# Generation
# ----------------------------------------------------------------------

TELEPHONE = (0.02, 0.15, 1.0, 0.45, 0.08)


def make_spectrum(kind: str, n_bands: int, rng: np.random.Generator) -> BandSpectrum:
    """Draw a source spectrum: ``flat``, ``tone``, ``telephone`` or ``skewed``."""
    if kind == "flat":
        return BandSpectrum(np.ones(n_bands))
    if kind == "tone":
        e = np.zeros(n_bands)
        e[int(rng.integers(n_bands))] = 1.0
        return BandSpectrum(e)
    if kind == "telephone":
        if n_bands == len(TELEPHONE):
            return BandSpectrum(TELEPHONE)
        # same shape resampled onto n bands
        xs = np.linspace(0, len(TELEPHONE) - 1, n_bands)
        return BandSpectrum(np.interp(xs, np.arange(len(TELEPHONE)), TELEPHONE))
    if kind == "skewed":
        e = np.zeros(n_bands)
        dom = int(rng.integers(n_bands))
        for b in range(n_bands):
            if b == dom:
                e[b] = 1.0
            elif rng.random() < 0.5:
                e[b] = 10.0 ** rng.uniform(-3.0, -0.5)
        return BandSpectrum(e)
    raise ValueError(f"unknown spectrum kind {kind!r}; valid: flat, tone, telephone, skewed")


@dataclass(frozen=True)
class EpisodeConstraints:
    min_distance: float = 1.5
    max_distance: float = 30.0
    spectra: tuple[str, ...] = ("flat", "tone", "telephone")
    max_rejections: int = 10_000


def generate_episodes(env, count: int, rng, constraints: EpisodeConstraints = EpisodeConstraints(), scene: str | None = None) -> list[Episode]:
    """Rejection-sample ``count`` episodes with start and goal on free cell centres."""
    rng = np.random.default_rng(rng)
    grid = env.grid
    scene = env.name if scene is None else scene
    cells = grid.free_cells()
    if len(cells) < 2:
        raise ValueError("scene needs at least two free cells")
    episodes = []
    rejections = 0
    n_headings = round(2 * math.pi / TURN_ANGLE)
    while len(episodes) < count:
        si, gi = rng.integers(len(cells), size=2)
        start, goal = grid.cell_to_world(cells[si]), grid.cell_to_world(cells[gi])
        d = env.distance_from(goal)[cells[si]]
        if not (math.isfinite(d) and constraints.min_distance <= d <= constraints.max_distance):
            rejections += 1
            if rejections > constraints.max_rejections:
                raise ValueError(f"episode constraints unsatisfiable after {constraints.max_rejections} rejections")
            continue
        heading = int(rng.integers(n_headings)) * TURN_ANGLE
        kind = constraints.spectra[int(rng.integers(len(constraints.spectra)))]
        spectrum = make_spectrum(kind, env.n_bands, rng)
        seed = int(rng.integers(2**31 - 1))
        episodes.append(Episode(f"{scene}-{len(episodes):04d}", scene, Pose(start[0], start[1], heading), goal, spectrum, seed))
    return episodes


# ----------------------------------------------------------------------
# Static samples and curation
# ----------------------------------------------------------------------


def receivers_along_path(env, episode: Episode, spacing: float = 1.0) -> list[tuple[float, float]]:
    """Start position plus cell centres roughly every ``spacing`` metres along the shortest path."""
    grid = env.grid
    dist = env.distance_from(episode.goal)
    path = descent_path(dist, grid.world_to_cell(episode.start.position))
    out = [episode.start.position]
    run = 0.0
    for a, b in zip(path, path[1:]):
        run += grid.resolution * math.hypot(b[0] - a[0], b[1] - a[1])
        if run >= spacing - 1e-9:
            out.append(grid.cell_to_world(b))
            run = 0.0
    return out


def curate_field_dataset(env, episodes, bands=None, L: int = FIELD_SIZE, pitch: float = FIELD_PITCH, spacing: float = 1.0) -> list[FieldRecord]:
    """Per-band noise-free fields at every receiver of every episode.

    ``L`` smaller than 9 is produced by centre-preserving subsampling of the
    9x9 field, so the coarse lattice keeps the full field's extent.
    """
    bands = range(env.n_bands) if bands is None else bands
    base = max(L, FIELD_SIZE)
    records = []
    for ep in episodes:
        for rcv in receivers_along_path(env, ep, spacing):
            for b in bands:
                f = compute_field(env, ep.goal, rcv, int(b), base, pitch)
                vals = f.values if L == base else downsample_field(f.values, L)
                records.append(FieldRecord(ep.scene, tuple(ep.goal), tuple(rcv), int(b), vals))
    return records
