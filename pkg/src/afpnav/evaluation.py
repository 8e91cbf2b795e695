"""Batch evaluation: navigation metrics and static peak-prediction errors per strategy."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .acoustics import compute_field, received_band_energies
from .afp import BandErrorPrior, NoiseModel, NoSignalError, Strategy, peak_angle_error, peak_distance, predict_field
from .agent import AgentConfig, Policy, run_episode
from .episodes import RESULT_HEADER, Episode, EpisodeResult, receivers_along_path

DIRECTION_FOLLOWER = "direction_follower"
STRATEGY_NAMES = tuple(s.value for s in Strategy) + (DIRECTION_FOLLOWER,)
NEEDS_PRIOR = {Strategy.BEST_FREQ, Strategy.HIGHEST_ENERGY, Strategy.FREQ_ADAPTIVE}
AGGREGATE_HEADER = "strategy,sr,spl,soft_spl,angle_err,dist_err,n"


def parse_strategy(name: str) -> tuple[str, Strategy, Policy]:
    """Canonical name, field predictor and policy for a strategy name."""
    key = name.strip().lower().replace("-", "_")
    if key == DIRECTION_FOLLOWER:
        return key, Strategy.ORACLE, Policy.DIRECTION_FOLLOWER
    try:
        s = Strategy.parse(key)
    except ValueError:
        raise ValueError(f"unknown strategy {name!r}; valid: {', '.join(STRATEGY_NAMES)}") from None
    return s.value, s, Policy.AFP


@dataclass(frozen=True)
class AggregateRow:
    strategy: str
    sr: float | None
    spl: float | None
    soft_spl: float | None
    angle_err: float | None
    dist_err: float | None
    n: int

    def to_row(self) -> str:
        vals = [self.sr, self.spl, self.soft_spl, self.angle_err, self.dist_err]
        cells = ["" if v is None else repr(float(v)) for v in vals]
        return ",".join([self.strategy, *cells, str(self.n)])


@dataclass
class EvaluationReport:
    results: list[EpisodeResult]
    aggregate: list[AggregateRow]
    sample_errors: dict[str, list[tuple[float, float]]]

    def results_csv(self) -> str:
        return "\n".join([RESULT_HEADER] + [r.to_row() for r in self.results]) + "\n"

    def aggregate_csv(self) -> str:
        return "\n".join([AGGREGATE_HEADER] + [a.to_row() for a in self.aggregate]) + "\n"

    def row(self, strategy: str) -> AggregateRow:
        for a in self.aggregate:
            if a.strategy == strategy:
                return a
        raise KeyError(strategy)


def _mean(xs) -> float | None:
    xs = list(xs)
    return math.fsum(xs) / len(xs) if xs else None


def _nav_job(job):
    env, episode, name, strategy, policy, noise, prior, config = job
    cfg = replace(config, policy=policy)
    return run_episode(env, episode, strategy, noise, prior, cfg, strategy_name=name).result


@dataclass(frozen=True)
class StaticSample:
    episode: Episode
    receiver: tuple[float, float]
    index: int


def static_samples(envs: Mapping, episodes: Sequence[Episode], spacing: float = 1.0) -> list[StaticSample]:
    """Receivers along each episode's shortest path, in episode-id order."""
    out = []
    for ep in sorted(episodes, key=lambda e: e.episode_id):
        for k, rcv in enumerate(receivers_along_path(envs[ep.scene], ep, spacing)):
            out.append(StaticSample(ep, rcv, k))
    return out


def prediction_errors(env, sample: StaticSample, strategy: Strategy, noise: NoiseModel, prior, size=9, pitch=0.5):
    """(angle error, distance error) of one prediction against the noise-free dominant-band field.

    Returns None for silent receivers.
    """
    ep = sample.episode
    r = received_band_energies(env, ep.goal, ep.spectrum, sample.receiver)
    if not np.any(r > 0):
        return None
    truth = compute_field(env, ep.goal, sample.receiver, int(np.argmax(r)), size, pitch)
    try:
        pred = predict_field(strategy, env, ep.goal, ep.spectrum, sample.receiver, noise, prior, (ep.seed, sample.index), size, pitch)
    except NoSignalError:
        return None
    return peak_angle_error(pred, truth), peak_distance(pred, truth)


def _pred_job(job):
    env, sample, strategy, noise, prior, size, pitch = job
    return prediction_errors(env, sample, strategy, noise, prior, size, pitch)


def _run(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs, chunksize=chunk))


def evaluate(
    envs: Mapping,
    episodes: Sequence[Episode],
    strategies: Sequence[str],
    noise: NoiseModel,
    prior: BandErrorPrior | None = None,
    config: AgentConfig = AgentConfig(),
    mode: str = "both",
    workers: int = 1,
    spacing: float = 1.0,
) -> EvaluationReport:
    """Per-strategy SR / SPL / Soft-SPL (navigation) and peak errors (prediction).

    Jobs are built and reduced in sorted order, so every number is
    independent of ``workers``.
    """
    if mode not in ("navigation", "prediction", "both"):
        raise ValueError("mode must be navigation, prediction or both")
    if not episodes or not strategies:
        raise ValueError("need at least one episode and one strategy")
    parsed = [parse_strategy(s) for s in strategies]
    names = [p[0] for p in parsed]
    if len(set(names)) != len(names):
        raise ValueError("duplicate strategy")
    for name, strat, _ in parsed:
        if strat in NEEDS_PRIOR and prior is None:
            raise ValueError(f"strategy {name} needs a band error prior")
    missing = sorted({ep.scene for ep in episodes} - set(envs))
    if missing:
        raise ValueError(f"episodes refer to unknown scenes: {', '.join(missing)}")
    episodes = sorted(episodes, key=lambda e: e.episode_id)
    if len({ep.episode_id for ep in episodes}) != len(episodes):
        raise ValueError("duplicate episode id")

    results: list[EpisodeResult] = []
    if mode in ("navigation", "both"):
        jobs = [
            (envs[ep.scene], ep, name, strat, policy, noise, prior, config)
            for ep in episodes
            for name, strat, policy in parsed
        ]
        results = sorted(_run(_nav_job, jobs, workers), key=lambda r: (r.episode_id, r.strategy))

    errors: dict[str, list[tuple[float, float]]] = {}
    if mode in ("prediction", "both"):
        samples = static_samples(envs, episodes, spacing)
        for name, strat, _ in parsed:
            jobs = [(envs[s.episode.scene], s, strat, noise, prior, config.field_size, config.field_pitch) for s in samples]
            errors[name] = [e for e in _run(_pred_job, jobs, workers) if e is not None]

    aggregate = []
    for name in sorted(names):
        rs = [r for r in results if r.strategy == name]
        es = errors.get(name, [])
        aggregate.append(AggregateRow(
            name,
            _mean(r.S for r in rs),
            _mean(r.spl for r in rs),
            _mean(r.soft_spl for r in rs),
            _mean(a for a, _ in es),
            _mean(d for _, d in es),
            len(rs) if rs else len(es),
        ))
    return EvaluationReport(results, aggregate, errors)
