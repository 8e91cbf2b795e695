"""Acceptance suite: one PASS/FAIL line per criterion, each with its time budget.

Run on its own with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""
import math
import os
import time

import numpy as np
import pytest

from afpnav.acoustics import GridEnv, RoomSpec, image_source_rir
from afpnav.afp import BandErrorPrior, NoiseModel, Strategy, band_weights, calibrate_band_errors
from afpnav.eikonal import descent_path, fmm_solve
from afpnav.episodes import EpisodeConstraints, EpisodeResult, generate_episodes, soft_spl, spl
from afpnav.evaluation import evaluate, prediction_errors, static_samples
from afpnav.gridworld import OccupancyGrid
from afpnav.mapgen import LayoutParams, generate_layout
from oracles import dijkstra, largest_component, mirror_images, random_block_map

SIGMA = (0.8, 0.4, 0.2, 0.1, 0.3)
NOISE = NoiseModel(SIGMA, (0.02,) * 5, 0)
WORKERS = min(4, os.cpu_count() or 1)


@pytest.fixture
def verdict(request):
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def report(n, ok, detail, elapsed, budget):
        ok = ok and elapsed < budget
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail} ({elapsed:.1f}s, budget {budget:.0f}s)"
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        assert ok, line

    return report


@pytest.fixture(scope="module")
def maps():
    return {f"map_{k:03d}": GridEnv(generate_layout(LayoutParams(), k), name=f"map_{k:03d}") for k in range(10)}


def calibration_samples(envs, per_map=10):
    flat = []
    for k, (name, env) in enumerate(sorted(envs.items())):
        flat += generate_episodes(env, per_map, [2, k], EpisodeConstraints(spectra=("flat",)), scene=name)
    return [(envs[s.episode.scene], s.episode.goal, s.episode.spectrum, s.receiver) for s in static_samples(envs, flat)]


def test_criterion_1_band_weights(verdict):
    t = time.perf_counter()
    ok = band_weights(BandErrorPrior((1.0,) * 5), [1, 2, 4, 2, 1]).chosen == 2
    ok &= band_weights(BandErrorPrior((3.0, 2.0, 1.0, 2.0, 3.0)), np.ones(5)).chosen == 2
    wb = band_weights(BandErrorPrior((0.5, 1.0), 1.0, 1.0), [1, 4])
    ok &= wb.p.tolist() == [2.0, 1.0] and wb.q.tolist() == [0.25, 1.0] and wb.w.tolist() == [0.5, 1.0] and wb.chosen == 1

    rng = np.random.default_rng(1)
    bad = 0
    for _ in range(1000):
        n = int(rng.integers(2, 8))
        e = rng.uniform(0.05, 3.0, n)
        r = rng.uniform(0.01, 1.0, n)
        c = 10.0 ** rng.uniform(-6, 6)
        prior = BandErrorPrior(tuple(e))
        bad += band_weights(prior, r).chosen != band_weights(prior, r * c).chosen
        bad += band_weights(BandErrorPrior(tuple(e), 1e-9, 0.8), r).chosen != int(np.argmax(r))
        bad += band_weights(BandErrorPrior(tuple(e), 5.0, 1e-9), r).chosen != int(np.argmin(e))
    verdict(1, ok and bad == 0, f"worked examples {'ok' if ok else 'wrong'}, {bad} property violations in 1000 draws",
            time.perf_counter() - t, 1.0)


def test_criterion_2_fmm_vs_dijkstra(verdict):
    t = time.perf_counter()
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        free = largest_component(random_block_map(rng, 64, 64, 25))
        cells = np.argwhere(free)
        src = tuple(cells[rng.integers(len(cells))])
        T = fmm_solve(OccupancyGrid(~free, 1.0), [src]).values
        D = dijkstra(free, [src], 1.0)
        m = free & (D > 0)
        worst = max(worst, float(np.max(np.abs(T[m] - D[m]) / D[m])))
    occ = np.zeros((64, 64), bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    T = fmm_solve(OccupancyGrid(occ, 1.0), [(32, 32)]).values
    axis = max(
        float(np.max(np.abs(T[32, 1:-1] - np.abs(np.arange(1, 63) - 32)))),
        float(np.max(np.abs(T[1:-1, 32] - np.abs(np.arange(1, 63) - 32)))),
    )
    verdict(2, worst <= 0.10 and axis <= 1e-6, f"worst relative error {worst:.4f} (<= 0.10), axis error {axis:.1e}",
            time.perf_counter() - t, 30.0)


def same_taps(got, want, rtol=1e-8):
    """Multiset equality of (delay, amplitude) pairs up to the oracle's rounding."""
    if len(got) != len(want):
        return False
    left = list(want)
    for d, v in got:
        hit = next((i for i, (d2, v2) in enumerate(left) if math.isclose(d, d2, rel_tol=rtol) and math.isclose(v, v2, rel_tol=rtol)), None)
        if hit is None:
            return False
        left.pop(hit)
    return True


def test_criterion_3_reciprocity_and_decay(verdict):
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    mismatched = unmatched = 0
    for _ in range(20):
        w, h = rng.uniform(1.0, 10.0, 2)
        room = RoomSpec(w, h)
        for _ in range(5):
            s = (rng.uniform(0, w), rng.uniform(0, h))
            r = (rng.uniform(0, w), rng.uniform(0, h))
            for order in (0, 1, 2):
                band = int(rng.integers(5))
                a = image_source_rir(room, s, r, order, band)
                mismatched += a.taps != image_source_rir(room, r, s, order, band).taps
                rho = room.reflection[band]
                want = [(math.dist(p, r) / 343.0, rho**k / max(math.dist(p, r), 0.1))
                        for p, k in mirror_images(w, h, s, order).items()]
                unmatched += not same_taps(a.taps, want)
    increases = 0
    for seed in range(10):
        g = np.random.default_rng(seed)
        free = largest_component(random_block_map(g, 40, 40, 12))
        env = GridEnv(OccupancyGrid(~free, 0.25))
        cells = np.argwhere(free)
        src = tuple(cells[g.integers(len(cells))])
        dist = env.distance_from(env.grid.cell_to_world(src))
        for _ in range(5):
            path = descent_path(dist, tuple(cells[g.integers(len(cells))]))
            for band in range(5):
                p = [env.pressure(env.grid.cell_to_world(src), env.grid.cell_to_world(c), band) for c in path]
                # walking toward the source: pressure away from it never rises
                increases += sum(b < a for a, b in zip(p, p[1:]))
    ok = mismatched == 0 and unmatched == 0 and increases == 0
    verdict(3, ok, f"{mismatched} non-reciprocal, {unmatched} oracle mismatches, {increases} pressure increases",
            time.perf_counter() - t, 10.0)


def test_criterion_4_oracle_navigation(verdict, maps):
    t = time.perf_counter()
    episodes = []
    for k, (name, env) in enumerate(sorted(maps.items())):
        episodes += generate_episodes(env, 20, [4, k], scene=name)
    rep = evaluate(maps, episodes, ["oracle"], NoiseModel.silent(5), mode="navigation", workers=WORKERS)
    row = rep.row("oracle")
    verdict(4, row.n == 200 and row.sr >= 0.90 and row.spl >= 0.70,
            f"SR {row.sr:.3f} (>= 0.90), SPL {row.spl:.3f} (>= 0.70) over {row.n} episodes",
            time.perf_counter() - t, 300.0)


def _bootstrap_lower(d, rng, reps=5000):
    idx = rng.integers(len(d), size=(reps, len(d)))
    return float(np.quantile(d[idx].mean(axis=1), 0.05))


def test_criterion_5_strategy_ordering(verdict, maps):
    t = time.perf_counter()
    prior = calibrate_band_errors(calibration_samples(maps), NOISE).prior()
    test = []
    for k, (name, env) in enumerate(sorted(maps.items())):
        test += generate_episodes(env, 50, [1, k], EpisodeConstraints(spectra=("skewed",)), scene=name)
    samples = static_samples(maps, test)
    names = (Strategy.FREQ_ADAPTIVE, Strategy.HIGHEST_ENERGY, Strategy.ALL_FREQ, Strategy.BEST_FREQ)
    errs = {s: [prediction_errors(maps[x.episode.scene], x, s, NOISE, prior) for x in samples] for s in names}
    keep = [i for i in range(len(samples)) if all(errs[s][i] is not None for s in names)]
    dist = {s: np.array([errs[s][i][1] for i in keep]) for s in names}
    rng = np.random.default_rng(5)
    pairs = [
        (Strategy.FREQ_ADAPTIVE, Strategy.HIGHEST_ENERGY),
        (Strategy.HIGHEST_ENERGY, Strategy.ALL_FREQ),
        (Strategy.FREQ_ADAPTIVE, Strategy.BEST_FREQ),
    ]
    lows = {(a, b): _bootstrap_lower(dist[b] - dist[a], rng) for a, b in pairs}
    ok = len(keep) >= 500 and all(v >= 0 for v in lows.values())
    means = ", ".join(f"{s.value} {dist[s].mean():.3f}" for s in names)
    margins = ", ".join(f"{b.value}-{a.value} >= {v:.4f}" for (a, b), v in lows.items())
    verdict(5, ok, f"{len(keep)} samples; mean distance error {means}; 95% lower margins {margins}",
            time.perf_counter() - t, 300.0)


def test_criterion_6_calibration_order(verdict, maps):
    t = time.perf_counter()
    rep = calibrate_band_errors(calibration_samples(maps), NOISE)
    ok = rep.n_samples >= 500 and list(np.argsort(rep.mean)) == list(np.argsort(SIGMA))
    verdict(6, ok, f"{rep.n_samples} samples, e = [{', '.join(f'{m:.3f}' for m in rep.mean)}] for sigma {list(SIGMA)}",
            time.perf_counter() - t, 120.0)


def test_criterion_7_metrics(verdict):
    t = time.perf_counter()
    ok = spl(1, 10.0, 12.5) == 0.8 and spl(1, 10.0, 7.0) == 1.0 and spl(0, 10.0, 12.5) == 0.0
    ok &= soft_spl(4.0, 4.0) == 1.0 and soft_spl(4.0, 8.0) == 0.5
    ok &= EpisodeResult.build("x", "oracle", False, 3.0, 3.0, 9, "TIMEOUT").soft_spl == 1.0
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(10_000):
        l, p = rng.uniform(0.01, 50.0), rng.uniform(0.0, 100.0)
        S = int(rng.integers(2))
        a, b = spl(S, l, p), soft_spl(l, p)
        bad += not (0 <= a <= b <= 1)
    verdict(7, ok and bad == 0, f"hand values {'exact' if ok else 'wrong'}, {bad} spl > soft_spl violations in 10000 draws",
            time.perf_counter() - t, 10.0)


def test_criterion_8_determinism(verdict, maps):
    t = time.perf_counter()
    envs = dict(sorted(maps.items())[:3])
    episodes = []
    for k, (name, env) in enumerate(envs.items()):
        episodes += generate_episodes(env, 4, [8, k], EpisodeConstraints(spectra=("flat", "skewed")), scene=name)
    prior = BandErrorPrior((1.2, 0.8, 0.6, 0.5, 0.8))
    names = ["oracle", "freq_adaptive", "all_freq", "direction_follower"]
    a = evaluate(envs, episodes, names, NOISE, prior, workers=1)
    b = evaluate(envs, episodes, names, NOISE, prior, workers=3)
    ok = a.results_csv() == b.results_csv() and a.aggregate_csv() == b.aggregate_csv()
    verdict(8, ok, f"results/aggregate CSVs {'byte-identical' if ok else 'differ'} across 1 and 3 workers",
            time.perf_counter() - t, 300.0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
