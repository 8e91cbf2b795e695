"""Static peak-prediction errors per strategy on skewed-spectrum sources.

Prints mean angle / distance errors and paired bootstrap intervals of the
distance-error gap between the frequency-adaptive predictor and the others.
"""
import argparse

import numpy as np

from afpnav.acoustics import GridEnv
from afpnav.afp import NoiseModel, Strategy, calibrate_band_errors
from afpnav.episodes import EpisodeConstraints, generate_episodes
from afpnav.evaluation import prediction_errors, static_samples
from afpnav.mapgen import LayoutParams, generate_layout

STRATEGIES = [Strategy.RANDOM, Strategy.ALL_FREQ, Strategy.BEST_FREQ, Strategy.HIGHEST_ENERGY, Strategy.FREQ_ADAPTIVE]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--maps", type=int, default=10)
    ap.add_argument("--episodes", type=int, default=50, help="skewed episodes per map")
    ap.add_argument("--sigma", default="0.8,0.4,0.2,0.1,0.3")
    ap.add_argument("--floor", type=float, default=0.02)
    ap.add_argument("--alpha", type=float, default=5.0)
    ap.add_argument("--beta", type=float, default=0.8)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    sigma = tuple(float(s) for s in args.sigma.split(","))
    noise = NoiseModel(sigma, (args.floor,) * len(sigma), args.seed)
    envs, test, flat = {}, [], []
    for k in range(args.maps):
        name = f"map_{k:03d}"
        env = envs[name] = GridEnv(generate_layout(LayoutParams(), args.seed + k), name=name)
        test += generate_episodes(env, args.episodes, [1, k], EpisodeConstraints(spectra=("skewed",)))
        flat += generate_episodes(env, 10, [2, k], EpisodeConstraints(spectra=("flat",)))
    cal = [(envs[s.episode.scene], s.episode.goal, s.episode.spectrum, s.receiver) for s in static_samples(envs, flat)]
    prior = calibrate_band_errors(cal, noise).prior(args.alpha, args.beta)
    print("prior e =", [round(e, 3) for e in prior.errors])

    samples = static_samples(envs, test)
    errs = {s: [prediction_errors(envs[x.episode.scene], x, s, noise, prior) for x in samples] for s in STRATEGIES}
    keep = [i for i in range(len(samples)) if all(errs[s][i] is not None for s in STRATEGIES)]
    angle = {s: np.array([errs[s][i][0] for i in keep]) for s in STRATEGIES}
    dist = {s: np.array([errs[s][i][1] for i in keep]) for s in STRATEGIES}
    print(f"{len(keep)} static samples")
    print(f"{'strategy':<16}{'angle':>8}{'distance':>10}")
    for s in STRATEGIES:
        print(f"{s.value:<16}{angle[s].mean():8.3f}{dist[s].mean():10.3f}")

    rng = np.random.default_rng(args.seed)
    idx = rng.integers(len(keep), size=(5000, len(keep)))
    fa = dist[Strategy.FREQ_ADAPTIVE]
    print("\ndistance gap other - freq_adaptive, 90% bootstrap interval")
    for s in STRATEGIES[:-1]:
        boot = (dist[s] - fa)[idx].mean(axis=1)
        lo, hi = np.quantile(boot, [0.05, 0.95])
        print(f"{s.value:<16}[{lo:+.4f}, {hi:+.4f}]")


if __name__ == "__main__":
    main()
