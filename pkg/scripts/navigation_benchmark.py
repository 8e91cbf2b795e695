"""Navigation SR / SPL / Soft-SPL per strategy on procedural maps.

    python scripts/navigation_benchmark.py --maps 10 --episodes 20 --strategies oracle,freq_adaptive
"""
import argparse
import os
import time

from afpnav.acoustics import GridEnv
from afpnav.afp import NoiseModel, calibrate_band_errors
from afpnav.episodes import EpisodeConstraints, generate_episodes
from afpnav.evaluation import NEEDS_PRIOR, evaluate, parse_strategy, static_samples
from afpnav.mapgen import LayoutParams, generate_layout


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--maps", type=int, default=10)
    ap.add_argument("--episodes", type=int, default=20, help="episodes per map")
    ap.add_argument("--strategies", default="oracle,all_freq,freq_adaptive,direction_follower")
    ap.add_argument("--sigma", default="0.8,0.4,0.2,0.1,0.3")
    ap.add_argument("--floor", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    sigma = tuple(float(s) for s in args.sigma.split(","))
    noise = NoiseModel(sigma, (args.floor,) * len(sigma), args.seed)
    strategies = [s.strip() for s in args.strategies.split(",")]
    envs = {}
    episodes = []
    for k in range(args.maps):
        env = GridEnv(generate_layout(LayoutParams(), args.seed + k), name=f"map_{k:03d}")
        envs[env.name] = env
        episodes += generate_episodes(env, args.episodes, [args.seed, k])

    prior = None
    if any(parse_strategy(s)[1] in NEEDS_PRIOR for s in strategies):
        flat = []
        for k, (name, env) in enumerate(sorted(envs.items())):
            flat += generate_episodes(env, 10, [args.seed, 1000 + k], EpisodeConstraints(spectra=("flat",)), scene=name)
        cal = [(envs[s.episode.scene], s.episode.goal, s.episode.spectrum, s.receiver) for s in static_samples(envs, flat)]
        prior = calibrate_band_errors(cal, noise).prior()
        print("prior e =", [round(e, 3) for e in prior.errors])

    t = time.perf_counter()
    rep = evaluate(envs, episodes, strategies, noise, prior, mode="navigation", workers=args.workers)
    print(rep.aggregate_csv(), end="")
    timeouts = sum(r.status == "TIMEOUT" for r in rep.results)
    print(f"# {len(episodes)} episodes x {len(strategies)} strategies, {timeouts} timeouts, {time.perf_counter() - t:.1f}s")


if __name__ == "__main__":
    main()
