"""Per-band peak error of the noisy predictors for a range of noise schedules.

    python scripts/band_calibration.py --sigma 0.8,0.4,0.2,0.1,0.3 --sigma 0.3,0.3,0.3,0.3,0.3
"""
import argparse

from afpnav.acoustics import GridEnv
from afpnav.afp import NoiseModel, calibrate_band_errors
from afpnav.episodes import EpisodeConstraints, generate_episodes
from afpnav.evaluation import static_samples
from afpnav.mapgen import LayoutParams, generate_layout


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--sigma", action="append", help="comma-separated per-band sigma; repeatable")
    ap.add_argument("--floor", type=float, default=0.02)
    ap.add_argument("--maps", type=int, default=10)
    ap.add_argument("--episodes", type=int, default=10, help="flat episodes per map")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    schedules = args.sigma or ["0.8,0.4,0.2,0.1,0.3"]

    envs, flat = {}, []
    for k in range(args.maps):
        name = f"map_{k:03d}"
        env = envs[name] = GridEnv(generate_layout(LayoutParams(), args.seed + k), name=name)
        flat += generate_episodes(env, args.episodes, [2, k], EpisodeConstraints(spectra=("flat",)))
    cal = [(envs[s.episode.scene], s.episode.goal, s.episode.spectrum, s.receiver) for s in static_samples(envs, flat)]

    for text in schedules:
        sigma = tuple(float(s) for s in text.split(","))
        rep = calibrate_band_errors(cal, NoiseModel(sigma, (args.floor,) * len(sigma), args.seed))
        print(f"sigma {list(sigma)}  n={rep.n_samples}")
        for b, (m, s) in enumerate(zip(rep.mean, rep.std)):
            print(f"  band {b}: {m:.3f} +- {s:.3f} m")


if __name__ == "__main__":
    main()
