"""Run every figure preset, write one CSV per figure and print the ordering verdicts.

    python scripts/reproduce_figures.py --out results/ --setting primary
"""

import argparse
import time
from pathlib import Path

from splitflow.harness import FIGURES, dominance_violations, geometric_mean, results_to_csv, run_figure
from splitflow.traffic import Fixed, TrafficConfig, UniformInt

SETTINGS = {
    "primary": {},
    "fixed-size": {"size_dist": Fixed(1000)},
    "uniform-range": {"call_bandwidth_dist": UniformInt(16, 112)},
}


def msd_ratio(results, better, worse):
    by = {}
    for r in results:
        by.setdefault((r.seed, r.weights.weights), {})[r.algorithm] = r.msd
    pairs = [v for v in by.values() if better in v and worse in v]
    return geometric_mean(v[better] / v[worse] for v in pairs)


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--out", type=Path, default=Path("results"))
    parser.add_argument("--setting", choices=sorted(SETTINGS), default="primary")
    parser.add_argument("--packets", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--figures", type=lambda s: [int(x) for x in s.split(",")], default=sorted(FIGURES))
    args = parser.parse_args()

    traffic = TrafficConfig(n_packets=args.packets, seed=args.seed, **SETTINGS[args.setting])
    args.out.mkdir(parents=True, exist_ok=True)
    for number in args.figures:
        fig = FIGURES[number]
        start = time.perf_counter()
        results = run_figure(fig, traffic, workers=args.workers)
        elapsed = time.perf_counter() - start
        n_paths = 3 if fig.family == "sweep" else 5
        path = args.out / f"figure{number}_{args.setting}.csv"
        path.write_text(results_to_csv(results, n_paths), encoding="utf-8")
        bad = dominance_violations(results, fig.better, fig.worse, fig.uniform_tie)
        verdict = "holds" if not bad else f"violated at {len(bad)} points"
        ratio = msd_ratio(results, fig.better, fig.worse)
        print(
            f"figure {number:>2} {fig.title:<45} {fig.better.name} < {fig.worse.name}: {verdict:<22}"
            f" gm ratio {ratio:.3g}  ({elapsed:.1f}s) -> {path}"
        )


if __name__ == "__main__":
    main()
