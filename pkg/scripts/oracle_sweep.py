"""Monte-Carlo check of closed-form cut probabilities on random trees.

For each tree size and marker count, prints the largest deviation between
simulated frequencies and closed-form values, in binomial standard errors.

    python3 scripts/oracle_sweep.py --trials 100000 --trees 10
"""

import argparse

import numpy as np

from hrfseg.graph_core import Rag, minimum_spanning_tree
from hrfseg.mc_oracle import estimate_cut_frequencies
from hrfseg.sws import DensityField, sws_valuation


def random_tree(rng, n):
    edges = [(int(rng.integers(0, i)), i, float(w)) for i, w in zip(range(1, n), rng.permutation(n - 1))]
    return minimum_spanning_tree(Rag.from_edges(n, edges))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--trees", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print("nodes  markers  max_sigma  verdict")
    for n in (4, 8, 16, 32):
        for n_markers in (0.5, 2.0, 8.0):
            worst = 0.0
            for t in range(args.trees):
                tree = random_tree(rng, n)
                w = rng.random(n)
                dens = DensityField(n_markers * w / w.sum())
                report = estimate_cut_frequencies(tree, dens, args.trials, args.seed * 1000 + t)
                worst = max(worst, float(report.with_closed_form(sws_valuation(tree, dens).p).deviations().max()))
            print(f"{n:5d}  {n_markers:7.1f}  {worst:9.2f}  {'PASS' if worst <= 4 else 'FAIL'}")


if __name__ == "__main__":
    main()
