"""Finite-difference gradient check of the full model across encoder variants."""

import argparse
from dataclasses import replace
from itertools import product

from hipool.experiments import GRADCHECK_CONFIG, model_gradcheck


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--eps", type=float, default=1e-5)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    args = parser.parse_args()

    print("aggregator\tlow_adjacency\tsoftmax\tseed\tmax_rel_error")
    for agg, adj, softmax, seed in product(("sum", "mean", "std"), ("chain", "complete"),
                                           (False, True), args.seeds):
        cfg = replace(GRADCHECK_CONFIG, aggregator=agg, low_adjacency=adj,
                      attention_softmax=softmax, seed=seed)
        print(f"{agg}\t{adj}\t{softmax}\t{seed}\t{model_gradcheck(cfg, eps=args.eps):.3e}")


if __name__ == "__main__":
    main()
