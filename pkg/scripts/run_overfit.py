"""Epochs needed to memorize the 64-document fixture, per seed and aggregator."""

import argparse

from hipool.experiments import overfit_run


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--aggregators", nargs="+", default=["sum", "mean", "std"])
    parser.add_argument("--epochs", type=int, default=200)
    args = parser.parse_args()

    print("aggregator\tseed\tepochs\ttrain_f1\tloss")
    for agg in args.aggregators:
        for seed in args.seeds:
            r = overfit_run(seed, agg, args.epochs)
            print(f"{agg}\t{seed}\t{r.epochs}\t{r.train_f1:.4f}\t{r.final_loss:.4f}")


if __name__ == "__main__":
    main()
