"""Test micro-F1 against head-truncation length on the long-range synthetic task.

The second marker sits in the last chunk stride, so lengths below the full
document hide it and the score should fall to chance.
"""

import argparse

from hipool.experiments import synth_length_ablation, synth_lengths


def main() -> None:
    short, full = synth_lengths()
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    parser.add_argument("--docs", type=int, default=1000)
    parser.add_argument("--lengths", type=int, nargs="+", default=[16, 32, short, full])
    args = parser.parse_args()

    print("length\tmicro_f1")
    for length, f1 in synth_length_ablation(args.seeds, args.docs, args.lengths):
        print(f"{length}\t{f1:.4f}")


if __name__ == "__main__":
    main()
