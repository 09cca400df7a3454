"""Classify the synthetic fixtures end to end and report timing.

Uses published weights when given, else He-initialized random weights
(probabilities are then meaningless, but every stage is exercised).

    python3 scripts/run_demo.py [--weights weights.mat] [--threads N]
"""

import argparse
import time
from pathlib import Path

import numpy as np

from iclabel_engine.cli import format_csv
from iclabel_engine.dataset import load_set
from iclabel_engine.matreader import load_mat
from iclabel_engine.network import ARCHITECTURE, NetworkWeights, load_weights
from iclabel_engine.pipeline import Compat, classify

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"


def random_weights(seed: int) -> NetworkWeights:
    rng = np.random.default_rng(seed)
    kernels, biases = {}, {}
    for s in ARCHITECTURE:
        fan_in = s.in_channels * s.kernel[0] * s.kernel[1]
        kernels[s.name] = rng.standard_normal(s.weight_shape) * np.sqrt(2.0 / fan_in)
        biases[s.name] = rng.standard_normal(s.out_channels) * 0.1
    return NetworkWeights(kernels, biases)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--weights", type=Path)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    weights = load_weights(load_mat(args.weights)) if args.weights else random_weights(args.seed)
    for name in ("synthetic_epoched.set", "synthetic_continuous.set"):
        t0 = time.perf_counter()
        ds = load_set(FIXTURES / name)
        table = classify(ds, weights, Compat(), threads=args.threads)
        dt = time.perf_counter() - t0
        print(f"# {name}: {ds.n_comp} components, {ds.trials} trial(s), {dt:.2f} s")
        print(format_csv(table))


if __name__ == "__main__":
    main()
