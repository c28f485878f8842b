"""Compare the compiled and pure-Python kernels on representative workloads.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Times one posterior integration per prior/error pair and the pair-count
kernel on random vectors, for every importable backend.
"""

import argparse
import timeit

import numpy as np

from ranklab import _kernels
from ranklab.distributions import Normal, NormalErr, Pareto, QuarticErr, SuperLight
from ranklab.posterior import posterior

CASES = [
    ("normal/normal", Normal(0.0, 1.0), NormalErr(), 1.3, 0.4),
    ("pareto/quartic", Pareto(1.0, 4.0), QuarticErr(), 1.2, 0.3),
    ("normal/quartic spike", Normal(1.25, 2 / 9), QuarticErr(), -4.87, 0.0049),
    ("superlight/normal", SuperLight(), NormalErr(), 3.4, 0.25),
]


def _use(mod):
    _kernels.integrate = mod.integrate
    _kernels.log_post = mod.log_post
    _kernels.ascending_pairs = mod.ascending_pairs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    mods = _kernels.available_backends()
    rng = np.random.default_rng(0)
    vecs = {n: rng.standard_normal(n) for n in (64, 800)}
    results = {}
    for name, mod in mods.items():
        _use(mod)
        for label, prior, err, x, s in CASES:
            t = min(timeit.repeat(lambda: posterior(prior, err, x, s), number=1, repeat=args.repeat))
            results[(f"posterior {label}", name)] = t
        for n, v in vecs.items():
            t = min(timeit.repeat(lambda: mod.ascending_pairs(v), number=20, repeat=args.repeat)) / 20
            results[(f"ascending_pairs p={n}", name)] = t
    names = sorted(mods)
    print(f"{'workload':32s}" + "".join(f"{n:>14s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for w in dict.fromkeys(k[0] for k in results):
        row = [results[(w, n)] for n in names]
        line = f"{w:32s}" + "".join(f"{1e3 * r:12.3f}ms" for r in row)
        if len(names) > 1:
            line += f"{results[(w, 'python')] / results[(w, 'compiled')]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
