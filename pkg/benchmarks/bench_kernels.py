"""Time the compiled kernels against the pure-numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat N]

The accelerator flag is read at import, so each path runs in its own
interpreter. Compilation is warmed up before timing.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from topomix import synth_fig2
from topomix.decompose import count_inversions
from topomix.metric import t_m
from topomix.persistence import delay_embed, persistence_from_distances
from topomix.persistence.embedding import _maxmin, pairwise_distances

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
sine = np.ascontiguousarray(delay_embed(synth_fig2(200, 4 * np.pi, 0.2, 0).values[2]).points)
sine_d = pairwise_distances(sine)
small = rng.normal(size=(60, 3))
small_d = pairwise_distances(small)
cloud = rng.normal(size=(4000, 21))
perm = rng.permutation(200_000).astype(float)
coord = rng.uniform(size=200_000)
cases = {
    "pairwise_distances 180x21": lambda: pairwise_distances(sine),
    "maxmin 4000 -> 256": lambda: _maxmin(cloud, 256, 0),
    "count_inversions n=2e5": lambda: count_inversions(perm),
    "unwrap n=2e5": lambda: t_m(coord),
    "rips 60 random points": lambda: persistence_from_distances(small_d),
    "rips 180-point sine loop": lambda: persistence_from_distances(sine_d),
}
out = {}
for name, fn in cases.items():
    fn()
    n = repeat if "rips 180" not in name or sys.argv[2] == "1" else 1
    out[name] = min(timeit.repeat(fn, number=1, repeat=n))
json.dump(out, sys.stdout)
"""


def run(no_numba: bool, repeat: int) -> dict:
    env = dict(os.environ, TOPOMIX_NO_NUMBA="1" if no_numba else "0")
    res = subprocess.run([sys.executable, "-c", WORKER, str(repeat), "0" if no_numba else "1"],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    fast = run(False, args.repeat)
    slow = run(True, args.repeat)
    width = max(map(len, fast))
    print(f"{'kernel':<{width}}  {'numba (s)':>10}  {'numpy (s)':>10}  {'speedup':>8}")
    for name in fast:
        print(f"{name:<{width}}  {fast[name]:>10.4f}  {slow[name]:>10.4f}  "
              f"{slow[name] / fast[name]:>7.1f}x")


if __name__ == "__main__":
    main()
