"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own subprocess because the fallback is selected at
import time by DEBTSWAP_DISABLE_NUMBA. Run with ``python3 benchmarks/bench_kernels.py``.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, time
import numpy as np
from debtswap import _kernels, paper_fixture, worst_set_function, tree_worst_set
from debtswap.oracle import RandomNetworkParams, random_network

def best_of(fn, repeat):
    fn()  # warm-up, includes JIT compilation
    times = []
    for _ in range(repeat):
        t = time.perf_counter(); fn(); times.append(time.perf_counter() - t)
    return min(times)

repeat = {repeat}
net = random_network(RandomNetworkParams(seed=1, n={n}, edge_prob=0.3, integer=False))
e, L, l = net.funds, net.liability_matrix, net.total_liabilities
E = np.vstack([e * s for s in np.linspace(0, 1, {rows})])
tree = paper_fixture("treepos").network
res = {{
    "numba": _kernels.NUMBA_ENABLED,
    "fictitious_default": best_of(lambda: _kernels.fictitious_default(e, L, l), repeat),
    "batch_target_assets": best_of(lambda: _kernels.batch_target_assets(E, L, l, 0, 1.0, 1e-12, 100000), repeat),
    "worst_set_treepos_K10": best_of(lambda: worst_set_function(tree, "v2", 10), repeat),
    "tree_dp_treepos_K10": best_of(lambda: tree_worst_set(tree, "v2", 10), repeat),
}}
print(json.dumps(res))
"""


def run(disable: bool, args) -> dict:
    env = {**os.environ, "DEBTSWAP_DISABLE_NUMBA": "1" if disable else "0"}
    code = WORKER.format(repeat=args.repeat, n=args.n, rows=args.rows)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--n", type=int, default=60, help="banks in the random network")
    parser.add_argument("--rows", type=int, default=2000, help="shock vectors per batch")
    args = parser.parse_args()
    jit, plain = run(False, args), run(True, args)
    print(f"{'kernel':<24}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in jit:
        if key == "numba":
            continue
        print(f"{key:<24}{jit[key]:>12.4f}{plain[key]:>12.4f}{plain[key] / jit[key]:>10.1f}x")
    if not jit["numba"]:
        print("note: numba unavailable, both columns use the numpy fallback")


if __name__ == "__main__":
    main()
