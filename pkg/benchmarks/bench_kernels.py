"""Compare the numba-compiled simplex kernels with the plain numpy path.

Each backend runs in its own interpreter because the switch is read at
import time.  Usage: ``python3 benchmarks/bench_kernels.py [--repeats N]``.
"""
import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from convbid._jit import backend_name
from convbid.bidmodels import ModelConfig, Side, build_sample_vp, build_sample_p_lp
from convbid.market_data import TrainingWindow
from convbid.solver import solve_lp

repeats = int(sys.argv[1])
rng = np.random.default_rng(7)
cases = []
for T, N in ((30, 1), (60, 2), (90, 4)):
    da = rng.integers(0, 40, (T, N)).astype(float)
    w = TrainingWindow.from_arrays(rng.normal(0, 8, (T, N)), da)
    pos = [(n, s) for n in w.nodes for s in Side]
    cases.append((f"VP T={T} N={N}", build_sample_vp(w, pos, ModelConfig(alpha=0.1)).program))
    cases.append((f"P T={T}", build_sample_p_lp(w, "n0", Side.SUPPLY, ModelConfig(alpha=0.1)).program))
out = {"backend": backend_name(), "cases": {}}
solve_lp(cases[0][1], backend="simplex")  # compile / warm caches
for name, lp in cases:
    t = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        sol = solve_lp(lp, backend="simplex")
        t.append(time.perf_counter() - t0)
    out["cases"][name] = {"size": [lp.num_rows, lp.num_vars], "median_s": float(np.median(t)),
                          "objective": sol.objective_value}
print(json.dumps(out))
"""


def run(disable_jit, repeats):
    env = dict(os.environ, CONVBID_DISABLE_JIT="1" if disable_jit else "0")
    res = subprocess.run([sys.executable, "-c", CHILD, str(repeats)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()
    jit, plain = run(False, args.repeats), run(True, args.repeats)
    print(f"{'case':<18}{'rows x cols':>14}{jit['backend']:>12}{plain['backend']:>12}{'speedup':>10}")
    for name, a in jit["cases"].items():
        b = plain["cases"][name]
        assert abs(a["objective"] - b["objective"]) <= 1e-7 * (1 + abs(a["objective"])), name
        size = "x".join(map(str, a["size"]))
        print(f"{name:<18}{size:>14}{a['median_s']:>11.4f}s{b['median_s']:>11.4f}s"
              f"{b['median_s'] / a['median_s']:>9.1f}x")


if __name__ == "__main__":
    main()
