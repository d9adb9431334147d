"""Sweep kernel throughput: numba vs the pure-Python fallback.

Run ``python benchmarks/bench_kernels.py``. The fallback is measured in a
child process started with CURIOSYM_DISABLE_NUMBA=1, since the flag is read
at import time.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def measure(n_actions: int, repeats: int) -> dict:
    from curiosym._accel import backend
    from curiosym.world import execute, sample_actions, spawn_random

    rng = np.random.default_rng(0)
    states = [spawn_random(rng, 2) for _ in range(n_actions)]
    actions = sample_actions(rng, n_actions)

    t0 = time.perf_counter()
    execute(states[0], actions[0])  # compile (or load from cache)
    warmup = time.perf_counter() - t0

    best = float("inf")
    checksum = 0.0
    for _ in range(repeats):
        t0 = time.perf_counter()
        total = 0.0
        for s, a in zip(states, actions):
            total += float(np.abs(execute(s, a).effect).sum())
        best = min(best, time.perf_counter() - t0)
        checksum = total
    return {
        "backend": backend(),
        "actions": n_actions,
        "warmup_s": warmup,
        "best_s": best,
        "us_per_action": 1e6 * best / n_actions,
        "checksum": checksum,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--actions", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args()

    if args.child:
        print(json.dumps(measure(args.actions, args.repeats)))
        return

    rows = []
    for disable in ("0", "1"):
        env = dict(os.environ, CURIOSYM_DISABLE_NUMBA=disable)
        cmd = [sys.executable, __file__, "--child", "--actions", str(args.actions), "--repeats", str(args.repeats)]
        out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout
        rows.append(json.loads(out.strip().splitlines()[-1]))

    print(f"{'backend':<8} {'warmup s':>9} {'best s':>8} {'us/action':>10}")
    for r in rows:
        print(f"{r['backend']:<8} {r['warmup_s']:9.3f} {r['best_s']:8.3f} {r['us_per_action']:10.1f}")
    fast, slow = rows
    print(f"speedup {slow['best_s'] / fast['best_s']:.1f}x")
    if fast["checksum"] != slow["checksum"]:
        sys.exit(f"backends disagree: {fast['checksum']!r} vs {slow['checksum']!r}")
    print("checksums match")


if __name__ == "__main__":
    main()
