"""Compare compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; the last line times
one training epoch of the onesec preset with each backend swapped in.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rfidsense import _fallback

try:
    from rfidsense import _kernels
except ImportError:
    _kernels = None


def make_inputs(rng):
    counts = rng.integers(2, 12, 20_000)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    n = int(offsets[-1])
    rssi = rng.uniform(-90, -40, n)
    phase = rng.uniform(0, 2 * np.pi, n)
    p = rng.normal(size=11_207)
    g = rng.normal(size=p.size)
    logits = rng.normal(size=(4096, 7))
    labels = rng.integers(0, 7, 4096).astype(np.int64)
    return {
        "window_stats (20k windows)": lambda k: k.window_stats(rssi, phase, offsets, True),
        "adam_update (11,207 params)": lambda k: k.adam_update(p.copy(), g, np.zeros_like(p), np.zeros_like(p),
                                                               1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001),
        "softmax_xent (4096 x 7)": lambda k: k.softmax_xent(logits, labels),
    }


def epoch_time(pure: bool) -> float:
    env = dict(os.environ, RFIDSENSE_PURE_PYTHON="1" if pure else "0")
    code = (
        "import time, numpy as np\n"
        "from rfidsense.mlp import PRESETS, TrainConfig, init_network, train\n"
        "rng = np.random.default_rng(0)\n"
        "x = rng.normal(size=(3000, 4)); y = rng.integers(0, 7, 3000)\n"
        "net = init_network(PRESETS['onesec'])\n"
        "t = time.perf_counter(); train(net, (x, y), (x[:300], y[:300]), TrainConfig(max_epochs=3, patience=99))\n"
        "print((time.perf_counter() - t) / 3)\n"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    cases = make_inputs(np.random.default_rng(0))
    print(f"{'kernel':30s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        t_py = min(timeit.repeat(lambda: fn(_fallback), number=1, repeat=args.repeat)) * 1e3
        if _kernels is None:
            print(f"{name:30s} {t_py:10.3f} {'n/a':>10s}")
            continue
        t_cy = min(timeit.repeat(lambda: fn(_kernels), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:30s} {t_py:10.3f} {t_cy:10.3f} {t_py / t_cy:7.1f}x")
    py = epoch_time(True)
    cy = epoch_time(False) if _kernels is not None else float("nan")
    print(f"{'train epoch (onesec, 3000)':30s} {py * 1e3:10.1f} {cy * 1e3:10.1f} {py / cy:7.1f}x")


if __name__ == "__main__":
    main()
