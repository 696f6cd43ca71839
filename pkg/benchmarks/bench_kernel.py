"""Compare the compiled slot kernel with the pure-Python fallback.

    python benchmarks/bench_kernel.py [--slots N] [--repeat R]

Both backends run the same configurations; the script checks that their
counters agree before reporting time per slot and the speed-up.
"""

import argparse
import time

from deadtime_qkd import simulator
from deadtime_qkd.simulator import Mode, SimConfig

CASES = [
    ("secure, L=0.1, k=100", dict(loss=0.1, k=100, mode=Mode.SECURE)),
    ("secure, L=0.01, k=500, eps=1e-4", dict(loss=0.01, k=500, eps=1e-4, mode=Mode.SECURE)),
    ("naive, L=0.1, k=1000", dict(loss=0.1, k=1000, mode=Mode.NAIVE)),
    ("self_disabling, L=1, k=100", dict(loss=1.0, k=100, mode=Mode.SELF_DISABLING)),
]


def best_time(config, backend, repeat):
    best, result = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = simulator.run(config, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--slots", type=float, default=2e5, help="slots per run for the Python backend")
    ap.add_argument("--scale", type=int, default=100, help="the compiled backend runs scale x more slots")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if "compiled" not in simulator.available_backends():
        raise SystemExit("compiled kernel not built; reinstall with Cython available")

    n_py = int(args.slots)
    print(f"{'case':<34}{'python ns/slot':>16}{'compiled ns/slot':>18}{'speed-up':>10}")
    for name, kw in CASES:
        loss, mode = kw.pop("loss"), kw.pop("mode")
        small = SimConfig.from_loss(loss, kw["k"], kw.get("eps", 0.0), n_slots=n_py, seed=1, mode=mode)
        big = SimConfig(small.params, n_py * args.scale, seed=1, mode=mode)
        t_py, r_py = best_time(small, "python", args.repeat)
        _, r_c = best_time(small, "compiled", 1)
        if r_py.signature() != r_c.signature():
            raise SystemExit(f"{name}: backends disagree")
        t_c, _ = best_time(big, "compiled", args.repeat)
        ns_py = 1e9 * t_py / small.n_slots
        ns_c = 1e9 * t_c / big.n_slots
        print(f"{name:<34}{ns_py:>16.1f}{ns_c:>18.2f}{ns_py / ns_c:>9.0f}x")


if __name__ == "__main__":
    main()
