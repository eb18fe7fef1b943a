"""Time the compiled and numpy Monte Carlo kernels on identical workloads.

Both backends consume the same Philox stream, so ruin counts must agree
exactly; the script checks that before printing timings.

    python3 benchmarks/bench_mc.py --paths 200000
"""
import argparse
import time

from surplus_ruin import ModelSpec, PremiumFunction, simulate_ruin
from surplus_ruin.montecarlo import DEFAULT_BACKEND

CASES = [
    ("exp-exp const", ModelSpec("exp-exp", 1.0, 2.0, PremiumFunction.constant(1.0))),
    ("erlang2-exp linear", ModelSpec("erlang2-exp", 1.0, 2.0, PremiumFunction.linear(1.0, 0.5))),
    ("exp-erlang2 rational", ModelSpec("exp-erlang2", 1.0, 3.0, PremiumFunction.rational(1.0, 0.5))),
]


def bench(m, backend, paths, horizon, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        res = simulate_ruin(m, 1.0, horizon=horizon, n_paths=paths, seed=1, backend=backend)
        best = min(best, time.perf_counter() - t0)
    return res.ruined_paths, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=100_000)
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if DEFAULT_BACKEND != "compiled":
        ap.exit(1, "compiled kernel not available; rebuild with pip install -e .\n")
    print(f"{'case':<22}{'compiled s':>12}{'python s':>12}{'speedup':>10}")
    for name, m in CASES:
        n_c, t_c = bench(m, "compiled", args.paths, args.horizon, args.repeat)
        n_p, t_p = bench(m, "python", args.paths, args.horizon, args.repeat)
        if n_c != n_p:
            raise SystemExit(f"{name}: ruin counts differ ({n_c} vs {n_p})")
        print(f"{name:<22}{t_c:>12.3f}{t_p:>12.3f}{t_p / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
