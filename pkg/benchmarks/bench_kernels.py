"""Time the hot kernels under both backends.

    python benchmarks/bench_kernels.py [--p 500] [--sweeps 200] [--repeat 3]

Reports seconds per Gibbs sweep and per DC-SIS scoring pass, for numba and
the numpy fallback, and checks the two backends agree on the output.
"""
import argparse
import time
import warnings

import numpy as np

from bmvs import _accel
from bmvs.core import HyperParams
from bmvs.dcsis import screen
from bmvs.gibbs import ChainConfig, run_chain
from bmvs.simgen import SimSpec, generate


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--p", type=int, default=500)
    ap.add_argument("--q", type=int, default=5)
    ap.add_argument("--sweeps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    warnings.simplefilter("ignore", UserWarning)

    data, _ = generate(SimSpec(1, n=args.n, p=args.p, q=args.q, seed=0))
    hp = HyperParams.default(data)
    cfg = ChainConfig(burn_in=0, keep_iters=args.sweeps, seed=1)

    rows = []
    results = {}
    for name in ("numba", "numpy"):
        if name == "numba" and not _accel.HAVE_NUMBA:
            continue
        _accel.set_backend(name)
        # first call compiles (or loads the cache); keep it out of the timing
        run_chain(data, hp, ChainConfig(burn_in=0, keep_iters=2, seed=1))
        screen(data, 10)
        t_chain, res = best_of(lambda: run_chain(data, hp, cfg), args.repeat)
        t_screen, rep = best_of(lambda: screen(data, 10), args.repeat)
        results[name] = (res, rep)
        rows.append((name, t_chain / args.sweeps, t_screen))

    print(f"n={args.n} p={args.p} q={args.q} sweeps={args.sweeps}")
    print(f"{'backend':<8} {'s/sweep':>12} {'s/screen':>12}")
    for name, per_sweep, per_screen in rows:
        print(f"{name:<8} {per_sweep:>12.3e} {per_screen:>12.3e}")
    if len(rows) == 2:
        print(f"speedup  {rows[1][1] / rows[0][1]:>12.1f}x {rows[1][2] / rows[0][2]:>11.1f}x")
        (ra, sa), (rb, sb) = results["numba"], results["numpy"]
        print("inclusion_prob identical:", np.array_equal(ra.inclusion_prob, rb.inclusion_prob))
        print("max |score diff|:", f"{np.max(np.abs(sa.scores - sb.scores)):.2e}")


if __name__ == "__main__":
    main()
