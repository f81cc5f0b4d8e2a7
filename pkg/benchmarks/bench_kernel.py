"""Compare the compiled and pure-Python covariance kernels.

Usage: python benchmarks/bench_kernel.py [--repeat N]

Times (a) one batch ``run_trace`` over a full default episode and (b) a
full window-by-window episode through the environment, for each backend.
"""
import argparse
import timeit

import numpy as np

from procnet import kernel
from procnet.config import ExperimentConfig
from procnet.env import SensingEnv
from procnet.estimator import run_trace
from procnet.sensing import simulate_sensor_streams

DECISIONS = (1, 0, 2, 2, 4, 3, 1, 1, 0, 1)


def episode(sc, advance):
    env = SensingEnv(sc, advance=advance)
    for a in DECISIONS:
        env.step(a)
    return env.result()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    sc = ExperimentConfig().scenario()
    events = simulate_sensor_streams(sc.sensors, sc.schedule, DECISIONS)
    impls = {"python": kernel.py_advance}
    if kernel.BACKEND != "python":
        impls[kernel.BACKEND] = kernel.advance
    else:
        print("compiled kernel not built; timing the pure-Python fallback only")

    ref = run_trace(events, sc.model, sc.K, advance=kernel.py_advance).traces
    rows = []
    for name, adv in impls.items():
        got = run_trace(events, sc.model, sc.K, advance=adv).traces
        assert np.allclose(got, ref, rtol=1e-10), name
        n = 20
        t_batch = min(timeit.repeat(lambda: run_trace(events, sc.model, sc.K, advance=adv), number=n, repeat=args.repeat)) / n
        t_ep = min(timeit.repeat(lambda: episode(sc, adv), number=n, repeat=args.repeat)) / n
        rows.append((name, t_batch, t_ep))

    print(f"{len(events)} events, K = {sc.K}, state dimension {sc.model.n}")
    print(f"{'backend':<8} {'run_trace':>12} {'episode':>12}")
    for name, tb, te in rows:
        print(f"{name:<8} {1e3 * tb:>9.3f} ms {1e3 * te:>9.3f} ms")
    if len(rows) == 2:
        (_, pb, pe), (_, cb, ce) = rows
        print(f"speed-up: run_trace x{pb / cb:.1f}, episode x{pe / ce:.1f}")


if __name__ == "__main__":
    main()
