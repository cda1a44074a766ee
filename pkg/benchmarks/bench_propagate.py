"""Compare the compiled and pure-NumPy RK4 kernels.

Times the raw stepping kernel on a prebuilt generator stack and a full
``propagate`` call on the three-level maser, then checks that both
backends produce the same states.

    python benchmarks/bench_propagate.py [--steps 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from nessgeo import build_liouvillian, build_tlm, fig2_spec, propagate, steady_state
from nessgeo.kernels import get_rk4
from nessgeo.models import FIG2_BETA1_END, FIG2_BETA1_START, FIG2_DURATION
from nessgeo.protocols import LinearProtocol


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    model = build_tlm(fig2_spec())
    p = LinearProtocol([FIG2_BETA1_START], [FIG2_BETA1_END], FIG2_DURATION)
    rho0 = steady_state(build_liouvillian(model, p.start)).data
    h = p.duration / args.steps

    lam = p.value(np.linspace(0, p.duration, 2 * args.steps + 1))
    Ls = np.ascontiguousarray(model.liouvillian_matrix(lam))
    y0 = rho0.reshape(-1, order="F").astype(complex)

    print(f"{'stage':<12}{'backend':<10}{'seconds':>10}{'speedup':>10}")
    results = {}
    for stage in ("kernel", "propagate"):
        base = None
        for backend in ("python", "cython"):
            try:
                kernel = get_rk4(backend)
            except ImportError:
                print(f"{stage:<12}{backend:<10}{'n/a':>10}")
                continue
            if stage == "kernel":
                buf = np.empty((args.steps + 1, y0.size), dtype=complex)
                sec, _ = _best(lambda: kernel(Ls, y0, h, buf), args.repeat)
            else:
                sec, traj = _best(lambda: propagate(model, p, rho0, args.steps, backend=backend), args.repeat)
                results[backend] = traj.states
            base = base or sec
            print(f"{stage:<12}{backend:<10}{sec:>10.4f}{base / sec:>9.1f}x")

    if len(results) == 2:
        diff = np.max(np.abs(results["python"] - results["cython"]))
        print(f"max state difference between backends: {diff:.2e}")


if __name__ == "__main__":
    main()
