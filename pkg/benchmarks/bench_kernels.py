"""Time the compiled kernels against the numpy fallback.

Each backend runs in its own interpreter because the choice is made at import
time from DEGENTRACE_NUMPY.  Usage:  python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from degentrace import _accel
from degentrace.spectral import make_test_function
from degentrace.polynomial import Polynomial

rng = np.random.default_rng(0)
repeat = int(sys.argv[1])
s = rng.uniform(-200, 200, 4000)
xp = rng.uniform(-1, 1, 4096)
f = rng.standard_normal(4096)
pts = rng.uniform(-1, 1, (200000, 1))
poly = Polynomial([((4,), -1.0), ((6,), 1.0), ((2,), 0.5)], 1)


def best(fn):
    fn()  # warm-up, includes compilation on the numba path
    out = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


res = {
    "numba": _accel.USE_NUMBA,
    "phase_sum 4000x4096": best(lambda: _accel.phase_sum(s, xp, f)),
    "poly_eval 2e5 points": best(lambda: poly(pts)),
    "phi spline build": best(lambda: make_test_function(0.27).phi(0.0)),
    "checksum": float(np.abs(_accel.phase_sum(s[:10], xp, f)).sum()),
}
print(json.dumps(res))
"""


def run(numpy_only, repeat):
    env = dict(os.environ, DEGENTRACE_NUMPY="1" if numpy_only else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    if abs(fast["checksum"] - slow["checksum"]) > 1e-8 * abs(slow["checksum"]):
        raise SystemExit("backends disagree")
    print(f"{'kernel':24s} {'numba [s]':>10s} {'numpy [s]':>10s} {'speedup':>8s}")
    for key in fast:
        if key in ("numba", "checksum"):
            continue
        print(f"{key:24s} {fast[key]:10.4f} {slow[key]:10.4f} {slow[key] / fast[key]:8.1f}")


if __name__ == "__main__":
    main()
