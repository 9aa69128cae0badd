"""Time Gram assembly and the NLML gradient under the numba and numpy backends.

    python3 benchmarks/bench_gram.py [--n 300] [--q 3] [--repeat 5]

Each backend runs in its own subprocess because the choice is fixed at import.
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import json, sys, time
import numpy as np
from mocsm import _accel, data
from mocsm.gp import MOGPModel, nlml_and_grad
from mocsm.kernels import Family, gram_matrix, random_params

n, Q, repeat = map(int, sys.argv[1:4])
ds = data.generate_synthetic(seed=0, Q=3, n=n)
params = random_params(Family.MOCSM, Q, 3, 1, 0)
model = MOGPModel(params, 0.01, ds)
ch, X, _ = ds.stacked()
gram_matrix(params, ch, X)
nlml_and_grad(model)  # warm-up (JIT compile)

def best(fn):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)

print(json.dumps({"backend": _accel.backend(), "N": int(ch.size),
                  "gram_s": best(lambda: gram_matrix(params, ch, X)),
                  "nlml_grad_s": best(lambda: nlml_and_grad(model))}))
"""


def run(n, q, repeat, disable):
    env = dict(os.environ, MOCSM_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", CHILD, str(n), str(q), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=300, help="points per channel (3 channels)")
    ap.add_argument("--q", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args()
    rows = [run(a.n, a.q, a.repeat, disable) for disable in (False, True)]
    print(f"{'backend':8} {'N':>6} {'gram [ms]':>10} {'nlml+grad [ms]':>15}")
    for r in rows:
        print(f"{r['backend']:8} {r['N']:6d} {1e3 * r['gram_s']:10.2f} {1e3 * r['nlml_grad_s']:15.2f}")
    if rows[0]["backend"] == "numba":
        print(f"speed-up gram x{rows[1]['gram_s'] / rows[0]['gram_s']:.1f}, "
              f"nlml+grad x{rows[1]['nlml_grad_s'] / rows[0]['nlml_grad_s']:.1f}")


if __name__ == "__main__":
    main()
