"""Wall-clock comparison of the numba and numpy ensemble kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--trajectories 2000] [--steps 1000] [--repeat 3]

Both backends integrate identical noise; the script also reports the largest
difference between their estimates.
"""

import argparse
import time

import numpy as np

from sqfilter import SqueezingParams, SystemModel
from sqfilter import _kernels
from sqfilter.bogoliubov import balanced_from_hkkr
from sqfilter.filtering import standard_normals, tilde_L
from sqfilter.quadrature import transfer_for
from sqfilter.system import SIGMA_MINUS, SIGMA_X, SIGMA_Z, superoperator


def setup():
    m = 0.8 * np.exp(1j * np.pi / 4)
    mdl = SystemModel(0.5 * SIGMA_Z, SIGMA_MINUS, SqueezingParams(1.0, m))
    tc = transfer_for(balanced_from_hkkr(1.0, m))
    rho0 = np.diag([0.0, 1.0]).astype(complex)
    obs = np.stack([SIGMA_X, SIGMA_Z])
    return mdl, tc, rho0, obs


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
    ap.add_argument("--trajectories", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    mdl, tc, rho0, obs = setup()
    dt = 1.0 / args.steps
    sup, lt = superoperator(mdl), tilde_L(mdl, tc)
    noise = standard_normals(0, args.trajectories, args.steps) * np.sqrt(tc.var_z * dt)
    lpl = mdl.L + mdl.L.conj().T

    cases = {
        "kushner": lambda use: _kernels.kushner_ensemble(rho0, sup, lt, obs, noise, dt, tc.var_z, 10, use=use)[0],
        "zakai": lambda use: _kernels.zakai_ensemble(rho0, sup, lt, obs, lpl, noise, dt, 10, use=use)[0],
    }
    if _kernels.numba_available():
        for fn in cases.values():
            fn("numba")  # compile outside the timed region

    print(f"{args.trajectories} trajectories x {args.steps} steps, best of {args.repeat}")
    print(f"{'kernel':<10}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fn in cases.items():
        t_np, est_np = best_of(lambda: fn("numpy"), args.repeat)
        if _kernels.numba_available():
            t_nb, est_nb = best_of(lambda: fn("numba"), args.repeat)
            diff = float(np.max(np.abs(est_np - est_nb)))
            print(f"{name:<10}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>10.2f}{diff:>14.2e}")
        else:
            print(f"{name:<10}{t_np:>12.3f}{'n/a':>12}")


if __name__ == "__main__":
    main()
