"""Compiled vs NumPy kernel throughput.

    python benchmarks/bench_kernels.py [--sites 128] [--traj 2048] [--repeat 200]

Times single right-hand-side evaluations of both kernels, then one full
128-site mean-field evolution (1000 samples) per backend. Each backend's
evolution runs in a fresh interpreter because the backend is chosen at import.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from spinexchange import _kernels_py

try:
    from spinexchange import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


def random_states(n, rng):
    a = rng.normal(size=(n, 3)) + 1j * rng.normal(size=(n, 3))
    a /= np.linalg.norm(a, axis=1, keepdims=True)
    return np.ascontiguousarray(np.einsum("ia,ib->iab", a, a.conj()))


def rhs_inputs(n, rng):
    om = rng.uniform(0.5, 1.5, n)
    chi = np.ascontiguousarray(np.outer(om, om))
    return (random_states(n, rng), chi, rng.uniform(0, 1, n), rng.normal(size=n),
            rng.normal(size=n), rng.uniform(0, 0.1, n), np.empty((n, 3, 3), complex))


def time_call(fn, args, repeat):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=repeat, repeat=3)) / repeat


EVOLVE_SNIPPET = """
import json, time
from spinexchange import kernels, params, coupling, meanfield
p = params.PhysicalParams(kappa=params.two_pi(200e3), g=params.two_pi(1.5e6),
    gamma_atom=params.two_pi(6e6), delta_atom=params.two_pi(-10e9),
    delta_c=params.two_pi(-1.0992e6), n_bar=1000, n_atoms=1e5, b_field=4.0)
prof = coupling.gaussian_mode_profile(16.0, 2000.0, 150.0, (1625.0, 2375.0, 128),
                                      omega_peak=params.two_pi(3000.0))
g = coupling.build_coupling_graph(prof, p)
q = params.quadratic_zeeman(p)
st = meanfield.initialize(meanfield.hop_protocol(1625.0, 2375.1, 2000.0, 2375.1), prof)
T = meanfield.estimated_period(g, prof.density, q)
t0 = time.perf_counter()
meanfield.evolve(st, g, q, T, 1000)
print(json.dumps({"backend": kernels.BACKEND, "evolve_s": time.perf_counter() - t0}))
"""


def evolve_timing(pure):
    env = dict(os.environ)
    if pure:
        env["SPINEXCHANGE_PURE_PYTHON"] = "1"
    else:
        env.pop("SPINEXCHANGE_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", EVOLVE_SNIPPET], env=env, check=True,
                         capture_output=True, text=True).stdout
    return json.loads(out.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--sites", type=int, default=128)
    ap.add_argument("--traj", type=int, default=2048)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(1)

    mf = rhs_inputs(args.sites, rng)
    y = np.ascontiguousarray(rng.normal(size=(args.traj, 3)) + 1j * rng.normal(size=(args.traj, 3)))
    tm = (y, -0.3, 1.2, np.empty_like(y))

    print(f"{'kernel':12s} {'backend':9s} {'time/call':>12s}")
    rows = {}
    for name, args_k in (("meanfield", mf), ("threemode", tm)):
        for label, mod in (("python", _kernels_py), ("compiled", _kernels_c)):
            if mod is None:
                print(f"{name:12s} {label:9s} {'unavailable':>12s}")
                continue
            t = time_call(getattr(mod, f"{name}_rhs"), args_k, args.repeat)
            rows[(name, label)] = t
            print(f"{name:12s} {label:9s} {t * 1e6:10.1f}us")
        if (name, "compiled") in rows:
            print(f"{name:12s} speedup   {rows[(name, 'python')] / rows[(name, 'compiled')]:11.1f}x")

    print("\nfull evolution, 128 sites, 1000 samples over one estimated period")
    for pure in (True, False):
        r = evolve_timing(pure)
        print(f"  {r['backend']:9s} {r['evolve_s']:.3f}s")


if __name__ == "__main__":
    main()
