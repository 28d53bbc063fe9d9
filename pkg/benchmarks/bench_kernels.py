"""Compare the numba and pure-numpy backends.

Times residual/Jacobian assembly and the tridiagonal solve at several grid
sizes, then one full ``simulate`` run under each backend, and checks that both
backends agree.  Run with ``python3 benchmarks/bench_kernels.py [--repeat R]``.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from fastdiff import DiffusionModel, _accel
from fastdiff.domains import GridSpec, RadialDomain
from fastdiff.kernels import Operator, solve_tridiagonal
from fastdiff.radial_pde import EvolutionSpec, ProblemKind, simulate


def _operator(model, n):
    r = 1.0 + np.concatenate([[0.0], np.geomspace(1e-6, 3.0, n - 1)])
    u = np.exp(-(r - 1.0))
    return Operator(model, r, 2, sigma=1e-14, floor=1e-12), u


def bench_kernels(sizes, repeat):
    rows = []
    for model in (DiffusionModel.plaplace(1.5), DiffusionModel.porous_medium(0.5)):
        for n in sizes:
            op, u = _operator(model, n)
            rhs = np.zeros(n)
            for backend in ("numba", "numpy"):
                _accel.set_backend(backend)
                op.assemble(u, 2.0, rhs)  # warm up / compile
                t_asm = min(timeit.repeat(lambda: op.assemble(u, 2.0, rhs), number=20, repeat=repeat)) / 20
                t_sol = min(timeit.repeat(lambda: solve_tridiagonal(op.lo, op.di, op.up, op.res),
                                          number=20, repeat=repeat)) / 20
                rows.append((model.kind.value, n, backend, t_asm, t_sol))
    return rows


def bench_simulate(repeat):
    spec = EvolutionSpec(DiffusionModel.plaplace(1.5), RadialDomain.exterior_ball(1.0, 2),
                         ProblemKind.INITIAL_BOUNDARY, 1.0, (1e-4, 1e-3), GridSpec())
    out = {}
    for backend in ("numba", "numpy"):
        _accel.set_backend(backend)
        fields = simulate(spec)
        out[backend] = (min(timeit.repeat(lambda: simulate(spec), number=1, repeat=repeat)), fields[-1].values)
    diff = float(np.max(np.abs(out["numba"][1] - out["numpy"][1])))
    return {b: t for b, (t, _) in out.items()}, diff


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    previous = _accel.get_backend()
    try:
        print(f"{'model':<14}{'n':>7}  {'backend':<7}{'assemble [us]':>15}{'solve [us]':>12}")
        for kind, n, backend, ta, ts in bench_kernels(args.sizes, args.repeat):
            print(f"{kind:<14}{n:>7}  {backend:<7}{ta * 1e6:>15.1f}{ts * 1e6:>12.1f}")
        times, diff = bench_simulate(args.repeat)
        print(f"simulate (p=1.5, N=2, exterior ball): numba {times['numba']:.3f} s, "
              f"numpy {times['numpy']:.3f} s, speed-up {times['numpy'] / times['numba']:.1f}x, "
              f"max |u_numba - u_numpy| = {diff:.2e}")
    finally:
        _accel.set_backend(previous)


if __name__ == "__main__":
    main()
