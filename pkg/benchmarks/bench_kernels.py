"""Compare the compiled and pure-Python kernels on ICP-sized workloads.

    python benchmarks/bench_kernels.py [--points 3000] [--queries 500] [--repeat 20]

Also times a full ICP registration with each backend.
"""

import argparse
import time

import numpy as np

from tumbletrack import icp, kernels, quat, shapes


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=3000)
    ap.add_argument("--queries", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    model_pts = shapes.satellite(spacing=np.sqrt(2.5 / args.points))[: args.points]
    queries = model_pts[rng.choice(len(model_pts), args.queries)] + rng.normal(scale=0.01, size=(args.queries, 3))
    W = rng.normal(size=(4, 4))
    W = W + W.T

    backends = kernels.available_backends()
    print(f"model points {len(model_pts)}, queries {args.queries}, best of {args.repeat}")
    print(f"{'backend':<10} {'build [ms]':>11} {'query [ms]':>11} {'eigh4 [us]':>11} {'ICP [ms]':>10}")
    rows = {}
    for name, (KD, eigh4) in backends.items():
        t_build = best_of(lambda: KD(model_pts), args.repeat)
        index = KD(model_pts)
        t_query = best_of(lambda: index.query(queries), args.repeat)
        t_eig = best_of(lambda: eigh4(W), args.repeat * 50)

        icp_mod_kd, icp_mod_eig = icp.KDIndex, icp.jacobi_eigh4
        icp.KDIndex, icp.jacobi_eigh4 = KD, eigh4
        try:
            model = icp.SurfaceModel(model_pts)
            true = icp.Pose(quat.from_axis_angle([1, 2, 3], 0.1), [0.02, -0.01, 0.03])
            scan = true.apply(model_pts[:: max(1, len(model_pts) // args.queries)])
            t_icp = best_of(lambda: icp.icp_register(scan, model, icp.Pose()), max(1, args.repeat // 4))
        finally:
            icp.KDIndex, icp.jacobi_eigh4 = icp_mod_kd, icp_mod_eig
        rows[name] = (t_build, t_query, t_eig, t_icp)
        print(f"{name:<10} {t_build * 1e3:11.3f} {t_query * 1e3:11.3f} {t_eig * 1e6:11.2f} {t_icp * 1e3:10.2f}")
    if len(rows) == 2:
        c, p = rows["compiled"], rows["python"]
        print("speed-up   " + " ".join(f"{pp / cc:11.1f}x" for cc, pp in zip(c, p)))


if __name__ == "__main__":
    main()
