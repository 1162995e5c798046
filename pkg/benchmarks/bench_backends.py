"""Compare the numba and numpy solver kernels: wall time and agreement.

    python benchmarks/bench_backends.py [--tree 1] [--n 200] [--repeat 5]
"""

import argparse
import json
import time

import numpy as np

from logicagg import _accel, simgen
from logicagg.expansion import expand
from logicagg.reparam import build_reparam
from logicagg.solver import SolverConfig, design_product, fit
from logicagg.tuning import lambda_max


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--tree", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--loss", choices=("squared", "logistic"), default="squared")
    args = p.parse_args(argv)

    tree = simgen.builtin_tree(args.tree)
    X0 = simgen.gen_design(tree, args.n, 0.1, seed=0)
    if args.loss == "squared":
        y, _, _ = simgen.gen_regression(X0, 2.0, seed=0)
    else:
        y = simgen.gen_classification(X0, 1, 1, 0, 0, seed=0).astype(float)
    expanded, design = expand(tree, X0)
    rmap = build_reparam(expanded, design.X)
    Z = design_product(design.X, rmap.A)
    config = SolverConfig(loss=args.loss)
    lam = 0.1 * lambda_max(design.X, y, rmap, args.loss, XA=Z)

    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    report = {"tree": args.tree, "n": args.n, "p": design.p, "nodes": rmap.n_nodes,
              "loss": args.loss, "backends": {}}
    sols = {}
    for name in backends:
        fit(None, y, rmap, lam, 0.5, config, XA=Z, backend=name)  # compile / warm up
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            res = fit(None, y, rmap, lam, 0.5, config, XA=Z, backend=name)
            times.append(time.perf_counter() - t0)
        sols[name] = res
        report["backends"][name] = {"median_seconds": float(np.median(times)),
                                    "iterations": res.iterations,
                                    "us_per_iteration": 1e6 * float(np.median(times)) / res.iterations,
                                    "objective": res.objective}
    if len(sols) == 2:
        a, b = sols["numpy"], sols["numba"]
        report["max_abs_gamma_diff"] = float(np.max(np.abs(a.gamma - b.gamma)))
        report["speedup"] = (report["backends"]["numpy"]["median_seconds"]
                             / report["backends"]["numba"]["median_seconds"])
    print(json.dumps(report, indent=2))


if __name__ == "__main__":
    main()
