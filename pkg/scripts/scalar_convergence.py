"""Scalar benchmark x' = -x + sin(t/eps): measured deviation against eps/sqrt(1+eps^2).

Also prints the quadrature error of the plain Green's solve at a few steps,
which should fall by four for each halving of h.
"""

import math

import numpy as np

from greenavg import GridFunction, SolveConfig, green_apply_semiaxis, split
from greenavg.benchmarks import scalar_lin_avg


def main():
    eps_list = (0.4, 0.2, 0.1, 0.05, 0.025, 0.0125)
    rep = scalar_lin_avg(eps_list=eps_list).report
    print(f"{'eps':>8} {'sup_dev':>10} {'closed form':>12} {'rel err':>9}")
    for row in rep.rows:
        exact = row.eps / math.sqrt(1 + row.eps**2)
        print(f"{row.eps:8.4f} {row.sup_dev:10.6f} {exact:12.6f} {row.sup_dev / exact - 1:9.2%}")
    print(f"log-log slope {rep.slope:.4f}\n")

    s = split(np.array([[-1.0]]))
    print(f"{'h':>8} {'max error':>12}")
    for h in (0.04, 0.02, 0.01, 0.005):
        cfg = SolveConfig(h=h, T=20.0)
        phi = green_apply_semiaxis(s, GridFunction.sample(np.sin, 0.0, cfg.T, h), cfg)
        t = phi.times
        err = np.abs(phi.values[:, 0] - (np.sin(t) - np.cos(t) + np.exp(-t)) / 2).max()
        print(f"{h:8.4f} {err:12.3e}")


if __name__ == "__main__":
    main()
