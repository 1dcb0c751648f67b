"""Heat-equation averaging sweep over a longer eps ladder.

    python scripts/heat_sweep.py --points 31 --eps 0.4 0.2 0.1 0.05 0.025 0.0125
"""

import argparse

from greenavg.benchmarks import heat31


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--points", type=int, default=31)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.4, 0.2, 0.1, 0.05, 0.025, 0.0125])
    args = ap.parse_args()
    res = heat31(eps_list=tuple(args.eps), points=args.points)
    rep = res.report
    print(f"N = {res.telemetry['N']:.4f}  nu = {res.telemetry['nu']:.4f}  burn-in t_min = {rep.t_min:.3f}")
    print(f"{'eps':>8} {'sup_dev':>12} {'full sup':>12} {'bound':>12} {'slope':>8}")
    for row, slope in zip(rep.rows, rep.cumulative_slopes()):
        print(f"{row.eps:8.4f} {row.sup_dev:12.6f} {row.sup_dev_full:12.6f} {row.bound:12.6f} {slope:8.3f}")


if __name__ == "__main__":
    main()
