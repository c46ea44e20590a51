"""Rate/complexity/distortion surface over the (alpha, beta) knobs at several noise levels."""
import argparse
import sys

import numpy as np

from uep_fountain.broadcast_sim import SWEEP_COLUMNS, GridPoint, ScalingTable, SourceConfig, sweep, write_csv
from uep_fountain.uep_design import DegreeDistribution


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--k", type=int, default=128)
    p.add_argument("--c", type=int, default=2)
    p.add_argument("--sigma2", type=float, nargs="+", default=[0.3, 0.7, 1.5])
    p.add_argument("--alphas", type=float, nargs="+", default=list(np.linspace(0, 4, 5)))
    p.add_argument("--betas", type=float, nargs="+", default=[0, 8, 14, 16])
    p.add_argument("--lam", default="auto")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="-")
    a = p.parse_args(argv)

    lam = a.lam if a.lam == "auto" else float(a.lam)
    src = SourceConfig(k=a.k, c=a.c, omega=DegreeDistribution.raptor(), lam=lam)
    grid = [GridPoint(s, al, be) for s in a.sigma2 for al in a.alphas for be in a.betas]
    rows = sweep(grid, a.trials, a.seed, src, ScalingTable(), jobs=a.jobs)
    out = sys.stdout if a.out == "-" else a.out
    write_csv(rows, out, SWEEP_COLUMNS, [f"seed={a.seed}", f"trials={a.trials}", f"k={a.k}",
                                         f"c={a.c}", f"lam={a.lam}"])


if __name__ == "__main__":
    main()
