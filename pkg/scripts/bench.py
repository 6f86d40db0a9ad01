"""Iterations and wall time to reach each tolerance for SGTSVM and PEGASOS (with bias)."""

import argparse
import csv
from pathlib import Path

import numpy as np

from twinsgd.data import gen_gaussian_1d
from twinsgd.experiments import bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m-per-class", type=int, default=10_000)
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    ds = gen_gaussian_1d(args.m_per_class, 2.0, seed=args.seed)
    tols = [10.0 ** -i for i in range(1, 7)]
    recs = bench(ds, tols, args.trials, seed=args.seed)
    with open(args.out_dir / "bench.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("trial", "tol", "algo", "iterations", "converged", "seconds"))
        for r in recs:
            w.writerow((r.trial, r.tol, r.algo, r.iterations, int(r.converged), repr(r.seconds)))
    print(f"{'tol':>7s} {'sgtsvm it':>10s} {'pegasos it':>11s} {'sgtsvm s':>10s} {'pegasos s':>10s}")
    for tol in tols:
        it = {a: np.median([r.iterations for r in recs if r.tol == tol and r.algo == a]) for a in ("sgtsvm", "pegasos")}
        sec = {a: np.median([r.seconds for r in recs if r.tol == tol and r.algo == a]) for a in ("sgtsvm", "pegasos")}
        print(f"{tol:7.0e} {it['sgtsvm']:10.1f} {it['pegasos']:11.1f} {sec['sgtsvm']:10.2e} {sec['pegasos']:10.2e}")


if __name__ == "__main__":
    main()
