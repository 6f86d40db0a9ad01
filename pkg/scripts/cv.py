"""10-fold CV on cross-planes data, linear and Gaussian; optionally any dataset file with a grid search."""

import argparse

from twinsgd.data import gen_cross_planes, load_dataset, minmax_scale
from twinsgd.experiments import ModelParams, cross_validate, grid_search


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", help="LIBSVM or CSV file; default is generated cross-planes data")
    ap.add_argument("--scale", action="store_true")
    ap.add_argument("--folds", type=int, default=10)
    ap.add_argument("--grid", action="store_true", help="5-fold grid search over penalties and widths")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    ds = load_dataset(args.data) if args.data else gen_cross_planes(500, seed=args.seed)
    if args.scale:
        (ds,) = minmax_scale(ds)
    for name, p in (("linear", ModelParams()), ("gaussian", ModelParams(kernel="gaussian", mu=0.1))):
        if args.grid:
            best = grid_search(ds, 5, p, seed=args.seed)[0]
            p = best.params
            print(f"{name:8s} grid best c1=c3={p.c1:g} c2=c4={p.c2:g}" + (f" mu={p.mu:g}" if name == "gaussian" else ""))
        res = cross_validate(ds, args.folds, p, seed=args.seed)
        print(f"{name:8s} {args.folds}-fold accuracy {100 * res.mean:.2f} +- {100 * res.std:.2f}")


if __name__ == "__main__":
    main()
