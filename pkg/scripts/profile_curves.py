"""Renormalised slice counts t^-beta N_t(x) over x for one growing quadtree.

    python scripts/profile_curves.py --out out/profiles
"""
import argparse
import os

from pmquad.mathcore import BETA, k0_constant, profile_h
from pmquad.quadtree import Quadtree, extend_poisson, slice_query
from pmquad.streams import derive_stream
from pmquad.svg import emit_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20111)
    ap.add_argument("--t-grid", default="20,50,100,500,3000")
    ap.add_argument("--x-points", type=int, default=200)
    ap.add_argument("--out", default="out/profiles")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    xs = [(i + 0.5) / args.x_points for i in range(args.x_points)]
    rng = derive_stream(args.seed, 0)
    q = Quadtree()
    curves = {}
    for t in (float(v) for v in args.t_grid.split(",")):
        extend_poisson(q, t, rng)
        curves[f"t={t:g}"] = [(x, slice_query(q, x).n * t ** -BETA) for x in xs]
    k0 = k0_constant()
    curves["K0 h(x)"] = [(x, k0 * profile_h(x)) for x in xs]
    path = os.path.join(args.out, "profiles.svg")
    emit_svg(curves, "linear", path, title="t^-beta N_t(x)", xlabel="x")
    print(path)


if __name__ == "__main__":
    main()
