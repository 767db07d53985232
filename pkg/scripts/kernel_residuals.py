"""Fixed-point residuals of both dislocation kernels over a grid of parameters.

    python scripts/kernel_residuals.py --samples 1000000
"""
import argparse

from pmquad.fragmentation import CHORD, QUAD, hypothesis_residual, solve_malthus
from pmquad.mathcore import BETA
from pmquad.streams import derive_stream


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20111)
    ap.add_argument("--samples", type=int, default=10**6)
    args = ap.parse_args()

    print("x      quad (quadrature)   chord (mc)            z")
    for i in range(1, 10):
        x = i / 10
        rq = hypothesis_residual(QUAD, BETA, BETA / 2, x)
        rc, se = hypothesis_residual(CHORD, BETA, BETA, x, "mc", samples=args.samples,
                                     rng=derive_stream(args.seed, i))
        print(f"{x:.1f}   {rq:+.3e}          {rc:+.3e} ({se:.1e})  {rc / se:+.2f}")
    root = solve_malthus(QUAD, lambda b: b / 2, tol=1e-12)
    mc_root = solve_malthus(CHORD, lambda b: b, tol=1e-5, method="mc", samples=args.samples,
                            rng=derive_stream(args.seed, 99))
    print(f"root quad {root!r}, chord {mc_root:.5f}, closed form {BETA!r}")


if __name__ == "__main__":
    main()
