"""Mean slice count against t, with log-log fits and the variance exponent.

    python scripts/pmq_scaling.py --trials 10000 --workers 4
"""
import argparse
import os

from pmquad.harness import UNIFORM, ExperimentConfig, collect, pmq_fit, variance_scaling, write_results_csv
from pmquad.mathcore import BETA, k0_constant, profile_h
from pmquad.stats import summarize
from pmquad.svg import emit_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20111)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--t-grid", default="100,300,1000,3000")
    ap.add_argument("--out", default="out/pmq")
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    cfg = ExperimentConfig(kind="pmq", t_grid=[float(t) for t in args.t_grid.split(",")],
                           x_list=[0.5, UNIFORM], trials=args.trials, master_seed=args.seed, workers=args.workers)
    cells, timings = collect(cfg)
    summaries = [summarize(c.experiment, c.t, c.x, c.values.tolist()) for c in cells]
    write_results_csv(summaries, os.path.join(args.out, "results.csv"))
    for x in cfg.x_list:
        f = pmq_fit(summaries, x)
        print(f"x={x}: exponent {f.exponent:.4f} (beta {BETA:.4f}), amplitude {f.amplitude:.4f}")
    print(f"K0 h(1/2) = {k0_constant() * profile_h(0.5):.4f}")
    if cfg.trials >= 1000:
        print(f"variance exponent {variance_scaling(cfg, cells).exponent:.4f} (2 beta = {2 * BETA:.4f})")
    series = {f"x={x}": [(s.t, s.mean * s.t ** -BETA) for s in summaries if s.x == x] for x in cfg.x_list}
    emit_svg(series, "loglog", os.path.join(args.out, "scaled_means.svg"),
             title="t^-beta E[N_t(x)]", xlabel="t")
    print(f"wall time {sum(timings.values()):.0f}s")


if __name__ == "__main__":
    main()
