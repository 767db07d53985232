"""Reproducible Monte Carlo experiments.

Each experiment is a grid of cells; each cell runs ``trials`` independent
trials on streams derived from (master_seed, cell, trial). Trials may be
spread over a process pool; results are collected in trial order before any
reduction, so outputs are identical for every worker count.

Experiment kinds
----------------
pmq         N_t(x) along one trajectory per trial, for every t of t_grid.
martingale  M_t(x) along one trajectory per trial.
generation  generation-n martingale for every n of n_grid.
extremes    log(I_t)/log(t) and the indicators S_t > t^(-1+eps).
tagged      generation-n tagged area next to a size-biased product.
coupling    K0 M_t(x) at t = T**coupling_power next to T^-beta N_T(x).

An entry "U" in x_list draws x uniformly per trial.
"""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .errors import DomainError
from .mathcore import BETA, k0_constant
from .martingale import generation_martingale, values_at
from .quadtree import Quadtree, extend_poisson, extremes, sample_sizebiased_product, sample_tagged_mass
from .stats import PowerFit, Summary, power_fit, sample_variance, summarize
from .streams import derive_stream

DEFAULT_T_GRID = (20.0, 50.0, 100.0, 500.0, 3000.0)
KINDS = ("pmq", "martingale", "generation", "extremes", "tagged", "coupling")
RESULTS_CSV_COLUMNS = ("experiment", "t", "x", "trials", "mean", "stderr", "ci_lo", "ci_hi", "scaled_mean")
UNIFORM = "U"


@dataclass
class ExperimentConfig:
    kind: str = "pmq"
    t_grid: list[float] = field(default_factory=lambda: list(DEFAULT_T_GRID))
    n_grid: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    x_list: list = field(default_factory=lambda: [0.5])
    trials: int = 1000
    master_seed: int = 20111
    workers: int = 1
    quad_tol: float = 1e-10
    stderr_mult: float = 3.0
    fit_window: tuple[float, float] | None = None
    epsilons: list[float] = field(default_factory=lambda: [0.2, 0.3])
    coupling_power: float = 0.2

    def validate(self) -> ExperimentConfig:
        if self.kind not in KINDS:
            raise DomainError(f"unknown experiment kind {self.kind!r}")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        for name in ("t_grid", "n_grid"):
            g = list(getattr(self, name))
            if any(b <= a for a, b in zip(g, g[1:])):
                raise DomainError(f"{name} must be strictly increasing")
        if any(t < 0 for t in self.t_grid) or any(n < 0 for n in self.n_grid):
            raise DomainError("grids must be non-negative")
        for x in self.x_list:
            if x != UNIFORM and not 0.0 <= float(x) <= 1.0:
                raise DomainError(f"x outside [0, 1]: {x!r}")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        cfg = cls(**known)
        if cfg.fit_window is not None:
            cfg.fit_window = tuple(cfg.fit_window)
        return cfg


@dataclass
class Cell:
    experiment: str
    t: float
    x: float | str
    values: np.ndarray


# -- trial functions (top level so they pickle) -----------------------------

def _pick_x(x, rng):
    return rng.random() if x == UNIFORM else float(x)


def _line_trial(job):
    x, t_grid, seed, cell, trial = job
    rng = derive_stream(seed, trial, cell)
    return values_at(_pick_x(x, rng), t_grid, rng)


def _generation_trial(job):
    x, n, seed, cell, trial = job
    rng = derive_stream(seed, trial, cell)
    return generation_martingale(Quadtree(), _pick_x(x, rng), n, rng).value


def _extremes_trial(job):
    t_grid, seed, cell, trial = job
    rng = derive_stream(seed, trial, cell)
    q = Quadtree()
    out = []
    for t in t_grid:
        extend_poisson(q, t, rng)
        out.append(extremes(q))
    return out


def _tagged_trial(job):
    n, seed, cell, trial = job
    rng = derive_stream(seed, trial, cell)
    return sample_tagged_mass(n, rng), sample_sizebiased_product(n, rng)


def _coupling_trial(job):
    x, t_small, t_big, seed, cell, trial = job
    rng = derive_stream(seed, trial, cell)
    (m_small, _), (_, n_big) = values_at(_pick_x(x, rng), [t_small, t_big], rng)
    return m_small, n_big


def _map(fn: Callable, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) < 2:
        return [fn(j) for j in jobs]
    chunk = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, jobs, chunksize=chunk))


_KIND_SALT = {k: i + 1 for i, k in enumerate(KINDS)}


def _cell_id(kind: str, i: int, j: int = 0) -> int:
    return _KIND_SALT[kind] * 1_000_000 + i * 1000 + j


def collect(cfg: ExperimentConfig) -> tuple[list[Cell], dict[str, float]]:
    """Run every trial of the experiment; return raw per-cell samples and wall times."""
    cfg.validate()
    seed, trials, workers = cfg.master_seed, cfg.trials, cfg.workers
    cells: list[Cell] = []
    timings: dict[str, float] = {}

    def timed(label, fn, jobs):
        t0 = time.perf_counter()
        out = _map(fn, jobs, workers)
        timings[label] = time.perf_counter() - t0
        return out

    kind = cfg.kind
    if kind in ("pmq", "martingale"):
        t_grid = [float(t) for t in cfg.t_grid]
        for i, x in enumerate(cfg.x_list):
            cid = _cell_id("pmq", i)  # both kinds read the same trajectories
            res = timed(f"{kind}:x={x}", _line_trial, [(x, t_grid, seed, cid, k) for k in range(trials)])
            for j, t in enumerate(t_grid):
                col = 0 if kind == "martingale" else 1
                cells.append(Cell(kind, t, x, np.array([r[j][col] for r in res], dtype=float)))
    elif kind == "generation":
        for i, x in enumerate(cfg.x_list):
            for n in cfg.n_grid:
                cid = _cell_id(kind, i, n)
                res = timed(f"generation:x={x}:n={n}", _generation_trial,
                            [(x, n, seed, cid, k) for k in range(trials)])
                cells.append(Cell(kind, float(n), x, np.array(res, dtype=float)))
    elif kind == "extremes":
        t_grid = [float(t) for t in cfg.t_grid]
        res = timed("extremes", _extremes_trial, [(t_grid, seed, _cell_id(kind, 0), k) for k in range(trials)])
        for j, t in enumerate(t_grid):
            small = np.array([r[j][0] for r in res])
            big = np.array([r[j][1] for r in res])
            ratio = np.log(small) / math.log(t) if t > 1 else np.full(trials, math.nan)
            cells.append(Cell("extremes:logI/logt", t, "", ratio))
            for eps in cfg.epsilons:
                cells.append(Cell(f"extremes:S>t^{eps - 1:g}", t, "", (big > t ** (eps - 1)).astype(float)))
    elif kind == "tagged":
        for n in cfg.n_grid:
            res = timed(f"tagged:n={n}", _tagged_trial, [(n, seed, _cell_id(kind, 0, n), k) for k in range(trials)])
            cells.append(Cell("tagged:mass", float(n), "", np.array([r[0] for r in res])))
            cells.append(Cell("tagged:product", float(n), "", np.array([r[1] for r in res])))
    elif kind == "coupling":
        k0 = k0_constant()
        for i, x in enumerate(cfg.x_list):
            for j, t_big in enumerate(cfg.t_grid):
                t_small = float(t_big) ** cfg.coupling_power
                cid = _cell_id(kind, i, j)
                res = timed(f"coupling:x={x}:T={t_big}", _coupling_trial,
                            [(x, t_small, float(t_big), seed, cid, k) for k in range(trials)])
                cells.append(Cell("coupling:K0*M_t", float(t_big), x, k0 * np.array([r[0] for r in res])))
                cells.append(Cell("coupling:T^-beta*N_T", float(t_big), x,
                                  float(t_big) ** -BETA * np.array([r[1] for r in res], dtype=float)))
    return cells, timings


def run_experiment(cfg: ExperimentConfig) -> list[Summary]:
    cells, _ = collect(cfg)
    return [summarize(c.experiment, c.t, c.x, c.values.tolist()) for c in cells]


def scaled_mean(s: Summary) -> float:
    if s.experiment == "pmq" and s.t > 0:
        return s.mean * s.t ** -BETA
    return math.nan


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def results_rows(summaries: Sequence[Summary]) -> list[list[str]]:
    rows = []
    for s in summaries:
        lo, hi = s.ci95
        rows.append([s.experiment, _fmt(s.t), _fmt(s.x), str(s.trials), _fmt(s.mean), _fmt(s.stderr),
                     _fmt(lo), _fmt(hi), _fmt(scaled_mean(s))])
    return rows


def write_results_csv(summaries: Sequence[Summary], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULTS_CSV_COLUMNS)
        w.writerows(results_rows(summaries))


def write_manifest(path, command: str, config: dict, master_seed: int | None, extra: dict | None = None) -> None:
    """Deterministic run manifest (no clocks, no host details)."""
    doc = {"artifact": "pmquad", "version": __version__, "command": command,
           "master_seed": master_seed, "config": config}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def write_timings(path, timings: dict[str, float], execution: dict | None = None) -> None:
    """Wall times and other run details that must stay out of the manifest."""
    doc = {"cell_wall_seconds": timings}
    if execution:
        doc["execution"] = execution
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


# -- derived analyses --------------------------------------------------------

def _window(cfg: ExperimentConfig, ts):
    if cfg.fit_window is None:
        return list(ts)
    lo, hi = cfg.fit_window
    return [t for t in ts if lo <= t <= hi]


def pmq_fit(summaries: Sequence[Summary], x, window: tuple[float, float] | None = None) -> PowerFit:
    pts = [(s.t, s.mean) for s in summaries if s.experiment == "pmq" and s.x == x and s.t > 0]
    if window is not None:
        pts = [p for p in pts if window[0] <= p[0] <= window[1]]
    return power_fit(pts)


def variance_scaling(cfg: ExperimentConfig, cells: list[Cell] | None = None) -> PowerFit:
    """Fit Var(N_t(x)) against t on log-log axes (first x of the config)."""
    if cfg.trials < 1000:
        raise DomainError("variance_scaling needs at least 1000 trials per cell")
    if cells is None:
        c = ExperimentConfig(**{**cfg.to_dict(), "kind": "pmq"})
        cells, _ = collect(c)
    x = cfg.x_list[0]
    pts = [(c.t, sample_variance(c.values.tolist())) for c in cells
           if c.experiment == "pmq" and c.x == x and c.t in _window(cfg, [c.t])]
    return power_fit(pts)


def extremes_scaling(cfg: ExperimentConfig, cells: list[Cell] | None = None) -> list[dict]:
    if cfg.trials < 1000:
        raise DomainError("extremes_scaling needs at least 1000 trials")
    if cells is None:
        cells, _ = collect(ExperimentConfig(**{**cfg.to_dict(), "kind": "extremes"}))
    table = []
    for t in cfg.t_grid:
        row = {"t": float(t)}
        ratio = next(c.values for c in cells if c.experiment == "extremes:logI/logt" and c.t == t)
        q05, q50, q95 = np.quantile(ratio, [0.05, 0.5, 0.95])
        row.update(logI_logt_q05=float(q05), logI_logt_median=float(q50), logI_logt_q95=float(q95))
        for eps in cfg.epsilons:
            ind = next(c.values for c in cells if c.experiment == f"extremes:S>t^{eps - 1:g}" and c.t == t)
            row[f"frac_S_gt_t^{eps - 1:g}"] = float(np.mean(ind))
        table.append(row)
    return table


def tagged_law(cfg: ExperimentConfig, cells: list[Cell] | None = None) -> list[dict]:
    """Per n: means of both samples and the two-sample KS p-value."""
    from scipy.stats import ks_2samp

    if cells is None:
        cells, _ = collect(ExperimentConfig(**{**cfg.to_dict(), "kind": "tagged"}))
    rows = []
    for n in cfg.n_grid:
        a = next(c.values for c in cells if c.experiment == "tagged:mass" and c.t == n)
        b = next(c.values for c in cells if c.experiment == "tagged:product" and c.t == n)
        sa, sb = summarize("", n, "", a.tolist()), summarize("", n, "", b.tolist())
        rows.append({"n": n, "mean_tagged": sa.mean, "stderr_tagged": sa.stderr,
                     "mean_product": sb.mean, "stderr_product": sb.stderr,
                     "ks_pvalue": float(ks_2samp(a, b).pvalue), "target": (4.0 / 9.0) ** n})
    return rows


def coupling_correlation(cfg: ExperimentConfig, cells: list[Cell] | None = None) -> list[dict]:
    if cells is None:
        cells, _ = collect(ExperimentConfig(**{**cfg.to_dict(), "kind": "coupling"}))
    rows = []
    for x in cfg.x_list:
        for t_big in cfg.t_grid:
            m = next(c.values for c in cells if c.experiment == "coupling:K0*M_t" and c.t == t_big and c.x == x)
            n = next(c.values for c in cells if c.experiment == "coupling:T^-beta*N_T" and c.t == t_big and c.x == x)
            rows.append({"x": x, "T": float(t_big), "t": float(t_big) ** cfg.coupling_power,
                         "corr": float(np.corrcoef(m, n)[0, 1])})
    return rows
