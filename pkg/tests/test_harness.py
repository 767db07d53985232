import json
import math

import numpy as np
import pytest

from pmquad.errors import DomainError
from pmquad.harness import (
    RESULTS_CSV_COLUMNS, ExperimentConfig, collect, coupling_correlation, extremes_scaling, pmq_fit,
    run_experiment, scaled_mean, tagged_law, variance_scaling, write_manifest, write_results_csv,
)
from pmquad.mathcore import BETA


def small(**kw):
    base = dict(t_grid=[5.0, 10.0, 20.0], trials=40)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_roundtrip():
    cfg = small(fit_window=(5.0, 20.0), x_list=[0.5, "U"])
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg


@pytest.mark.parametrize("bad", [
    dict(kind="nope"), dict(trials=0), dict(t_grid=[3.0, 2.0]), dict(x_list=[1.5]), dict(n_grid=[-1, 0]),
])
def test_config_validation(bad):
    with pytest.raises(DomainError):
        small(**bad).validate()


def test_pmq_summaries():
    out = run_experiment(small(x_list=[0.5, "U"]))
    assert [(s.t, s.x) for s in out] == [(t, x) for x in (0.5, "U") for t in (5.0, 10.0, 20.0)]
    assert all(s.trials == 40 for s in out)
    means = [s.mean for s in out if s.x == 0.5]
    assert means == sorted(means)
    s = out[-1]
    assert scaled_mean(s) == pytest.approx(s.mean * 20.0 ** -BETA)
    assert pmq_fit(out, 0.5).exponent > 0


def test_pmq_and_martingale_share_trajectories():
    a, _ = collect(small(kind="pmq", trials=10))
    b, _ = collect(small(kind="martingale", trials=10))
    assert [c.t for c in a] == [c.t for c in b]
    assert all(np.all(c.values >= 1) for c in a)
    assert all(np.all(c.values > 0) for c in b)


def test_workers_do_not_change_results():
    a, _ = collect(small(workers=1, trials=12))
    b, _ = collect(small(workers=2, trials=12))
    for ca, cb in zip(a, b):
        assert np.array_equal(ca.values, cb.values)


def test_other_kinds_run():
    cells, timings = collect(small(kind="extremes", t_grid=[10.0, 50.0]))
    labels = {c.experiment for c in cells}
    assert labels == {"extremes:logI/logt", "extremes:S>t^-0.8", "extremes:S>t^-0.7"}
    assert timings
    gen, _ = collect(small(kind="generation", n_grid=[0, 1]))
    assert np.allclose(gen[0].values, gen[0].values[0])
    tag = tagged_law(small(kind="tagged", n_grid=[1]))
    assert tag[0]["target"] == pytest.approx(4 / 9)
    cor = coupling_correlation(small(kind="coupling", t_grid=[50.0], coupling_power=0.5))
    assert -1 <= cor[0]["corr"] <= 1


def test_large_sample_analyses_refuse_small_runs():
    with pytest.raises(DomainError):
        variance_scaling(small())
    with pytest.raises(DomainError):
        extremes_scaling(small(kind="extremes"))


def test_csv_and_manifest_deterministic(tmp_path):
    cfg = small(trials=5)
    for d in ("a", "b"):
        (tmp_path / d).mkdir()
        write_results_csv(run_experiment(cfg), tmp_path / d / "results.csv")
        write_manifest(tmp_path / d / "manifest.json", "pmq", cfg.to_dict(), cfg.master_seed)
    for name in ("results.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    header = (tmp_path / "a" / "results.csv").read_text().splitlines()[0]
    assert header == ",".join(RESULTS_CSV_COLUMNS)
    doc = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert doc["master_seed"] == cfg.master_seed and doc["config"]["trials"] == 5


def test_seed_changes_results():
    a = run_experiment(small(master_seed=1))
    b = run_experiment(small(master_seed=2))
    assert any(not math.isclose(x.mean, y.mean) for x, y in zip(a, b))
