import csv
import json

import numpy as np
import pytest

from sqtubes.harness import (TrialConfig, mi_experiment, validate, validate_compression,
                             validate_hull, validate_order_stat, validate_qt, violation_cap,
                             wilson_interval)


def cfg(**kw):
    base = dict(generator="linear", n_train=200, n_eval=20_000, trials=20, delta=0.05)
    base.update(kw)
    return TrialConfig(**base)


def test_cap_value():
    assert violation_cap(0.05, 200) == pytest.approx(0.0802, abs=1e-4)
    lo, hi = wilson_interval(0, 200)
    assert lo == 0.0 and 0 < hi < 0.02


def test_compression_small_runs():
    r = validate_compression(cfg())
    assert r.violation_rate <= r.cap
    assert all(row["bound"] == pytest.approx(0.10494562968971374) for row in r.rows)
    r50 = validate_compression(cfg(n_train=50))
    assert r50.rows[0]["bound"] > r.rows[0]["bound"] and r50.violation_rate <= 0.05
    assert r.summary_line() == "violations 0/20 (bound delta=0.05)"


def test_single_trial_is_deterministic():
    a = validate_compression(cfg(trials=1, base_seed=42))
    b = validate_compression(cfg(trials=1, base_seed=42))
    assert a.rows == b.rows and len(a.rows) == 1 and a.rows[0]["seed"] == 42


def test_workers_match_serial():
    a = validate_order_stat(cfg(trials=6))
    b = validate_order_stat(cfg(trials=6, workers=3))
    assert a.rows == b.rows


def test_order_stat_records_comparison():
    r = validate_order_stat(cfg(trials=5))
    assert "orderstat_below_compression" in r.extra
    assert r.extra["compression_epsilon"] == pytest.approx(0.10494562968971374)


def test_unbounded_generator_rejected():
    with pytest.raises(ValueError, match="unbounded"):
        validate_compression(cfg(generator="wave"))
    with pytest.raises(ValueError, match="analytic"):
        mi_experiment(cfg(generator="hetero", trials=2), trajectory_trials=0)


def test_hull_tiny_n_and_square():
    r = validate_hull(cfg(generator="disk", n_train=10, trials=10))
    assert r.violations == 0 and r.rows[0]["bound"] == 1.0
    sq = validate_hull(cfg(generator="square", n_train=250, trials=20))
    assert sq.violation_rate <= sq.cap


def test_qt_reports_both_variants():
    r = validate_qt(cfg(n_train=100, trials=5, n_eval=5000), 5.0)
    assert r.violation_rate <= r.cap
    assert {"violations_verbatim", "violation_rate_verbatim"} <= set(r.extra)
    assert all(row["bound_verbatim"] <= row["bound"] for row in r.rows)
    with pytest.raises(ValueError):
        validate_qt(cfg(), None)


def test_qt_tiny_budget_reproduces_support_tubes():
    base = cfg(n_train=100, trials=5, n_eval=5000)
    q = validate_qt(base, 1e-6)
    s = validate_compression(base)
    np.testing.assert_allclose([r["true_risk"] for r in q.rows],
                               [r["true_risk"] for r in s.rows], atol=1e-12)


def test_mi_independent_is_vacuous():
    r = mi_experiment(cfg(generator="independent", trials=10), trajectory_trials=0)
    assert all(row["mi_lower"] <= 0 for row in r.rows)
    assert r.extra["analytic_mi"] == 0.0


def test_mi_trajectory_shape():
    r = mi_experiment(cfg(n_train=500, trials=5), trajectory_n=(200, 2000), trajectory_trials=8)
    traj = r.extra["trajectory"]
    assert [t["n"] for t in traj] == [200, 2000]
    assert traj[1]["median_gap"] < traj[0]["median_gap"]
    assert sum(1 for row in r.rows if row["phase"] == "trajectory") == 16
    assert r.trials == 5


def test_report_files(tmp_path):
    r = validate(cfg(trials=3, bound="compression"))
    r.write_json(tmp_path / "r.json")
    r.write_csv(tmp_path / "r.csv")
    doc = json.loads((tmp_path / "r.json").read_text())
    assert doc["violation_rate"] == r.violations / 3 and len(doc["rows"]) == 3
    rows = list(csv.DictReader(open(tmp_path / "r.csv")))
    assert len(rows) == 3 and rows[0]["seed"] == "0" and rows[1]["seed"] == "1"


def test_config_validation():
    with pytest.raises(ValueError):
        TrialConfig("linear", 200, trials=0)
    with pytest.raises(ValueError):
        TrialConfig("linear", 200, bound="pac")
    with pytest.raises(ValueError):
        TrialConfig("nope", 200)
    assert TrialConfig("linear", 200).to_dict()["generator"] == "linear:b=0,u=0.25,w=2"
