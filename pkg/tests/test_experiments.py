import csv
import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from invgame import experiments as ex
from invgame.estimation import FitError
from invgame.experiments import (
    ExperimentConfig,
    ExperimentReport,
    aggregate,
    decision_accuracy,
    emit_report,
    generate_data,
    mae_rmse,
    read_rows_csv,
    run_experiment,
    tv_distance,
)
from invgame.data import Dataset
from invgame.optimize import FitConfig


def small(exp="E1", **kw):
    base = dict(experiment=exp, T=[150], seeds=[0, 1], methods=["ice", "ce-ml"], fit={"restarts": 3})
    base.update(kw)
    return ExperimentConfig.from_dict(base)


# -- metrics --------------------------------------------------------------------


def test_mae_rmse_examples():
    truth = ([0.3, 0.7], [0.4, 0.6])
    mae, rmse = mae_rmse(([0.4, 0.6], [0.5, 0.5]), truth)
    assert mae == pytest.approx(0.1) and rmse == pytest.approx(0.1)
    mae, rmse = mae_rmse(([0.2, 0.0], [0.0, 0.0]), ([0.0, 0.0], [0.0, 0.0]))
    assert mae == pytest.approx(0.05) and rmse == pytest.approx(0.1)
    with pytest.raises(ValueError, match="dimensions"):
        mae_rmse(([0.5, 0.5], [1.0]), truth)


def test_tv_and_accuracy_examples():
    assert tv_distance([1, 0, 0, 0], [0, 1, 0, 0]) == 1.0
    assert tv_distance([0.25] * 4, [0.25] * 4) == 0.0
    d = Dataset([1, 2, 1, 4])
    assert decision_accuracy([0.25] * 4, d) == 50.0  # ties go to a(1)
    per_record = np.eye(4)[[0, 1, 2, 3]]
    assert decision_accuracy(per_record, d) == 75.0
    with pytest.raises(ValueError):
        decision_accuracy([0.25] * 4, Dataset([]))


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(1, 4), min_size=1, max_size=60),
    st.lists(st.floats(0, 1), min_size=4, max_size=4).filter(lambda p: sum(p) > 0),
)
def test_empirical_argmax_upper_bounds_any_point_predictor(actions, p):
    d = Dataset(actions)
    assert decision_accuracy(d.frequencies(), d) >= decision_accuracy(p, d)


# -- configuration ----------------------------------------------------------------


@pytest.mark.parametrize("name", ["e1", "e2", "e3", "e4"])
def test_bundled_configs_load(name):
    cfg = ExperimentConfig.bundled(name)
    assert cfg.experiment == name.upper()
    assert len(cfg.seeds) >= 10
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize(
    "patch, message",
    [
        ({"seeds": []}, "seeds"),
        ({"T": []}, "T"),
        ({"methods": ["em"]}, "unknown methods"),
        ({"experiment": "E9"}, "unknown experiment"),
        ({"colour": 1}, "unknown experiment config keys"),
        ({"T": [0]}, "positive"),
        ({"fit": {"restarts": 0}}, "positive"),
    ],
)
def test_invalid_configs_are_rejected(patch, message):
    base = dict(experiment="E1", T=[100], seeds=[0], methods=["ce-ml"])
    with pytest.raises(ValueError, match=message):
        ExperimentConfig.from_dict({**base, **patch})


def test_config_files_round_trip(tmp_path):
    cfg = small()
    (tmp_path / "c.json").write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(tmp_path / "c.json") == cfg
    (tmp_path / "c.toml").write_text(
        'experiment = "e1"\nT = [150]\nseeds = [0, 1]\nmethods = ["ice", "ce-ml"]\n[fit]\nrestarts = 3\n'
    )
    assert ExperimentConfig.load(tmp_path / "c.toml") == cfg


# -- protocols ------------------------------------------------------------------------


def test_protocol_data_shapes_and_determinism():
    e3 = generate_data(small("E3"), 200, 0)
    assert np.array_equal(e3.actions, e3.recommendations)
    assert np.all(e3.tau == [2.0, 3.0])
    e4 = generate_data(small("E4", methods=["lbr-ml"]), 300, 0)
    assert len(np.unique(e4.tau, axis=0)) > 100
    assert set(e4.actions.tolist()) == {1, 2, 3, 4}
    assert generate_data(small("E2"), 100, 5) == generate_data(small("E2"), 100, 5)
    assert not generate_data(small("E2"), 100, 5) == generate_data(small("E2"), 100, 6)


# -- harness ------------------------------------------------------------------------


@pytest.fixture(scope="module")
def report():
    return run_experiment(small())


def test_rows_cover_every_cell(report):
    assert len(report.rows) == 1 * 2 * 2
    keys = {(r.method, r.T, r.seed) for r in report.rows}
    assert keys == {(m, 150, s) for m in ("ice", "ce-ml") for s in (0, 1)}
    for r in report.rows:
        assert r.status == "ok"
        assert r.rmse >= r.mae - 1e-15
        assert 0 <= r.tv <= 1 and 0 <= r.accuracy <= 100
        assert r.nll >= r.empirical_nll - 1e-9


def test_report_json_round_trip(report, tmp_path):
    paths = emit_report(report, tmp_path)
    again = ExperimentReport.load(paths["report"])
    assert again.to_dict() == report.to_dict()
    bad = json.loads(paths["report"].read_text()) | {"schema_version": 99}
    with pytest.raises(ValueError, match="schema"):
        ExperimentReport.from_dict(bad)


def test_aggregates_recompute_from_rows_csv(report, tmp_path):
    paths = emit_report(report, tmp_path)
    rows = [ex.Row(**r) for r in read_rows_csv(paths["rows"])]
    recomputed = aggregate(rows)
    with open(paths["aggregates"]) as fh:
        written = list(csv.DictReader(fh))
    assert len(written) == len(recomputed)
    for w, a in zip(written, recomputed):
        for k, v in a.items():
            if isinstance(v, float):
                assert float(w[k]) == pytest.approx(v, rel=1e-12)
            else:
                assert w[k] == str(v)


def test_aggregate_median_and_iqr():
    rows = [ex.Row("E1", "ce-ml", 10, s, "ok", mae=m, rmse=m, tv=0.0, accuracy=50.0) for s, m in enumerate([1, 2, 3, 4, 5])]
    rows.append(ex.Row("E1", "ce-ml", 10, 9, "error", error="FitError: x"))
    (a,) = aggregate(rows)
    assert a["n"] == 6 and a["n_ok"] == 5
    assert a["mae_median"] == 3.0 and a["mae_iqr"] == 2.0


def test_plot_data_is_a_distribution_per_group(report):
    data = report.plot_data()
    assert len(data) == 4 * 2
    for method in ("ice", "ce-ml"):
        sub = [r for r in data if r["method"] == method]
        assert [r["action_index"] for r in sub] == [1, 2, 3, 4]
        assert sum(r["model_p"] for r in sub) == pytest.approx(1)
        assert sum(r["empirical_p"] for r in sub) == pytest.approx(1)


def test_rows_csv_is_byte_identical_on_rerun_and_across_jobs(report, tmp_path):
    a = emit_report(report, tmp_path / "a")["rows"].read_bytes()
    b = emit_report(run_experiment(small()), tmp_path / "b")["rows"].read_bytes()
    c = emit_report(run_experiment(small(), jobs=2), tmp_path / "c")["rows"].read_bytes()
    assert a == b == c


def test_fit_failures_become_error_rows(monkeypatch):
    def boom(*args, **kw):
        raise FitError("no feasible candidate")

    monkeypatch.setitem(ex.FITTERS, "ice", boom)
    rep = run_experiment(small(seeds=[0]))
    by_method = {r.method: r for r in rep.rows}
    assert by_method["ice"].status == "error" and "no feasible" in by_method["ice"].error
    assert by_method["ce-ml"].status == "ok"
    agg = {a["method"]: a for a in rep.aggregates}
    assert agg["ice"]["n_ok"] == 0 and agg["ice"]["mae_median"] is None


def test_e4_rows_omit_weight_metrics():
    cfg = small("E4", T=[120], seeds=[0], methods=["lbr-ml", "lbr-ml-fixed"])
    cfg = replace(cfg, fit=FitConfig(restarts=2, refine=2))
    rows = run_experiment(cfg).rows
    assert all(r.mae is None and r.rmse is None for r in rows)
    fixed = next(r for r in rows if r.method == "lbr-ml-fixed")
    assert fixed.lam == [1.0, 1.0]
    assert "T=120" in run_experiment(cfg).format_table()


def test_unwritable_output_names_the_path(report, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        emit_report(report, blocker / "sub")
