import json
import math
import os
import pathlib

import pytest

import fedwatch

SMALL = {"n_instances": 80, "months": 4, "delay_mean_days": 20.0, "seed": 3}
FIXTURES = pathlib.Path(__file__).resolve().parents[2] / "fixtures"


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus") / "store"
    manifest = fedwatch.synth(SMALL, out)
    return out, manifest


def test_synth_writes_a_store_and_manifest(corpus):
    out, manifest = corpus
    assert (out / "manifest.json").exists()
    assert len(manifest["instances"]) == 80
    store = fedwatch.open_store(out)
    assert len(store.instances()) >= 80
    assert store.n_snapshots > 0
    begin, end = store.time_span()
    assert begin < end


def test_synth_is_deterministic(tmp_path):
    a = fedwatch.synth({"n_instances": 30, "months": 2, "seed": 9}, tmp_path / "a")
    b = fedwatch.synth({"n_instances": 30, "months": 2, "seed": 9}, tmp_path / "b")
    assert a == b
    assert (tmp_path / "a" / "manifest.json").read_text() == (tmp_path / "b" / "manifest.json").read_text()


def test_bad_params_raise_validation_error(tmp_path):
    with pytest.raises(fedwatch.ValidationError):
        fedwatch.synth({"n_instances": 30, "colour": "red"}, tmp_path / "s")


def test_missing_store_raises(tmp_path):
    with pytest.raises(fedwatch.Error, match="no store"):
        fedwatch.open_store(tmp_path / "nothing")


def test_features_table(corpus):
    store = fedwatch.open_store(corpus[0])
    table = fedwatch.features(store)
    assert len(table["columns"]) == 38
    assert len(table["rows"]) == 80
    assert all(len(v) == 38 for v in table["rows"].values())
    assert set(table["lambdas"]) >= {"posts", "users"}


def test_train_predict_and_watchlist(corpus, tmp_path):
    store = fedwatch.open_store(corpus[0])
    grid = {"max_depth": [4, 8], "n_estimators": [50]}
    model, metrics = fedwatch.train_global(store, "rf", seed=4, grid=grid)
    assert model.family == "rf"
    assert 0.0 <= metrics["test"]["f1"] <= 1.0
    assert len(metrics["cv"]) == 2
    assert json.loads(model.params_json) == metrics["params"]

    weights = [w for _, w in model.importance()]
    assert math.isclose(sum(weights), 1.0, rel_tol=1e-9)
    assert weights == sorted(weights, reverse=True)

    p = model.predict_proba([0.0] * len(model.header))
    assert 0.0 <= p <= 1.0
    with pytest.raises(fedwatch.ValidationError):
        model.predict_proba([0.0])

    path = tmp_path / "model.json"
    model.save(os.fspath(path))
    again = fedwatch.Model.load(os.fspath(path))
    first = fedwatch.watchlist(model, store)
    assert fedwatch.watchlist(again, store) == first
    assert [e["rank"] for e in first] == list(range(1, len(first) + 1))
    assert all(e["score"] >= 0.5 for e in first)
    assert len(fedwatch.watchlist(model, store, top_k=3)) == 3


def test_unknown_family_and_grid_point(corpus):
    store = fedwatch.open_store(corpus[0])
    with pytest.raises(fedwatch.Error):
        fedwatch.train_global(store, "svm")
    with pytest.raises(fedwatch.Error):
        fedwatch.train_global(store, "rf", grid={"max_depth": [3]})


def test_response_lags(corpus):
    lags = fedwatch.response_lags(fedwatch.open_store(corpus[0]))
    assert lags
    assert all(r["lag_days"] >= 0 for r in lags)
    assert all(r["policy_at"] >= r["federated_at"] for r in lags)


def test_default_policy_table():
    rows = json.loads((FIXTURES / "defaults" / "version_table.json").read_text())["rows"]
    for row in rows:
        assert fedwatch.classify_default(row["policy"], row["version"]) == row["default"], row


def test_statistics():
    assert fedwatch.box_cox(7.5, 1.0) == 6.5
    assert fedwatch.box_cox(math.e, 0.0) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(fedwatch.Error):
        fedwatch.box_cox(0.0, 1.0)
    assert fedwatch.spearman([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)
    with pytest.raises(fedwatch.UndefinedStatistic):
        fedwatch.spearman([1, 1, 1], [1, 2, 3])
    assert -5.0 <= fedwatch.fit_box_cox([1.0, 2.0, 4.0, 8.0, 16.0]) <= 5.0
