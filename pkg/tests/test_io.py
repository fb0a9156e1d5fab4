"""Dataset documents, CSV ingestion, prediction tables and model bundles."""

import json

import numpy as np
import pytest

from conftest import tiny_mf, tiny_ms
from lolgp.core.kernels import InputError
from lolgp.io import (DatasetFile, SchemaError, export_csv, ingest_csv, load_bundle, load_dataset, load_json,
                      model_from_bundle, model_to_bundle, read_inputs, read_table, save_bundle, save_dataset,
                      write_predictions)
from lolgp.models import make_model
from lolgp.state import LOLGPConfig


def test_dataset_round_trip(tmp_path, rng):
    data, _, _ = tiny_ms(rng, n_sources=2)
    ds = DatasetFile.from_data(data, lower=(0.0,), upper=(2.0,), provenance={"why": "test"})
    save_dataset(ds, tmp_path / "d.json")
    back = load_dataset(tmp_path / "d.json")
    assert back.mode == "multi-source" and back.provenance == {"why": "test"}
    for (n1, X1, y1), (n2, X2, y2) in zip(ds.systems, back.systems):
        assert n1 == n2
        np.testing.assert_array_equal(X1, X2)
        np.testing.assert_array_equal(y1, y2)
    np.testing.assert_allclose(back.from_unit(back.to_unit([[0.5]])), [[0.5]])


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d.update(mode="both"), "mode"),
    (lambda d: d["systems"][0].pop("y"), "systems[0].y"),
    (lambda d: d["systems"][1].update(y=[1.0]), "systems[1].y"),
    (lambda d: d["systems"][0].update(X=[[0.1], ["a"], [0.3], [0.4]]), "systems[0].X"),
    (lambda d: d.update(bounds={"lower": [1.0], "upper": [0.0]}), "bounds"),
    (lambda d: d.update(nested="yes"), "nested"),
])
def test_schema_errors_name_the_field(rng, mutate, field):
    data, _, _ = tiny_ms(rng)
    doc = DatasetFile.from_data(data).to_dict()
    mutate(doc)
    with pytest.raises(SchemaError, match=field.replace("[", r"\[").replace("]", r"\]")):
        DatasetFile.from_dict(doc)


def test_bad_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"mode": ')
    with pytest.raises(SchemaError, match="line 1"):
        load_json(p)


def test_shared_source_target_point_is_rejected(tmp_path):
    for name, rows in (("s.csv", "x,y\n0.1,1\n0.5,2\n"), ("t.csv", "x,y\n0.5,3\n0.9,1\n")):
        (tmp_path / name).write_text(rows)
    with pytest.raises(InputError):
        ingest_csv([tmp_path / "s.csv", tmp_path / "t.csv"], "multi-source")


def test_ingest_rescales_and_round_trips(tmp_path):
    (tmp_path / "lo.csv").write_text("a,b,y\n10,0,1\n20,5,2\n30,10,3\n")
    (tmp_path / "hi.csv").write_text("10,0,1.5\n30,10,2.5\n")
    ds = ingest_csv([tmp_path / "lo.csv", tmp_path / "hi.csv"], "multi-fidelity")
    assert ds.nested is True and ds.lower == (10.0, 0.0) and ds.upper == (30.0, 10.0)
    np.testing.assert_allclose(ds.systems[0][1], [[0, 0], [0.5, 0.5], [1, 1]])
    assert ds.provenance["bounds_inferred"] and len(ds.provenance["ingested_from"][0]["sha256"]) == 64
    paths = export_csv(ds, tmp_path / "out")
    header, vals = read_table(paths[0])
    assert header == ["x1", "x2", "y"]
    np.testing.assert_allclose(vals, [[10, 0, 1], [20, 5, 2], [30, 10, 3]])


def test_ingest_schema_errors(tmp_path):
    (tmp_path / "a.csv").write_text("1,2\n3\n")
    with pytest.raises(SchemaError, match="row 2"):
        ingest_csv([tmp_path / "a.csv"], "multi-fidelity")
    (tmp_path / "b.csv").write_text("1,2\n")
    with pytest.raises(InputError):
        ingest_csv([tmp_path / "missing.csv"], "multi-fidelity")
    with pytest.raises(SchemaError, match="outside"):
        ingest_csv([tmp_path / "b.csv"], "multi-fidelity", lower=[2.0], upper=[3.0])


def test_prediction_table(tmp_path, rng):
    data, _ = tiny_mf(rng, (5, 3))
    m = make_model("gp", restarts=1).fit(data)
    X = np.array([[0.2], [0.7]])
    write_predictions(tmp_path / "p.csv", X, m.predict(X))
    header, vals = read_table(tmp_path / "p.csv")
    assert header == ["x1", "mean", "sd", "q2.5", "q97.5"]
    assert np.all(vals[:, 3] < vals[:, 1]) and np.all(vals[:, 1] < vals[:, 4])
    write_predictions(tmp_path / "e.csv", np.zeros((0, 1)), None)
    assert (tmp_path / "e.csv").read_text() == "x1,mean,sd,q2.5,q97.5\n"
    np.testing.assert_array_equal(read_inputs(tmp_path / "p.csv", 1), X)
    with pytest.raises(SchemaError):
        read_inputs(tmp_path / "p.csv", 2)


@pytest.mark.parametrize("name", ["gp", "ko", "bko", "lolgp"])
def test_bundle_round_trip_predicts_identically(tmp_path, rng, name):
    data, _ = tiny_mf(rng, (6, 3))
    ds = DatasetFile.from_data(data)
    model = make_model(name, seed=3, config=LOLGPConfig(iterations=120, burn_in=20, seed=3), restarts=1)
    model.fit(data)
    save_bundle(model, ds, tmp_path / "m.json")
    back, ds2 = load_bundle(tmp_path / "m.json")
    X = np.linspace(0, 1, 5)[:, None]
    np.testing.assert_array_equal(back.predict(X).mean, model.predict(X).mean)
    np.testing.assert_array_equal(back.predict(X).sd, model.predict(X).sd)


def test_bundle_errors(rng):
    data, _ = tiny_mf(rng, (6, 3))
    model = make_model("gp", restarts=1).fit(data)
    doc = model_to_bundle(model, DatasetFile.from_data(data))
    with pytest.raises(SchemaError):
        model_from_bundle({**doc, "bundle_version": 9})
    bad = json.loads(json.dumps(doc))
    del bad["fit"]["kernel"]
    with pytest.raises(SchemaError, match="fit"):
        model_from_bundle(bad)
