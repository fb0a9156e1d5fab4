"""Command-line pipelines, exit codes and byte-for-byte determinism."""

import json

import pytest

from lolgp.cli import EXIT_INPUT, EXIT_NUMERICAL, EXIT_OK, main, parse_seeds

FAST = ["--chain-length", "300", "--burn-in", "100", "--restarts", "1"]


def _pipeline(d, model="lolgp", seed="4"):
    assert main(["gen", "forrester-mf", "--seed", seed, "--out", str(d / "data.json"),
                 "--test-out", str(d / "test.csv")]) == EXIT_OK
    assert main(["fit", str(d / "data.json"), "--model", model, "--seed", seed, *FAST,
                 "--out", str(d / "model.json")]) == EXIT_OK
    assert main(["predict", str(d / "model.json"), str(d / "test.csv"), "--out", str(d / "pred.csv")]) == EXIT_OK
    assert main(["metrics", str(d / "pred.csv"), "--truth", str(d / "test.csv"),
                 "--out", str(d / "metrics.json")]) == EXIT_OK
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("model", ["gp", "ko", "bko", "lolgp"])
def test_pipeline_is_byte_identical(tmp_path, model):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    first, second = _pipeline(a, model), _pipeline(b, model)
    assert first == second
    report = json.loads(first["metrics.json"])
    assert set(report) == {"n_test", "rmse", "crps_gaussian", "coverage95"} and report["n_test"] == 100
    assert first["pred.csv"].splitlines()[0] == b"x1,mean,sd,q2.5,q97.5"


def test_experiment_command(tmp_path, capsys):
    outs = []
    for k in range(2):
        d = tmp_path / f"e{k}"
        assert main(["experiment", "forrester-mf", "--seeds", "1..2", "--models", "gp,lolgp", *FAST,
                     "--out", str(d)]) == EXIT_OK
        outs.append((d / "results.csv").read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().splitlines()
    assert lines[0] == "experiment,model,seed,rmse,crps,ess_min,fit_seconds" and len(lines) == 5
    assert "lolgp" in capsys.readouterr().out


def test_ingest_command(tmp_path):
    (tmp_path / "s.csv").write_text("x,y\n0,1\n0.5,2\n1,3\n")
    (tmp_path / "t.csv").write_text("x,y\n0.25,1\n0.75,2\n")
    assert main(["ingest", str(tmp_path / "s.csv"), str(tmp_path / "t.csv"), "--mode", "multi-source",
                 "--out", str(tmp_path / "d.json")]) == EXIT_OK
    doc = json.loads((tmp_path / "d.json").read_text())
    assert doc["schema_version"] == 1 and doc["mode"] == "multi-source"


def test_input_errors_exit_2(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"schema_version": 1, "mode": "multi-source", "systems": 3}')
    assert main(["fit", str(tmp_path / "bad.json"), "--out", str(tmp_path / "m.json")]) == EXIT_INPUT
    assert "systems" in capsys.readouterr().err
    assert main(["fit", str(tmp_path / "nothere.json"), "--out", str(tmp_path / "m.json")]) == EXIT_INPUT
    assert main(["experiment", "nope", "--out", str(tmp_path / "x")]) == EXIT_INPUT
    assert main(["experiment", "forrester-mf", "--seeds", "5..1", "--out", str(tmp_path / "x")]) == EXIT_INPUT
    main(["gen", "forrester-mf", "--out", str(tmp_path / "d.json")])
    assert main(["fit", str(tmp_path / "d.json"), "--model", "svm", "--out", str(tmp_path / "m.json")]) == EXIT_INPUT
    assert main(["fit", str(tmp_path / "d.json"), "--prior-sd", "0", "--out", str(tmp_path / "m.json")]) == EXIT_INPUT
    assert "--prior-sd" in capsys.readouterr().err
    (tmp_path / "cfg.json").write_text('{"chain_lenght": 5}')
    assert main(["fit", str(tmp_path / "d.json"), "--config", str(tmp_path / "cfg.json"),
                 "--out", str(tmp_path / "m.json")]) == EXIT_INPUT


def test_numerical_failure_exits_3(tmp_path, capsys):
    _pipeline(tmp_path)
    doc = json.loads((tmp_path / "model.json").read_text())
    doc["fit"]["chain"]["omega"][0][0][0] = None  # a NaN latent weight
    (tmp_path / "broken.json").write_text(json.dumps(doc))
    code = main(["predict", str(tmp_path / "broken.json"), str(tmp_path / "test.csv"),
                 "--out", str(tmp_path / "p.csv")])
    assert code == EXIT_NUMERICAL
    assert "numerical" in capsys.readouterr().err


def test_config_file_and_flag_precedence(tmp_path):
    main(["gen", "forrester-mf", "--out", str(tmp_path / "d.json")])
    (tmp_path / "cfg.json").write_text(json.dumps({"model": "gp", "restarts": 1, "seed": 9}))
    assert main(["fit", str(tmp_path / "d.json"), "--config", str(tmp_path / "cfg.json"), "--seed", "2",
                 "--out", str(tmp_path / "m.json")]) == EXIT_OK
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["model"] == "gp" and doc["seed"] == 2


def test_parse_seeds():
    assert parse_seeds("1..3,9") == (1, 2, 3, 9)
    assert parse_seeds("4") == (4,)


def test_prior_sd_reaches_the_sampler(tmp_path):
    main(["gen", "forrester-mf", "--seed", "2", "--out", str(tmp_path / "d.json")])
    docs = []
    for sd in ("1", "3"):
        out = tmp_path / f"m{sd}.json"
        assert main(["fit", str(tmp_path / "d.json"), "--seed", "2", *FAST, "--prior-sd", sd,
                     "--out", str(out)]) == EXIT_OK
        docs.append(json.loads(out.read_text())["fit"]["hp"])
    assert docs[0] != docs[1]
