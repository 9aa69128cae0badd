import json

import numpy as np
import pytest

from mocsm import cli, data


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def workdir(tmp_cwd):
    assert run("generate", "--seed", 1, "--q", 2, "--n", 40, "--out", "d.csv") == 0
    (tmp_cwd / "c.json").write_text(json.dumps({"optimizer": {"restarts": 1, "max_iter": 40},
                                                "split": {"schemes": ["random", "first", "last"]}}))
    return tmp_cwd


def test_generate_matches_library(workdir):
    assert (workdir / "d.csv").read_text() == data.dataset_to_csv(data.generate_synthetic(1, 2, 40))


def test_init_fit_predict_evaluate(workdir, capsys):
    assert run("init", "--data", "d.csv", "--q", 2, "--family", "MOCSM", "--out", "p.json") == 0
    doc = json.loads((workdir / "p.json").read_text())
    assert doc["family"] == "MOCSM" and len(doc["noise"]) == 3
    assert run("fit", "--data", "d.csv", "--params", "p.json", "--config", "c.json", "--out", "m.json") == 0
    assert (workdir / "m.trace.csv").read_text().startswith("iteration,nlml\n")
    (workdir / "pts.csv").write_text("channel,x1\n1,0.0\n3,12.0\n")
    assert run("predict", "--model", "m.json", "--points", "pts.csv", "--out", "pr.csv") == 0
    lines = (workdir / "pr.csv").read_text().splitlines()
    assert lines[0] == "channel,x1,mean,variance" and len(lines) == 3
    assert float(lines[2].split(",")[3]) >= 0
    capsys.readouterr()
    assert run("evaluate", "--model", "m.json", "--data", "d.csv", "--config", "c.json") == 0
    scores = json.loads(capsys.readouterr().out)
    assert set(scores) == {"1", "2", "3"} and all(v >= 0 for v in scores.values())


def test_compare_writes_outputs(workdir):
    assert run("compare", "--data", "d.csv", "--families", "MOCSM,SM_LMC", "--q", 2,
               "--config", "c.json", "--out", "r.json") == 0
    doc = json.loads((workdir / "r.json").read_text())
    assert [r["family"] for r in doc["rows"]] == ["MOCSM", "SM_LMC"]
    assert doc["tasks"] == ["signal", "integral", "derivative"]
    assert (workdir / "r.csv").exists() and (workdir / "r.timing.json").exists()
    assert "fit_seconds" not in doc["rows"][0]


def test_crosscov(workdir):
    assert run("init", "--data", "d.csv", "--q", 1, "--family", "MOCSM", "--out", "p.json") == 0
    assert run("crosscov", "--params", "p.json", "--pairs", "1-2,3-3", "--grid=-1,1,3",
               "--counterpart", "--out", "cc.csv") == 0
    lines = (workdir / "cc.csv").read_text().splitlines()
    assert lines[0] == "tau,pair_label,family,value" and len(lines) == 1 + 2 * 2 * 3


def test_exit_codes(workdir, capsys):
    assert run("init", "--data", "missing.csv", "--q", 2, "--out", "p.json") == 2
    (workdir / "bad.csv").write_text("channel,x1,y\n1,0,oops\n")
    assert run("init", "--data", "bad.csv", "--q", 2, "--out", "p.json") == 2
    assert "line 2" in capsys.readouterr().err
    doc = {"family": "SM", "Q": 1, "M": 3, "P": 1, "noise": [0.1, 0.1, 0.1],
           "components": [[{"w": float("nan"), "mu": [0.1], "sigma2": [0.1]}] * 3]}
    (workdir / "nan.json").write_text(json.dumps(doc))
    assert run("fit", "--data", "d.csv", "--params", "nan.json", "--config", "c.json", "--out", "m.json") == 3
    assert run("crosscov", "--params", "nan.json", "--pairs", "1:2", "--out", "x.csv") == 2


def test_module_entry_point(workdir):
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "mocsm", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "compare" in out.stdout
