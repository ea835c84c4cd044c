import json
import subprocess
import sys

import pytest

from hypwave import cli


def write_spec(path, text):
    path.write_text(text)
    return path


def test_catalog():
    cat = cli.list_experiments()
    assert len(cat) == 8
    assert set(cat) == {
        "energy_conservation", "morawetz_bound", "defocusing_scatter", "focusing_blowup",
        "quintic_decay", "cone_correspondence", "admissible_regions", "lemma_verification",
    }
    assert all(entry["anchors"] for entry in cat.values())
    assert cli.catalog_json() == cli.catalog_json()


def test_catalog_stable_across_processes():
    out = [subprocess.run([sys.executable, "-m", "hypwave", "list", "--format", "json"], capture_output=True,
                          check=True).stdout for _ in range(2)]
    assert out[0] == out[1]
    assert len(json.loads(out[0])) == 8


def test_unknown_experiment(tmp_path):
    rep = cli.run(cli.ExperimentSpec("nope", output_dir=str(tmp_path)))
    assert rep.exit_code == 2 and "unknown experiment" in rep.message


def test_morawetz_focusing_rejected(tmp_path):
    spec = write_spec(tmp_path / "m.toml", 'name = "morawetz_bound"\n[parameters]\nzeta = 1\n')
    assert cli.main(["run", str(spec), "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize(
    "params",
    [{"n": "three"}, {"bogus": 1}, {"n": 7}, {"num_points": 0}, {"drift_tol": True}],
)
def test_schema_errors(tmp_path, params):
    rep = cli.run(cli.ExperimentSpec("energy_conservation", params, output_dir=str(tmp_path)))
    assert rep.exit_code == 2


def test_bad_toml(tmp_path):
    spec = write_spec(tmp_path / "bad.toml", "name = \n")
    assert cli.main(["run", str(spec)]) == 2
    spec = write_spec(tmp_path / "bad2.toml", 'name = "energy_conservation"\nextra = 1\n')
    assert cli.main(["run", str(spec)]) == 2


SMALL = {"num_points": 400, "r_max": 16.0, "t_final": 4.0, "snapshots": 8, "drift_tol": 1e-3}


def test_energy_run_and_determinism(tmp_path):
    outs = []
    for k in range(2):
        rep = cli.run(cli.ExperimentSpec("energy_conservation", SMALL, seed=1, output_dir=str(tmp_path / f"r{k}")))
        assert rep.exit_code == 0, rep.message
        outs.append(tmp_path / f"r{k}")
    man = json.loads((outs[0] / "manifest.json").read_text())
    assert man["status"] == "ok" and man["parameters"]["num_points"] == 400
    assert man["parameters"]["integrator"] == "leapfrog"
    assert "numpy" in man["versions"] and man["wall_time_s"] >= 0
    a, b = (o / "series.csv" for o in outs)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "t,energy,morawetz_acc,M,Mprime,max_abs_u"
    assert len(list((outs[0] / "snapshots").iterdir())) == 8


def test_failed_check_exit_3(tmp_path):
    rep = cli.run(cli.ExperimentSpec("energy_conservation", {**SMALL, "drift_tol": 1e-12}, output_dir=str(tmp_path)))
    assert rep.exit_code == 3 and "drift_below_tol" in rep.message


def test_manifest_written_before_compute(tmp_path, monkeypatch):
    seen = {}

    def boom(params, ctx):
        seen["manifest"] = json.loads((ctx.out / "manifest.json").read_text())
        raise cli.NumericalFailure("diverged")

    exp = cli.EXPERIMENTS["lemma_verification"]
    monkeypatch.setitem(cli.EXPERIMENTS, "lemma_verification", cli.Experiment(exp.description, exp.anchors, exp.schema, boom))
    rep = cli.run(cli.ExperimentSpec("lemma_verification", {"samples": 5}, output_dir=str(tmp_path)))
    assert rep.exit_code == 3 and "diverged" in rep.message
    assert seen["manifest"]["status"] == "running"
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "failed"


def test_lemma_experiment(tmp_path):
    spec = write_spec(tmp_path / "l.toml", 'name = "lemma_verification"\nseed = 7\n[parameters]\nsamples = 50\n')
    assert cli.main(["run", str(spec), "--out", str(tmp_path / "o"), "--jobs", "2"]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert set(rep) == {"sphere", "two_factor", "three_factor"}
    assert all(r["seed"] == 7 and r["violations"] == 0 for r in rep.values())


def test_regions_command(tmp_path, capsys):
    out = tmp_path / "region.csv"
    assert cli.main(["regions", "--n", "3", "--sigma", "0.5", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "inv_p,inv_q,in_original,on_open_boundary"
    assert len(lines) > 10
    assert cli.main(["regions", "--n", "3", "--sigma", "1.5"]) == 2


def test_minsigma_command(capsys):
    assert cli.main(["minsigma", "--n", "3", "--p", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["sigma"] == pytest.approx(5 / 6, abs=1e-6)
    assert set(doc["witness"]) == {"p1", "q1"}
    assert cli.main(["minsigma", "--n", "3", "--p", "6"]) == 2


def test_verify_lemmas_command(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert cli.main(["verify-lemmas", "--lemma", "two_factor", "--samples", "20", "--seed", "7", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["two_factor"]["samples"] == 20
    assert cli.main(["verify-lemmas", "--samples", "0"]) == 2


def test_simulate_command(tmp_path, capsys):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--num-points", "300", "--r-max", "16", "--t-final", "2", "--out", str(out),
                     "--both-directions"]) == 0
    assert (out / "series_forward.csv").exists() and (out / "series_backward.csv").exists()
    assert cli.main(["simulate", "--p", "7", "--out", str(out)]) == 2
    assert cli.main(["simulate", "--num-points", "300", "--r-max", "16", "--t-final", "2", "--out", str(out),
                     "--format", "json"]) == 0
    assert json.loads((out / "series_forward.json").read_text())["t"][0] == 0.0


def test_transform_command(tmp_path, capsys):
    out = tmp_path / "tr"
    assert cli.main(["transform", "--num-points", "401", "--out", str(out)]) == 0
    assert (out / "pushforward.csv").read_text().startswith("s,v,v_tau")
    assert json.loads((out / "residual.json").read_text())["max_residual"] < 1e-2
