import csv
import json
import subprocess
import sys

import pytest

from npinf.cli import main
from npinf.graph import CnpGraph, load_cnp_graph, save_cnp_graph


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / "syn"
    assert main(["synth", "--out", str(out), "--n", "120", "--cascades", "25", "--deactivations", "150"]) == 0
    return out


@pytest.fixture
def model_dir(tmp_path, synth_dir):
    out = tmp_path / "model"
    rc = main([
        "learn", "--log", str(synth_dir / "log.csv"), "--topology", str(synth_dir / "edges.tsv"),
        "--out", str(out), "--train-end", "100", "--window", "6",
    ])
    assert rc == 0
    return out


def graph_args(d):
    return ["--edges", str(d / "edges.tsv"), "--nodes", str(d / "nodes.tsv")]


def test_synth_outputs(synth_dir):
    names = {p.name for p in synth_dir.iterdir()}
    assert {"edges.tsv", "nodes.tsv", "log.csv", "config.json", "manifest.json"} <= names
    g = load_cnp_graph(synth_dir / "edges.tsv", synth_dir / "nodes.tsv")
    assert g.n == 120 and set(g.rate.tolist()) == {1.0}


def test_learn_pipeline(model_dir):
    side = json.loads((model_dir / "model.json").read_text())
    assert side["window"] == 6.0 and side["observation_end"] == 100.0
    g = load_cnp_graph(model_dir / "edges.tsv", model_dir / "nodes.tsv")
    assert g.global_rate == side["global_rate"]
    ids = (model_dir / "id_map.tsv").read_text().splitlines()
    assert len(ids) == g.n
    manifest = json.loads((model_dir / "manifest.json").read_text())
    assert manifest["command"] == "learn" and len(manifest["inputs"]) == 2


def test_learn_window_override(tmp_path, synth_dir):
    out = tmp_path / "m38"
    main(["learn", "--log", str(synth_dir / "log.csv"), "--topology", str(synth_dir / "edges.tsv"),
          "--out", str(out), "--window", "38"])
    assert json.loads((out / "model.json").read_text())["window"] == 38.0


def test_learn_missing_topology(tmp_path, synth_dir, capsys):
    rc = main(["learn", "--log", str(synth_dir / "log.csv"), "--topology", str(tmp_path / "nope.tsv"),
               "--out", str(tmp_path / "x")])
    assert rc == 2
    assert "nope.tsv" in capsys.readouterr().err


def test_estimate_report_and_determinism(tmp_path, model_dir):
    base = ["estimate", *graph_args(model_dir), "--seeds", str(model_dir / "seeds.txt"), "-T", "50", "-R", "20"]
    main([*base, "--out", str(tmp_path / "a.json")])
    main([*base, "--out", str(tmp_path / "b.json"), "--jobs", "2"])
    a = (tmp_path / "a.json").read_bytes()
    assert a == (tmp_path / "b.json").read_bytes()
    rep = json.loads(a)
    assert rep["runs"] == 20 and rep["engine"] == "cnp" and rep["stderr"] >= 0
    manifest = json.loads((tmp_path / "a.json.manifest.json").read_text())
    assert manifest["seed"] == 20140401 and "wall_time_ms" in manifest["timings"]


def test_estimate_cp_matches_cnp_when_progressive(tmp_path):
    g = CnpGraph(4, [0, 1, 2], [1, 2, 3], rate=[0.5, 0.5, 0.5])
    save_cnp_graph(g, tmp_path / "e", tmp_path / "n")
    (tmp_path / "s").write_text("0\n")
    outs = []
    for engine in ("cnp", "cp"):
        out = tmp_path / f"{engine}.json"
        main(["estimate", "--edges", str(tmp_path / "e"), "--nodes", str(tmp_path / "n"),
              "--seeds", str(tmp_path / "s"), "-T", "4", "-R", "30", "--engine", engine, "--out", str(out)])
        outs.append(json.loads(out.read_text()))
    assert outs[0]["mean"] == outs[1]["mean"] and outs[0]["stderr"] == outs[1]["stderr"]


def test_estimate_seed_out_of_range(tmp_path, model_dir):
    (tmp_path / "s").write_text("100000\n")
    rc = main(["estimate", *graph_args(model_dir), "--seeds", str(tmp_path / "s"), "-T", "5"])
    assert rc == 3


def test_estimate_dnp_after_convert(tmp_path, model_dir):
    rc = main(["convert", *graph_args(model_dir), "--to", "dnp",
               "--out-edges", str(tmp_path / "d.e"), "--out-nodes", str(tmp_path / "d.n")])
    assert rc == 0
    out = tmp_path / "d.json"
    rc = main(["estimate", "--edges", str(tmp_path / "d.e"), "--nodes", str(tmp_path / "d.n"),
               "--seeds", str(model_dir / "seeds.txt"), "-T", "20", "-R", "10", "--engine", "dnp",
               "--out", str(out)])
    assert rc == 0 and json.loads(out.read_text())["engine"] == "dnp"
    rc = main(["convert", "--edges", str(tmp_path / "d.e"), "--nodes", str(tmp_path / "d.n"), "--to", "cnp",
               "--out-edges", str(tmp_path / "c.e"), "--out-nodes", str(tmp_path / "c.n")])
    assert rc == 0
    back = load_cnp_graph(tmp_path / "c.e", tmp_path / "c.n")
    orig = load_cnp_graph(model_dir / "edges.tsv", model_dir / "nodes.tsv")
    assert back.rate.tolist() == pytest.approx(orig.rate.tolist(), rel=1e-12)


def test_convert_probability_one(tmp_path):
    (tmp_path / "e").write_text("0\t1\t1.0\n")
    (tmp_path / "n").write_text("0\t0.0\n")
    rc = main(["convert", "--edges", str(tmp_path / "e"), "--nodes", str(tmp_path / "n"), "--to", "cnp",
               "--out-edges", str(tmp_path / "o.e"), "--out-nodes", str(tmp_path / "o.n")])
    assert rc == 3


def test_maximize_star(tmp_path):
    leaves = 10
    g = CnpGraph(leaves + 1, [0] * leaves, list(range(1, leaves + 1)),
                 rate=[1.0] * leaves, gamma_minus=[0.5] * (leaves + 1))
    save_cnp_graph(g, tmp_path / "e", tmp_path / "n")
    args = ["maximize", "--edges", str(tmp_path / "e"), "--nodes", str(tmp_path / "n"), "-T", "4", "-R", "50"]
    main([*args, "-k", "1", "--out", str(tmp_path / "k1.json")])
    assert json.loads((tmp_path / "k1.json").read_text())["seeds"] == [0]
    main([*args, "-k", "0", "--out", str(tmp_path / "k0.json")])
    k0 = json.loads((tmp_path / "k0.json").read_text())
    assert k0["seeds"] == [] and k0["spread_mean"] == 0.0
    assert main([*args, "-k", "12"]) == 3


def test_simulate_trace(tmp_path, model_dir):
    out = tmp_path / "trace.tsv"
    rc = main(["simulate", *graph_args(model_dir), "--seeds", str(model_dir / "seeds.txt"),
               "-T", "30", "--out", str(out)])
    assert rc == 0
    summary = json.loads((tmp_path / "trace.tsv.summary.json").read_text())
    total = 0.0
    for line in out.read_text().splitlines():
        v, s, e = line.split("\t")
        assert 0 <= float(s) < float(e) <= 30
        total += float(e) - float(s)
    assert total == pytest.approx(summary["spread"])


def test_bench_single_point(tmp_path):
    out = tmp_path / "b.csv"
    rc = main(["bench", "--engines", "cnp", "--horizons", "5", "--sizes", "200", "--reps", "2", "--out", str(out)])
    assert rc == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 1
    assert list(rows[0]) == ["engine", "size", "horizon", "reps", "wall_mean_s", "wall_min_s", "spread_mean"]
    assert rows[0]["engine"] == "cnp" and rows[0]["size"] == "200"


def test_seed_random_is_recorded(tmp_path, model_dir):
    out = tmp_path / "r.json"
    main(["estimate", *graph_args(model_dir), "-T", "5", "-R", "3", "--seed", "random", "--out", str(out)])
    seed = json.loads((tmp_path / "r.json.manifest.json").read_text())["seed"]
    again = tmp_path / "again.json"
    main(["estimate", *graph_args(model_dir), "-T", "5", "-R", "3", "--seed", str(seed), "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_bad_seed_flag(model_dir):
    assert main(["estimate", *graph_args(model_dir), "-T", "5", "--seed", "abc"]) == 2


def test_malformed_graph_is_input_error(tmp_path):
    (tmp_path / "e").write_text("0\t1\n")
    (tmp_path / "n").write_text("")
    assert main(["estimate", "--edges", str(tmp_path / "e"), "--nodes", str(tmp_path / "n"), "-T", "1"]) == 2


def test_console_script_runs():
    proc = subprocess.run([sys.executable, "-m", "npinf.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "npinf" in proc.stdout
