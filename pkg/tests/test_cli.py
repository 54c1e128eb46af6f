import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from wallperc.cli import ExperimentConfig, load_walls, main
from wallperc.cuts import cut_family_from_dict, cut_family_to_dict, wall_kernel
from wallperc.errors import UsageError
from wallperc.graph import distance_matrix, gen_graph, parse_edge_list
from wallperc.kernel import format_kernel_csv, format_points_csv, PointCloud, parse_kernel_csv


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def write(path, text):
    path.write_text(text)
    return str(path)


# ------------------------------------------------------------ graph


def test_graph_gen(capsys, tmp_path):
    code, out, _ = run(capsys, "graph", "gen", "--family", "path", "--n", 6)
    assert code == 0 and parse_edge_list(out).n == 6
    code, out, _ = run(capsys, "graph", "gen", "--family", "complete_bipartite", "--a", 2, "--b", 3)
    g = parse_edge_list(out)
    assert code == 0 and (g.n, g.m) == (5, 6)
    prefix = tmp_path / "grid"
    assert run(capsys, "graph", "gen", "--family", "grid", "--d", 2, "--side", 3, "--out", prefix)[0] == 0
    assert (tmp_path / "grid.edges").exists()
    d = parse_kernel_csv((tmp_path / "grid.dist.csv").read_text())
    assert np.array_equal(d, distance_matrix(gen_graph("grid", 2, 3)))


def test_graph_usage_errors(capsys):
    code, _, err = run(capsys, "graph", "gen", "--family", "path", "--n", 0)
    assert code == 2 and "error" in err
    assert run(capsys, "graph", "gen", "--family", "path")[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["graph", "gen", "--family", "moebius"])
    assert exc.value.code == 2
    assert run(capsys, "graph", "gen", "--family", "hypercube", "--d", 21)[0] == 3


# ------------------------------------------------------------ kernel


def test_kernel_commands(capsys, tmp_path):
    tau = write(tmp_path / "tau.csv", format_kernel_csv(np.exp(-distance_matrix(gen_graph("path", 4)))))
    code, out, _ = run(capsys, "kernel", "check", "--pd", "--in", tau)
    rep = json.loads(out)
    assert code == 0 and rep["pd"] is True and rep["min_eig"] > 0

    cube = write(tmp_path / "cube.csv", format_kernel_csv(np.abs(np.subtract.outer([0., 1, 2], [0., 1, 2])) ** 3))
    rep = json.loads(run(capsys, "kernel", "check", "--cnd", "--in", cube)[1])
    assert rep["cnd"] is False and rep["form_value"] == pytest.approx(8.0)

    k23 = write(tmp_path / "k23.csv", format_kernel_csv(distance_matrix(gen_graph("complete_bipartite", 2, 3))))
    code, out, _ = run(capsys, "kernel", "cutcone", "--in", k23)
    assert code == 0 and json.loads(out)["status"] == "infeasible"

    path = write(tmp_path / "p.csv", format_kernel_csv(distance_matrix(gen_graph("path", 5))))
    rep = json.loads(run(capsys, "kernel", "cutcone", "--in", path)[1])
    fam = cut_family_from_dict(rep["family"])
    assert rep["status"] == "feasible" and np.allclose(wall_kernel(fam), distance_matrix(gen_graph("path", 5)))

    code, out, _ = run(capsys, "kernel", "schoenberg", "--lambda", 1, "--in", path)
    assert code == 0
    assert np.allclose(parse_kernel_csv(out), np.exp(-distance_matrix(gen_graph("path", 5))), atol=1e-15)
    assert run(capsys, "kernel", "schoenberg", "--in", path)[0] == 2

    code, out, _ = run(capsys, "kernel", "embed", "--in", write(tmp_path / "sq.csv", format_kernel_csv(
        distance_matrix(gen_graph("path", 4)).astype(float) ** 2)))
    assert code == 0 and len(out.splitlines()) >= 4


def test_kernel_input_errors(capsys, tmp_path):
    assert run(capsys, "kernel", "check", "--in", tmp_path / "missing.csv")[0] == 4
    bad = write(tmp_path / "bad.csv", "0,1\n2,0\n")
    assert run(capsys, "kernel", "check", "--in", bad)[0] == 4


# ------------------------------------------------------------ perc


def test_perc_sweep_exact(capsys, tmp_path):
    out_csv = tmp_path / "decay.csv"
    code, out, _ = run(capsys, "perc", "sweep", "--graph", "path6", "--walls", "radial:0",
                       "--t", "0.5,1,2", "--mode", "exact", "--csv", out_csv)
    assert code == 0
    data = json.loads(out)
    assert [r["t"] for r in data["rows"]] == [0.5, 1.0, 2.0]
    for row in data["rows"]:
        assert row["tau"][0][5] <= math.exp(-row["t"] * 5) + 1e-15
        assert row["marginals"]["passed"] and row["sandwich"]["passed"]
    assert out_csv.read_text().splitlines()[0] == "r,t=0.5,t=1.0,t=2.0"


def test_perc_sweep_mc_deterministic(capsys, tmp_path):
    args = ["perc", "sweep", "--graph", "cycle:5", "--walls", "radial:0", "--t", "0.5,1",
            "--mode", "mc", "--replicas", 5000, "--seed", 7]
    a = run(capsys, *args)[1]
    b = run(capsys, *args)[1]
    assert a == b
    data = json.loads(a)
    assert data["replicas"] == 5000 and data["rows"][0]["estimate"]["trials"] == 5000


def test_perc_sweep_caps_and_usage(capsys, tmp_path):
    cuts = {"n": 26, "cuts": [{"members": [i], "weight": 1.0} for i in range(1, 26)]}
    fam = cut_family_from_dict(cuts)
    path = write(tmp_path / "cuts.json", json.dumps(cut_family_to_dict(fam)))
    code, _, err = run(capsys, "perc", "sweep", "--graph", "path:26", "--walls", f"cuts:{path}",
                       "--t", "1", "--mode", "exact")
    assert code == 3 and "TooManyWalls" not in err and "25" in err
    assert run(capsys, "perc", "sweep", "--graph", "path4", "--walls", "radial:0", "--t", "1,0.5")[0] == 2
    assert run(capsys, "perc", "sweep", "--graph", "path4", "--walls", "radial:x", "--t", "1")[0] == 2
    assert run(capsys, "perc", "sweep", "--graph", "path4", "--walls", "bogus", "--t", "1")[0] == 2
    assert run(capsys, "perc", "sweep", "--graph", "path4", "--walls", "l1:/nonexistent", "--t", "1")[0] == 4
    assert run(capsys, "perc", "dist", "--graph", "path4")[0] == 2


def test_perc_sweep_l1_and_hilbert(capsys, tmp_path):
    pts = write(tmp_path / "pts.csv", format_points_csv(PointCloud(np.arange(4.0)[:, None], "l1")))
    data = json.loads(run(capsys, "perc", "sweep", "--graph", "path4", "--walls", f"l1:{pts}", "--t", "0.5")[1])
    assert np.allclose(data["rows"][0]["tau"], np.exp(-0.5 * distance_matrix(gen_graph("path", 4))), atol=1e-14)

    sq = write(tmp_path / "sq.csv", format_kernel_csv(distance_matrix(gen_graph("path", 4)).astype(float) ** 2))
    data = json.loads(run(capsys, "perc", "sweep", "--graph", "path4", "--walls", f"hilbert:{sq}",
                          "--t", "0.5", "--mode", "mc", "--replicas", 20000, "--samples", 20000)[1])
    assert data["rows"][0]["sandwich_sqrt"]["upper_passed"]


def test_perc_dist_and_decompose(capsys, tmp_path):
    code, out, _ = run(capsys, "perc", "dist", "--graph", "path2", "--bernoulli", 0.3)
    assert code == 0
    dist_file = write(tmp_path / "edge.json", out)
    rep = json.loads(run(capsys, "decompose", "--in", dist_file)[1])
    assert cut_family_from_dict(rep["family"]).total_weight == pytest.approx(0.7)
    assert rep["identity"]["passed"]

    full = write(tmp_path / "full.json", json.dumps([{"edges": [0, 1, 2, 3], "p": 1.0}]))
    rep = json.loads(run(capsys, "decompose", "--in", full, "--graph", "cycle:4")[1])
    assert rep["family"]["cuts"] == []
    assert run(capsys, "decompose", "--in", full)[0] == 2

    p3 = write(tmp_path / "p3.json", run(capsys, "perc", "dist", "--graph", "path3",
                                         "--walls", "identity", "--t", "0.5")[1])
    a = json.loads(run(capsys, "decompose", "--in", p3)[1])
    b = json.loads(run(capsys, "decompose", "--in", p3, "--order", "2,0,1")[1])
    assert a["identity"]["passed"] and b["identity"]["passed"]
    assert a["layers"] != b["layers"]
    assert run(capsys, "decompose", "--in", p3, "--order", "0,0,1")[0] == 2


# ------------------------------------------------------------ compress


def test_compress_fit_identity(capsys, tmp_path):
    sweep = write(tmp_path / "s.json", run(capsys, "perc", "sweep", "--graph", "path6", "--walls", "identity",
                                           "--t", "0.25,0.5,1")[1])
    code, out, _ = run(capsys, "compress", "fit", "--in", sweep)
    rep = json.loads(out)
    assert code == 0 and rep["alpha"]["alpha"] == 1.0 and rep["alpha"]["C"] == pytest.approx(1.0, abs=1e-12)
    assert all(f["alpha"] == 1.0 for f in rep["fits"])
    assert rep["dual"]["cut_cone_feasible"] == [True, True, True]


def test_compress_fit_degenerate(capsys, tmp_path):
    sweep = write(tmp_path / "s.json", run(capsys, "perc", "sweep", "--graph", "path4", "--walls", "identity",
                                           "--t", "0")[1])
    code, out, _ = run(capsys, "compress", "fit", "--in", sweep)
    rep = json.loads(out)
    assert code == 0 and "warning" in rep and rep["alpha"]["status"] == "no_decay"

    zero = json.loads(open(sweep).read())
    zero["rows"][0]["tau"] = [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]
    bad = write(tmp_path / "zero.json", json.dumps(zero))
    code, _, err = run(capsys, "compress", "fit", "--in", bad)
    assert code == 5 and "[0, 1]" in err
    assert run(capsys, "compress", "fit", "--in", write(tmp_path / "junk.json", "{}"))[0] == 4


def test_compress_dual(capsys):
    code, out, _ = run(capsys, "compress", "dual", "--graph", "path6", "--gammas", "0.5,0.25,0.125")
    rep = json.loads(out)
    assert code == 0 and rep["lipschitz_excess"] <= 1e-12 and rep["gammas_decreasing"]
    assert rep["cut_cone_feasible"] == [True, True, True]
    assert run(capsys, "compress", "dual", "--graph", "path6", "--gammas", "0.5,0")[0] == 2


# ------------------------------------------------------------ verify


def test_verify(capsys):
    code, out, _ = run(capsys, "verify", "--graph", "path5", "--walls", "radial:0", "--t", 1)
    assert code == 0 and out.count("PASS") == 6
    code, out, _ = run(capsys, "verify", "--graph", "cycle:5", "--walls", "identity", "--json")
    assert code == 0 and {r["check"] for r in json.loads(out)} == {
        "marginals", "sandwich", "psd", "fkg", "decomposition", "coupling"}


def test_experiment_config_validation():
    with pytest.raises(UsageError):
        ExperimentConfig("path4", "radial:0", [])
    with pytest.raises(UsageError):
        ExperimentConfig("path4", "radial:0", [-1.0])
    with pytest.raises(UsageError):
        ExperimentConfig("path4", "radial:0", [1.0], mode="mc", replicas=0)
    w, info = load_walls("identity", gen_graph("path", 3))
    assert np.array_equal(wall_kernel(w), distance_matrix(gen_graph("path", 3)))


def test_subprocess_entry_point_and_threads(tmp_path):
    args = [sys.executable, "-m", "wallperc.cli", "perc", "sweep", "--graph", "grid:2,3",
            "--walls", "radial:0", "--t", "0.5,1", "--mode", "mc", "--replicas", "20000", "--seed", "3"]
    outs = []
    for threads in ("1", "4"):
        env = dict(os.environ, WALLPERC_THREADS=threads)
        outs.append(subprocess.run(args, env=env, capture_output=True, check=True).stdout)
    assert outs[0] == outs[1]
