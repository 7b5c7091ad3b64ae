import json

import pytest

from modmetric.cli import main
from modmetric.io import graph_to_json
from modmetric.graph import grid_square


def run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path)])


def test_modulus_grid_corners(tmp_path, capsys):
    code = run(tmp_path, "modulus", "--gen", "grid_square:n=8", "--set-e", "ids:0",
               "--set-f", "ids:80", "--svg")
    assert code == 0
    doc = json.loads((tmp_path / "modulus.json").read_text())
    assert doc["flag"] == "finite" and doc["value"] > 0
    assert (tmp_path / "rho.svg").read_text().startswith("<svg")
    assert "modulus" in capsys.readouterr().out


def test_modulus_empty_family(tmp_path):
    code = run(tmp_path, "modulus", "--gen", "grid_square:n=4", "--set-e", "ids:0",
               "--set-f", "ids:24", "--cap", "0.5")
    assert code == 0
    assert json.loads((tmp_path / "modulus.json").read_text())["flag"] == "empty"


def test_malformed_graph(tmp_path, capsys):
    bad = tmp_path / "g.json"
    bad.write_text('{"nodes": [')
    code = run(tmp_path, "modulus", "--graph", str(bad), "--set-e", "ids:0", "--set-f", "ids:1")
    assert code == 2
    assert "invalid JSON at line 1" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["modulus", "--gen", "grid_square:n=4", "--set-e", "ids:0"],
    ["modulus", "--gen", "grid_square:n=4", "--set-e", "ids:0", "--set-f", "ids:999"],
    ["modulus", "--gen", "grid_square:n=4", "--set-e", "ids:0", "--set-f", "ids:1", "--p", "0.5"],
    ["modulus", "--gen", "grid_square:n=4", "--set-e", "ids:0", "--set-f", "ids:1", "--tol", "-1"],
    ["modulus", "--set-e", "ids:0", "--set-f", "ids:1"],
    ["essmetric", "--gen", "bogus:n=3"],
    ["pullback", "--gen", "grid_square:n=4"],
    ["sobcheck", "--gen", "grid_square:n=4", "--x0", "99"],
    ["thickness", "--gen", "grid_square:n=4", "--set-e", "ids:0", "--set-f", "ids:1",
     "--levels", "2"],
    ["experiment", "nope"],
])
def test_input_errors_exit_2(tmp_path, argv):
    assert run(tmp_path, *argv) == 2


def test_solver_nonconvergence_exit_3(tmp_path, monkeypatch):
    from modmetric import cli
    from modmetric.modulus import ModulusNotConverged

    def boom(*a, **k):
        raise ModulusNotConverged("stuck", 0.1, 0.2, 5)

    monkeypatch.setattr(cli, "p_modulus", boom)
    assert run(tmp_path, "modulus", "--gen", "grid_square:n=4", "--set-e", "ids:0",
               "--set-f", "ids:24") == 3


def test_graph_file_and_determinism(tmp_path):
    gfile = tmp_path / "g.json"
    gfile.write_text(graph_to_json(grid_square(4)))
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert main(["essmetric", "--graph", str(gfile), "--nodes", "ids:0,6,12,24",
                     "--out", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert set(outs[0]) == {"essential_metric.csv", "essential_metric.json", "predistance.csv",
                            "profiles.json"}


def test_pullback_command(tmp_path):
    code = run(tmp_path, "pullback", "--gen", "collapsed_disc:n=8",
               "--nodes", "rect:0.125,0.5,0.875,0.5", "--eps-mod", "1e-6")
    assert code == 0
    q = json.loads((tmp_path / "quotient_path.json").read_text())
    assert any(len(c) > 1 for c in q["classes"])
    qe = json.loads((tmp_path / "quotient_essential.json").read_text())
    assert all(len(c) == 1 for c in qe["classes"])
    assert json.loads((tmp_path / "factorization.json").read_text())["passed"]


def test_thickness_quasiconvexity_sobcheck(tmp_path):
    assert run(tmp_path, "thickness", "--gen", "grid_square:n=4", "--set-e", "rect:0,0,0,1",
               "--set-f", "rect:1,0,1,1", "--levels", "3") == 0
    doc = json.loads((tmp_path / "thickness.json").read_text())
    assert set(doc) >= {"levels", "moduli", "exponent", "residual", "verdict"}
    assert doc["verdict"] == "bounded-below"
    assert run(tmp_path, "quasiconvexity", "--gen", "grid_square:n=4", "--set-e", "ids:0",
               "--set-f", "ids:24") == 0
    assert json.loads((tmp_path / "quasiconvexity.json").read_text())["value"] == 1.0
    assert run(tmp_path, "sobcheck", "--gen", "grid_square:n=4", "--nodes", "ids:0,7,18,24") == 0
    assert json.loads((tmp_path / "sobcheck.json").read_text())["passed"]


def test_sobcheck_precondition_failure(tmp_path):
    fn = tmp_path / "f.json"
    fn.write_text(json.dumps({"values": [3.0 * k for k in range(25)]}))
    assert run(tmp_path, "sobcheck", "--gen", "grid_square:n=4", "--function", str(fn),
               "--nodes", "ids:0,24") == 1
    assert json.loads((tmp_path / "sobcheck.json").read_text())["passed"] is False
    fn.write_text(json.dumps({"values": [1.0, 2.0]}))
    assert run(tmp_path, "sobcheck", "--gen", "grid_square:n=4", "--function", str(fn)) == 2


def test_experiment_pass_and_fail(tmp_path, capsys):
    assert run(tmp_path, "experiment", "grid-identity", "--n", "4") == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["passed"] and (tmp_path / "essential_metric.csv").exists()
    # a threshold below the null segment's modulus lets the collapse through
    code = run(tmp_path, "experiment", "collapsed-disc", "--n", "16", "--eps-mod", "1e-13")
    assert code == 1
    assert "failed: max relative gap" in capsys.readouterr().err


def test_cusp_experiment_writes_profiles(tmp_path):
    code = run(tmp_path, "experiment", "cusp-threshold", "--n", "4")
    assert code in (0, 1)
    doc = json.loads((tmp_path / "profiles.json").read_text())
    assert {"q=2", "q=3", "q=4"} <= set(doc)
    assert doc["q=3"]["verdict"] == "inconclusive"
