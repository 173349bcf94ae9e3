import json
import subprocess
import sys

import pytest

from leaderselect.cli import EXIT_INFEASIBLE, EXIT_INVALID, EXIT_OK, main
from leaderselect.graph import complete_graph, path_graph, write_graph


@pytest.fixture
def path3_file(tmp_path):
    p = tmp_path / "p3.txt"
    write_graph(path_graph(3), p)
    return str(p)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_select_static_k(capsys, path3_file):
    code, out, _ = run(capsys, "select-static", "--graph", path3_file, "--k", "1")
    body = json.loads(out)
    assert code == EXIT_OK and body["leaders"] == [1] and body["error"] == 1.0
    man = body["manifest"]
    assert man["subcommand"] == "select-static" and man["seed"] == 0 and len(man["inputs"]["graph"]) == 64


def test_select_static_alpha_csv(capsys, path3_file):
    code, out, _ = run(capsys, "select-static", "--graph", path3_file, "--alpha", "0.6", "--format", "csv")
    assert code == EXIT_OK and out.splitlines()[:3] == ["step,leader,error", "1,1,1.0", "2,0,0.5"]


def test_out_writes_manifest(capsys, tmp_path, path3_file):
    out = tmp_path / "res.json"
    code, stdout, _ = run(capsys, "select-static", "--graph", path3_file, "--k", "2", "--out", str(out))
    assert code == EXIT_OK and stdout == ""
    assert json.loads(out.read_text())["leaders"] == [1, 0]
    assert json.loads((tmp_path / "res.json.manifest.json").read_text())["parameters"]["k"] == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["select-static", "--graph", "PATH", "--k", "0"],
        ["select-static", "--graph", "PATH"],
        ["select-static", "--graph", "PATH", "--k", "1", "--alpha", "1"],
        ["select-static", "--graph", "/nonexistent/graph.txt", "--k", "1"],
        ["select-static", "--graph", "PATH", "--k", "1", "--threads", "0"],
        ["bench", "--experiment", "fig9"],
        ["frobnicate"],
        [],
    ],
)
def test_invalid_inputs_exit_2(capsys, path3_file, argv):
    argv = [path3_file if a == "PATH" else a for a in argv]
    code, _, err = run(capsys, *argv)
    assert code == EXIT_INVALID
    assert "error" in json.loads(err.strip().splitlines()[-1])


def test_unknown_subcommand_code(capsys):
    _, _, err = run(capsys, "frobnicate")
    assert json.loads(err.strip().splitlines()[-1])["error"] == "unknown_subcommand"


def test_malformed_graph_exit_2(capsys, tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("n 3\ne 0 1 1.0\n")
    code, _, err = run(capsys, "select-static", "--graph", str(bad), "--k", "1")
    assert code == EXIT_INVALID and json.loads(err)["error"]


def test_select_failures(capsys, path3_file):
    code, out, _ = run(capsys, "select-failures", "--graph", path3_file, "--k", "1", "--p", "0.1", "--exact-enum")
    assert code == EXIT_OK and json.loads(out)["leaders"] == [1]


def test_select_switching(capsys, tmp_path):
    d = tmp_path / "ens"
    d.mkdir()
    write_graph(path_graph(3), d / "a.txt")
    write_graph(complete_graph(3), d / "b.txt")
    code, out, _ = run(capsys, "select-switching", "--ensemble", str(d), "--k", "1")
    body = json.loads(out)
    assert code == EXIT_OK and body["leaders"] == [1] and len(body["manifest"]["inputs"]) == 2


def test_online_trace(capsys, tmp_path):
    d = tmp_path / "trace"
    d.mkdir()
    for t in range(4):
        write_graph(path_graph(4), d / f"{t:03d}.txt")
    code, out, _ = run(capsys, "online", "--trace", str(d), "--k", "1")
    lines = out.splitlines()
    assert code == EXIT_OK and lines[0].startswith("t,error") and len(lines) == 5


def test_simulate(capsys, path3_file):
    code, out, _ = run(capsys, "simulate", "--graph", path3_file, "--leaders", "1", "--horizon", "20", "--dt", "0.01")
    body = json.loads(out)
    assert code == EXIT_OK and body["analytic"] == 1.0 and body["samples"] == 1000


def test_verify_commute(capsys, path3_file):
    code, out, _ = run(capsys, "verify-commute", "--graph", path3_file, "--leaders", "2", "--walks", "20000")
    body = json.loads(out)
    assert code == EXIT_OK
    assert body["nodes"][0]["commute_exact"] == pytest.approx(8.0)
    assert body["nodes"][0]["error_from_commute"] == pytest.approx(body["nodes"][0]["error"])


def test_gen_graph_and_bench(capsys, tmp_path):
    out = tmp_path / "g.txt"
    assert main(["gen-graph", "--n", "12", "--seed", "3", "--out", str(out)]) == EXIT_OK
    assert out.read_text().startswith("n 12")
    code, csv_text, _ = run(capsys, "bench", "--experiment", "fig1a", "--trials", "1", "--n", "8")
    assert code == EXIT_OK and csv_text.startswith("experiment,method,x,param,trial,metric,value")


def test_infeasible_exit_3(capsys, tmp_path):
    # Every sampled topology isolates the follower, so no leader set is evaluable.
    g = tmp_path / "p2.txt"
    write_graph(path_graph(2), g)
    code, _, err = run(capsys, "select-failures", "--graph", str(g), "--k", "1", "--p", "1.0")
    assert code == EXIT_INFEASIBLE and json.loads(err)["error"]


def test_help_lists_grammar():
    proc = subprocess.run([sys.executable, "-m", "leaderselect.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "graph file grammar" in proc.stdout
