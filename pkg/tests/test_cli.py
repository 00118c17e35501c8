"""End-to-end CLI: gen -> train -> solve -> bench, plus exit codes."""

import json

import pytest

from nlns.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A tiny generated dataset and a briefly trained model."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    model = root / "model.nlns"
    assert main(["gen", "--kind", "sudoku4", "--givens", "10", "--count", "4",
                 "--seed", "1", "--out", str(data)]) == 0
    assert main(["train", "--kind", "sudoku4", "--data", str(data),
                 "--steps", "3", "--batch", "2", "--width", "8", "--layers", "1",
                 "--heads", "2", "--seed", "0", "--out", str(model)]) == 0
    return root, data, model


def test_gen_writes_manifest(workspace):
    _, data, _ = workspace
    manifest = json.loads((data / "manifest.json").read_text())
    assert manifest["kind"] == "sudoku4"
    assert manifest["count"] == 4


def test_solve_with_trace(workspace, tmp_path):
    root, data, model = workspace
    instance_file = tmp_path / "one.txt"
    line = (data / "instances.txt").read_text().splitlines()[0]
    instance_file.write_text(line + "\n")
    trace = tmp_path / "trace.csv"
    code = main(["solve", "--model", str(model), "--instance", str(instance_file),
                 "--destroy", "random", "--repair", "sample", "--rho", "0.3",
                 "--iters", "20", "--seed", "2", "--trace", str(trace)])
    assert code == 0
    assert trace.read_text().startswith("instance,iter,cost,best_cost")


def test_bench_outputs(workspace, tmp_path):
    _, data, model = workspace
    out_csv = tmp_path / "agg.csv"
    out_json = tmp_path / "agg.json"
    out_trace = tmp_path / "trace.csv"
    code = main(["bench", "--model", str(model), "--data", str(data),
                 "--destroy", "worst-stochastic", "--repair", "greedy",
                 "--rho", "0.3", "--iters", "10", "--seed", "3",
                 "--out-csv", str(out_csv), "--out-json", str(out_json),
                 "--out-trace", str(out_trace)])
    assert code == 0
    assert out_csv.read_text().splitlines()[0].startswith("config,instance")
    payload = json.loads(out_json.read_text())
    assert payload["config_id"] == "worst-stochastic+greedy"
    assert payload["metrics"]["count"] == 4


def test_parse_error_exit_code(workspace, tmp_path):
    _, _, model = workspace
    bad = tmp_path / "bad.txt"
    bad.write_text("xxxx" + "." * 12 + "\n")
    assert main(["solve", "--model", str(model), "--instance", str(bad),
                 "--iters", "5"]) == 2


def test_config_error_exit_code(workspace, tmp_path):
    root, data, model = workspace
    instance_file = tmp_path / "one.txt"
    line = (data / "instances.txt").read_text().splitlines()[0]
    instance_file.write_text(line + "\n")
    assert main(["solve", "--model", str(model), "--instance", str(instance_file),
                 "--destroy", "bogus", "--iters", "5"]) == 3


def test_runtime_fault_exit_code(tmp_path):
    missing = tmp_path / "missing.nlns"
    inst = tmp_path / "i.txt"
    inst.write_text("." * 16 + "\n")
    assert main(["solve", "--model", str(missing), "--instance", str(inst),
                 "--iters", "2"]) == 4


def test_gen_graph_dataset(tmp_path):
    out = tmp_path / "graphs"
    assert main(["gen", "--kind", "graph", "--n", "8", "--p", "0.4",
                 "--count", "2", "--seed", "5", "--out", str(out)]) == 0
    assert len(list(out.glob("graph_*.col"))) == 2
