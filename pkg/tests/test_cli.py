import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from cltca.cli import main, write_layer_errors
from cltca.ingest import export_factors, load_factors
from cltca.kruskal import KruskalFactors, normalize_components
from cltca.npyio import read_npy, write_npy


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    """Noiseless rank-3 synth tensor written through the CLI."""
    d = tmp_path_factory.mktemp("synth")
    spec = d / "spec.json"
    spec.write_text(json.dumps({"dims": [30, 8, 10], "rank": 3, "seed": 4}))
    assert run("synth", "--spec", spec, "--out-dir", d) == 0
    return d


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_help_and_version(capsys):
    assert run("--help") == 0
    assert "exit codes" in capsys.readouterr().out
    assert run("--version") == 0


def test_synth_outputs(planted, schemas):
    assert read_npy(planted / "tensor.npy").shape == (30, 8, 10)
    meta = read_json(planted / "truth" / "meta.json")
    assert meta["rank"] == 3 and meta["spec"]["seed"] == 4
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(meta, schemas("factors_meta"))


def test_fit_recovers_planted(planted, tmp_path, schemas):
    code = run("fit", "--tensor", planted / "tensor.npy", "--rank", 3, "--replicates", 4,
               "--algorithm", "nn-hals", "--out-dir", tmp_path, "--seed", 1)
    assert code == 0
    report = read_json(tmp_path / "fit_report.json")
    assert report["final_error"] <= 1e-4
    assert [r["seed"] for r in report["replicates"]] == [1, 2, 3, 4]
    f, meta = load_factors(tmp_path / "factors")
    assert f.rank == 3 and meta["final_error"] == report["final_error"]
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(report, schemas("fit_report"))


def test_fit_is_byte_reproducible(planted, tmp_path):
    for name in ("a", "b"):
        assert run("fit", "--tensor", planted / "tensor.npy", "--rank", 2, "--replicates", 2,
                   "--max-iters", 50, "--out-dir", tmp_path / name, "--threads", 2) == 0
    for rel in ("fit_report.json", "factors/U.npy", "factors/lambda.npy", "factors/meta.json"):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes()


def test_seed_from_environment(planted, tmp_path, monkeypatch):
    monkeypatch.setenv("TCA_SEED", "17")
    assert run("fit", "--tensor", planted / "tensor.npy", "--rank", 1, "--max-iters", 5,
               "--out-dir", tmp_path) == 0
    assert read_json(tmp_path / "fit_report.json")["seed"] == 17
    monkeypatch.setenv("TCA_SEED", "x")
    assert run("fit", "--tensor", planted / "tensor.npy", "--rank", 1,
               "--out-dir", tmp_path) == 2


@pytest.mark.parametrize("argv", [
    ["fit", "--rank", "0"],
    ["fit", "--rank", "-1"],
    ["sweep", "--ranks", "8..3"],
    ["sweep", "--ranks", "2-4"],
    ["sweep", "--ranks", "1..3", "--replicates", "1", "--select"],
])
def test_usage_errors(planted, tmp_path, argv, capsys):
    assert run(*argv, "--tensor", planted / "tensor.npy", "--out-dir", tmp_path) == 2


def test_missing_tensor_is_io_error(tmp_path):
    assert run("fit", "--tensor", tmp_path / "nope.npy", "--rank", 1) == 3


def test_corrupt_tensor_is_io_error(tmp_path):
    (tmp_path / "bad.npy").write_bytes(b"garbage")
    assert run("fit", "--tensor", tmp_path / "bad.npy", "--rank", 1) == 3


def test_negative_tensor_with_nn_solver(tmp_path):
    write_npy(tmp_path / "neg.npy", -np.ones((2, 2, 2)))
    assert run("fit", "--tensor", tmp_path / "neg.npy", "--rank", 1) == 2
    assert run("fit", "--tensor", tmp_path / "neg.npy", "--rank", 1, "--algorithm", "als",
               "--out-dir", tmp_path) == 0


def test_sweep_select(planted, tmp_path, schemas):
    code = run("sweep", "--tensor", planted / "tensor.npy", "--ranks", "1..5",
               "--replicates", 3, "--algorithm", "nn-hals", "--select", "--out-dir", tmp_path)
    assert code == 0
    doc = read_json(tmp_path / "sweep.json")
    assert doc["selected_rank"] == 3
    with open(tmp_path / "sweep.csv") as fh:
        assert len(list(csv.DictReader(fh))) == 15
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(doc, schemas("sweep"))


def test_sweep_no_stable_rank(tmp_path):
    # pure noise: replicates disagree at every rank
    write_npy(tmp_path / "noise.npy", np.random.default_rng(0).random((12, 10, 8)))
    code = run("sweep", "--tensor", tmp_path / "noise.npy", "--ranks", "3..6", "--replicates", 3,
               "--algorithm", "nn-hals", "--max-iters", 100, "--select", "--out-dir", tmp_path,
               "--threshold", 0.99)
    assert code == 5
    assert read_json(tmp_path / "sweep.json")["selected_rank"] is None


def test_compare(planted, tmp_path, schemas, capsys):
    truth = planted / "truth"
    assert run("compare", "--a", truth, "--b", truth, "--out-dir", tmp_path / "same") == 0
    assert read_json(tmp_path / "same" / "similarity.json")["score"] == pytest.approx(1.0, abs=1e-9)

    f, _ = load_factors(truth)
    export_factors(f.permute([2, 0, 1]), tmp_path / "shuffled")
    assert run("compare", "--a", truth, "--b", tmp_path / "shuffled",
               "--out-dir", tmp_path / "shuf") == 0
    doc = read_json(tmp_path / "shuf" / "similarity.json")
    assert doc["score"] == pytest.approx(1.0, abs=1e-9)
    assert doc["permutation"] == [1, 2, 0]
    aligned, _ = load_factors(tmp_path / "shuf" / "aligned_b")
    np.testing.assert_allclose(aligned.U, f.U, atol=1e-14)
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(doc, schemas("similarity"))


def test_compare_rank_mismatch(planted, tmp_path):
    f = normalize_components(KruskalFactors.from_factors(np.ones((30, 1)), np.ones((8, 1)),
                                                         np.ones((10, 1))))
    export_factors(f, tmp_path / "r1")
    assert run("compare", "--a", planted / "truth", "--b", tmp_path / "r1",
               "--out-dir", tmp_path) == 6


def test_compare_missing_dir(tmp_path):
    assert run("compare", "--a", tmp_path / "x", "--b", tmp_path / "y") == 3


def square_embedding(path):
    rows = ["class,x,y"]
    corners = [(0, 0), (1, 0), (1, 1), (0, 1)]
    for c, (x, y) in enumerate(corners):
        rows += [f"{c},{x + d},{y + d}" for d in (-0.01, 0.01)]
    rows += ["4,0.5,0.5", "5,0.4,0.6"]
    path.write_text("\n".join(rows) + "\n")


def test_curate(tmp_path, schemas, capsys):
    emb = tmp_path / "emb.csv"
    square_embedding(emb)
    assert run("curate", "--embedding", emb, "--initial", 2, "--tasks", 2, "--seed", 3,
               "--out-dir", tmp_path / "a") == 0
    assert run("curate", "--embedding", emb, "--initial", 2, "--tasks", 2, "--seed", 3,
               "--out-dir", tmp_path / "b") == 0
    a = (tmp_path / "a" / "task_plan.json").read_bytes()
    assert a == (tmp_path / "b" / "task_plan.json").read_bytes()
    plan = json.loads(a)
    assert set(plan["initial"]) <= {0, 1, 2, 3}
    assert sorted(plan["hull"]) == [0, 1, 2, 3]
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(plan, schemas("task_plan"))


def test_curate_npy_embedding(tmp_path):
    write_npy(tmp_path / "xy.npy", np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    write_npy(tmp_path / "lab.npy", np.array([7, 8, 9]))
    assert run("curate", "--embedding", tmp_path / "xy.npy", "--labels", tmp_path / "lab.npy",
               "--initial", 3, "--tasks", 0, "--out-dir", tmp_path) == 0
    assert sorted(read_json(tmp_path / "task_plan.json")["initial"]) == [7, 8, 9]
    assert run("curate", "--embedding", tmp_path / "xy.npy", "--initial", 3,
               "--tasks", 0) == 2


def test_curate_infeasible(tmp_path):
    emb = tmp_path / "emb.csv"
    square_embedding(emb)
    assert run("curate", "--embedding", emb, "--initial", 5, "--tasks", 1,
               "--out-dir", tmp_path) == 7
    assert run("curate", "--embedding", emb, "--initial", 2, "--tasks", 9,
               "--out-dir", tmp_path) == 7


def test_build_tensor(tmp_path):
    snaps = []
    for k in range(3):
        write_npy(tmp_path / f"s{k}.npy", np.full((4, 10), float(k)))
        snaps.append({"task": 1, "epoch": k, "path": f"s{k}.npy"})
    (tmp_path / "m.json").write_text(json.dumps({"layout": "activations", "snapshots": snaps}))
    assert run("build-tensor", "--manifest", tmp_path / "m.json", "--out-dir", tmp_path) == 0
    t = read_npy(tmp_path / "tensor.npy")
    assert t.shape == (10, 4, 3)
    assert t[0, 0, 2] == 2.0
    labels = read_json(tmp_path / "tensor_labels.json")
    assert labels[2][1] == "(task 1, epoch 1)"


def test_build_tensor_errors(tmp_path):
    assert run("build-tensor", "--manifest", tmp_path / "missing.json") == 3
    (tmp_path / "empty.json").write_text('{"layout": "activations", "snapshots": []}')
    assert run("build-tensor", "--manifest", tmp_path / "empty.json") == 3


def test_mask(planted, tmp_path, schemas):
    assert run("mask", "--factors", planted / "truth", "--component", 0, "--top-k", 0,
               "--out-dir", tmp_path) == 0
    assert not read_npy(tmp_path / "mask.npy").any()
    assert run("mask", "--factors", planted / "truth", "--component", 1, "--top-k", 5,
               "--layer", "conv3", "--out-dir", tmp_path) == 0
    assert read_npy(tmp_path / "mask.npy").sum() == 5
    side = read_json(tmp_path / "mask.json")
    assert side["layer"] == "conv3" and len(side["selected"]) == 5
    jsonschema = pytest.importorskip("jsonschema")
    jsonschema.validate(side, schemas("mask"))
    assert run("mask", "--factors", planted / "truth", "--component", 3, "--top-k", 1) == 2


def test_layer_error_csv(planted, tmp_path):
    reports = {}
    for layer in ("conv1", "conv2"):
        d = tmp_path / layer
        assert run("fit", "--tensor", planted / "tensor.npy", "--rank", 2, "--max-iters", 20,
                   "--out-dir", d) == 0
        reports[layer] = d / "fit_report.json"
    write_layer_errors(reports, tmp_path / "layers.csv")
    with open(tmp_path / "layers.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["layer"] for r in rows] == ["conv1", "conv2"]
    assert float(rows[0]["best_error"]) == read_json(reports["conv1"])["final_error"]


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "cltca", "--version"],
                         capture_output=True, text=True, check=True)
    assert out.stdout.startswith("cltca ")
