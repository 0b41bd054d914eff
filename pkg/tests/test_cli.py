"""End-to-end CLI contract: artifacts, determinism, exit codes.

Exit code mapping under test: 0 success, 1 usage, 2 configuration/data,
3 numeric failure.  All commands run in-process through cli.main().
"""

import json
import math
from pathlib import Path

import numpy as np
import pytest

from resonet import cli, lattice, simulator
from resonet.errors import NumericError


def run_cli(argv):
    """Invoke the CLI in-process; normalize argparse SystemExit to a code."""
    try:
        return cli.main([str(a) for a in argv])
    except SystemExit as exc:
        return int(exc.code)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """A small dataset plus a finished training run, shared read-only."""
    base = tmp_path_factory.mktemp("cliws")
    ds = base / "ds"
    rc = run_cli(["gen-dataset", "--out", ds, "--seed", "3",
                  "--centers", "30,50", "--rate", "2000", "--duration", "0.5",
                  "--sigma", "0.05", "--jitter", "0.05", "--snr", "20",
                  "--train-per-class", "3", "--test-per-class", "2"])
    assert rc == 0
    config = base / "config.json"
    config.write_text(json.dumps({
        "lattice": {"rows": 2, "cols": 2, "grounded": [],
                    "input": 0, "outputs": [2, 3]},
        "dataset": {"manifest": "ds/manifest.json"},
        "train": {"epochs": 3, "batch_size": 6, "seed": 11},
    }))
    run1 = base / "run1"
    rc = run_cli(["train", "--config", config, "--out", run1])
    assert rc == 0
    return {"base": base, "ds": ds, "config": config, "run1": run1,
            "system": run1 / "system.json"}


# --- usage errors (exit 1) ---------------------------------------------------------

def test_no_command_prints_usage():
    assert run_cli([]) == 1


def test_unknown_command_is_a_usage_error():
    assert run_cli(["frobnicate"]) == 1


def test_missing_required_flag_is_a_usage_error(tmp_path):
    assert run_cli(["gen-dataset", "--out", tmp_path / "x"]) == 1  # no --seed


def test_empty_input_list_is_a_usage_error(workspace):
    assert run_cli(["classify", "--system", workspace["system"], "--input"]) == 1


# --- gen-dataset -------------------------------------------------------------------

def test_dataset_files_and_manifest(workspace):
    files = sorted(p.name for p in workspace["ds"].glob("*.csv"))
    assert len(files) == 10   # 2 classes x (3 train + 2 test)
    manifest = json.loads((workspace["ds"] / "manifest.json").read_text())
    assert manifest["rate"] == 2000.0
    assert manifest["classes"] == [30.0, 50.0]
    assert len(manifest["samples"]) == 10


def test_gen_dataset_refuses_overwrite_then_obeys_force(workspace, capsys):
    args = ["gen-dataset", "--out", workspace["ds"], "--seed", "3",
            "--centers", "30,50", "--rate", "2000", "--duration", "0.5",
            "--sigma", "0.05", "--jitter", "0.05", "--snr", "20",
            "--train-per-class", "3", "--test-per-class", "2"]
    assert run_cli(args) == 2
    assert "already exists" in capsys.readouterr().err
    assert run_cli(args + ["--force"]) == 0


def test_gen_dataset_reruns_are_byte_identical(tmp_path):
    dirs = [tmp_path / "a", tmp_path / "b"]
    for d in dirs:
        rc = run_cli(["gen-dataset", "--out", d, "--seed", "17",
                      "--centers", "30,50", "--duration", "0.5",
                      "--train-per-class", "2", "--test-per-class", "1"])
        assert rc == 0
    names = sorted(p.name for p in dirs[0].iterdir())
    assert names == sorted(p.name for p in dirs[1].iterdir())
    for name in names:
        assert (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()


def test_default_dataset_spec_writes_360_sample_files(tmp_path):
    out = tmp_path / "full"
    assert run_cli(["gen-dataset", "--out", out, "--seed", "0"]) == 0
    files = list(out.glob("*.csv"))
    assert len(files) == 360      # 3 classes x (100 train + 20 test)
    assert sum(1 for p in files if "_test_" in p.name) == 60


# --- train -------------------------------------------------------------------------

def test_train_artifacts(workspace):
    run1 = workspace["run1"]
    metrics = (run1 / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "epoch,loss,train_acc,val_acc"
    assert len(metrics) == 4      # header + 3 epochs
    assert [row.split(",")[0] for row in metrics[1:]] == ["1", "2", "3"]

    for name in ("model.json", "system.json", "system_quantized.json",
                 "quantization.json"):
        assert (run1 / name).exists(), name
    for epoch in (1, 2, 3):
        assert (run1 / "checkpoints" / f"epoch_{epoch:03d}.json").exists()

    model = json.loads((run1 / "model.json").read_text())
    assert model["spec"] == {"rows": 2, "cols": 2, "grounded": [],
                             "input": 0, "outputs": [2, 3]}
    assert len(model["history"]) == 3
    assert model["stop_reason"] == "epochs"
    assert len(model["mass_outer_kg"]) == 4

    report = json.loads((run1 / "quantization.json").read_text())
    assert report["series"] == "E96"
    assert len(report["entries"]) == 8    # 4 internal + 4 coupling resistors


def test_train_rerun_is_byte_identical(workspace, tmp_path):
    run2 = tmp_path / "run2"
    assert run_cli(["train", "--config", workspace["config"], "--out", run2]) == 0
    for name in ("metrics.csv", "model.json", "system.json",
                 "system_quantized.json", "quantization.json"):
        assert (run2 / name).read_bytes() == \
            (workspace["run1"] / name).read_bytes(), name


def test_resume_matches_the_uninterrupted_run(workspace, tmp_path):
    run3 = tmp_path / "run3"
    rc = run_cli(["train", "--config", workspace["config"], "--out", run3,
                  "--resume", workspace["run1"] / "checkpoints" / "epoch_001.json"])
    assert rc == 0
    assert (run3 / "metrics.csv").read_bytes() == \
        (workspace["run1"] / "metrics.csv").read_bytes()
    assert (run3 / "model.json").read_bytes() == \
        (workspace["run1"] / "model.json").read_bytes()


def test_train_without_any_seed_is_a_config_error(workspace, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    doc = json.loads(workspace["config"].read_text())
    doc["dataset"]["manifest"] = str(workspace["ds"] / "manifest.json")
    del doc["train"]["seed"]
    cfg.write_text(json.dumps(doc))
    assert run_cli(["train", "--config", cfg, "--out", tmp_path / "o"]) == 2
    assert "seed" in capsys.readouterr().err
    doc["train"]["epochs"] = 1
    cfg.write_text(json.dumps(doc))
    assert run_cli(["train", "--config", cfg, "--out", tmp_path / "o2",
                    "--seed", "11"]) == 0


def test_train_missing_config_file_exits_2(tmp_path):
    assert run_cli(["train", "--config", tmp_path / "nope.json",
                    "--out", tmp_path / "o"]) == 2


def test_train_divergence_exits_3(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "lattice": {"rows": 2, "cols": 2, "grounded": [],
                    "input": 0, "outputs": [2, 3]},
        "dataset": {"centers_hz": [10.0, 20.0], "rate_hz": 100.0,
                    "duration_s": 1.0, "sigma_s": 0.15, "jitter_s": 0.05,
                    "snr_db": None, "train_per_class": 2, "test_per_class": 1,
                    "seed": 2},
        "train": {"epochs": 2, "batch_size": 4, "seed": 0,
                  "f0_band_hz": [60.0, 80.0], "init_output_centers": False},
    }))
    assert run_cli(["train", "--config", cfg, "--out", tmp_path / "o"]) == 3
    assert "diverged" in capsys.readouterr().err


# --- classify ----------------------------------------------------------------------

def test_classify_manifest_writes_verdicts_and_confusion(workspace, tmp_path,
                                                         capsys):
    out = tmp_path / "preds.json"
    rc = run_cli(["classify", "--system", workspace["system"],
                  "--manifest", workspace["ds"] / "manifest.json",
                  "--out", out])
    assert rc == 0
    assert "accuracy: " in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert len(doc["verdicts"]) == 10
    for v in doc["verdicts"]:
        assert set(v) == {"file", "energies", "probs", "class", "label"}
        assert len(v["energies"]) == 2 and len(v["probs"]) == 2
        assert v["class"] in (0, 1)
    assert 0.0 <= doc["accuracy"] <= 1.0
    confusion = np.asarray(doc["confusion"])
    assert confusion.shape == (2, 2)
    np.testing.assert_array_equal(confusion.sum(axis=1), [5, 5])


def test_classify_unlabeled_files_print_json(workspace, capsys):
    files = sorted(workspace["ds"].glob("class0_test_*.csv"))[:2]
    rc = run_cli(["classify", "--system", workspace["system"],
                  "--input", *files, "--rate", "2000"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"verdicts"}     # no labels -> no accuracy/confusion
    assert len(doc["verdicts"]) == 2
    for v in doc["verdicts"]:
        assert set(v) == {"file", "energies", "probs", "class"}


def test_classify_requires_exactly_one_source(workspace, tmp_path):
    sig = workspace["ds"] / "class0_train_0000.csv"
    rc = run_cli(["classify", "--system", workspace["system"],
                  "--input", sig, "--rate", "2000",
                  "--manifest", workspace["ds"] / "manifest.json"])
    assert rc == 2
    assert run_cli(["classify", "--system", workspace["system"]]) == 2


def test_classify_zero_signal_yields_null_verdict(workspace, tmp_path, capsys):
    zero = tmp_path / "zero.csv"
    zero.write_text("0.0\n" * 200)
    rc = run_cli(["classify", "--system", workspace["system"],
                  "--input", zero, "--rate", "2000"])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["verdicts"][0]["class"] is None
    assert doc["verdicts"][0]["probs"] is None


def test_classify_numeric_failure_names_the_file(workspace, tmp_path,
                                                 monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise NumericError("synthetic blowup")

    monkeypatch.setattr(cli.simulator, "run", boom)
    sig = workspace["ds"] / "class1_train_0000.csv"
    rc = run_cli(["classify", "--system", workspace["system"],
                  "--input", sig, "--rate", "2000"])
    assert rc == 3
    assert sig.name in capsys.readouterr().err


def test_missing_system_file_exits_2(workspace, tmp_path):
    rc = run_cli(["classify", "--system", tmp_path / "nope.json",
                  "--manifest", workspace["ds"] / "manifest.json"])
    assert rc == 2


# --- simulate ----------------------------------------------------------------------

def test_simulate_artifacts(workspace, tmp_path, capsys):
    out = tmp_path / "sim"
    rc = run_cli(["simulate", "--system", workspace["system"],
                  "--input", workspace["ds"] / "class0_train_0000.csv",
                  "--rate", "2000", "--out", out, "--logic"])
    assert rc == 0
    traj = (out / "trajectory.csv").read_text().splitlines()
    assert traj[0] == "t,out1,out2"
    assert len(traj) == 1001      # 0.5 s at 2 kHz plus header

    readout = json.loads((out / "energies.json").read_text())
    assert readout["output_cells"] == [2, 3]
    assert len(readout["energies"]) == 2
    assert readout["predicted_class"] in (0, 1)
    assert len(readout["probabilities"]) == 2
    assert "predicted class:" in capsys.readouterr().out

    logic = (out / "logic.csv").read_text().splitlines()
    assert logic[0] == "t,out1,out2"
    assert len(logic) == 1001
    assert set("".join(r.split(",")[1] for r in logic[1:])) <= {"0", "1"}


def test_simulate_zero_signal_is_undecidable_but_succeeds(workspace, tmp_path,
                                                          capsys):
    zero = tmp_path / "zero.csv"
    zero.write_text("0.0\n" * 100)
    out = tmp_path / "sim0"
    rc = run_cli(["simulate", "--system", workspace["system"],
                  "--input", zero, "--rate", "2000", "--out", out])
    assert rc == 0
    readout = json.loads((out / "energies.json").read_text())
    assert readout["predicted_class"] is None
    assert readout["probabilities"] is None
    assert "undecidable" in capsys.readouterr().out


def test_simulate_bare_csv_without_rate_exits_2(workspace, tmp_path):
    rc = run_cli(["simulate", "--system", workspace["system"],
                  "--input", workspace["ds"] / "class0_train_0000.csv",
                  "--out", tmp_path / "x"])
    assert rc == 2


# --- ac-sweep ----------------------------------------------------------------------

def test_cell_sweep_reports_the_reference_resonances(tmp_path, capsys):
    out = tmp_path / "cell.csv"
    rc = run_cli(["ac-sweep", "--cell", "--preset", "1-100", "--out", out])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "f0=26.788 Hz" in stdout and "f1=51.533 Hz" in stdout
    lines = out.read_text().splitlines()
    assert lines[0] == "freq_hz,d_eff,z_eff,beta,h"
    assert len(lines) - 1 >= 498   # only pole bins may be skipped


def test_ac_sweep_target_validation(workspace, tmp_path):
    out = tmp_path / "x.csv"
    assert run_cli(["ac-sweep", "--preset", "1-100", "--out", out]) == 2
    assert run_cli(["ac-sweep", "--cell", "--system", workspace["system"],
                    "--preset", "1-100", "--out", out]) == 2
    assert run_cli(["ac-sweep", "--cell", "--out", out]) == 2   # no band
    assert run_cli(["ac-sweep", "--cell", "--preset", "1-100",
                    "--f-start", "5", "--out", out]) == 2       # both bands


def test_sweep_methods_agree_away_from_resonance(workspace, tmp_path):
    spec, circ, scaling = lattice.load_system(workspace["system"])
    sys_m = simulator.assemble(spec, circ)
    eig_hz = simulator.eigenfrequencies_hz(sys_m)

    ac_csv, ss_csv = tmp_path / "ac.csv", tmp_path / "ss.csv"
    rc = run_cli(["ac-sweep", "--system", workspace["system"], "--method", "ac",
                  "--f-start", "20", "--f-stop", "45", "--points", "1001",
                  "--out", ac_csv])
    assert rc == 0
    rc = run_cli(["ac-sweep", "--system", workspace["system"],
                  "--method", "swept-sine", "--f-start", "20", "--f-stop", "45",
                  "--sweep-rate", "1.0", "--out", ss_csv])
    assert rc == 0

    ac_lines = ac_csv.read_text().splitlines()
    assert ac_lines[0] == "freq_hz,h1,h2,flags"
    ac = np.array([[float(v) for v in line.split(",")[:3]]
                   for line in ac_lines[1:] if line.split(",")[3] == ""])
    ss_lines = ss_csv.read_text().splitlines()
    assert ss_lines[0] == "freq_hz,h1,h2"
    ss = np.loadtxt(ss_csv, delimiter=",", skiprows=1)
    compared = 0
    for row in ss:
        f = row[0]
        if np.min(np.abs(eig_hz - f)) < 2.0:
            continue
        j = int(np.argmin(np.abs(ac[:, 0] - f)))
        assert abs(ac[j, 0] - f) < 0.05   # grids must actually line up
        rel = np.abs(row[1:] - ac[j, 1:]) / np.abs(ac[j, 1:])
        assert float(rel.max()) <= 0.05, f"mismatch at {f} Hz"
        compared += 1
    assert compared >= 5


# --- landscape ---------------------------------------------------------------------

def test_landscape_counts_on_the_trained_grid(trained, tmp_path):
    spec, mech = trained["spec"], trained["mech"]
    scaling = lattice.choose_scaling(mech, 1e6)
    circ = lattice.mech_to_circuit(mech, scaling)
    sys_path = tmp_path / "sys.json"
    lattice.save_system(sys_path, spec, circ, scaling)

    out = tmp_path / "ls"
    rc = run_cli(["landscape", "--system", sys_path, "--freq", "70",
                  "--out", out, "-v"])
    assert rc == 0
    cells = (out / "cells.csv").read_text().splitlines()
    assert cells[0] == "cell,row,col,z_eff,flag"
    assert len(cells) == 22    # 21 active cells on the corner-grounded 5x5
    edges = (out / "edges.csv").read_text().splitlines()
    assert edges[0] == "a,b,current,sign"
    assert len(edges) == 41    # all 40 couplings
    signs = {row.split(",")[3] for row in edges[1:]}
    assert signs <= {"1", "-1"}


# --- export-netlist ----------------------------------------------------------------

def test_netlist_from_trained_model(workspace, tmp_path):
    out = tmp_path / "nl"
    rc = run_cli(["export-netlist", "--model", workspace["run1"] / "model.json",
                  "--series", "e96", "--out", out])
    assert rc == 0
    lines = (out / "netlist.csv").read_text().splitlines()
    assert lines[0] == "ref,kind,value,unit,node_a,node_b"
    assert len(lines) - 1 == 4 * 3 + 4   # per active cell: 2 FDNR + 1 R; 4 edges
    report = json.loads((out / "quantization.json").read_text())
    assert report["series"] == "E96"
    assert len(report["entries"]) == 8
    assert (out / "system.json").exists()
    assert (out / "system_quantized.json").exists()


def test_netlist_counts_on_default_grid(uniform_plant, tmp_path):
    spec, mech, _ = uniform_plant
    scaling = lattice.choose_scaling(mech, 1e6)
    circ = lattice.mech_to_circuit(mech, scaling)
    sys_path = tmp_path / "usys.json"
    lattice.save_system(sys_path, spec, circ, scaling)

    out = tmp_path / "nl5"
    rc = run_cli(["export-netlist", "--system", sys_path, "--series", "none",
                  "--out", out])
    assert rc == 0
    lines = (out / "netlist.csv").read_text().splitlines()
    assert len(lines) - 1 == 21 * 3 + 40   # 103 components on the default grid
    assert not (out / "quantization.json").exists()   # series=none: no snapping


def test_netlist_requires_exactly_one_source(workspace, tmp_path):
    out = tmp_path / "nl"
    assert run_cli(["export-netlist", "--out", out]) == 2
    assert run_cli(["export-netlist", "--model", workspace["run1"] / "model.json",
                    "--system", workspace["system"], "--out", out]) == 2


# --- global flags ------------------------------------------------------------------

def test_threads_flag(workspace, tmp_path):
    out = tmp_path / "cell.csv"
    rc = run_cli(["ac-sweep", "--cell", "--preset", "1-100", "--out", out,
                  "--threads", "1"])
    assert rc == 0
    assert run_cli(["ac-sweep", "--cell", "--preset", "1-100",
                    "--out", tmp_path / "y.csv", "--threads", "0"]) == 2
