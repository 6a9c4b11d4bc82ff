from __future__ import annotations

import csv
import filecmp
import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gsa.cli import main

FLOOD = Path(__file__).resolve().parents[1] / "configs" / "flood.config"


def small_config(tmp_path, **analyses):
    raw = json.loads(FLOOD.read_text())
    raw["analyses"] = analyses or {
        "morris": {"r": 10, "levels": 4, "use_fixed": False},
        "regression": {"n": 100, "design": "lhs", "test_n": 200},
        "sobol": {"n": 500, "second_order": True, "ci": {"B": 100}},
        "metamodel": {"n": 100, "degree": 2, "interactions": True, "sobol_n": 500},
        "report": {"n": 2000, "outputs": ["S"]},
    }
    path = tmp_path / "small.config"
    path.write_text(json.dumps(raw))
    return path


def diagnostic(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("gsa-error ")
    return dict(kv.split("=", 1) for kv in err[0].split(" ")[1:4] if "=" in kv), err[0]


def same_tree(a: Path, b: Path):
    fa = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    fb = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert fa == fb
    for f in fa:
        assert filecmp.cmp(a / f, b / f, shallow=False), f


def test_run_full_pipeline_and_determinism(tmp_path):
    cfg = small_config(tmp_path)
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "a"), "-q"]) == 0
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "b"), "-q", "--workers", "3"]) == 0
    same_tree(tmp_path / "a", tmp_path / "b")

    out = tmp_path / "a"
    rows = list(csv.DictReader(open(out / "morris" / "S" / "morris.csv")))
    assert [r["input"] for r in rows] == ["Q", "Ks", "Zv", "Zm", "Hd", "Cb", "L", "B"]
    assert list(rows[0]) == ["input", "mu", "mu_star", "sigma", "group"]
    sj = json.loads((out / "sobol" / "Cp" / "sobol.json").read_text())
    assert sj["n"] == 500 and set(sj["inputs"]) == {"Q", "Ks", "Zv", "Hd", "Cb"} and len(sj["pairs"]) == 10
    assert sj["config_hash"] and sj["seed"] == 1
    assert (out / "metamodel" / "Cp" / "metamodel.txt").read_text().startswith("# gsa polynomial")
    assert (out / "regression" / "S" / "regression.csv").exists()
    assert json.loads((out / "regression" / "S" / "regression.json").read_text())["test_n"] == 200
    for block in ("morris", "regression", "sobol", "metamodel", "report"):
        assert (out / block / "eval.csv").exists() and (out / block / "design.csv").exists()
    assert (out / "report" / "S" / "cobweb.csv").exists()


def test_seed_override_changes_results(tmp_path):
    cfg = small_config(tmp_path, sobol={"n": 200, "ci": {"B": 100}})
    main(["run", str(cfg), "--out-dir", str(tmp_path / "a"), "-q"])
    main(["run", str(cfg), "--out-dir", str(tmp_path / "b"), "-q", "--seed", "7"])
    a = json.loads((tmp_path / "a/sobol/S/sobol.json").read_text())
    b = json.loads((tmp_path / "b/sobol/S/sobol.json").read_text())
    assert b["seed"] == 7 and a["inputs"]["Q"]["Si"] != b["inputs"]["Q"]["Si"]


def test_stages_compose_to_run(tmp_path):
    cfg = small_config(tmp_path, sobol={"n": 400, "ci": {"B": 100}},
                       metamodel={"n": 60, "degree": 2, "interactions": True, "sobol_n": 300,
                                  "ci": {"B": 100}})
    main(["run", str(cfg), "--out-dir", str(tmp_path / "run"), "-q"])
    st = tmp_path / "stages"
    assert main(["sample", "--config", str(cfg), "--method", "saltelli", "--n", "400",
                 "--out-dir", str(st / "sobol")]) == 0
    assert main(["evaluate", str(st / "sobol" / "design.csv"), "--config", str(cfg),
                 "--out-dir", str(st / "sobol")]) == 0
    assert main(["analyze", str(st / "sobol" / "eval.csv"), "--method", "sobol", "--B", "100",
                 "--out-dir", str(st / "sobol"), "-q"]) == 0
    assert main(["sample", "--config", str(cfg), "--method", "lhs", "--n", "60",
                 "--out-dir", str(st / "metamodel")]) == 0
    assert main(["evaluate", str(st / "metamodel" / "design.csv"), "--config", str(cfg),
                 "--out-dir", str(st / "metamodel")]) == 0
    assert main(["analyze", str(st / "metamodel" / "eval.csv"), "--method", "metamodel", "--degree", "2",
                 "--interactions", "--sobol-n", "300", "--B", "100", "--config", str(cfg),
                 "--out-dir", str(st / "metamodel"), "-q"]) == 0
    shutil.copy(tmp_path / "run" / "summary.txt", st / "summary.txt")
    same_tree(tmp_path / "run", st)


def test_regression_workflow_on_cp(tmp_path, capsys):
    cfg = small_config(tmp_path)
    d = tmp_path / "w"
    main(["sample", "--config", str(cfg), "--method", "lhs", "--n", "100", "--out-dir", str(d)])
    main(["evaluate", str(d / "design.csv"), "--model", "flood_Cp", "--fix", "Zm=55", "--fix", "L=5000",
          "--fix", "B=300", "--out-dir", str(d)])
    assert main(["analyze", str(d / "eval.csv"), "--method", "regression", "--out-dir", str(d), "-q"]) == 0
    rows = list(csv.DictReader(open(d / "Cp" / "regression.csv")))
    assert [r["input"] for r in rows] == ["Q", "Ks", "Zv", "Hd", "Cb"]
    assert {"src", "src2", "pcc", "srrc", "prcc"} <= set(rows[0])


def test_analyze_foreign_evaluation(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.random((200, 3))
    y = x @ [1.0, 2.0, 0.1]
    path = tmp_path / "mine.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "c", "out"])
        w.writerows(np.column_stack([x, y]).tolist())
    assert main(["analyze", str(path), "--method", "regression", "--output", "out",
                 "--out-dir", str(tmp_path / "r"), "-q"]) == 0
    summary = json.loads((tmp_path / "r" / "out" / "regression.json").read_text())
    assert summary["r_squared"] == pytest.approx(1.0)


def test_unknown_distribution_kind_exit_2(tmp_path, capsys):
    raw = json.loads(FLOOD.read_text())
    raw["inputs"][4]["dist"]["kind"] = "beta"
    (tmp_path / "bad.config").write_text(json.dumps(raw))
    assert main(["run", str(tmp_path / "bad.config"), "--out-dir", str(tmp_path / "o")]) == 2
    kv, line = diagnostic(capsys)
    assert kv["code"] == "2" and kv["field"] == "inputs[4].dist.kind"


def test_wrong_columns_exit_2(tmp_path, capsys):
    cfg = small_config(tmp_path)
    d = tmp_path / "w"
    main(["sample", "--config", str(cfg), "--method", "monte_carlo", "--n", "10", "--out-dir", str(d)])
    capsys.readouterr()
    assert main(["evaluate", str(d / "design.csv"), "--model", "flood_S", "--out-dir", str(d)]) == 2
    kv, line = diagnostic(capsys)
    assert kv["kind"] == "schema"


def test_missing_artifact_exit_2(tmp_path, capsys):
    missing = tmp_path / "nowhere" / "eval.csv"
    assert main(["analyze", str(missing), "--method", "sobol", "--out-dir", str(tmp_path)]) == 2
    kv, line = diagnostic(capsys)
    assert kv["kind"] == "artifact" and str(missing) in line


def test_corrupt_artifact_exit_2(tmp_path, capsys):
    (tmp_path / "design.csv").write_text("Q,Ks\n1,abc\n")
    assert main(["evaluate", str(tmp_path / "design.csv"), "--model", "flood_S", "--out-dir",
                 str(tmp_path)]) == 2
    kv, line = diagnostic(capsys)
    assert kv["kind"] == "artifact"


def test_model_failure_exit_3(tmp_path, capsys):
    script = tmp_path / "fail.py"
    script.write_text("import sys\nsys.exit(5)\n")
    raw = json.loads(FLOOD.read_text())
    raw["model"] = {"external": {"command": [sys.executable, str(script)]}}
    raw["analyses"] = {"regression": {"n": 20}}
    (tmp_path / "ext.config").write_text(json.dumps(raw))
    assert main(["run", str(tmp_path / "ext.config"), "--out-dir", str(tmp_path / "o")]) == 3
    kv, _ = diagnostic(capsys)
    assert kv["kind"] == "model"


def test_analysis_error_exit_4(tmp_path, capsys):
    cfg = small_config(tmp_path, morris={"r": 4, "levels": 4})
    main(["run", str(cfg), "--out-dir", str(tmp_path / "o"), "-q"])
    ev = tmp_path / "o" / "morris" / "eval.csv"
    assert main(["analyze", str(ev), "--method", "sobol", "--out-dir", str(tmp_path / "x")]) == 4
    kv, _ = diagnostic(capsys)
    assert kv["kind"] == "analysis"


def test_report_cobweb_top_five_percent(tmp_path):
    cfg = small_config(tmp_path, report={"n": 10000, "outputs": ["S"]})
    main(["run", str(cfg), "--out-dir", str(tmp_path / "o"), "-q"])
    ev = tmp_path / "o" / "report" / "eval.csv"
    assert main(["report", str(ev), "--kind", "cobweb", "--output", "S", "--top-fraction", "0.05",
                 "--out-dir", str(tmp_path / "r"), "-q"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "r" / "S" / "cobweb.csv")))
    assert len(rows) == 10000 and sum(int(r["highlight"]) for r in rows) == 500


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("gsa")
    if exe is None:
        pytest.skip("package not installed")
    cfg = small_config(tmp_path, morris={"r": 10, "levels": 4, "use_fixed": False})
    proc = subprocess.run([exe, "run", str(cfg), "--out-dir", str(tmp_path / "o"), "-q"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert len(list(csv.reader(open(tmp_path / "o" / "morris" / "Cp" / "morris.csv")))) == 9
