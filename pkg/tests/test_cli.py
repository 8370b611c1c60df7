import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from wfstein.cli import COMMANDS, flatten, main, run

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return path


def test_ap_constant_unit(tmp_path):
    cfg = write(tmp_path, "c.json", {
        "domain": {"kind": "euclidean_torus", "d": 1, "extents": [[0, 1]], "points": [64]},
        "weight": {"structure": "unit"}, "p": 3})
    assert run(cfg, "ap-constant", tmp_path / "out") == 0
    doc = json.loads((tmp_path / "out" / "ap-constant.json").read_text())
    assert doc["ap"] == 1.0


def test_schema_errors(tmp_path, capsys):
    bad = write(tmp_path, "bad.json", "{not json")
    assert run(bad, "ap-constant", tmp_path) == 2
    extra = write(tmp_path, "extra.json", {
        "domain": {"kind": "euclidean_torus", "d": 1, "extents": [[0, 1]], "points": [64]},
        "p": 2, "colour": "red"})
    assert run(extra, "ap-constant", tmp_path) == 2
    low_p = write(tmp_path, "p.json", {
        "domain": {"kind": "euclidean_torus", "d": 1, "extents": [[0, 1]], "points": [64]}, "p": 1})
    assert run(low_p, "ap-constant", tmp_path) == 2
    # valid schema, invalid geometry: argument errors are configuration errors too
    geom = write(tmp_path, "g.json", {
        "domain": {"kind": "euclidean_torus", "d": 2, "extents": [[0, 1]], "points": [64]}, "p": 2})
    assert run(geom, "ap-constant", tmp_path) == 2
    assert run(tmp_path / "missing.json", "ap-constant", tmp_path) == 2
    assert "config error" in capsys.readouterr().err


def test_contract_failure_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {
        "domain": {"kind": "euclidean_torus", "d": 1, "extents": [[-8, 8]], "points": [256]},
        "p": 2, "regime": "small_support", "eps": 0.001, "suite": {"count": 3}})
    assert run(cfg, "fs-check", tmp_path) == 1
    assert "contract failure" in capsys.readouterr().err
    # pde ratios with an impossible spread limit fail their own contract
    pde = write(tmp_path, "pde.json", {"count": 3, "spread_limit": 1.0})
    assert run(pde, "pde-ratio", tmp_path / "o") == 1
    assert "pde-ratio.json" in capsys.readouterr().err


def test_fs_check_rows(tmp_path):
    assert run(CONFIGS / "fs-check.json", "fs-check", tmp_path) == 0
    with open(tmp_path / "fs-check.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["seed", "ratio", "ratio_without_residual"]
    assert len(rows) == 201


def test_pde_columns(tmp_path):
    cfg = write(tmp_path, "c.json", {"count": 2})
    assert run(cfg, "pde-ratio", tmp_path) == 0
    header = (tmp_path / "pde-ratio.csv").read_text().splitlines()[0]
    assert header == "seed,ratio,lambda,pieces"


@pytest.mark.parametrize("command", sorted(COMMANDS))
def test_shipped_configs_pass_and_repeat(command, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(CONFIGS / f"{command}.json", command, a, plots=True) == 0
    assert run(CONFIGS / f"{command}.json", command, b, plots=True) == 0
    assert (a / f"{command}.csv").read_bytes() == (b / f"{command}.csv").read_bytes()
    summary = json.loads((a / f"{command}.json").read_text())
    assert all(not isinstance(v, dict) for v in summary.values())


def test_console_entry(tmp_path):
    exe = shutil.which("wfstein")
    cmd = [exe] if exe else [sys.executable, "-m", "wfstein"]
    proc = subprocess.run(cmd + ["ap-constant", "--config", str(CONFIGS / "ap-constant.json"),
                                 "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    with pytest.raises(SystemExit):
        main(["nonsense", "--config", "x"])


def test_flatten():
    assert flatten({"a": {"b": 1, "c": {"d": 2}}, "e": 3}) == {"a_b": 1, "a_c_d": 2, "e": 3}
