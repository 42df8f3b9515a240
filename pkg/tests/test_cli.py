import json
import subprocess
import sys

import numpy as np
import pytest

from bosonic_effective.cli import main
from bosonic_effective.fock import save_matrix


def test_truncate(tmp_path, capsys):
    out = tmp_path / "cert.json"
    assert main(["truncate", "--oracle", "rotation:0.5", "--energy", "0.25", "--eps", "1", "--samples", "100", "--out", str(out)]) == 0
    cert = json.loads(out.read_text())
    assert cert["M"] == 16 and cert["version"] and cert["seed"] == 0
    assert "M = 16" in capsys.readouterr().out


def test_synth_single_and_multimode(tmp_path):
    h = tmp_path / "h.json"
    save_matrix(h, np.array([[0, 1], [1, 0]]))
    assert main(["synth", "--hamiltonian", str(h), "--out", str(tmp_path / "p.json")]) == 0
    assert json.loads((tmp_path / "p.json").read_text())["block_cutoffs"] == [1]
    h4 = tmp_path / "h4.json"
    save_matrix(h4, np.eye(4))
    assert main(["synth", "--hamiltonian", str(h4), "--cutoffs", "1,1", "--out", str(tmp_path / "m.json")]) == 0
    assert main(["synth", "--hamiltonian", str(h4), "--cutoffs", "1,1", "--qp", "--out", str(tmp_path / "q.json")]) == 0
    # mismatched --modes is a configuration error
    assert main(["synth", "--hamiltonian", str(h4), "--cutoffs", "1,1", "--modes", "3", "--out", str(tmp_path / "x.json")]) == 3


def test_synth_non_hermitian_exit3(tmp_path):
    h = tmp_path / "h.json"
    save_matrix(h, np.array([[0, 1], [0, 0]]))
    assert main(["synth", "--hamiltonian", str(h), "--out", str(tmp_path / "p.json")]) == 3


def test_prepare_state(tmp_path):
    t = tmp_path / "t.json"
    t.write_text(json.dumps([[0.6, 0], [0, 0.8]]))
    rep = tmp_path / "rep.json"
    assert main(["prepare-state", "--target", str(t), "--eps", "0.01", "--out", str(tmp_path / "p.json"), "--json-report", str(rep)]) == 0
    summary = json.loads(rep.read_text())
    assert summary["d_eps"] == 1 and summary["exit_code"] == 0


def test_compile_and_verify(tmp_path):
    args = ["--oracle", "kerr:0.3", "--energy", "0.25", "--eps", "1", "--samples", "200"]
    poly, report = str(tmp_path / "P.json"), str(tmp_path / "report.json")
    assert main(["compile", *args, "--out", poly, "--report", report]) == 0
    assert main(["verify", "--poly", poly, "--report", report]) == 0
    stored = json.loads(open(report).read())
    stored["certificate"]["delta"] = 1.0
    open(report, "w").write(json.dumps(stored))
    assert main(["verify", "--poly", poly, "--report", report]) == 2


def test_compile_resource_limit(tmp_path):
    rc = main(["compile", "--oracle", "displacement:0.3", "--energy", "0.25", "--eps", "1", "--max-block-cutoff", "5",
               "--out", str(tmp_path / "P.json"), "--report", str(tmp_path / "r.json")])
    assert rc == 4


def test_unknown_oracle_exit3(tmp_path):
    rep = tmp_path / "rep.json"
    rc = main(["truncate", "--oracle", "bogus", "--energy", "1", "--eps", "1", "--json-report", str(rep)])
    assert rc == 3
    assert json.loads(rep.read_text())["error"] == "ContractViolation"


def test_bad_epsilon_exit3(tmp_path):
    assert main(["compile", "--oracle", "identity", "--energy", "1", "--eps", "2", "--out", str(tmp_path / "P.json"), "--report", str(tmp_path / "r.json")]) == 3


def test_sk_compile(tmp_path):
    out = tmp_path / "word.json"
    cache = tmp_path / "net.npz"
    args = ["sk-compile", "--oracle", "kerr:0.2", "--energy", "0.01", "--eps", "0.8", "--gateset", "qubit-ht",
            "--samples", "100", "--net-cache", str(cache), "--out", str(out)]
    assert main(args) == 0
    assert cache.is_file()
    payload = json.loads(out.read_text())
    assert payload["sampled_worst_distance"] <= 1.6
    assert payload["gate_polynomials"] == ["word.gate0.json", "word.gate1.json"]
    assert (tmp_path / "word.gate0.json").is_file()
    # second run reuses the cached net
    assert main(args) == 0


def test_sk_compile_hypothesis_violation(tmp_path):
    rc = main(["sk-compile", "--oracle", "kerr:0.2", "--energy", "0.5", "--eps", "0.7", "--gateset", "qubit-ht",
               "--out", str(tmp_path / "w.json")])
    assert rc == 3


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bosonic_effective.cli", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == "0.1.0"
