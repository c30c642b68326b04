import json
import math
import subprocess
import sys

import pytest

from diagtele.cli import EXIT_OK, EXIT_USAGE, EXIT_VERIFY, main
from diagtele import cli

R = 1 / math.sqrt(2)


@pytest.fixture
def state_file(tmp_path):
    def write(doc, name="state.json"):
        path = tmp_path / name
        path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return str(path)

    return write


def run_cli(capsys, argv):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestRun:
    def test_one_qubit(self, capsys, state_file):
        path = state_file({"n_qubits": 1, "probabilities": [0.3, 0.7]})
        code, out, _ = run_cli(capsys, ["run", "--state", path, "--seed", "5", "--no-timing"])
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["bob_final"] == pytest.approx([0.3, 0.7], abs=1e-12)
        assert doc["fidelity"] == pytest.approx(1.0, abs=1e-10)
        assert doc["cbits_sent"] == doc["x_bits"] and len(doc["cbits_sent"]) == 1
        assert doc["timing"] is None

    @pytest.mark.parametrize("scheme", ["copies", "generalized"])
    @pytest.mark.parametrize("engine", ["dense", "diagonal"])
    def test_byte_identical_reruns(self, capsys, state_file, scheme, engine):
        path = state_file({"n_qubits": 2, "probabilities": [0.1, 0.2, 0.3, 0.4]})
        argv = ["run", "--state", path, "--seed", "9", "--scheme", scheme,
                "--engine", engine, "--no-timing"]
        first = run_cli(capsys, argv)
        second = run_cli(capsys, argv)
        assert first == second and first[0] == EXIT_OK

    def test_engines_give_same_report(self, capsys, state_file):
        path = state_file({"n_qubits": 2, "probabilities": [0.1, 0.2, 0.3, 0.4]})
        docs = []
        for engine in ("dense", "diagonal"):
            _, out, _ = run_cli(capsys, ["run", "--state", path, "--seed", "2",
                                         "--engine", engine, "--no-timing"])
            doc = json.loads(out)
            doc.pop("engine")
            docs.append(doc)
        assert docs[0]["x_bits"] == docs[1]["x_bits"]
        assert docs[0]["bob_final"] == pytest.approx(docs[1]["bob_final"], abs=1e-12)

    def test_eigenbasis(self, capsys, state_file):
        path = state_file({"n_qubits": 1, "eigenvalues": [0.2, 0.8],
                           "eigenvectors": [[[R, 0], [R, 0]], [[R, 0], [-R, 0]]]})
        code, out, _ = run_cli(capsys, ["run", "--state", path, "--engine", "dense",
                                        "--no-timing"])
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["eigenbasis"]
        real = [[z[0] for z in row] for row in doc["bob_final"]]
        assert real[0] == pytest.approx([0.5, -0.3], abs=1e-12)
        assert real[1] == pytest.approx([-0.3, 0.5], abs=1e-12)

    def test_histogram(self, capsys, state_file):
        path = state_file({"n_qubits": 1, "probabilities": [0.3, 0.7]})
        argv = ["run", "--state", path, "--trials", "4000", "--seed", "1", "--no-timing"]
        code, out, _ = run_cli(capsys, argv)
        assert code == EXIT_OK
        hist = json.loads(out)["histogram"]
        assert sorted(hist) == ["00", "01", "10", "11"] and sum(hist.values()) == 4000
        assert run_cli(capsys, argv)[1] == out

    def test_timing_reported(self, capsys, state_file):
        path = state_file({"n_qubits": 1, "probabilities": [0.3, 0.7]})
        _, out, _ = run_cli(capsys, ["run", "--state", path])
        assert json.loads(out)["timing"]["wall_seconds"] >= 0


class TestBranches:
    def test_generalized_two_qubit(self, capsys, state_file):
        path = state_file({"n_qubits": 2, "probabilities": [0.1, 0.2, 0.3, 0.4]})
        code, out, _ = run_cli(capsys, ["branches", "--state", path,
                                        "--scheme", "generalized"])
        assert code == EXIT_OK
        doc = json.loads(out)
        assert len(doc["branches"]) == 16
        for b in doc["branches"]:
            assert b["probability"] == pytest.approx(0.0625, abs=1e-12)
            assert b["bob_corrected"] == pytest.approx([0.1, 0.2, 0.3, 0.4], abs=1e-12)


class TestVerify:
    def test_passes(self, capsys):
        code, out, _ = run_cli(capsys, ["verify", "--n", "2", "--cases", "5", "--seed", "7",
                                        "--no-timing"])
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["passed"] and doc["engines"] == ["diagonal", "dense"]
        assert doc["checks"]["locality"]["passed"]
        assert len(doc["per_case"]) == 5

    def test_deterministic(self, capsys):
        argv = ["verify", "--n", "1", "--cases", "3", "--no-timing"]
        assert run_cli(capsys, argv) == run_cli(capsys, argv)

    def test_failure_exit_code(self, capsys, monkeypatch):
        monkeypatch.setattr(cli, "_locality_residual", lambda n: float("inf"))
        code, out, _ = run_cli(capsys, ["verify", "--n", "1", "--cases", "1"])
        assert code == EXIT_VERIFY
        assert not json.loads(out)["checks"]["locality"]["passed"]

    def test_dense_refused_when_too_large(self, capsys):
        code, _, err = run_cli(capsys, ["verify", "--n", "5", "--engine", "dense"])
        assert code == EXIT_USAGE and "dense" in err


class TestBench:
    def test_small(self, capsys):
        code, out, _ = run_cli(capsys, ["bench", "--n", "3", "--trials", "2"])
        assert code == EXIT_OK
        doc = json.loads(out)
        assert doc["wires"] == 9 and doc["state_bytes"] == 8 * 2 ** 9
        assert doc["timing"]["peak_rss_bytes"] > 0
        assert doc["max_infidelity"] <= 1e-10

    def test_no_timing(self, capsys):
        _, out, _ = run_cli(capsys, ["bench", "--n", "2", "--trials", "1", "--no-timing"])
        assert json.loads(out)["timing"] is None


class TestUsageErrors:
    @pytest.mark.parametrize("argv", [
        [],
        ["teleport"],
        ["run"],
        ["run", "--state", "missing.json"],
        ["verify", "--n", "0"],
        ["run", "--state", "x", "--seed", "-1"],
        ["bench", "--engine", "dense"],
    ])
    def test_exit_one(self, capsys, argv):
        code, out, err = run_cli(capsys, argv)
        assert code == EXIT_USAGE and out == "" and err.startswith("diagtele:")

    def test_invalid_state_file(self, capsys, state_file):
        path = state_file({"n_qubits": 2, "probabilities": [0.5, 0.5]})
        code, _, err = run_cli(capsys, ["run", "--state", path])
        assert code == EXIT_USAGE and "$.probabilities" in err


def test_module_entry_point(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"n_qubits": 1, "probabilities": [1, 0]}))
    proc = subprocess.run([sys.executable, "-m", "diagtele", "run", "--state", str(path),
                           "--no-timing"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["bob_final"] == [1.0, 0.0]
