import csv
import io
import json
import math
import socket

import numpy as np
import pytest

from iondqc import cli, netapi
from iondqc import protocol as pr

PI = math.pi


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def write_spec(path, spec, **extra):
    doc = spec.to_dict()
    doc.update(extra)
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def served(tmp_path):
    servers = []

    def start(spec):
        srv = netapi.start_in_thread(spec)
        servers.append(srv)
        return "%s:%d" % srv.address

    yield start
    for srv in servers:
        srv.shutdown()
        srv.server_close()


def test_bench_csv_schema_and_theory(tmp_path):
    out = tmp_path / "bench.csv"
    assert cli.main(["bench", "--shots", "400", "--seed", "1", "--out-csv", str(out)]) == 0
    text = out.read_text()
    assert text.splitlines()[0] == "pauli,chi,shots,raw,calibrated,stderr,theory"
    rows = read_csv(text)
    assert len(rows) == 19 and rows[0]["pauli"] == "I"
    for r in rows:
        assert r["calibrated"] == ""
        assert float(r["theory"]) == pytest.approx(math.cos(float(r["chi"]) / 2) ** 2, abs=1e-12)
        assert 0 <= float(r["theory"]) <= 1
    assert all(float(r["theory"]) < 1e-12 for r in rows if float(r["chi"]) == pytest.approx(PI))


def test_bench_reproducible_and_svg_is_read_only(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    svg = tmp_path / "bench.svg"
    assert cli.main(["bench", "--shots", "200", "--seed", "4", "--lambda", "0.8", "--out-csv", str(a)]) == 0
    assert cli.main(["bench", "--shots", "200", "--seed", "4", "--lambda", "0.8", "--out-csv", str(b),
                     "--out-svg", str(svg)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert svg.read_text().lstrip().startswith("<?xml")


def test_bench_to_stdout(capsys):
    assert cli.main(["bench", "--shots", "40", "--unitary-file-missing"]) == 2
    assert cli.main(["bench", "--shots", "40"]) == 0
    assert capsys.readouterr().out.startswith("pauli,chi")


def test_calibration_feeds_bench(tmp_path, capsys):
    cal = tmp_path / "cal.json"
    assert cli.main(["calibrate", "--shots", "2000", "--lambda", "0.69", "--seed", "2", "--out", str(cal)]) == 0
    doc = json.loads(cal.read_text())
    assert doc["lambda_true"] == 0.69 and doc["shots"] == 2000
    assert "lambda_hat" in capsys.readouterr().out
    out = tmp_path / "bench.csv"
    assert cli.main(["bench", "--shots", "200", "--lambda", "0.69", "--calibration", str(cal),
                     "--out-csv", str(out)]) == 0
    for r in read_csv(out.read_text()):
        assert float(r["calibrated"]) == pytest.approx(float(r["raw"]) / doc["lambda_hat"], rel=1e-12)


def test_calibrate_noiseless_is_exactly_one(tmp_path):
    cal = tmp_path / "cal.json"
    assert cli.main(["calibrate", "--shots", "500", "--out", str(cal)]) == 0
    assert json.loads(cal.read_text())["lambda_hat"] == 1.0


def test_single_unitary_bench(tmp_path):
    f = write_spec(tmp_path / "u.json", pr.UnitarySpec.pauli_rotation(2, PI / 3), realization="pulses")
    out = tmp_path / "one.csv"
    assert cli.main(["bench", "--unitary-file", f, "--shots", "400", "--out-csv", str(out)]) == 0
    (row,) = read_csv(out.read_text())
    assert row["pauli"] == "sigma2" and float(row["theory"]) == pytest.approx(0.75)


def test_tomography_outputs(tmp_path, capsys):
    js, svg = tmp_path / "t.json", tmp_path / "t.svg"
    assert cli.main(["tomography", "--shots-per-cell", "100", "--out-json", str(js), "--out-svg", str(svg)]) == 0
    doc = json.loads(js.read_text())
    assert doc["fidelity"]["classical_fidelity"] == 1.0
    assert np.array_equal(np.array(doc["amplitudes"]) > 0.5, np.abs(np.eye(8)[[0, 1, 2, 3, 4, 6, 5, 7]]) > 0)
    assert "<svg" in svg.read_text()
    assert "classical fidelity" in capsys.readouterr().err


def test_gate_bench(tmp_path):
    u = tmp_path / "id2.json"
    u.write_text(json.dumps({"type": "gates", "n": 2, "gates": []}))
    out = tmp_path / "g.csv"
    assert cli.main(["gate-bench", "--n", "2", "--unitary-file", str(u), "--random", "2", "--pairs", "1500",
                     "--seed", "3", "--out-csv", str(out)]) == 0
    rows = read_csv(out.read_text())
    assert [r["unitary"] for r in rows] == ["id2.json", "haar0", "haar1"]
    assert float(rows[0]["estimate"]) == 1.0 and float(rows[0]["oracle"]) == pytest.approx(1.0)
    for r in rows[1:]:
        assert abs(float(r["estimate"]) - float(r["oracle"])) < 3 * float(r["stderr"])


def test_gate_bench_size_mismatch(tmp_path):
    f = write_spec(tmp_path / "u.json", pr.UnitarySpec.pauli_rotation(1, 1.0))
    assert cli.main(["gate-bench", "--n", "2", "--unitary-file", f, "--pairs", "10"]) == cli.EXIT_CONTRACT


@pytest.mark.parametrize("spec", [pr.UnitarySpec.identity(), pr.UnitarySpec.pauli_rotation(1, 2 * PI / 3)],
                         ids=["identity", "sigma1"])
def test_run_remote_matches_bench(tmp_path, served, spec):
    f = write_spec(tmp_path / "u.json", spec)
    addr = served(spec)
    local, remote = tmp_path / "local.csv", tmp_path / "remote.csv"
    flags = ["--shots", "300", "--seed", "9", "--lambda", "0.9", "--unitary-file", f]
    assert cli.main(["bench", *flags, "--out-csv", str(local)]) == 0
    assert cli.main(["run-remote", *flags, "--address", addr, "--out-csv", str(remote)]) == 0
    assert local.read_bytes() == remote.read_bytes()


def test_run_remote_without_labels(tmp_path, served):
    addr = served(pr.UnitarySpec.identity())
    out = tmp_path / "r.csv"
    assert cli.main(["run-remote", "--shots", "52", "--address", addr, "--out-csv", str(out)]) == 0
    (row,) = read_csv(out.read_text())
    assert row["pauli"] == "remote" and row["theory"] == "" and float(row["raw"]) == 1.0


def test_unreachable_server_exit_code(tmp_path):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    out = tmp_path / "r.csv"
    code = cli.main(["run-remote", "--shots", "12", "--address", f"127.0.0.1:{port}", "--timeout", "1",
                     "--out-csv", str(out)])
    assert code == cli.EXIT_TRANSPORT
    assert not out.exists()


@pytest.mark.parametrize("argv", [["bench", "--shots", "many"], ["nonsense"], [], ["bench", "--schedule", "random"]])
def test_bad_flags(argv):
    assert cli.main(argv) == cli.EXIT_FLAGS


def test_contract_violations(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"type": "matrix", "matrix": [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]}))
    assert cli.main(["bench", "--unitary-file", str(bad), "--shots", "12"]) == cli.EXIT_CONTRACT
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert cli.main(["bench", "--unitary-file", str(junk), "--shots", "12"]) == cli.EXIT_CONTRACT
    assert cli.main(["bench", "--shots", "0"]) == cli.EXIT_CONTRACT
    assert cli.main(["bench", "--lambda", "1.5", "--shots", "12"]) == cli.EXIT_CONTRACT


def test_unwritable_output(tmp_path):
    target = tmp_path / "missing_dir" / "out.csv"
    assert cli.main(["bench", "--shots", "12", "--out-csv", str(target)]) == cli.EXIT_OUTPUT
    assert cli.main(["calibrate", "--shots", "12", "--out", str(target)]) == cli.EXIT_OUTPUT
    assert cli.main(["tomography", "--shots-per-cell", "5", "--out-json", str(target)]) == cli.EXIT_OUTPUT


def test_missing_input_file(tmp_path):
    assert cli.main(["bench", "--unitary-file", str(tmp_path / "none.json")]) == cli.EXIT_FLAGS
