import json

import pytest

from qpassverify.cli import main
from qpassverify.qasm import parse_qasm

GHZ = 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[3];\nh q[0];\ncx q[0],q[1];\ncx q[1],q[2];\n'
GHZ_X = GHZ + "x q[0];\n"


@pytest.fixture
def files(tmp_path):
    (tmp_path / "ghz.qasm").write_text(GHZ)
    (tmp_path / "ghzx.qasm").write_text(GHZ_X)
    (tmp_path / "line3.json").write_text(json.dumps(
        {"nodes": 3, "edges": [[0, 1, "directed"], [1, 2, "directed"]]}))
    return tmp_path


def test_compile_routed_pipeline(files):
    out, rep = files / "out.qasm", files / "rep.json"
    code = main(["compile", str(files / "ghz.qasm"), "-o", str(out), "--coupling", str(files / "line3.json"),
                 "--passes", "trivial_layout,apply_layout,basic_swap,gate_direction",
                 "--layout", "2,0,1", "--validate", "both", "--report", str(rep)])
    assert code == 0
    doc = json.loads(rep.read_text())
    assert doc["validation"]["equivalent"] is True
    assert [p["pass"] for p in doc["passes"]] == ["trivial_layout", "apply_layout", "basic_swap", "gate_direction"]
    compiled = parse_qasm(out.read_text())
    assert all(tuple(g.qubits) in {(0, 1), (1, 2)} for g in compiled.gates if g.kind == "CX")


def test_compile_empty_pipeline(files, capsys):
    assert main(["compile", str(files / "ghz.qasm")]) == 0
    assert parse_qasm(capsys.readouterr().out).gates == parse_qasm(GHZ).gates


def test_compile_usage_errors(files):
    assert main(["compile", str(files / "ghz.qasm"), "--passes", "basic_swap"]) == 1
    assert main(["compile", str(files / "ghz.qasm"), "--passes", "no_such_pass"]) == 1
    assert main(["compile", str(files / "missing.qasm")]) == 1
    assert main(["compile", str(files / "ghz.qasm"), "--passes", "lookahead_swap_unfixed"]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["compile"])
    assert exc.value.code == 1


def test_verify(files, capsys):
    rep = files / "v.json"
    assert main(["verify", "--pass", "cx_cancellation", "--report", str(rep), "--no-timings"]) == 0
    doc = json.loads(rep.read_text())
    assert doc["verdict"] == "Verified" and doc["subgoals"] == 3
    assert main(["verify", "--pass", "lookahead_swap_unfixed", "--demo-bugs", "--no-timings"]) == 2
    assert json.loads(capsys.readouterr().out)["verdict"] == "NonTerminating"
    assert main(["verify", "--pass", "lookahead_swap_unfixed"]) == 1
    assert main(["verify"]) == 1


def test_verify_output_is_byte_stable(capsys):
    main(["verify", "--pass", "optimize_1q_gates_unguarded", "--demo-bugs", "--no-timings"])
    first = capsys.readouterr().out
    main(["verify", "--pass", "optimize_1q_gates_unguarded", "--demo-bugs", "--no-timings"])
    assert capsys.readouterr().out == first


def test_check_rules(files):
    rep = files / "r.json"
    assert main(["check-rules", "--samples", "10", "--trials", "3", "--report", str(rep)]) == 0
    doc = json.loads(rep.read_text())
    assert doc["certified"] == doc["rules"] and not doc["failed"]
    assert main(["check-rules", "--samples", "10", "--trials", "3", "--inject-bogus", "1",
                 "--report", str(rep)]) == 2
    assert len(json.loads(rep.read_text())["failed"]) == 1


def test_validate(files, capsys):
    assert main(["validate", str(files / "ghz.qasm"), str(files / "ghz.qasm")]) == 0
    assert "equivalent=true" in capsys.readouterr().out
    assert main(["validate", str(files / "ghz.qasm"), str(files / "ghzx.qasm"), "--mode", "oracle"]) == 2
    assert "equivalent=false tier=oracle" in capsys.readouterr().out
    (files / "two.qasm").write_text('OPENQASM 2.0;\nqreg q[2];\n')
    assert main(["validate", str(files / "ghz.qasm"), str(files / "two.qasm")]) == 1
