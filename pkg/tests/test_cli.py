import json

import pytest


def test_build_named_machine(run_cli):
    out = run_cli("build", "--machine", "D_H")
    assert out.returncode == 0, out.stderr
    assert "(3 recurrent)" in out.stdout
    out = run_cli("build", "--machine", "D_H", "--reduce", "auto")
    assert out.returncode == 0, out.stderr
    assert "2 types" in out.stdout


def test_build_cycle_free_writes_artifact(run_cli, tmp_path):
    out = run_cli("build", "--cycle-free", "4", "--trim", "-o", "m4.json")
    assert out.returncode == 0, out.stderr
    doc = json.loads((tmp_path / "m4.json").read_text())
    assert doc["kind"] == "matrix"
    assert run_cli("verify", "m4.json").returncode == 0


def test_certify_verdicts(run_cli):
    out = run_cli("certify", "--machine", "D_G", "--lambda", "3.3", "-o", "c.json")
    assert out.returncode == 0 and "WSM-CERTIFIED" in out.stdout
    out = run_cli("certify", "--machine", "D_G", "--lambda", "3.4")
    assert out.returncode == 0 and "WSM-REFUTED" in out.stdout
    out = run_cli("certify", "--machine", "D_H", "--lambda", "3.0")
    assert out.returncode == 0 and "UNDECIDED" in out.stdout
    out = run_cli("--strict", "certify", "--machine", "D_H", "--lambda", "3.0")
    assert out.returncode == 4


def test_verify_detects_tampering(run_cli, tmp_path):
    assert run_cli("certify", "--machine", "D_G", "--lambda", "3.3",
                   "-o", "c.json").returncode == 0
    out = run_cli("verify", "c.json")
    assert out.returncode == 0 and out.stdout.startswith("VALID")
    path = tmp_path / "c.json"
    text = path.read_text()
    start = text.index('"payload"')
    for field in ('"format": 1', None):
        if field is None:
            digit = next(i for i in range(start, len(text)) if text[i] in "123456789")
            bad = text[:digit] + str(int(text[digit]) % 9 + 1) + text[digit + 1:]
        else:
            bad = text.replace(field, '"format": 2')
        path.write_text(bad)
        out = run_cli("verify", "c.json")
        assert out.returncode == 1 and out.stdout.startswith("INVALID")
    path.write_text("{not json")
    assert run_cli("verify", "c.json").returncode == 1


@pytest.mark.parametrize("lam", ["-1", "0", "abc", "1/0"])
def test_bad_lambda_exit_code(run_cli, lam):
    out = run_cli("certify", "--machine", "D_G", "--lambda", lam)
    assert out.returncode == 2
    assert "lambda" in out.stderr


def test_state_cap_exit_code(run_cli):
    out = run_cli("build", "--cycle-free", "6", "--max-states", "20")
    assert out.returncode == 3
    assert "20" in out.stderr


def test_ssm_round_trip(run_cli, tmp_path):
    out = run_cli("ssm", "--matrix", "m.json", "--lambda", "1.2")
    assert out.returncode == 2  # missing file
    (tmp_path / "m.json").write_text(json.dumps({"rows": [[3]]}))
    out = run_cli("ssm", "--matrix", "m.json", "--lambda", "1.2", "--d", "6",
                  "-o", "p.json", "--trace", "t.csv", "--potential-csv", "psi.csv")
    assert out.returncode == 0, out.stderr
    assert "SSM-CERTIFIED" in out.stdout
    assert (tmp_path / "t.csv").read_text().startswith("round")
    assert run_cli("verify", "p.json").returncode == 0


def test_wsm_sweep(run_cli, tmp_path):
    out = run_cli("sweep", "--machine", "D_G", "--lo", "3.2", "--hi", "3.5",
                  "--tol", "0.05", "--csv", "s.csv")
    assert out.returncode == 0, out.stderr
    assert "bracket [" in out.stdout
    assert (tmp_path / "s.csv").exists()


def test_saw_check(run_cli):
    out = run_cli("saw-check", "--machine", "D_H", "--depth", "6", "--radius", "4")
    assert out.returncode == 0, out.stdout
    assert "contained" in out.stdout
