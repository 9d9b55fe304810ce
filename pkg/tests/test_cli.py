import json
import subprocess
import sys

import pytest

from sigmak import __version__
from sigmak.cli import EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, run


def _load(path):
    return json.loads(path.read_text())


def test_classify_table_a(tmp_path, capsys):
    code = run(["classify", "--set", "a1=0.5", "--set", "a2=0.5", "--set", "K0=1", "--set", "Kpi=1",
                "--out", str(tmp_path)])
    assert code == EXIT_OK
    art = _load(tmp_path / "classify.json")
    assert art["results"]["degree"] == "-1" and art["results"]["existence"] == "guaranteed"
    assert art["version"] == __version__ and len(art["config_hash"]) == 16


def test_appendix_check(tmp_path):
    assert run(["appendix-check", "--out", str(tmp_path), "--seed", "5"]) == EXIT_OK
    art = _load(tmp_path / "appendix_check.json")
    assert art["passed"] and art["results"]["max_rel_err"] < 1e-10
    assert len(art["results"]["comparisons"]) == 50


def test_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(["appendix-check", "--out", str(d), "--seed", "9"]) == EXIT_OK
    assert (a / "appendix_check.json").read_bytes() == (b / "appendix_check.json").read_bytes()
    run(["appendix-check", "--out", str(a), "--seed", "10"])
    assert (a / "appendix_check.json").read_bytes() != (b / "appendix_check.json").read_bytes()


def test_solve_constant_K(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 7, "k": 2, "curvature": {"family": "round"}}))
    assert run(["solve", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    art = _load(tmp_path / "solve.json")
    chk = art["results"]["checks"]
    assert chk["ode_residual"] < 1e-8 and chk["pohozaev_residual"] < 1e-8
    header = (tmp_path / "solve_profile.csv").read_text().splitlines()[0]
    assert header == "t,xi,xidot,psi,w,F_k,K"


def test_dump_curvature(tmp_path):
    assert run(["dump-curvature", "--set", "samples=11", "--out", str(tmp_path)]) == EXIT_OK
    rows = (tmp_path / "curvature.csv").read_text().splitlines()
    assert rows[0] == "t,theta,K,Kdot,logderiv" and len(rows) == 12
    # 17 significant digits
    assert rows[1].split(",")[0] == "-10"


def test_verify_identities_jsonl(tmp_path):
    assert run(["verify-identities", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "identities.jsonl").read_text().splitlines()
    assert len(lines) == 17
    rec = json.loads(lines[0])
    assert {"name", "lhs", "rhs", "residual", "interval", "profile"} <= set(rec)


@pytest.mark.parametrize("argv", [
    ["classify", "--set", "bogus=1"],
    ["classify", "--set", "n=4"],
    ["classify", "--set", "version=2"],
    ["solve", "--set", 'curvature={"family": "nope"}'],
    ["no-such-command"],
    ["classify", "--set", "novalue"],
])
def test_config_errors(tmp_path, argv, capsys):
    assert run(argv + ["--out", str(tmp_path)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert json.loads(err.strip().splitlines()[-1])["error"] == "config"


def test_numeric_failure(tmp_path, capsys):
    argv = ["solve", "--set", 'curvature={"family": "height", "c0": 2.0, "c1": 0.5}',
            "--set", "tol=1e-9", "--out", str(tmp_path)]
    assert run(argv) == EXIT_NUMERIC
    diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert diag["error"] == "numerical" and diag["type"] == "NoSignChange"


def test_assertion_failure_exit(tmp_path):
    assert run(["appendix-check", "--set", "limit=1e-30", "--out", str(tmp_path)]) == EXIT_ASSERT
    assert _load(tmp_path / "appendix_check.json")["passed"] is False


def test_env_outdir_and_module_entry(tmp_path):
    env = {"SIGMAK_OUTDIR": str(tmp_path / "env"), "PATH": "/usr/bin:/bin"}
    proc = subprocess.run([sys.executable, "-m", "sigmak", "classify"], env=env, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "env" / "classify.json").exists()
