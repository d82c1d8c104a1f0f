import csv
import json
import subprocess
import sys

import pytest

from nodal_nehari.cli import (EXIT_CERT, EXIT_INPUT, EXIT_MAX_ITER, EXIT_OK, EXIT_VERIFY,
                              RunConfig, dumps, main)


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


# ------------------------------------------------------------------ config


@pytest.mark.parametrize("kw, needle", [
    ({"N": 8}, "N must"),
    ({"N": 15}, "N must"),
    ({"R_max": 0.0}, "R_max"),
    ({"R_max": -1.0}, "R_max"),
    ({"lam": -0.5}, "lambda"),
    ({"lam": float("nan")}, "lambda"),
    ({"tol": 0.0}, "tol"),
    ({"max_iter": 0}, "max_iter"),
    ({"nl": "cubic"}, "nonlinearity"),
])
def test_config_validation(kw, needle):
    with pytest.raises(ValueError, match=needle):
        RunConfig(**kw).validate()


def test_config_round_trip():
    cfg = RunConfig(lam=0.123456789012345678, nl="power:4.5", R_max=25.5, N=3001, tol=3e-8,
                    max_iter=77, seed_rng=9, starts=3, output_dir="x/y", jobs=2)
    back = RunConfig.from_json(cfg.to_json())
    assert back == cfg
    assert json.loads(cfg.to_json())["lambda"] == cfg.lam


def test_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown config key"):
        RunConfig.from_dict({"lamda": 0.1})


def test_dumps_is_exact_and_sorted():
    x = 0.1 + 0.2
    text = dumps({"b": x, "a": [1, float("inf")], "c": True})
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert float(json.loads(text)["b"]) == x


def test_flags_override_config_file(tmp_path, monkeypatch):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lambda": 0.2, "N": 64, "R_max": 10.0}))
    seen = {}
    import nodal_nehari.cli as cli
    monkeypatch.setattr(cli, "cmd_verify", lambda c, fault: seen.setdefault("cfg", c) and 0)
    main(["verify", "--config", str(cfg), "--lambda", "0.05"])
    assert seen["cfg"].lam == 0.05 and seen["cfg"].N == 64 and seen["cfg"].R_max == 10.0


def test_bad_grid_flag_exits_2(tmp_path, capsys):
    assert run(tmp_path, "verify", "--n", "8") == EXIT_INPUT
    assert "N must" in capsys.readouterr().err


# ------------------------------------------------------------------- solve


def test_solve_writes_reports(tmp_path):
    assert run(tmp_path, "solve", "--lambda", "0.1", "--n", "2048") == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "ok"
    assert report["sign_changes"] == 1
    assert report["certificate"]["passed"] is True
    for name in ("profile.csv", "phi.csv", "fiber.csv", "iterations.csv", "seed_manifest.json"):
        assert (tmp_path / name).exists(), name
    with open(tmp_path / "iterations.csv") as fh:
        assert next(csv.reader(fh)) == ["iter", "I", "residual", "alpha", "beta"]
    with open(tmp_path / "profile.csv") as fh:
        assert next(csv.reader(fh)) == ["r", "u", "u_plus", "u_minus"]


def test_solve_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["solve", "--lambda", "0.1", "--n", "1024", "--out", str(out)]) == EXIT_OK
    for name in ("report.json", "profile.csv", "seed_manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_huge_lambda_exits_2_with_hint(tmp_path, capsys):
    assert run(tmp_path, "solve", "--lambda", "1e6", "--n", "512") == EXIT_INPUT
    err = capsys.readouterr().err
    assert "LambdaTooLarge" in err and "--lambda 500000" in err


def test_max_iter_exits_3(tmp_path):
    code = run(tmp_path, "solve", "--lambda", "0.1", "--n", "1024", "--max-iter", "1")
    assert code == EXIT_MAX_ITER
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "MaxIterExceeded" and report["converged"] is False


def test_certification_failure_exits_4(tmp_path, monkeypatch):
    import nodal_nehari.cli as cli
    from nodal_nehari.errors import CertificationFailed

    def refuse(report, nl, lam, tol):
        raise CertificationFailed("forced", clause="levels", certificate={"passed": False})

    monkeypatch.setattr(cli, "certify", refuse)
    assert run(tmp_path, "solve", "--lambda", "0.1", "--n", "1024") == EXIT_CERT
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "CertificationFailed:levels"


def test_supercubic_comparison_mode(tmp_path):
    code = run(tmp_path, "solve", "--lambda", "0", "--nl", "power:4", "--rmax", "20", "--n",
               "4096")
    assert code == EXIT_OK


def test_seed_command(tmp_path):
    assert run(tmp_path, "seed", "--lambda", "0.1", "--n", "2048") == EXIT_OK
    manifest = json.loads((tmp_path / "seed_manifest.json").read_text())
    assert manifest["seed_element"]["in_M"] is True
    assert all(manifest["edge_checks"].values())


# ------------------------------------------------------------------ verify


def test_verify_default_passes(tmp_path, capsys):
    assert run(tmp_path, "verify") == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 9


def test_verify_detects_injected_fault(tmp_path, capsys):
    assert run(tmp_path, "verify", "--n", "512", "--inject-fault", "sign-flip") == EXIT_VERIFY
    captured = capsys.readouterr()
    assert "phi_monotone" in captured.err
    assert "FAIL     phi_monotone" in captured.out


def test_verify_coarse_grid(tmp_path, capsys):
    assert run(tmp_path, "verify", "--n", "64") == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    structural = [ln for ln in lines if "refinement" not in ln]
    assert all(ln.startswith("PASS") for ln in structural)


# ------------------------------------------------------------------- sweep


def test_sweep(tmp_path):
    code = run(tmp_path, "sweep", "--lambdas", "0.05,0.1,1000", "--n", "1024", "--jobs", "2")
    assert code == EXIT_OK
    with open(tmp_path / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["lambda", "c_ground", "c_nodal", "ratio", "status"]
    assert [r["status"] for r in rows[:2]] == ["ok", "ok"]
    assert rows[2]["status"] == "NoProjection"
    c = [float(r["c_nodal"]) for r in rows[:2]]
    assert c[0] < c[1]
    assert abs(c[1] - c[0]) / c[0] < 0.1


def test_sweep_rejects_bad_grid(tmp_path):
    assert run(tmp_path, "sweep", "--lambdas", "0.2,0.1") == EXIT_INPUT
    assert run(tmp_path, "sweep", "--lambdas", "0.1") == EXIT_INPUT


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "nodal_nehari.cli", "--help"],
                         capture_output=True, text=True, check=True)
    assert "solve" in out.stdout and "sweep" in out.stdout
