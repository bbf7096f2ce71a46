import json

import pytest

from tests.compat import ROOT  # noqa: F401  (path shim)
from conesolver.cli import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY, build_parser, main

SMALL_RUN = {
    "grid": {"nr": 17, "ntheta": 17, "n1d": 65},
    "flow": {"max_steps": 2000, "t_max_time": 100.0},
    "tolerances": {"newton_tol": 1e-8, "bisect_tol": 1e-3},
    "sweep": {"range": [3.0, 4.0], "samples": 3, "n1d": 65, "ntheta_check": 9},
}


def _config(tmp_path, extra=None):
    doc = json.loads(json.dumps(SMALL_RUN))
    for key, value in (extra or {}).items():
        if isinstance(value, dict):
            doc.setdefault(key, {}).update(value)
        else:
            doc[key] = value
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc), "utf-8")
    return str(path)


def _load(path):
    return json.loads(path.read_text("utf-8"))


def test_verify_selected_suites(tmp_path, capsys):
    out = tmp_path / "verify"
    code = main(["verify", "--out", str(out), "--suite", "symmetry,laplace-beltrami", "--suite", "quadrature"])
    assert code == EXIT_OK
    report = _load(out / "verify.json")
    assert [s["name"] for s in report["suites"]] == ["symmetry", "laplace-beltrami", "quadrature"]
    assert report["failed"] == []
    assert "[OK] symmetry" in capsys.readouterr().out


def test_verify_fault_injection_fails(tmp_path, capsys):
    out = tmp_path / "fault"
    code = main(["verify", "--out", str(out), "--suite", "symmetry,laplace-beltrami",
                 "--fault-inject", "angular-sign"])
    assert code == EXIT_VERIFY
    report = _load(out / "verify.json")
    assert set(report["failed"]) == {"symmetry", "laplace-beltrami"}
    assert report["fault_inject"] == "angular-sign"
    assert "failed suites:" in capsys.readouterr().out


def test_verify_empty_selection(tmp_path):
    out = tmp_path / "none"
    assert main(["verify", "--out", str(out), "--suite", ""]) == EXIT_OK
    assert _load(out / "verify.json")["suites"] == []


def test_unknown_suite_is_a_config_error(tmp_path, capsys):
    out = tmp_path / "unknown"
    assert main(["verify", "--out", str(out), "--suite", "nope"]) == EXIT_CONFIG
    err = _load(out / "error.json")
    assert err["error"] == "ConfigError"
    assert "nope" in capsys.readouterr().err


def test_invalid_config_exits_before_compute(tmp_path):
    out = tmp_path / "bad"
    cfg = _config(tmp_path, {"problem": {"p": 1.5}, "grid": {"ntheta": 16}})
    assert main(["solve", "--config", cfg, "--out", str(out)]) == EXIT_CONFIG
    err = _load(out / "error.json")
    assert len(err["problems"]) == 2
    assert not (out / "record.json").exists()


def test_certify_rejects_nonconstant_weight(tmp_path):
    cfg = _config(tmp_path, {"problem": {"weight": {"kind": "angular-profile", "epsilon": 0.5}}})
    assert main(["certify-nonradial", "--config", cfg, "--out", str(tmp_path / "c")]) == EXIT_CONFIG


def test_solve_writes_record(tmp_path, capsys):
    out = tmp_path / "solve"
    code = main(["solve", "--config", _config(tmp_path), "--out", str(out), "--dump-operators"])
    assert code == EXIT_OK
    for name in ("record.json", "trace.csv", "config.json", "operators.txt"):
        assert (out / name).exists(), name
    rec = _load(out / "record.json")
    assert rec["kind"] == "solve" and rec["converged"] and rec["cone"]["in_cone"]
    assert abs(rec["relative_nehari_residual"]) <= 1e-8
    assert abs(rec["nehari_scale"] - 1.0) <= 1e-8
    assert rec["energy"]["action"] > 0
    assert rec["nontrivial"] and rec["h1_norm"] >= 0.1
    assert rec["ps_bound_ok"] and rec["flow"]["best_index"] >= 0
    assert rec["candidates"] and rec["ground_state_bound"] == pytest.approx(rec["energy"]["action"])
    assert _load(out / "config.json")["grid"]["nr"] == 17
    assert capsys.readouterr().out.startswith("[OK]")


def test_sweep_and_resume(tmp_path):
    out = tmp_path / "sweep"
    cfg = _config(tmp_path)
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    first = (out / "sweep.csv").read_text("utf-8")
    assert len(first.strip().splitlines()) == 4
    summary = _load(out / "sweep.json")
    assert summary["succeeded"] == 3 and summary["mode"] == "vary_p"

    assert main(["sweep", "--config", cfg, "--out", str(out), "--resume"]) == EXIT_OK
    assert (out / "sweep.csv").read_text("utf-8") == first


def test_sweep_flags_override_config(tmp_path):
    out = tmp_path / "flags"
    code = main(["sweep", "--config", _config(tmp_path), "--out", str(out),
                 "--range", "3.0", "3.5", "--samples", "2"])
    assert code == EXIT_OK
    assert _load(out / "sweep.json")["samples"] == 2


def test_bad_sweep_range(tmp_path):
    out = tmp_path / "range"
    assert main(["sweep", "--out", str(out), "--range", "1.0", "3.0"]) == EXIT_CONFIG


def test_parser_requires_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_solve_with_angular_weight_is_nonradial(tmp_path):
    out = tmp_path / "angular"
    cfg = _config(tmp_path, {"problem": {"weight": {"kind": "angular-profile", "epsilon": 0.5}}})
    assert main(["solve", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rec = _load(out / "record.json")
    assert rec["converged"] and rec["nontrivial"]
    sup = max(abs(v) for v in rec["field"]["values"])
    assert rec["angular_variation"] > 1e-3 * sup


CERTIFY_GRID = {"grid": {"nr": 33, "ntheta": 17, "n1d": 33}}


def test_certify_past_the_threshold(tmp_path, capsys):
    out = tmp_path / "certify"
    cfg = _config(tmp_path, CERTIFY_GRID)
    assert main(["certify-nonradial", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rec = _load(out / "record.json")
    assert rec["spectral"]["criterion"] < 0 and rec["certificate"]["competitor_found"]
    assert rec["action_candidate"] < rec["action_radial"] - 1e-10
    assert rec["angular_variation"] > 1e3 * rec["grid_tolerance"]
    assert rec["nonradial"] and rec["verdict"] == "nonradial ground state"
    assert "nonradial ground state" in capsys.readouterr().out


def test_certify_control_below_the_threshold(tmp_path):
    out = tmp_path / "control"
    cfg = _config(tmp_path, {**CERTIFY_GRID, "problem": {"p": 2.1}, "solve": {"psi": "radial"},
                             "flow": {"max_steps": 50}})
    assert main(["certify-nonradial", "--config", cfg, "--out", str(out)]) == EXIT_OK
    rec = _load(out / "record.json")
    assert rec["spectral"]["criterion"] > 0
    assert not rec["certificate"]["nonradial_expected"] and not rec["certificate"]["competitor_found"]
    assert not rec["nonradial"] and rec["verdict"] == "no certificate"
    assert rec["converged"] and rec["nontrivial"]
