import json

import pytest

from giant_vortex.cli import main


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_scale_from_physical_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# physical\nomega_phys = 3\nk_trap = 1\ng_coupling = 1\n")
    code, out, _ = _run(capsys, "scale", "--config", str(cfg))
    assert code == 0
    doc = json.loads(out)
    assert doc["scaled"]["omega"] == pytest.approx(12.0)
    assert list(doc) == ["scaled", "regime"]


@pytest.mark.parametrize("text, needle", [
    ("omega = 100\nd_omega = 0.5\n", "g_coupling"),
    ("omega = 12\nd_omega = 0.5\nomega_phys = 3\nk_trap = 1\ng_coupling = 1\n", "ambiguous"),
    ("omega = 100\nfoo = 1\n", "run.cfg:2"),
])
def test_config_errors_exit_2(tmp_path, capsys, text, needle):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(text)
    code, _, err = _run(capsys, "scale", "--config", str(cfg))
    assert code == 2 and needle in err


def test_usage_errors(capsys):
    assert _run(capsys, "nope")[0] == 2
    assert _run(capsys, "scale", "--omega", "abc")[0] == 2
    assert _run(capsys, "validate", "--only", "bogus")[0] == 2
    assert _run(capsys, "report")[0] == 2
    assert _run(capsys, "nonlinear", "--omega", "50", "--d", "0.5", "--g", "1", "--n", "50", "--window")[0] == 2


def test_modes_outputs_are_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert _run(capsys, "modes", "--omega", "100", "--d", "0.5", "--out", str(d))[0] == 0
    rows = (a / "modes.csv").read_text().splitlines()
    assert rows[0] == "n,R_n,h_n,lambda1,lambda2,lambda1_asym,gap_over_sqrtVpp,n_star"
    assert len(rows) == 42
    for name in ("modes.csv", "selection.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["config"]["omega"] == 100 and "numpy" in manifest["versions"]
    sel = json.loads((a / "selection.json").read_text())
    assert abs(sel["n_star"] - 100) <= 2


def test_threads_do_not_change_output(tmp_path, capsys):
    _run(capsys, "modes", "--omega", "50", "--d", "0.5", "--out", str(tmp_path / "a"))
    _run(capsys, "modes", "--omega", "50", "--d", "0.5", "--threads", "3", "--out", str(tmp_path / "b"))
    assert (tmp_path / "a" / "modes.csv").read_bytes() == (tmp_path / "b" / "modes.csv").read_bytes()


def test_corrections_json(capsys):
    code, out, _ = _run(capsys, "corrections", "--omega", "100", "--d", "0.5", "--g", "1", "--n", "100")
    assert code == 0
    assert list(json.loads(out)) == ["n", "P_coeffs", "K_prime", "J_prime", "lambda1_asym", "gamma_asym"]


def test_nonlinear_single_mode_with_dump(tmp_path, capsys):
    out = tmp_path / "nl"
    code, _, _ = _run(capsys, "nonlinear", "--omega", "50", "--d", "0.5", "--g", "1", "--n", "50",
                      "--dump-psi", "--out", str(out))
    assert code == 0
    rows = (out / "nonlinear.csv").read_text().splitlines()
    assert rows[0] == "n,gamma,gamma_asym,multiplier,residual,iterations" and len(rows) == 2
    assert (out / "fields" / "psi_50.csv").read_text().startswith("r,re,im\n")


def test_minimize_then_report(tmp_path, capsys):
    run = tmp_path / "run"
    code, _, _ = _run(capsys, "minimize", "--omega", "50", "--d", "0.5", "--g", "1", "--seed", "1",
                      "--out", str(run))
    assert code == 0
    summary = json.loads((run / "summary.json").read_text())
    for key in ("I_omega", "mu_omega", "per_mode_masses", "moment", "quartic", "breakdown"):
        assert key in summary
    assert (run / "modes" / "mode_49.csv").exists()
    rep = tmp_path / "rep"
    assert _run(capsys, "report", "--in", str(run), "--out", str(rep))[0] == 0
    vr = json.loads((rep / "vortex_report.json").read_text())
    assert vr["winding_at_r1"] == summary["n_star"]
    assert (rep / "profile.csv").read_text().startswith("r,abs_max,abs_min,winding\n")


def test_minimize_iteration_cap_is_numerical_failure(tmp_path, capsys):
    code, _, err = _run(capsys, "minimize", "--omega", "50", "--d", "0.5", "--g", "1", "--max-iter", "3",
                        "--out", str(tmp_path / "x"))
    assert code == 3 and "numerical failure" in err


def test_validate_only(tmp_path, capsys):
    code, _, err = _run(capsys, "validate", "--only", "well_location,gradient", "--out", str(tmp_path / "v"))
    assert code == 0
    assert "[PASS] well_location" in err and "[PASS] gradient" in err
    report = json.loads((tmp_path / "v" / "validation.json").read_text())
    assert [r["name"] for r in report["records"]] == ["well_location", "gradient"]
