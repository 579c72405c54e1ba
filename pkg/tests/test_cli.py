import csv
import json

import numpy as np
import pytest

from decoh import cli, selfcheck


def run(tmp_path, *args):
    return cli.main([*args, "--out", str(tmp_path)])


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_compare_routes_epsilon_ratio(tmp_path):
    code = run(tmp_path, "compare-routes", "--set", "grid.count=4")
    assert code == 0
    rows = read_rows(tmp_path / "compare_routes.csv")
    assert rows[0] == cli.F_HEADER
    by = {}
    for r in rows[1:]:
        by.setdefault((r[3], r[4]), []).append(float(r[1]))
    ratio = np.array(by[("General", "gallis-fleming")]) / np.array(by[("General", "corrected")])
    np.testing.assert_allclose(ratio, 2 * np.pi, rtol=1e-12)
    assert ("Replacement", "corrected") in by
    manifest = json.loads((tmp_path / "compare_routes.json").read_text())
    assert manifest["command"] == "compare-routes"
    assert manifest["config"]["grid.count"] == 4
    assert manifest["diagnostics"]["summary"]["max_rel_diff_replacement"] < 1e-6


def test_csv_format(tmp_path):
    assert run(tmp_path, "rate-curve", "--set", "grid.count=3") == 0
    raw = (tmp_path / "rate_curve.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    rows = read_rows(tmp_path / "rate_curve.csv")
    assert len(rows) == 4
    # 17 significant digits round-trip exactly
    assert all(float(repr(float(r[1]))) == float(r[1]) for r in rows[1:])


def test_weak_route_and_gbar(tmp_path):
    assert run(tmp_path, "rate-curve", "--set", "model.kind=born_gaussian", "--set", "route=weak", "--set", "grid.count=2") == 0
    assert read_rows(tmp_path / "rate_curve.csv")[1][3] == "WeakCoupling"
    assert run(tmp_path, "gbar", "--set", "model.kind=born_gaussian") == 0
    rel = [float(r[4]) for r in read_rows(tmp_path / "gbar.csv")[1:]]
    assert len(rel) == 25 and max(rel) <= 1e-9


def test_eta_command(tmp_path):
    assert run(tmp_path, "eta", "--set", "grid.count=3") == 0
    rows = read_rows(tmp_path / "eta.csv")
    assert rows[0] == ["R", "eta_re", "eta_im", "eta_abs"]
    assert all(float(r[3]) <= 1.0 + 1e-12 for r in rows[1:])


def test_evolve_command(tmp_path):
    assert run(tmp_path, "evolve", "--set", "evolve.points=8", "--set", "evolve.times=0,100") == 0
    rows = read_rows(tmp_path / "evolve.csv")
    assert len(rows) == 1 + 2 * 64
    manifest = json.loads((tmp_path / "evolve.json").read_text())
    assert len(manifest["diagnostics"]["coherence_lengths"]) == 2


def test_config_file_and_errors(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nbath.density = 1e-4\ngrid.count = two\n")
    assert run(tmp_path, "rate-curve", "--config", str(cfg)) == cli.EXIT_CONFIG
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["line"] == 3 and err["exit_code"] == 1
    assert run(tmp_path, "rate-curve", "--set", "nonsense=1") == cli.EXIT_CONFIG
    assert run(tmp_path, "rate-curve", "--set", "bath.density=-1") == cli.EXIT_CONFIG
    assert run(tmp_path, "gbar") == cli.EXIT_CONFIG
    assert run(tmp_path, "rate-curve", "--set", "route=replacement", "--epsilon", "gallis-fleming", "--set", "grid.count=1") == cli.EXIT_CONFIG


def test_convergence_failure_exit_code(tmp_path):
    args = ["rate-curve", "--set", "model.kind=hard_sphere", "--set", "quad.refine_tol=1e-30", "--set", "quad.max_refinements=1"]
    assert run(tmp_path, *args, "--set", "grid.count=1") == cli.EXIT_CONVERGENCE


def test_selfcheck_exit_codes(tmp_path, monkeypatch):
    monkeypatch.setattr(selfcheck, "DEFAULT_CHECKS", [("ok", lambda: (0.0, 1.0))])
    assert run(tmp_path, "selfcheck") == 0
    monkeypatch.setattr(selfcheck, "DEFAULT_CHECKS", [("ok", lambda: (0.0, 1.0)), ("bad", lambda: (2.0, 1.0))])
    assert run(tmp_path, "selfcheck") == cli.EXIT_SELFCHECK
    rows = read_rows(tmp_path / "selfcheck.csv")
    assert [r[3] for r in rows[1:]] == ["true", "false"]

    def boom():
        raise RuntimeError("crash")

    monkeypatch.setattr(selfcheck, "DEFAULT_CHECKS", [("boom", boom)])
    assert run(tmp_path, "selfcheck") == cli.EXIT_SELFCHECK


def test_mc_verify_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["mc-verify", "--seed", "7", "--set", "mc.samples=4096", "--set", "grid.count=1", "--set", "grid.min=1", "--set", "grid.max=1"]
    assert cli.main([*args, "--out", str(a)]) == 0
    assert cli.main([*args, "--out", str(b)]) == 0
    assert (a / "mc_verify.csv").read_bytes() == (b / "mc_verify.csv").read_bytes()
    assert json.loads((a / "mc_verify.json").read_text())["seed"] == 7
