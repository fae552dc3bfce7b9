import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from accel_ode import cli

SC_SYMPLECTIC = """
name = "sc"
[objective]
kind = "quadratic"
dim = 10
mu = 0.01
L = 1.0
seed = 0
[scheme]
family = "SC_HR"
rule = "SYMPLECTIC"
step_size = "theorem"
[run]
iterations = 400
[checks]
lyapunov = true
bounds = true
"""


def _write(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _config(tmp_path, family, rule, step, kind="quadratic", extra="", iterations=400, name="exp", objective=None):
    obj = objective or {"quadratic": 'kind = "quadratic"\ndim = 10\nmu = 0.01\nL = 1.0\nseed = 0',
                        "scalar": 'kind = "scalar"\ncurvature = 1.0\nx0 = [1.0]',
                        "log_sum_exp": 'kind = "log_sum_exp"\ndim = 5\nsharpness = 1.0\nseed = 0'}[kind]
    rule_line = f'rule = "{rule}"\n' if rule else ""
    step_line = f'step_size = {step!r}\n'.replace("'", '"') if step is not None else ""
    text = (f'name = "{name}"\n[objective]\n{obj}\n[scheme]\nfamily = "{family}"\n{rule_line}{step_line}'
            f"[run]\niterations = {iterations}\n{extra}")
    return _write(tmp_path, text, f"{name}.toml")


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- list ------------------------------------------------------------------------------


def test_list_bounds_includes_fixed_step_symplectic(capsys):
    assert cli.main(["list", "--bounds"]) == 0
    assert "sc_hr.symplectic.fixed" in capsys.readouterr().out


def test_list_schemes_grid(capsys):
    assert cli.main(["list", "--schemes"]) == 0
    out = capsys.readouterr().out
    grid = [ln for ln in out.splitlines() if ln.strip().split(" ")[0] in
            {"SC_HR", "HB_HR", "C_HR", "C_HR_MOD", "LOW_SC", "LOW_C", "GRAD_FLOW"} and "yes" in ln]
    assert len(grid) == 7
    counts = {ln.split()[0]: ln.count("yes") for ln in grid}
    assert counts.pop("GRAD_FLOW") == 2  # gradient descent has no symplectic variant
    assert set(counts.values()) == {3}
    assert "classical methods" in out and "NAG-C" in out


def test_list_lyapunov_includes_symplectic_functional(capsys):
    assert cli.main(["list", "--lyapunov"]) == 0
    out = capsys.readouterr().out
    assert "sc_hr.symplectic " in out and "trial (uncertified)" in out


def test_list_everything(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    for head in ("families:", "schemes", "objectives:", "lyapunov functionals:", "rate bounds:"):
        assert head in out


# -- run -------------------------------------------------------------------------------


def test_run_symplectic_passes(tmp_path, capsys):
    cfg = _write(tmp_path, SC_SYMPLECTIC)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "sc.report.json").read_text())
    assert report["termination"] == "completed"
    assert report["certification"] == "pass"
    statuses = {b["id"]: b["status"] for b in report["bounds"]}
    assert statuses["sc_hr.symplectic.fixed"] == "pass"
    assert report["scheme"]["step_size"] == pytest.approx(4 / 9)
    rows = _read_csv(tmp_path / "sc.trace.csv")
    assert rows[0] == cli.TRACE_HEADER and len(rows) == 402
    assert all(len(r) == 7 for r in rows)
    assert float(rows[1][2]) > float(rows[-1][2])


def test_run_explicit_scheme_at_unit_step_diverges(tmp_path):
    cfg = _config(tmp_path, "SC_HR", "EXPLICIT", 1.0, iterations=2000)
    code = cli.main(["run", "--config", cfg, "--out", str(tmp_path)])
    report = json.loads((tmp_path / "exp.report.json").read_text())
    assert report["termination"] == "diverged"
    assert code == 3


def test_run_explicit_heavy_ball_at_unit_step_diverges(tmp_path):
    cfg = _config(tmp_path, "HB_HR", "EXPLICIT", 1.0, iterations=2000)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert json.loads((tmp_path / "exp.report.json").read_text())["termination"] == "diverged"


def test_run_from_minimizer(tmp_path):
    obj = 'kind = "quadratic"\ndim = 10\nmu = 0.01\nL = 1.0\nseed = 0\nx0 = "minimizer"'
    cfg = _config(tmp_path, "SC_HR", "SYMPLECTIC", "theorem", objective=obj, iterations=100)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "exp.trace.csv")[1:]
    assert all(float(r[2]) <= 1e-14 for r in rows)


def test_run_is_byte_identical(tmp_path):
    cfg = _write(tmp_path, SC_SYMPLECTIC)
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert cli.main(["run", "--config", cfg, "--out", str(a)]) == 0
    assert cli.main(["run", "--config", cfg, "--out", str(b)]) == 0
    for f in ("sc.trace.csv", "sc.report.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_csv_format(tmp_path):
    cfg = _write(tmp_path, SC_SYMPLECTIC)
    cli.main(["run", "--config", cfg, "--out", str(tmp_path)])
    raw = (tmp_path / "sc.trace.csv").read_bytes()
    assert raw.count(b"\r\n") == 402 and b"," in raw
    rows = _read_csv(tmp_path / "sc.trace.csv")
    value = rows[5][2]
    assert value == format(float(value), ".17g")
    assert cli.fmt(0.1) == "0.10000000000000001" and cli.fmt(None) == "" and cli.fmt(float("nan")) == ""


def test_report_keys_are_sorted(tmp_path):
    cfg = _write(tmp_path, SC_SYMPLECTIC)
    cli.main(["run", "--config", cfg, "--out", str(tmp_path)])
    text = (tmp_path / "sc.report.json").read_text()
    report = json.loads(text)
    assert list(report) == sorted(report)
    assert "fitted_rate" in report and "lyapunov" in report and "bounds" in report


def test_uncertified_family_is_labelled(tmp_path):
    cfg = _config(tmp_path, "C_HR", "SYMPLECTIC", 0.3, kind="log_sum_exp", iterations=200)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "exp.report.json").read_text())
    assert report["certification"] == "no theorem applicable"


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    cfg = _write(tmp_path, SC_SYMPLECTIC)
    target = tmp_path / "env_out"
    target.mkdir()
    monkeypatch.setenv(cli.OUT_ENV, str(target))
    assert cli.main(["run", "--config", cfg]) == 0
    assert (target / "sc.trace.csv").exists()


@pytest.mark.parametrize("text", [
    "not toml [",
    '[objective]\nkind = "quadratic"\nmu = 0.01\n',
    '[objective]\nkind = "cube"\n[scheme]\nfamily = "SC_HR"\nrule = "SYMPLECTIC"\n',
    '[objective]\nkind = "quadratic"\nmu = 0.01\n[scheme]\nfamily = "SC_HR"\nrule = "SYMPLECTIC"\nstep = 1\n',
    '[objective]\nkind = "log_sum_exp"\n[scheme]\nfamily = "SC_HR"\nrule = "SYMPLECTIC"\n',
    '[objective]\nkind = "quadratic"\nmu = 0.01\n[scheme]\nfamily = "C_HR"\nrule = "EXPLICIT"\nstep_size = "theorem"\n',
    '[objective]\nkind = "quadratic"\nmu = 0.01\n[scheme]\nfamily = "SC_HR"\nrule = "SYMPLECTIC"\nstep_size = -1\n',
])
def test_bad_configs_are_usage_errors(tmp_path, text):
    cfg = _write(tmp_path, text)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 1


def test_bad_command_line(tmp_path):
    assert cli.main(["launch"]) == 1
    assert cli.main(["run"]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.toml")]) == 1
    assert cli.main(["verify"]) == 1
    assert cli.main(["verify", "--suite", "nope"]) == 1


def test_implicit_solver_failure_exit_code(tmp_path, monkeypatch):
    from accel_ode import integrators

    def broken(*args, **kwargs):
        raise integrators.SolverFailure(float("inf"), 0)

    cfg = _config(tmp_path, "SC_HR", "IMPLICIT", 1.0, kind="log_sum_exp", iterations=5,
                  objective='kind = "logistic"\nsamples = 50\ndim = 5\nreg = 0.01\nseed = 0')
    monkeypatch.setattr(integrators, "solve_implicit", broken)
    assert cli.main(["run", "--config", cfg, "--out", str(tmp_path)]) == 4


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "accel_ode", "list", "--families"], capture_output=True, text=True)
    assert res.returncode == 0 and "GRAD_FLOW" in res.stdout


# -- verify ----------------------------------------------------------------------------


def test_verify_strongly_convex_suite():
    assert cli.main(["verify", "--suite", "strongly-convex"]) == 0


def test_verify_convex_suite(tmp_path, capsys):
    assert cli.main(["verify", "--suite", "convex", "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "convex.verify.json").read_text())
    assert data["passed"] and data["counts"]["fail"] == 0


def test_verify_corrupted_suite_exit_two(capsys):
    assert cli.main(["verify", "--suite", "convex", "--inject-fault"]) == 2
    out = capsys.readouterr().out
    assert "FIRST VIOLATION: scheme=" in out and " k=" in out and "ratio=" in out


def test_verify_config_with_fault(tmp_path, capsys):
    cfg = _write(tmp_path, SC_SYMPLECTIC)
    assert cli.main(["verify", "--config", cfg]) == 0
    assert cli.main(["verify", "--config", cfg, "--inject-fault"]) == 2
    assert "FIRST VIOLATION" in capsys.readouterr().out


# -- sweep -----------------------------------------------------------------------------


POWERS = list(range(-10, 4))


def _sweep(tmp_path, rule, grid, iterations=2000):
    cfg = _config(tmp_path, "SC_HR", rule, None, iterations=iterations, name=f"sw_{rule.lower()}")
    assert cli.main(["sweep", "--config", cfg, "--param", "step_size", "--grid", *map(repr, grid),
                     "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / f"sw_{rule.lower()}.sweep.csv")
    assert rows[0] == cli.SWEEP_HEADER and len(rows) == len(grid) + 1
    return [(float(r[0]), r[1]) for r in rows[1:]]


def _first_unstable(rows):
    return next((s for s, status in rows if status != "completed"), None)


def test_sweep_symplectic_stable_to_order_one_over_l(tmp_path):
    rows = _sweep(tmp_path, "SYMPLECTIC", [4 / 9 * 2.0 ** j for j in POWERS])
    s_div = _first_unstable(rows)
    assert s_div is not None and 0.5 <= s_div <= 10.0
    assert all(status == "completed" for s, status in rows if s <= 4 / 9)


def test_sweep_explicit_loses_stability_at_mu_over_l_squared_scale(tmp_path):
    rows = _sweep(tmp_path, "EXPLICIT", [4 / 9 * 2.0 ** j for j in POWERS])
    s_div = _first_unstable(rows)
    # stability lost within a modest factor of mu/L^2 = 0.01, far below the symplectic boundary
    assert s_div is not None and s_div <= 0.1


def test_sweep_implicit_never_diverges(tmp_path):
    rows = _sweep(tmp_path, "IMPLICIT", [0.01, 0.1, 1.0, 3.0, 10.0], iterations=500)
    assert all(status == "completed" for _, status in rows)


def test_sweep_records_row_errors(tmp_path):
    cfg = _config(tmp_path, "SC_HR", "IMPLICIT", None, kind="log_sum_exp", iterations=5,
                  objective='kind = "logistic"\nsamples = 50\ndim = 5\nreg = 0.01\nseed = 0')
    assert cli.main(["sweep", "--config", cfg, "--grid", "0.1,1e300", "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "exp.sweep.csv")
    assert len(rows) == 3


def test_sweep_rejects_bad_grid(tmp_path):
    cfg = _write(tmp_path, SC_SYMPLECTIC)
    assert cli.main(["sweep", "--config", cfg, "--grid", "0.1", "-2", "--out", str(tmp_path)]) == 1
    assert cli.main(["sweep", "--config", cfg, "--grid", "abc", "--out", str(tmp_path)]) == 1
    assert cli.main(["sweep", "--config", cfg, "--param", "mu", "--grid", "1", "--out", str(tmp_path)]) == 1


# -- flow ------------------------------------------------------------------------------


def test_flow_gradient_flow_scalar(tmp_path):
    cfg = _config(tmp_path, "GRAD_FLOW", None, None, kind="scalar", extra="[checks]\nhorizon = 2.0\nh = 0.01\n")
    assert cli.main(["flow", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _read_csv(tmp_path / "exp.flow.csv")
    assert rows[0] == cli.FLOW_HEADER
    t = np.array([float(r[0]) for r in rows[1:]])
    gap = np.array([float(r[1]) for r in rows[1:]])
    i = int(np.argmin(np.abs(t - 1.0)))
    assert abs(gap[i] - np.exp(-2.0) * gap[0]) <= 1e-6


def test_flow_symplectic_family_meets_envelope(tmp_path):
    cfg = _config(tmp_path, "SC_HR", "SYMPLECTIC", "theorem", extra="[checks]\nhorizon = 50.0\n", iterations=100)
    assert cli.main(["flow", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "exp.flow.json").read_text())
    status = {b["id"]: b["status"] for b in report["bounds"]}
    assert status["flow.sc_hr.fgap"] == "pass"
    gap_rows = _read_csv(tmp_path / "exp.gap.csv")
    assert gap_rows[0] == cli.GAP_HEADER and float(gap_rows[1][2]) == 0.0


def test_flow_zero_horizon_is_usage_error(tmp_path):
    cfg = _config(tmp_path, "GRAD_FLOW", None, None, kind="scalar", extra="[checks]\nhorizon = 0.0\n")
    assert cli.main(["flow", "--config", cfg, "--out", str(tmp_path)]) == 1
