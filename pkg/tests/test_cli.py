import csv
import json

import pytest

from evostab.cli import ConfigError, config_from_dict, main, sweep_kappa, validate_scenario

DAMPED = {
    "spatial": {"type": "dirichlet_1d", "n": 31},
    "law": {"type": "damped_wave", "m1": 0.2, "r": 5},
    "analysis": {"T": 30, "dt": 0.001, "csv_stride": 1000},
}
INTEGRO_DELAY = {
    "spatial": {"type": "dirichlet_1d", "n": 31},
    "law": {"type": "integro_delay", "kernel": {"terms": [[0.5, 1.0]]},
            "alpha": 0.25, "kappa": 0.0, "h": 1.0},
    "analysis": {"T": 30, "dt": 0.001},
}


def with_law(base, **law):
    cfg = json.loads(json.dumps(base))
    cfg["law"].update(law)
    return cfg


def run(tmp_path, command, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg if isinstance(cfg, str) else json.dumps(cfg))
    out = tmp_path / f"out_{command}"
    return main([command, "--config", str(path), "--out", str(out)]), out


def test_certify_damped(tmp_path):
    code, out = run(tmp_path, "certify", DAMPED)
    assert code == 0
    cert = json.loads((out / "certificate.json").read_text())
    assert cert["certified"] is True
    assert 0 < cert["rho1"] <= 0.1
    assert (out / "summary.txt").read_text().startswith("certify: damped_wave")


def test_certify_is_deterministic(tmp_path):
    _, a = run(tmp_path, "certify", DAMPED, "a.json")
    first = (a / "certificate.json").read_text()
    _, b = run(tmp_path, "certify", DAMPED, "b.json")
    assert (b / "certificate.json").read_text() == first


def test_certify_undamped_is_negative(tmp_path):
    code, out = run(tmp_path, "certify", with_law(DAMPED, m1=0.0))
    assert code == 1
    assert json.loads((out / "certificate.json").read_text())["certified"] is False


def test_validate_undamped_refused(tmp_path):
    code, out = run(tmp_path, "validate", with_law(DAMPED, m1=0.0))
    assert code == 1
    rep = json.loads((out / "validation.json").read_text())
    assert rep["verdict"] == "REFUSED"
    assert "not certifiable" in rep["reason"]


def test_validate_damped_passes(tmp_path):
    code, out = run(tmp_path, "validate", DAMPED)
    assert code == 0
    rep = json.loads((out / "validation.json").read_text())
    assert rep["verdict"] == "PASS"
    assert rep["simulation"]["nu_hat"] >= rep["certificate"]["rho1"] - 0.01
    assert rep["resolvent_grid_sup"] <= rep["resolvent_bound"]


def test_simulate_writes_curves(tmp_path):
    code, out = run(tmp_path, "simulate", DAMPED)
    assert code == 0
    rep = json.loads((out / "simulation.json").read_text())
    assert 0.09 <= rep["nu_hat"] <= 0.11
    with open(out / "energy.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "energy", "norm_u", "norm_du"]
    assert len(rows) == 1 + 31
    with open(out / "displacement.csv") as fh:
        header = next(csv.reader(fh))
    assert header == ["t"] + [f"u_{j}" for j in range(1, 32)]


def test_kernel_check(tmp_path):
    code, out = run(tmp_path, "kernel-check", INTEGRO_DELAY)
    assert code == 0
    rep = json.loads((out / "kernel_check.json").read_text())
    assert rep["all_passed"] is True
    assert set(rep["passed"]) == set("abcdef")
    assert rep["kernel_estimate"]["inequality_holds"] is True


def test_kernel_check_needs_kernel(tmp_path):
    code, _ = run(tmp_path, "kernel-check", DAMPED)
    assert code == 2


def test_sweep_empty_list_writes_header(tmp_path):
    code, out = run(tmp_path, "sweep-kappa", INTEGRO_DELAY)
    assert code == 0
    assert (out / "sweep_kappa.csv").read_text().strip() == "kappa,certified,rho1,nu_hat,kappa0"


def test_sweep_kappa_zero_row_matches_validate():
    raw = json.loads(json.dumps(INTEGRO_DELAY))
    raw["analysis"]["kappas"] = [0.0]
    cfg = config_from_dict(raw)
    rows, kappa0 = sweep_kappa(cfg)
    assert kappa0 > 0
    (row,) = rows
    passed, rep = validate_scenario(cfg)
    assert passed
    assert row["certified"] is True
    assert row["rho1"] == pytest.approx(rep["certificate"]["rho1"])
    assert row["nu_hat"] == pytest.approx(rep["simulation"]["nu_hat"])


@pytest.mark.parametrize("text", [
    "{not json",
    json.dumps({"law": {"type": "maxwell"}}),
    json.dumps({"law": {"type": "damped_wave", "r": -1}}),
    json.dumps(with_law(INTEGRO_DELAY, alpha=None)),
    json.dumps({"law": {"type": "damped_wave"}, "analysis": {"T": 1.0, "dt": 0.3}}),
    json.dumps({"law": {"type": "damped_wave"}, "spatial": {"n": 0}}),
    json.dumps(with_law(INTEGRO_DELAY, h=1.0005)),
])
def test_malformed_configs_exit_2(tmp_path, text):
    code, _ = run(tmp_path, "certify", text)
    assert code == 2


def test_usage_errors_exit_2(tmp_path):
    assert main(["frobnicate", "--config", "x.json"]) == 2
    assert main(["certify"]) == 2
    assert main(["certify", "--config", str(tmp_path / "missing.json")]) == 2


def test_sweep_needs_delay_family():
    with pytest.raises(ConfigError):
        sweep_kappa(config_from_dict(DAMPED))
