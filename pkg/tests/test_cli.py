"""Command-line interface: exit codes, output formats, determinism."""

import json
from pathlib import Path

import numpy as np
import pytest

from stochfio.cli import main
from stochfio.io import read_field_csv, strip_timing

XI30 = {"xi_radius": 30.0}
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, name, cfg):
    cfg = {"schema_version": 1, **cfg}
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def apply_config(**overrides):
    cfg = {
        "phase": {"family": "linear_phase"},
        "amplitude": {"family": "constant", "value": 1.0, "layout": [1, 1, 1],
                      "d": 0.0, "rho": 1.0, "delta": 0.0},
        "test_function": {"family": "gaussian_bump", "block": "y",
                          "center": 0.0, "width": 1.0},
        "grid": {"lo": -1.0, "hi": 1.0, "n": 9},
        "quadrature": XI30,
    }
    cfg.update(overrides)
    return cfg


def run_json(capsys, argv):
    rc = main(argv)
    out = capsys.readouterr().out
    return rc, (json.loads(out) if out else None)


# ---------------------------------------------------------------------------
# configuration errors -> exit code 2


def test_missing_config_file():
    assert main(["apply", "--config", "/nonexistent/cfg.json"]) == 2


def test_config_without_schema_version(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"grid": {}}))
    assert main(["apply", "--config", str(path)]) == 2


def test_unknown_map_family(tmp_path):
    cfg = write_config(tmp_path, "cfg.json",
                       apply_config(phase={"family": "no_such_phase"}))
    assert main(["apply", "--config", cfg]) == 2


def test_unknown_quadrature_option(tmp_path):
    cfg = write_config(tmp_path, "cfg.json",
                       apply_config(quadrature={"xi_radius": 30.0, "bogus": 1}))
    assert main(["apply", "--config", cfg]) == 2


def test_missing_required_entry(tmp_path):
    bare = apply_config()
    del bare["grid"]
    cfg = write_config(tmp_path, "cfg.json", bare)
    assert main(["apply", "--config", cfg]) == 2


def test_csv_without_out_is_rejected(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", apply_config())
    assert main(["apply", "--config", cfg, "--format", "csv"]) == 2


def test_csv_for_fieldless_command_is_rejected(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", {
        "speed": {"kind": "affine", "offset": 1.0, "slope": 0.1},
        "horizon": {"t_max": 0.5},
    })
    out = tmp_path / "h.csv"
    assert main(["horizon", "--config", cfg,
                 "--format", "csv", "--out", str(out)]) == 2


# ---------------------------------------------------------------------------
# verify


def test_verify_accepts_translation_phase(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", {
        "phase": {"family": "linear_phase"},
    })
    rc, payload = run_json(capsys, ["verify", "--config", cfg])
    assert rc == 0
    assert payload["passed"] is True
    assert payload["checks"]["homogeneity"]["passed"] is True
    assert payload["checks"]["membership"]["passed"] is True
    assert payload["checks"]["coefficient_bounds"]["passed"] is True


def test_verify_rejects_nonhomogeneous_phase(tmp_path, capsys):
    # (x - y) xi + xi^2 breaks 1-homogeneity in xi
    cfg = write_config(tmp_path, "cfg.json", {
        "phase": {"family": "sum", "terms": [
            {"family": "linear_phase"},
            {"family": "product", "factors": [
                {"family": "coordinate", "block": "xi", "index": 0},
                {"family": "coordinate", "block": "xi", "index": 0},
            ]},
        ]},
    })
    rc, payload = run_json(capsys, ["verify", "--config", cfg])
    assert rc == 4
    assert payload["passed"] is False
    assert payload["checks"]["homogeneity"]["passed"] is False


# ---------------------------------------------------------------------------
# apply


def test_apply_writes_json_with_manifest(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", apply_config())
    out = tmp_path / "field.json"
    rc = main(["apply", "--config", cfg, "--out", str(out)])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["manifest"]["command"] == "apply"
    assert payload["manifest"]["kappa"] == 2
    xs = np.array(payload["field"]["points"][0])
    got = np.array(payload["field"]["values"]["0"]["re"])
    assert np.max(np.abs(got - np.exp(-xs ** 2))) < 1e-6


def test_apply_csv_with_manifest_sidecar(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", apply_config())
    out = tmp_path / "field.csv"
    rc = main(["apply", "--config", cfg, "--format", "csv", "--out", str(out)])
    assert rc == 0
    data = read_field_csv(str(out))
    assert data["header"][:3] == ["x", "re", "im"]
    xs = data["columns"]["x"]
    assert np.max(np.abs(data["columns"]["re"] - np.exp(-xs ** 2))) < 1e-6
    sidecar = json.loads((tmp_path / "field.csv.manifest.json").read_text())
    assert sidecar["manifest"]["command"] == "apply"


# ---------------------------------------------------------------------------
# solvers


def test_transport_command_matches_shifted_profile(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", {
        "speed": 1.0,
        "test_function": {"family": "gaussian_bump", "block": "y"},
        "time": 0.5,
        "grid": {"lo": -1.0, "hi": 1.0, "n": 9},
        "quadrature": XI30,
    })
    rc, payload = run_json(capsys, ["transport", "--config", cfg])
    assert rc == 0
    xs = np.array(payload["field"]["points"][0])
    got = np.array(payload["field"]["values"]["0"]["re"])
    assert np.max(np.abs(got - np.exp(-(xs - 0.5) ** 2))) < 1e-6


def test_wave_command_matches_dalembert(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", {
        "speed": 2.0,
        "test_function": {"family": "gaussian_bump", "block": "y"},
        "time": 0.2,
        "grid": {"lo": -1.0, "hi": 1.0, "n": 9},
        "quadrature": XI30,
    })
    rc, payload = run_json(capsys, ["wave", "--config", cfg])
    assert rc == 0
    xs = np.array(payload["field"]["points"][0])
    exact = 0.5 * (np.exp(-(xs - 0.4) ** 2) + np.exp(-(xs + 0.4) ** 2))
    got = np.array(payload["field"]["values"]["0"]["re"])
    assert np.max(np.abs(got - exact)) < 1e-6


def test_halfwave_out_of_regime_exits_3(tmp_path, capsys):
    # e^{-sigma t dc/dx} reaches 0.407 < 1/2 for slope 0.9 at t = 1
    cfg = write_config(tmp_path, "cfg.json", {
        "speed": {"kind": "affine", "offset": 1.0, "slope": 0.9},
        "test_function": {"family": "gaussian_bump", "block": "y"},
        "time": 1.0,
        "grid": {"lo": -0.5, "hi": 0.5, "n": 5},
        "quadrature": XI30,
    })
    assert main(["halfwave", "--config", cfg]) == 3


def test_horizon_command_reports_threshold_crossing(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", {
        "speed": {"kind": "affine", "offset": 1.0, "slope": 0.9},
        "horizon": {"t_max": 2.0, "dt": 0.05, "threshold": 0.5},
    })
    rc, payload = run_json(capsys, ["horizon", "--config", cfg])
    assert rc == 0
    horizon = payload["horizon"]
    assert horizon["hit_threshold"] is True
    # |G| = e^{-0.9 t} crosses 1/2 at t = ln(2)/0.9 = 0.770
    crossing = np.log(2.0) / 0.9
    assert crossing <= horizon["T_obs"] <= crossing + 0.05 + 1e-12


# ---------------------------------------------------------------------------
# Monte Carlo


def mc_config(**overrides):
    cfg = {
        "model": {"c0": 2.0, "s": 0.2, "alpha": 0.25},
        "test_function": {"family": "gaussian_bump", "block": "y"},
        "time": 0.3,
        "grid": {"lo": -1.0, "hi": 1.0, "n": 9},
        "mc": {"n_samples": 64, "base_seed": 5},
    }
    cfg.update(overrides)
    return cfg


def test_mc_reports_analytic_gap(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", mc_config())
    rc, payload = run_json(capsys, ["mc", "--config", cfg])
    assert rc == 0
    body = payload["mc"]
    assert body["stats"]["n"] == 64
    assert body["analytic"]["max_deviation"] <= 4.0 * body["analytic"]["max_std_error"]


def test_mc_autocovariance_pairs_in_payload(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", mc_config(
        mc={"n_samples": 64, "base_seed": 5, "autocov_pairs": [[4, 4], [0, 8]]}))
    rc, payload = run_json(capsys, ["mc", "--config", cfg])
    assert rc == 0
    stats = payload["mc"]["stats"]
    cov = stats["autocovariance"]
    assert cov["pairs"] == [[4, 4], [0, 8]]
    # diagonal entry is the variance at that grid point: n * std_error^2
    var4 = stats["n"] * stats["std_error"][4] ** 2
    assert cov["re"][0] == pytest.approx(var4)
    assert cov["im"][0] == pytest.approx(0.0, abs=1e-15)


def test_mc_rejects_bad_autocov_pairs(tmp_path, capsys):
    for bad in ([[0, 1, 2]], [[0, 99]], "nope", [["a", "b"]]):
        cfg = write_config(tmp_path, f"cfg_{hash(str(bad)) % 997}.json", mc_config(
            mc={"n_samples": 8, "autocov_pairs": bad}))
        rc, _ = run_json(capsys, ["mc", "--config", cfg])
        assert rc == 2


def test_mc_seed_override_changes_the_draws(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", mc_config())
    _, p1 = run_json(capsys, ["mc", "--config", cfg, "--seed", "1"])
    _, p2 = run_json(capsys, ["mc", "--config", cfg, "--seed", "2"])
    _, p1_again = run_json(capsys, ["mc", "--config", cfg, "--seed", "1"])
    assert p1["mc"]["stats"]["mean_re"] != p2["mc"]["stats"]["mean_re"]
    assert p1 == p1_again
    assert p1["mc"]["base_seed"] == 1


# ---------------------------------------------------------------------------
# convergence study


@pytest.mark.parametrize("name",
                         sorted(p.stem for p in CONFIG_DIR.glob("*.json")))
def test_shipped_example_configs_run_clean(name, capsys):
    """Every config in configs/ runs its namesake command successfully."""
    path = CONFIG_DIR / f"{name}.json"
    rc, payload = run_json(capsys, [name, "--config", str(path)])
    assert rc == 0
    assert payload is not None and "manifest" in payload


def test_converge_command_reports_decaying_errors(tmp_path, capsys):
    cfg = write_config(tmp_path, "cfg.json", apply_config(
        converge={"radii": [4.0, 8.0, 16.0, 32.0], "m_tilde": 2},
        quadrature={},
    ))
    rc, payload = run_json(capsys, ["converge", "--config", cfg])
    assert rc == 0
    study = payload["study"]
    assert study["bound_respected"] is True
    errors = study["errors"]
    assert all(b < a for a, b in zip(errors[:-1], errors[1:-1]))


# ---------------------------------------------------------------------------
# determinism


def test_rerun_and_worker_count_leave_output_unchanged(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", apply_config())
    payloads = []
    for tag, workers in (("a", None), ("b", None), ("c", "4")):
        out = tmp_path / f"{tag}.json"
        argv = ["apply", "--config", cfg, "--out", str(out)]
        if workers:
            argv += ["--workers", workers]
        assert main(argv) == 0
        payload = json.loads(out.read_text())
        payload["manifest"] = strip_timing(payload["manifest"])
        payloads.append(json.dumps(payload, sort_keys=True))
    assert payloads[0] == payloads[1] == payloads[2]


def test_csv_reruns_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, "cfg.json", apply_config())
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"{tag}.csv"
        assert main(["apply", "--config", cfg,
                     "--format", "csv", "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
