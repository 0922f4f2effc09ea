"""Scenario-runner and CLI tests.

Configuration layering, the noise builders, the report plumbing, and the
scenario predicates evaluated on the shared session fixtures.  CLI commands
run in-process through main(argv); one subprocess test checks the installed
console script.  The n = 2 profile-convergence run exercises the override
path end to end on a frame the defaults never touch.
"""

import json
import shutil
import subprocess

import numpy as np
import pytest

import fujitalab
from fujitalab.cli import main
from fujitalab.experiments import (
    DEFAULTS,
    CaseResult,
    ScenarioConfig,
    ScenarioReport,
    basis_report,
    bump_datum,
    fourier_noise,
    h0_threshold_48,
    orthogonal_noise,
    run_sweep,
    scenario_profile_convergence,
)
from fujitalab.spectral import project
from fujitalab.weighted_space import Field, Grid, norm_rho

TAU0 = 10.0


# ---------------------------------------------------------------------------
# configuration layering


def test_defaults_are_copied():
    cfg = ScenarioConfig.defaults()
    cfg.sections["frame"]["p"] = "5.0"
    assert DEFAULTS["frame"]["p"] == "3.0"


def test_get_missing_key_raises():
    cfg = ScenarioConfig.defaults()
    with pytest.raises(KeyError, match=r"\[frame\] missing"):
        cfg.get("frame", "missing")
    with pytest.raises(KeyError, match=r"\[nosection\]"):
        cfg.get("nosection", "p")


def test_getfloat_rejects_nonfinite():
    cfg = ScenarioConfig.load(None, {"frame": {"p": "inf"}})
    with pytest.raises(ValueError, match="finite"):
        cfg.getfloat("frame", "p")


def test_getfloats_parses_delta_list():
    cfg = ScenarioConfig.defaults()
    assert cfg.getfloats("perturbation", "deltas") == [1e-1, 1e-2, 1e-3]
    cfg2 = ScenarioConfig.load(None, {"perturbation": {"deltas": "1.0,2.0,"}})
    assert cfg2.getfloats("perturbation", "deltas") == [1.0, 2.0]
    cfg3 = ScenarioConfig.load(None, {"perturbation": {"deltas": "1.0,nan"}})
    with pytest.raises(ValueError, match="finite"):
        cfg3.getfloats("perturbation", "deltas")


def test_frame_and_grid_from_config():
    cfg = ScenarioConfig.defaults()
    fp = cfg.frame()
    assert fp.p == 3.0 and fp.n == 1
    grid = cfg.rescaled_grid()
    assert grid == Grid.make(1, 20.0, 0.05)
    assert cfg.getint("noise", "fourier_modes") == 3


def test_ini_file_layering(tmp_path):
    path = tmp_path / "lab.ini"
    path.write_text("[rescaled]\ntau0 = 12.0\n\n[custom]\nx = 7\n")
    cfg = ScenarioConfig.load(str(path))
    # file beats defaults, defaults survive elsewhere, new sections appear
    assert cfg.getfloat("rescaled", "tau0") == 12.0
    assert cfg.get("rescaled", "dtau") == DEFAULTS["rescaled"]["dtau"]
    assert cfg.getint("custom", "x") == 7
    # explicit overrides beat the file and are stringified
    cfg2 = ScenarioConfig.load(str(path), {"rescaled": {"tau0": 13}})
    assert cfg2.get("rescaled", "tau0") == "13"


def test_sha256_tracks_content(tmp_path):
    a = ScenarioConfig.defaults()
    b = ScenarioConfig.load(None)
    assert a.sha256() == b.sha256()
    assert len(a.sha256()) == 64
    c = ScenarioConfig.load(None, {"rescaled": {"tau0": "11.0"}})
    assert c.sha256() != a.sha256()


def test_canonical_text_is_sorted():
    text = ScenarioConfig.defaults().canonical_text()
    lines = text.splitlines()
    assert lines[0] == "dichotomy.branch_horizon=40.0"
    assert lines == sorted(lines)
    assert "frame.p=3.0" in lines


def test_ensure_outdir_creates(tmp_path):
    target = tmp_path / "a" / "b"
    cfg = ScenarioConfig.load(None, {"output": {"directory": str(target)}})
    assert cfg.ensure_outdir() == str(target)
    assert target.is_dir()


# ---------------------------------------------------------------------------
# noise builders and the reference datum


def test_fourier_noise_deterministic_and_normalized(grid1):
    a = fourier_noise(grid1, seed=7, modes=3)
    b = fourier_noise(grid1, seed=7, modes=3)
    np.testing.assert_array_equal(a.values, b.values)
    assert float(np.max(np.abs(a.values))) == 1.0
    c = fourier_noise(grid1, seed=8, modes=3)
    assert float(np.max(np.abs(a.values - c.values))) > 1e-3
    assert a.frame == "physical"


def test_fourier_noise_n2_shape():
    grid = Grid.make(2, 8.0, 0.1)
    eta = fourier_noise(grid, seed=3, modes=2)
    assert eta.values.shape == (161, 161)
    assert float(np.max(np.abs(eta.values))) == 1.0


def test_orthogonal_noise_kills_tracked_modes(grid1, fp1, noise1):
    np.testing.assert_allclose(norm_rho(noise1), 1.0, rtol=1e-12)
    w = Field(grid1, fp1.kappa + 0.37 * noise1.values, "similarity")
    dec = project(w, fp1)
    assert float(np.max(np.abs(dec.modes.to_array()))) < 1e-12
    assert noise1.frame == "similarity"


def test_orthogonal_noise_odd_part(grid1, fp1):
    odd = orthogonal_noise(grid1, fp1, seed=20260817, modes=3, odd=True)
    np.testing.assert_allclose(norm_rho(odd), 1.0, rtol=1e-12)
    assert float(np.max(np.abs(odd.values + odd.values[::-1]))) < 1e-12


def test_bump_datum_peak_and_shift():
    grid = Grid.make(1, 10.0, 0.01)
    u = bump_datum(grid, 3.0, shift=0.3)
    x = grid.axis(0)
    k = int(np.argmax(u.values))
    assert x[k] == pytest.approx(0.3, abs=1e-12)
    assert u.values[k] == 3.0
    # scalar shift broadcasts across axes in n = 2
    grid2 = Grid.make(2, 5.0, 0.1)
    u2 = bump_datum(grid2, 2.0, shift=0.5)
    k2 = np.unravel_index(np.argmax(u2.values), u2.values.shape)
    assert grid2.axis(0)[k2[0]] == pytest.approx(0.5)
    assert grid2.axis(1)[k2[1]] == pytest.approx(0.5)


def test_h0_threshold_value_and_scaling(fp1):
    np.testing.assert_allclose(
        h0_threshold_48(fp1, 10.0), 0.26567421697556750584, rtol=1e-12
    )
    # e^{-3 tau1 / (4 (p-1))}: four tau-units cost a factor e^{3/2} at p = 3
    ratio = h0_threshold_48(fp1, 10.0) / h0_threshold_48(fp1, 14.0)
    np.testing.assert_allclose(ratio, np.exp(1.5), rtol=1e-12)


# ---------------------------------------------------------------------------
# report plumbing


def test_report_to_json_roundtrip(tmp_path):
    rep = ScenarioReport(
        scenario="demo",
        predicates={"ok": True},
        cases=[
            CaseResult(
                name="c",
                passed=True,
                details={"x": np.float64(1.5), "arr": np.array([1.0, 2.0])},
            )
        ],
        provenance={"config_sha256": "abc"},
    )
    path = tmp_path / "r.json"
    text = rep.to_json(str(path))
    assert path.read_text() == text
    data = json.loads(text)
    assert data["passed"] is True
    assert data["cases"][0]["details"] == {"x": 1.5, "arr": [1.0, 2.0]}
    assert data["provenance"]["config_sha256"] == "abc"


def test_report_fails_on_failed_case():
    rep = ScenarioReport(
        scenario="demo",
        predicates={"ok": True},
        cases=[CaseResult(name="bad", passed=False)],
        provenance={},
    )
    assert not rep.passed


def test_basis_report_passes(cfg):
    rep = basis_report(cfg)
    assert rep.passed
    assert rep.predicates == {
        "gram-identity-1e-10": True,
        "eigen-relation-1e-6": True,
        "gaussian-moments-1e-10": True,
    }
    details = rep.cases[0].details
    assert len(details["moment_relative_errors"]) == 4
    assert details["gram_error"] < 1e-10
    assert details["eigen_relation_error"] < 1e-6
    assert rep.provenance["config_sha256"] == cfg.sha256()
    assert rep.provenance["version"] == fujitalab.__version__


def test_run_sweep_reuses_base_report(cfg, base_report):
    got_base, runs = run_sweep(cfg, [], base_report=base_report)
    assert got_base is base_report
    assert runs == {}


# ---------------------------------------------------------------------------
# scenario reports on the shared fixtures


def test_profile_convergence_report(profile_report):
    assert profile_report.passed
    main_case, exact_case = profile_report.cases
    assert main_case.name == "canonical-noisy-profile"
    assert main_case.details["exit_reason"] == "completed"
    # the servo starts at the quasi-static balance of b2 = -1/(c_p tau0)
    assert -1.3e-3 < main_case.details["balanced_b0"] < -0.9e-3
    assert main_case.details["residual_last"] < main_case.details["residual_at_tau0_plus_5"]
    # exact datum sits below the slow manifold; residual rises ~3x, then decays
    assert 2.0 < exact_case.details["ratio_to_initial"] < 4.0
    assert (
        exact_case.details["residual_max"]
        <= 1.1 * exact_case.details["canonical_residual_max"]
    )


def test_dichotomy_report(dichotomy_report, fp1):
    assert dichotomy_report.passed
    by_name = {c.name: c for c in dichotomy_report.cases}
    plus, minus = by_name["plus-epsilon"], by_name["minus-epsilon"]
    assert plus.details["exit_reason"] == "rescaled blowup"
    assert 15.5 < plus.details["exit_tau"] < 17.5
    assert minus.details["exit_reason"] == "quench"
    assert 12.0 < minus.details["exit_tau"] < 14.0
    zero = by_name["zero-control"]
    assert zero.details["exit_reason"] == "completed"
    assert zero.details["exit_tau"] >= TAU0 + 25.0 - 1e-9
    thr = by_name["far-below-threshold"]
    assert thr.details["exit_reason"] == "completed"
    np.testing.assert_allclose(
        thr.details["h0_excitation_threshold"], h0_threshold_48(fp1, TAU0), rtol=1e-15
    )
    assert thr.details["epsilon"] < thr.details["h0_excitation_threshold"]


def test_stability_report(stability_report):
    assert stability_report.passed
    by_name = {c.name: c for c in stability_report.cases}
    for delta in ("delta-0.1", "delta-0.01", "delta-0.001"):
        case = by_name[delta]
        assert case.details["blew_up"]
        assert case.details["residual_late"] < case.details["residual_early"]
    assert by_name["delta-zero-determinism"].details["identical_reports"]
    assert by_name["sign-flipped-noise"].details["blew_up"]


def test_continuity_report(continuity_report):
    assert continuity_report.passed
    by_name = {c.name: c for c in continuity_report.cases}
    devs = by_name["positive-sweep"].details["deviations"]
    assert all(devs[k + 1] <= devs[k] for k in range(len(devs) - 1))
    np.testing.assert_allclose(
        by_name["positive-sweep"].details["fitted_C"], devs[0] / 0.1, rtol=1e-12
    )
    assert by_name["delta-zero"].details["deviation"] == 0.0


def test_recenter_drift_report(recenter_report):
    assert recenter_report.passed
    by_name = {c.name: c for c in recenter_report.cases}
    shift_case = by_name["shifted-bump-miscentered"]
    # physical spacing is 0.01, so 2h = 0.02 bounds both error readouts
    assert shift_case.details["error_vs_point_est"] <= 0.02
    assert shift_case.details["error_vs_shift"] <= 0.02
    assert by_name["centered-bump"].details["drift_residual"] < 1e-9
    odd_case = by_name["odd-perturbation"]
    assert odd_case.details["c_tau_late_max"] <= odd_case.details["c_tau_early_max"]


def test_profile_convergence_n2_overrides():
    # first full scenario on a frame the defaults never exercise; tau0 = 40
    # keeps the exact-profile residual (~0.41/tau0 for two axes) inside the
    # starts-near-zero gate
    cfg = ScenarioConfig.load(
        None,
        {
            "frame": {"n": 2},
            "grid": {"extent": 8.0, "spacing": 0.1},
            "rescaled": {
                "tau0": 40.0,
                "dtau": 2e-3,
                "horizon": 10.0,
                "sample_interval": 0.1,
            },
            "profile_convergence": {"exact_horizon": 5.0},
        },
    )
    rep = scenario_profile_convergence(cfg)
    assert rep.passed
    main_case, exact_case = rep.cases
    assert main_case.details["residual_last"] < main_case.details["residual_first"]
    assert exact_case.details["residual_initial"] < 0.02


# ---------------------------------------------------------------------------
# command-line driver


def test_cli_basis_check(tmp_path, capsys):
    rc = main(["basis-check", "--set", f"output.directory={tmp_path}"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "PASS gram-identity-1e-10" in out
    assert "PASS eigen-relation-1e-6" in out
    report = json.loads((tmp_path / "basis-check-report.json").read_text())
    assert report["passed"] is True
    assert report["scenario"] == "basis-check"


def test_cli_failing_scenario_exits_nonzero(tmp_path, capsys):
    # a run ending before tau0 + 5 cannot satisfy the end-below predicate
    rc = main(
        [
            "profile-convergence",
            "--set", f"output.directory={tmp_path}",
            "--set", "rescaled.horizon=1.0",
            "--set", "profile_convergence.exact_horizon=1.0",
        ]
    )
    out = capsys.readouterr().out
    assert rc == 1
    assert "FAIL residual-end-below-tau0-plus-5" in out
    report = json.loads((tmp_path / "profile-convergence-report.json").read_text())
    assert report["passed"] is False


def test_cli_simulate_rescaled_deterministic(tmp_path, capsys):
    # identical settings give byte-identical trajectory files
    d1, d2 = tmp_path / "one", tmp_path / "two"
    args = ["simulate-rescaled", "--set", "rescaled.horizon=0.5"]
    assert main(args + ["--set", f"output.directory={d1}"]) == 0
    assert main(args + ["--set", f"output.directory={d2}"]) == 0
    out = capsys.readouterr().out
    assert out.count("exit: completed at tau = 10.5") == 2
    b1 = (d1 / "rescaled-trajectory.csv").read_bytes()
    b2 = (d2 / "rescaled-trajectory.csv").read_bytes()
    assert b1 == b2
    assert b1.startswith(b"tau,b0,")


def test_cli_config_file(tmp_path, capsys):
    ini = tmp_path / "lab.ini"
    ini.write_text(f"[rescaled]\nhorizon = 0.5\n\n[output]\ndirectory = {tmp_path}\n")
    rc = main(["simulate-rescaled", "--config", str(ini), "--no-noise"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "exit: completed at tau = 10.5" in out
    assert (tmp_path / "rescaled-trajectory.csv").exists()


def test_cli_modes(tmp_path, capsys):
    rc = main(
        [
            "modes",
            "--b2-diag", "-0.02",
            "--set", f"output.directory={tmp_path}",
            "--set", "rescaled.horizon=5.0",
        ]
    )
    out = capsys.readouterr().out
    assert rc == 0
    assert "exit: completed at tau = 15" in out
    header = (tmp_path / "modes-trajectory.csv").read_text().splitlines()[0]
    assert header.startswith("tau,b0,b1_1,b2_diag_1")


def test_cli_physical_then_recenter(tmp_path, capsys):
    rc = main(["simulate-physical", "--set", f"output.directory={tmp_path}"])
    assert rc == 0
    report = json.loads((tmp_path / "physical-report.json").read_text())
    assert report["blew_up"] is True
    snap = tmp_path / "physical-snapshot-1.bin"
    assert snap.exists()
    rc2 = main(
        [
            "recenter",
            "--snapshot", str(snap),
            "--blowup-time", str(report["T_est"]),
            "--center", "0.0",
        ]
    )
    out = capsys.readouterr().out
    assert rc2 == 0
    assert "converged: True" in out


def test_cli_rejects_malformed_set():
    with pytest.raises(SystemExit):
        main(["basis-check", "--set", "no-dot-or-equals"])


def test_console_script_installed(tmp_path):
    exe = shutil.which("fujitalab")
    assert exe, "console script not on PATH"
    proc = subprocess.run(
        [exe, "basis-check", "--set", f"output.directory={tmp_path}"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert "PASS gram-identity-1e-10" in proc.stdout
