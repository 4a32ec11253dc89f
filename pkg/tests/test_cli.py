"""End-to-end tests of the command line front end.

Each subcommand is exercised through main() so the argument parsing,
scenario resolution, unit-mode handling, CSV formatting, and exit-code
mapping are all on the hook.  Physics oracles: the 25/54 steady state of
the packaged scenario, square-wave Fourier ratios, antisymmetric static
corrections across the level ladder, orientation zeros of the drive
amplitudes, and linearity of the sample table in the applied field.
"""

from __future__ import annotations

import math
import subprocess
import sys
from importlib import resources

import numpy as np
import pytest
import yaml

from onersim.cli import (
    EXIT_CONFIG,
    EXIT_INGESTION,
    EXIT_NUMERICAL,
    EXIT_OK,
    Scenario,
    ScenarioError,
    SweepGrid,
    default_scenario,
    dump_scenario,
    load_scenario,
    main,
    pulse_period,
    run_pulse,
    run_spectrum,
)

TWO_PI = 2.0 * math.pi


def parse_csv(block: str) -> dict[str, np.ndarray]:
    lines = block.strip().splitlines()
    names = lines[0].split(",")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    data = np.array(rows)
    return {name: data[:, j] for j, name in enumerate(names)}


def csv_blocks(text: str) -> list[dict[str, np.ndarray]]:
    return [parse_csv(b) for b in text.strip("\n").split("\n\n")]


def write_scenario(tmp_path, **overrides) -> str:
    data = default_scenario().to_mapping()
    # the packaged table path is relative to the packaged file; keep
    # copies table-backed by making it absolute
    data["table_path"] = str(resources.files("onersim").joinpath("data/sample_nqi_table.csv"))
    data.update(overrides)
    p = tmp_path / "scenario.yaml"
    p.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(p)


def test_scenario_round_trip(tmp_path):
    sc = default_scenario()
    p = tmp_path / "copy.yaml"
    p.write_text(dump_scenario(sc), encoding="utf-8")
    again = load_scenario(p)
    assert again.to_mapping() == sc.to_mapping()


def test_scenario_validation(tmp_path):
    with pytest.raises(ScenarioError, match="unknown scenario keys: omega_hZ"):
        Scenario.from_mapping({"omega_hZ": 1.0})
    with pytest.raises(ScenarioError, match="omega_hz"):
        Scenario.from_mapping({"omega_hz": -1.0})
    with pytest.raises(ScenarioError, match="duty"):
        Scenario.from_mapping({"duty": 0.0})
    with pytest.raises(ScenarioError, match="unit_mode"):
        Scenario.from_mapping({"unit_mode": "imperial"})
    with pytest.raises(ScenarioError, match="6 components"):
        Scenario.from_mapping({"qg_khz": [1.0, 2.0]})
    with pytest.raises(ScenarioError, match="mapping"):
        Scenario.from_mapping(["not", "a", "mapping"])
    with pytest.raises(ScenarioError, match="samples_per_period"):
        Scenario.from_mapping({"samples_per_period": 0})

    sc = Scenario.from_mapping({"tau_s": 1e-8})
    assert pulse_period(sc) == 1e-8
    # gamma_tau route: tau = gamma_tau / decay rate
    sc2 = Scenario.from_mapping({"gamma_tau": 50.0, "decay_hz": 4.0e8})
    assert pulse_period(sc2) == pytest.approx(50.0 / (TWO_PI * 4.0e8), rel=1e-12)
    with pytest.raises(ScenarioError, match="decay_hz = 0"):
        pulse_period(Scenario.from_mapping({"decay_hz": 0.0}))


def test_sweep_grid_validation():
    with pytest.raises(ScenarioError, match="counts"):
        SweepGrid(0.0, 1.0, 1, 0.0, 1.0, 5)
    with pytest.raises(ScenarioError, match="finite"):
        SweepGrid(0.0, math.inf, 3, 0.0, 1.0, 5)
    g = SweepGrid(0.0, 1.0, 3, 0.0, 0.02, 2)
    np.testing.assert_allclose(g.thetas, [0.0, 0.5, 1.0])
    np.testing.assert_allclose(g.fields, [0.0, 0.02])


def test_steady_state_command_default_scenario(capsys):
    # packaged setup has decay = 0.4 drive on resonance: 25/54
    assert main(["steady-state"]) == EXIT_OK
    data = parse_csv(capsys.readouterr().out)
    assert data["rho_ee_inf"][0] == pytest.approx(25.0 / 54.0, rel=1e-12)
    assert data["rho_eg_re"][0] == pytest.approx(0.0, abs=1e-15)
    assert data["rho_eg_im"][0] > 0.0


def test_out_flag_matches_stdout(tmp_path, capsys):
    out = tmp_path / "ss.csv"
    assert main(["steady-state"]) == EXIT_OK
    text = capsys.readouterr().out
    assert main(["steady-state", "--out", str(out)]) == EXIT_OK
    capsys.readouterr()
    assert out.read_text(encoding="utf-8") == text
    assert text.endswith("\n")


def test_pulse_command_square_wave_ratio(tmp_path, capsys):
    # heavy dephasing kills coherent overshoot, so the excited
    # population follows the pulse train as a near-square wave and the
    # fundamental-to-mean ratio approaches 2/pi
    path = write_scenario(
        tmp_path,
        omega_hz=4.4e8,
        decay_hz=4.0e8,
        dephasing_hz=8.0e9,
        gamma_tau=50.0,
        n_periods=6,
        samples_per_period=512,
        fourier_n_max=6,
    )
    assert main(["pulse", "--scenario", path]) == EXIT_OK
    series, fourier = csv_blocks(capsys.readouterr().out)
    assert series["t"].size == 6 * 512 + 1
    assert np.all(np.diff(series["t"]) > 0)
    assert np.all(series["rho_ee"] >= 0.0)

    ratio = fourier["b_n"][1] / fourier["a_n"][0]
    assert ratio == pytest.approx(2.0 / math.pi, rel=0.03)
    # even harmonics of a half-duty square wave are suppressed
    assert abs(fourier["b_n"][2]) < 0.02 * fourier["b_n"][1]
    assert fourier["n"].size == 7


def test_pulse_output_is_byte_stable(tmp_path):
    path = write_scenario(tmp_path, n_periods=2, samples_per_period=64)
    sc = load_scenario(path)
    assert run_pulse(sc) == run_pulse(sc)


def test_spectrum_corrections_are_antisymmetric():
    sc = default_scenario()
    data = parse_csv(run_spectrum(sc))
    gamma_b0 = 8.9755e6  # packaged nucleus at 1 T
    pairs = list(zip(data["transition_from"], data["transition_to"]))
    assert (1.5, 0.5) in pairs and (1.5, -0.5) in pairs
    by_pair = {p: k for k, p in enumerate(pairs)}

    for (m_from, m_to), k in by_pair.items():
        assert data["zeeman_hz"][k] == pytest.approx(
            gamma_b0 * abs(m_from - m_to), rel=1e-12
        )
        assert data["total_hz"][k] == pytest.approx(
            data["zeeman_hz"][k] + data["correction_hz"][k], rel=1e-12
        )

    # static quadrupole shifts are even in m, so corrections mirror
    # across the ladder and the central line is untouched
    c = data["correction_hz"]
    assert c[by_pair[(1.5, 0.5)]] == pytest.approx(-c[by_pair[(-0.5, -1.5)]], rel=1e-9)
    assert c[by_pair[(1.5, -0.5)]] == pytest.approx(-c[by_pair[(0.5, -1.5)]], rel=1e-9)
    assert abs(c[by_pair[(0.5, -0.5)]]) < 1e-9
    assert abs(c[by_pair[(1.5, 0.5)]]) > 1e3  # the default tensors do shift lines


def test_spectrum_without_tensors_has_no_corrections(tmp_path, capsys):
    path = write_scenario(tmp_path, qg_khz=[0.0] * 6, qe_khz=[0.0] * 6)
    assert main(["spectrum", "--scenario", path]) == EXIT_OK
    data = parse_csv(capsys.readouterr().out)
    np.testing.assert_allclose(data["correction_hz"], 0.0, atol=1e-9)


def test_rabi_map_orientation_and_field_scaling(capsys):
    assert main([
        "rabi-map",
        "--theta-min", "0.0", "--theta-max", str(math.pi / 2.0), "--theta-count", "3",
        "--field-min", "0.005", "--field-max", "0.02", "--field-count", "2",
    ]) == EXIT_OK
    data = parse_csv(capsys.readouterr().out)
    assert data["theta_rad"].size == 3 * 2 * 5

    sel = lambda th, f, mf, mt: np.flatnonzero(
        (np.abs(data["theta_rad"] - th) < 1e-12)
        & (np.abs(data["field_au"] - f) < 1e-12)
        & (data["transition_from"] == mf)
        & (data["transition_to"] == mt)
    )[0]

    # the packaged excited tensor is axial along its own z: aligned with
    # the field nothing is drivable, at 90 degrees only the
    # two-quantum branch survives, in between both do
    for f in (0.005, 0.02):
        for mf, mt in ((1.5, 0.5), (0.5, -0.5), (-0.5, -1.5), (1.5, -0.5), (0.5, -1.5)):
            assert data["rabi_hz"][sel(0.0, f, mf, mt)] == 0.0
        assert data["rabi_hz"][sel(math.pi / 2.0, f, 1.5, 0.5)] == 0.0
        assert data["rabi_hz"][sel(math.pi / 2.0, f, 1.5, -0.5)] > 0.0
        assert data["rabi_hz"][sel(math.pi / 4.0, f, 1.5, 0.5)] > 0.0
        # the straddling single-quantum pair has a vanishing geometric
        # prefactor at every orientation
        assert data["rabi_hz"][sel(math.pi / 4.0, f, 0.5, -0.5)] == 0.0

    # tensors in the sample table are linear in field, so amplitudes
    # scale by 4 from 0.005 to 0.02
    lo = data["rabi_hz"][sel(math.pi / 4.0, 0.005, 1.5, 0.5)]
    hi = data["rabi_hz"][sel(math.pi / 4.0, 0.02, 1.5, 0.5)]
    assert hi == pytest.approx(4.0 * lo, rel=1e-9)

    # mirrored outer transitions share their amplitude
    a = data["rabi_hz"][sel(math.pi / 4.0, 0.02, 1.5, 0.5)]
    b = data["rabi_hz"][sel(math.pi / 4.0, 0.02, -0.5, -1.5)]
    assert a == pytest.approx(b, rel=1e-12)

    # corrections mirror across the ladder at every node
    c1 = data["correction_hz"][sel(math.pi / 4.0, 0.02, 1.5, 0.5)]
    c3 = data["correction_hz"][sel(math.pi / 4.0, 0.02, -0.5, -1.5)]
    assert c1 == pytest.approx(-c3, rel=1e-9)


def test_rabi_map_refuses_extrapolation(capsys):
    code = main(["rabi-map", "--field-min", "0.005", "--field-max", "0.05"])
    assert code == EXIT_INGESTION
    assert "ingestion error" in capsys.readouterr().err


def test_rabi_map_needs_table_states(tmp_path, capsys):
    path = write_scenario(tmp_path, table_ground_state=None, table_excited_state=None)
    assert main(["rabi-map", "--scenario", path]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_coupled_scaled_run_matches_prediction(tmp_path, capsys):
    # compress the hierarchy so the full density-matrix run is
    # tractable, then check the fit against the plan's prediction
    path = write_scenario(
        tmp_path, unit_mode="scaled", duration_rabi_periods=1.0, n_samples=120
    )
    assert main(["coupled", "--scenario", path]) == EXIT_OK
    series, summary = csv_blocks(capsys.readouterr().out)
    assert summary["predicted_rabi_hz"][0] > 0.0
    assert summary["relative_deviation"][0] <= 0.10
    # one predicted period, normalized time axis
    assert series["t_normalized"][-1] == pytest.approx(1.0, rel=1e-9)
    # the drive moves population out of the initial level and back
    assert series["p_1.5"][0] == pytest.approx(1.0, abs=1e-9)
    assert series["p_0.5"].max() >= 0.9
    total = sum(series[f"p_{m:g}"] for m in (1.5, 0.5, -0.5, -1.5))
    np.testing.assert_allclose(total, 1.0, atol=1e-6)


def test_coupled_zero_amplitude_sentinel(tmp_path, capsys):
    # no tensor contrast at all: the run still completes, the time axis
    # falls back to pulse periods, and the summary carries NaN
    path = write_scenario(
        tmp_path,
        qg_khz=[0.0] * 6,
        qe_khz=[0.0] * 6,
        unit_mode="scaled",
        zeeman_ratio=10.0,
        n_samples=60,
    )
    assert main(["coupled", "--scenario", path]) == EXIT_OK
    series, summary = csv_blocks(capsys.readouterr().out)
    assert math.isnan(summary["fit_rabi_hz"][0])
    assert summary["predicted_rabi_hz"][0] == 0.0
    assert math.isnan(summary["relative_deviation"][0])
    assert series["t_normalized"][-1] == pytest.approx(200.0, rel=1e-9)
    np.testing.assert_allclose(series["p_1.5"], 1.0, atol=1e-9)


def test_coupled_physical_units_run(capsys):
    # the packaged setup is deliberately sized so even physical units
    # stay within the substep budget
    assert main(["coupled"]) == EXIT_OK
    series, summary = csv_blocks(capsys.readouterr().out)
    assert summary["relative_deviation"][0] <= 0.10
    assert series["t_normalized"][-1] == pytest.approx(2.0, rel=1e-9)


def test_coupled_over_budget_exits_numerical(tmp_path, capsys):
    # pushing the optical rates up three decades blows the substep
    # estimate past the budget before any stepping happens
    path = write_scenario(tmp_path, omega_hz=1.0e12, decay_hz=4.0e11)
    assert main(["coupled", "--scenario", path]) == EXIT_NUMERICAL
    err = capsys.readouterr().err
    assert "numerical failure" in err
    assert "scaled-unit" in err


def test_efg_mesh_axial_tensor(capsys):
    assert main([
        "efg-mesh", "--which", "excited", "--n-theta", "9", "--n-phi", "8",
        "--mesh-scale", "2.0",
    ]) == EXIT_OK
    data = parse_csv(capsys.readouterr().out)
    assert data["theta_rad"].size == 72
    qzz_rad = TWO_PI * 248e3
    pole = np.abs(data["theta_rad"]) < 1e-12
    np.testing.assert_allclose(data["radius"][pole], 2.0 * qzz_rad, rtol=1e-12)
    np.testing.assert_allclose(data["sign"][pole], 1.0)
    equator = np.abs(data["theta_rad"] - math.pi / 2.0) < 1e-12
    np.testing.assert_allclose(data["radius"][equator], qzz_rad, rtol=1e-12)
    np.testing.assert_allclose(data["sign"][equator], -1.0)


def test_ingest_check_reports_table(capsys):
    assert main(["ingest-check"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "table ok: 3 states, 15 rows" in out
    assert "state pz" in out


def test_ingest_check_rejects_malformed_table(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text(
        "field_au,state_label,Qxx_kHz,Qyy_kHz,Qzz_kHz,Qxy_kHz,Qxz_kHz,Qyz_kHz\n"
        "0.0,s,1.0,2.0\n",
        encoding="utf-8",
    )
    assert main(["ingest-check", "--table", str(bad)]) == EXIT_INGESTION
    assert "ingestion error" in capsys.readouterr().err
    assert main(["ingest-check", "--table", str(tmp_path / "nope.csv")]) == EXIT_INGESTION


def test_config_errors_exit_2(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("omega_hz: 1.0\nbogus_key: 3\n", encoding="utf-8")
    assert main(["steady-state", "--scenario", str(p)]) == EXIT_CONFIG
    assert "unknown scenario keys" in capsys.readouterr().err

    assert main(["steady-state", "--scenario", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    capsys.readouterr()

    # undamped drive has no steady state: also a configuration problem
    nodecay = write_scenario(tmp_path, decay_hz=0.0, dephasing_hz=1.0e8)
    assert main(["steady-state", "--scenario", nodecay]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "onersim.cli", "steady-state"],
        capture_output=True,
        text=True,
        timeout=120,
    )
    assert proc.returncode == EXIT_OK
    assert proc.stdout.startswith("rho_ee_inf,")
