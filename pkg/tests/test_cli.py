import re

import numpy as np
import pytest

from siwkit.cli import main, parse_band, parse_frequency, parse_length, parse_length_range
from siwkit.network import parse_metrics_report
from siwkit.touchstone import read_touchstone

TABLE1 = ["--wsiw", "43.25mm", "--d", "1mm", "--p", "2mm", "--er", "4.3", "--h", "1.5mm"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def manifest_body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("out =")]


@pytest.fixture(scope="module")
def short_layout(tmp_path_factory):
    out = tmp_path_factory.mktemp("short")
    assert main(["design", "rsiw", "--length", "20mm", "--out", str(out)]) == 0
    return out / "layout.siw"


def test_unit_parsing():
    assert parse_length("43.25mm") == 43.25e-3
    assert parse_length("1.5 m") == 1.5
    assert parse_length("250um") == 250e-6
    assert parse_frequency("2.5GHz") == 2.5e9
    assert parse_frequency("2500 mhz") == 2.5e9
    assert parse_band("2.1:3GHz") == (2.1e9, 3e9)
    assert parse_band("2100MHz:3GHz") == (2.1e9, 3e9)
    assert parse_length_range("20.57:20.57mm") == (20.57e-3, 20.57e-3)


@pytest.mark.parametrize("bad", ["43.25", "43.25 MM", "43.25in", "mm", ""])
def test_bad_lengths_are_rejected(bad):
    with pytest.raises(Exception):
        parse_length(bad)


@pytest.mark.parametrize("bad", ["3:2GHz", "2GHz", "2:3"])
def test_bad_bands_are_rejected(bad):
    with pytest.raises(Exception):
        parse_band(bad)


def test_bare_number_flag_exits_one(capsys, tmp_path):
    code, _, err = run(capsys, "design", "rsiw", "--wsiw", "43.25", "--out", tmp_path)
    assert code == 1
    assert "needs a unit" in err


def test_design_rsiw_report(capsys, tmp_path):
    code, out, _ = run(capsys, "design", "rsiw", *TABLE1, "--out", tmp_path)
    assert code == 0
    assert "W_eq = 42.72 mm" in out
    assert "TE10 cutoff = 1.6920 GHz" in out
    for name in ("layout.siw", "design.txt", "run-manifest.txt"):
        assert (tmp_path / name).exists()
    assert (tmp_path / "layout.siw").read_text().startswith("SIWLAYOUT 1\n")


def test_design_rule_b_failure(capsys, tmp_path):
    code, out, err = run(capsys, "design", "rsiw", "--d", "1mm", "--p", "4mm", "--out", tmp_path)
    assert code == 1
    assert "FAIL" in out and "allow-violations" in err
    assert not (tmp_path / "layout.siw").exists()


def test_allow_violations_writes_layout(capsys, tmp_path):
    code, _, _ = run(capsys, "design", "rsiw", "--p", "4.5mm", "--allow-violations",
                     "--out", tmp_path)
    assert code == 0 and (tmp_path / "layout.siw").exists()


def test_design_circulator_reports_radius_and_note(capsys, tmp_path):
    code, out, _ = run(capsys, "design", "circulator", "--f0", "2.5GHz", "--ef", "13.7",
                       "--out", tmp_path)
    assert code == 0
    rf = float(re.search(r"R_f = ([\d.]+) mm", out).group(1))
    assert rf == pytest.approx(9.495, rel=1e-3)
    assert "6 mm ferrite" in out


def test_preset_must_match_device(capsys, tmp_path):
    code, _, err = run(capsys, "design", "rsiw", "--preset", "paper-sband-coupler",
                       "--out", tmp_path)
    assert code == 1


@pytest.mark.parametrize("device", ["divider", "coupler", "circulator"])
def test_design_presets(capsys, tmp_path, device):
    code, out, _ = run(capsys, "design", device, "--preset", f"paper-sband-{device}",
                       "--out", tmp_path)
    assert code == 0
    assert f"device = {device}" in out


def test_config_file_and_flag_override(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# guide\nd = 1mm\np = 4.5mm   # violates rule B\nlength = 30mm\n")
    code, _, _ = run(capsys, "design", "rsiw", "--config", cfg, "--out", tmp_path / "a")
    assert code == 1
    code, _, _ = run(capsys, "design", "rsiw", "--config", cfg, "--p", "2mm",
                     "--out", tmp_path / "b")
    assert code == 0
    manifest = (tmp_path / "b" / "run-manifest.txt").read_text()
    assert "p = 0.002m" in manifest
    assert "length = 0.03m" in manifest


def test_config_errors(capsys, tmp_path):
    code, _, _ = run(capsys, "design", "rsiw", "--config", tmp_path / "missing.cfg")
    assert code == 3
    cfg = tmp_path / "c.cfg"
    cfg.write_text("command = simulate\n")
    assert run(capsys, "design", "rsiw", "--config", cfg)[0] == 1
    cfg.write_text("no equals sign\n")
    assert run(capsys, "design", "rsiw", "--config", cfg)[0] == 1


def test_manifest_rerun_is_byte_identical(capsys, tmp_path):
    first = tmp_path / "first"
    assert run(capsys, "design", "divider", "--r", "1mm", "--xp", "30mm", "--out", first)[0] == 0
    second = tmp_path / "second"
    code, _, _ = run(capsys, "design", "divider", "--config", first / "run-manifest.txt",
                     "--out", second)
    assert code == 0
    for name in ("layout.siw", "design.txt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    assert manifest_body(first / "run-manifest.txt") == manifest_body(second / "run-manifest.txt")


def test_simulate_straight_guide(capsys, tmp_path, short_layout):
    code, out, _ = run(capsys, "simulate", "--layout", short_layout, "--points", 5,
                       "--out", tmp_path)
    assert code == 0
    metrics = parse_metrics_report((tmp_path / "metrics.txt").read_text())
    assert metrics["s11_max_db"] < -30
    assert metrics["s11_bandwidth_pct"] == 100
    data, _ = read_touchstone(tmp_path / "sweep.s2p")
    assert len(data.frequencies) == 5
    assert (tmp_path / "sweep.csv").read_text().startswith("freq_hz,s11_db,s11_deg,")
    manifest = (tmp_path / "run-manifest.txt").read_text()
    assert "# complete = true" in manifest
    assert "# input layout sha256 = " in manifest
    rerun = tmp_path / "rerun"
    code, _, _ = run(capsys, "simulate", "--config", tmp_path / "run-manifest.txt",
                     "--out", rerun)
    assert code == 0
    for name in ("sweep.s2p", "sweep.csv", "metrics.txt"):
        assert (tmp_path / name).read_bytes() == (rerun / name).read_bytes()


def test_simulate_field_maps(capsys, tmp_path, short_layout):
    code, _, _ = run(capsys, "simulate", "--layout", short_layout, "--points", 3,
                     "--formats", "fieldmap", "--field-freq", "2.5GHz", "--out", tmp_path)
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["field_f1_p1.csv", "field_f1_p1.pgm", "field_f1_p2.csv",
                     "field_f1_p2.pgm", "run-manifest.txt"]


def test_simulate_partial_failure_flushes_results(capsys, tmp_path, short_layout):
    code, _, err = run(capsys, "simulate", "--layout", short_layout, "--band", "2.5:3.6GHz",
                       "--points", 3, "--out", tmp_path)
    assert code == 2
    assert "3.6 GHz" in err and "2 of 3" in err
    data, _ = read_touchstone(tmp_path / "sweep.s2p")
    assert data.frequencies.tolist() == [2.5e9, 3.05e9]
    assert "# complete = false" in (tmp_path / "run-manifest.txt").read_text()


def test_simulate_input_errors(capsys, tmp_path):
    assert run(capsys, "simulate", "--layout", tmp_path / "none.siw", "--out", tmp_path)[0] == 3
    bad = tmp_path / "bad.siw"
    bad.write_text("SIWLAYOUT 1\nBOGUS 1 2 3\n")
    assert run(capsys, "simulate", "--layout", bad, "--out", tmp_path)[0] == 1
    assert run(capsys, "simulate", "--out", tmp_path)[0] == 1


def test_simulate_unknown_format(capsys, tmp_path, short_layout):
    code, _, _ = run(capsys, "simulate", "--layout", short_layout, "--formats", "png",
                     "--out", tmp_path)
    assert code == 1


def test_dispersion_error_paths(capsys, tmp_path):
    code, _, err = run(capsys, "dispersion", "--band", "1:1.5GHz", "--out", tmp_path)
    assert code == 1 and "cutoff" in err
    code, _, err = run(capsys, "dispersion", "--points", 2, "--out", tmp_path)
    assert code == 2 and "raise npoints" in err


def test_dispersion_csv(capsys, tmp_path):
    code, out, _ = run(capsys, "dispersion", "--band", "2.3:2.5GHz", "--points", 3,
                       "--out", tmp_path)
    assert code == 0
    rows = (tmp_path / "dispersion.csv").read_text().splitlines()
    assert rows[0] == "freq_hz,beta_analytic,beta_extracted,rel_err"
    rel = np.array([float(r.split(",")[3]) for r in rows[1:]])
    assert len(rel) == 3 and np.abs(rel).max() < 0.02
    assert out.startswith("max |rel_err| = ")


def test_optimize_fixed_offset(capsys, tmp_path):
    args = ["optimize", "divider", "--r", "1.2mm", "--xp-bounds", "20.57:20.57mm",
            "--points", 3, "--dense-points", 3]
    code, out, _ = run(capsys, *args, "--out", tmp_path / "a")
    assert code == 0
    best = parse_metrics_report((tmp_path / "a" / "best.txt").read_text())
    assert best["x_p"] == pytest.approx(20.57)
    assert best["evaluations"] == 1
    history = (tmp_path / "a" / "history.csv").read_text().splitlines()
    assert history[0] == "eval_index,x_p_m,r_m,objective_db"
    assert history[1].startswith("0,0.02057,0.0012,")
    for name in ("layout.siw", "sweep.s3p", "sweep.csv", "metrics.txt", "run-manifest.txt"):
        assert (tmp_path / "a" / name).exists()
    assert run(capsys, *args, "--out", tmp_path / "b")[0] == 0
    assert (tmp_path / "a" / "history.csv").read_bytes() == \
        (tmp_path / "b" / "history.csv").read_bytes()


def test_optimize_rejects_band_below_cutoff(capsys, tmp_path):
    code, _, _ = run(capsys, "optimize", "divider", "--band", "1:3GHz", "--out", tmp_path)
    assert code == 1


@pytest.mark.slow
def test_simulate_divider_symmetry(capsys, tmp_path):
    assert run(capsys, "design", "divider", "--preset", "paper-sband-divider",
               "--out", tmp_path)[0] == 0
    code, _, _ = run(capsys, "simulate", "--layout", tmp_path / "layout.siw", "--band",
                     "2.1:3GHz", "--points", 51, "--out", tmp_path)
    assert code == 0
    metrics = parse_metrics_report((tmp_path / "metrics.txt").read_text())
    assert metrics["s21_minus_s31_max_db"] < 0.01


@pytest.mark.slow
def test_simulate_coupler_phase(capsys, tmp_path):
    assert run(capsys, "design", "coupler", "--preset", "paper-sband-coupler",
               "--out", tmp_path)[0] == 0
    code, _, _ = run(capsys, "simulate", "--layout", tmp_path / "layout.siw", "--points", 21,
                     "--out", tmp_path)
    assert code == 0
    metrics = parse_metrics_report((tmp_path / "metrics.txt").read_text())
    assert 75 <= metrics["phase_diff_deg_min"] <= metrics["phase_diff_deg_max"] <= 105
    assert metrics["phase_diff_deg_range"] <= 30
