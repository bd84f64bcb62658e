import csv
import hashlib
import json
import math

import numpy as np
import pytest

from polcav import __version__
from polcav.cli import main
from polcav.config import Config, config_from_dict, parse_config, serialize_config
from polcav.curvature import astigmatic_surface, format_height_map
from polcav.errors import ParseError, ValidationError
from polcav.spectra import tau_from_kappa


# -- configuration ----------------------------------------------------------

def test_defaults():
    cfg = parse_config("{}")
    assert cfg.system.kappa == 52e3
    assert cfg.system.splitting == 82.4e3
    assert cfg.system.omega_m == 222e3
    assert cfg.system.gamma_m == 19.0
    sys = cfg.system.to_system()
    assert sys.kappa == pytest.approx(2 * math.pi * 52e3, rel=1e-15)


def test_validation_names_key():
    with pytest.raises(ValidationError) as info:
        parse_config('{"system": {"gamma_m": -19}}')
    assert info.value.key == "gamma_m"
    with pytest.raises(ValidationError) as info:
        parse_config('{"system": {"kappa_khz": 52}}')
    assert info.value.key == "kappa_khz"
    with pytest.raises(ValidationError):
        parse_config('{"plot": {}}')
    with pytest.raises(ValidationError):
        parse_config('{"sweep": {"step": 0}}')
    with pytest.raises(ValidationError):
        parse_config('{"system": {"kappa": "52k"}}')
    with pytest.raises(ValidationError):
        parse_config('{"system": {"kappa": true}}')
    with pytest.raises(ValidationError):
        parse_config('{"thermometry": {"n": 1, "ratio": 2}}')


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_config("{system: 1")
    with pytest.raises(ParseError):
        parse_config("[1, 2]")
    with pytest.raises(ParseError):
        parse_config('{"system": 3}')


def test_round_trip():
    text = '{"system": {"kappa": 51000, "p_v": 1.9e-6}, "thermometry": {"ratio": 1.5}}'
    cfg = parse_config(text)
    assert cfg.thermometry.n is None
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)
    assert config_from_dict(Config().to_dict()) == Config()


def test_sweep_grid():
    cfg = parse_config('{"sweep": {"start": -10, "stop": 10, "step": 5}}')
    np.testing.assert_array_equal(cfg.sweep.grid_hz(), [-10, -5, 0, 5, 10])


# -- commands ---------------------------------------------------------------

def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def run(*argv):
    return main(list(argv))


def check_sidecar(path, command):
    record = json.loads((path.parent / (path.name + ".run.json")).read_text())
    assert record["command"][0] == command
    assert record["version"] == __version__
    assert record["sha256"] == hashlib.sha256(path.read_bytes()).hexdigest()
    assert set(record["config"]) == {"system", "sweep", "synthesis", "thermometry", "curvature"}
    return record


def test_sweep_command(tmp_path):
    out = tmp_path / "sweep.csv"
    assert run("sweep", "--out", str(out)) == 0
    header, data = read_csv(out)
    assert header == ["detuning_hz", "delta_omega_hz", "gamma_eff_hz", "t_eff_k", "n_eff"]
    assert data.shape == (401, 5)
    record = check_sidecar(out, "sweep")
    assert record["summary"]["cancellation_hz"] == pytest.approx(55.6e3, rel=1e-3)
    unstable = np.isnan(data[:, 3])
    assert np.all(data[unstable, 2] <= 0)


def test_sweep_with_config_file(tmp_path):
    cfg = tmp_path / "equal.json"
    cfg.write_text(json.dumps({"system": {"p_v": 2.19e-6}, "sweep": {"start": 0, "stop": 82.4e3, "step": 41.2e3}}))
    out = tmp_path / "s.csv"
    assert run("sweep", "--config", str(cfg), "--out", str(out)) == 0
    _, data = read_csv(out)
    assert data[1, 0] == 41.2e3
    assert data[1, 3] == pytest.approx(300.0, rel=1e-9)
    record = check_sidecar(out, "sweep")
    assert record["summary"]["cancellation_hz"] == pytest.approx(41.2e3, rel=1e-12)


def test_global_fit_through_files(tmp_path):
    data = tmp_path / "sweep.csv"
    cfg = tmp_path / "grid.json"
    cfg.write_text('{"sweep": {"start": -150000, "stop": 250000, "step": 5000}}')
    assert run("sweep", "--config", str(cfg), "--out", str(data)) == 0
    out = tmp_path / "fit.json"
    assert run("global-fit", "--data", str(data), "--init", "36400,107120,2.847e-6,1.295e-6",
               "--out", str(out)) == 0
    fit = json.loads(out.read_text())
    truth = {"kappa_hz": 52e3, "splitting_hz": 82.4e3, "p_h_w": 2.19e-6, "p_v_w": 1.85e-6}
    for key, value in truth.items():
        assert fit[key] == pytest.approx(value, rel=1e-2)
    record = check_sidecar(out, "global-fit")
    assert record["inputs"]["sweep.csv"] == hashlib.sha256(data.read_bytes()).hexdigest()


def test_spectrum_and_fit(tmp_path):
    spec = tmp_path / "psd.csv"
    assert run("spectrum", "--out", str(spec)) == 0
    header, data = read_csv(spec)
    assert header == ["freq_hz", "psd_m2_per_hz"]
    summary = check_sidecar(spec, "spectrum")["summary"]
    out = tmp_path / "fit.json"
    assert run("fit-spectrum", "--data", str(spec), "--out", str(out)) == 0
    fit = json.loads(out.read_text())
    assert fit["center_hz"] == pytest.approx(summary["center_hz"], rel=1e-6)
    assert fit["fwhm_hz"] == pytest.approx(summary["fwhm_hz"], rel=1e-6)
    assert fit["t_eff_k"] == pytest.approx(summary["t_eff_k"], rel=1e-6)


def test_thermometry_command(tmp_path):
    out = tmp_path / "t.json"
    assert run("thermometry", "--ratio", "1.5", "--out", str(out)) == 0
    res = json.loads(out.read_text())
    assert res["ratio_hv"] == 1.5
    assert res["detuning_hz"] == 41.2e3
    assert res["n_est"] > 0
    assert run("thermometry", "--ratio", "50", "--out", str(out)) == 2


def test_curvature_command(tmp_path):
    surface = tmp_path / "surface.txt"
    surface.write_text(format_height_map(astigmatic_surface((61, 61), 0.5e-6, 1e-3, 4e-3)))
    out = tmp_path / "roc.csv"
    assert run("curvature", "--map", str(surface), "--out", str(out)) == 0
    header, data = read_csv(out)
    assert header == ["angle_deg", "roc_m"]
    assert data.shape == (72, 2)
    summary = check_sidecar(out, "curvature")["summary"]
    assert summary["roc_min_m"] == pytest.approx(1e-3, rel=1e-9)
    assert summary["roc_max_m"] == pytest.approx(4e-3, rel=1e-9)
    assert summary["predicted_splitting_hz"] == pytest.approx(60.6e3, rel=1e-3)


def test_curvature_needs_map(tmp_path):
    assert run("curvature", "--out", str(tmp_path / "roc.csv")) == 1
    bad = tmp_path / "bad.txt"
    bad.write_text("0,0\n0,0\n")
    assert run("curvature", "--map", str(bad), "--out", str(tmp_path / "roc.csv")) == 1


def test_ringdown_command(tmp_path):
    tau = tau_from_kappa(51e3)
    t = np.linspace(0, 8 * tau, 500)
    trace = tmp_path / "ring.csv"
    with open(trace, "w") as fh:
        fh.write("time_s,intensity_w\n")
        for ti in t:
            fh.write(f"{float(ti)!r},{1e-3 * math.exp(-ti / tau)!r}\n")
    out = tmp_path / "ring.json"
    assert run("ringdown", "--data", str(trace), "--out", str(out)) == 0
    res = json.loads(out.read_text())
    assert res["kappa_hz"] == pytest.approx(51e3, rel=1e-9)
    assert res["tau_s"] == pytest.approx(tau, rel=1e-9)


def test_design_command(tmp_path):
    out = tmp_path / "design.json"
    assert run("design", "--out", str(out)) == 0
    res = json.loads(out.read_text())
    assert res["sideband_resolved"] is True
    assert res["ratio"] > 1
    assert run("design", "--temperature-k", "0", "--out", str(out)) == 0
    assert json.loads(out.read_text())["ratio"] == "inf"
    assert run("design", "--power-w", "0", "--out", str(out)) == 1


def test_transmission_command(tmp_path):
    out = tmp_path / "t.csv"
    assert run("transmission", "--out", str(out), "--angle-deg", "0") == 0
    header, data = read_csv(out)
    assert header == ["offset_hz", "transmission"]
    assert data[:, 1].max() == pytest.approx(1.0, abs=1e-4)
    assert run("transmission", "--out", str(out), "--angle-deg", "120") == 1


def test_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "x.csv")
    bad = tmp_path / "bad.json"
    bad.write_text('{"system": {"gamma_m": -1}}')
    assert run("sweep", "--config", str(bad), "--out", out) == 1
    assert "gamma_m" in capsys.readouterr().err
    assert run("sweep", "--config", str(tmp_path / "missing.json"), "--out", out) == 1
    assert run("bogus") == 1
    assert run("spectrum", "--detuning-hz", "150000", "--out", out) == 2
    assert "InstabilityError" in capsys.readouterr().err
    flat = tmp_path / "flat.csv"
    flat.write_text("freq_hz,psd_m2_per_hz\n" + "".join(f"{f},1e-26\n" for f in range(100, 200)))
    assert run("fit-spectrum", "--data", str(flat), "--out", out) == 2
    assert run("global-fit", "--data", str(flat), "--out", out) == 1


PIPELINES = [
    ("sweep", "out.csv"),
    ("spectrum", "--seed", "11", "--noise", "0.02", "out.csv"),
    ("thermometry", "--n", "2.5", "out.json"),
    ("design", "out.json"),
    ("transmission", "out.csv"),
]


@pytest.mark.parametrize("pipeline", PIPELINES, ids=[p[0] for p in PIPELINES])
def test_byte_identical_reruns(tmp_path, monkeypatch, pipeline):
    *argv, name = pipeline
    outputs = []
    for run_dir in ("a", "b"):
        d = tmp_path / run_dir
        d.mkdir()
        monkeypatch.chdir(d)
        assert run(*argv, "--out", name) == 0
        outputs.append(((d / name).read_bytes(), (d / (name + ".run.json")).read_bytes()))
    assert outputs[0] == outputs[1]
