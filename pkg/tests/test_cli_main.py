import csv
import json

import numpy as np

import qsl_relax.cli as cli
from qsl_relax.dynamics import TimeSeries, xi
from qsl_relax.errors import FitError
from qsl_relax.ingest import FitResult, load_series, write_series
from qsl_relax.presets import get_preset

SMALL = ["--t-max", "0.03", "--points", "200", "--rel-tol", "1e-8"]


def _read_csv(path):
    with open(path, encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def test_cli_error_when_no_args(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    rc = cli.main([])
    assert rc == 2


def test_simulate_writes_curves(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "sim"
    rc = cli.main(
        ["simulate", "--preset", "20mM-sim", "--t-max", "0.01", "--points", "100"]
        + ["--out", str(out)]
    )
    assert rc == 0
    sx = load_series(str(out / "sx.csv"))
    trotter = load_series(str(out / "sx_trotter.csv"))
    assert len(sx) == 100
    assert len(trotter) == 1001
    assert trotter.value[0] == sx.value[0]
    # both curves agree at the shared end point
    assert abs(trotter.value[-1] - sx.value[-1]) < 5e-3
    run = json.loads((out / "run.json").read_text())
    assert run["preset"] == "20mM-sim"
    assert run["grid"] == {"t_max": 0.01, "n_points": 100}


def test_simulate_uses_env_output_dir(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("QSL_OUT_DIR", str(tmp_path / "env-out"))
    rc = cli.main(["simulate", "--preset", "300mM", "--t-max", "0.005"])
    assert rc == 0
    assert (tmp_path / "env-out" / "coherence.csv").exists()


def test_simulate_rejects_bad_grid(monkeypatch, tmp_path, capsys):
    monkeypatch.chdir(tmp_path)
    rc = cli.main(["simulate", "--preset", "20mM-sim", "--t-max", "0"])
    assert rc == 2
    assert "t_max" in capsys.readouterr().err
    assert not (tmp_path / "qsl-out").exists()


def test_simulate_needs_parameters(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("QSL_OUT_DIR", raising=False)
    assert cli.main(["simulate"]) == 2
    assert cli.main(["simulate", "--preset", "1M-sim"]) == 2


def test_analyze_preset(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "a"
    rc = cli.main(["analyze", "--preset", "300mM-sim", *SMALL, "--out", str(out)])
    assert rc == 0
    report = json.loads((out / "report.json").read_text())
    assert report["source"] == "300mM-sim"
    assert report["tau_s"] == 0.03
    assert report["markovianity"]["verdict"] == "markovian"
    assert report["undefined_points"] == 1
    assert set(report["metrics"]["WY"]) >= {"path_length", "delta", "qsl_time_s"}
    diff = load_series(str(out / "delta_diff.csv"))
    assert np.all(diff.value[diff.t > 2e-3] > 0)
    assert len(load_series(str(out / "delta_qfi.csv"))) == 199


def test_analyze_is_reproducible(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    for name in ("one", "two"):
        rc = cli.main(["analyze", "--preset", "120mM", *SMALL, "--out", name])
        assert rc == 0
    for artifact in ("report.json", "delta_qfi.csv", "delta_wy.csv", "coherence.csv"):
        first = (tmp_path / "one" / artifact).read_bytes()
        assert first == (tmp_path / "two" / artifact).read_bytes()


def test_analyze_input_series(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    p = get_preset("20mM-sim").params
    t = np.linspace(0.0, 0.02, 400)
    write_series(str(tmp_path / "fid.csv"), TimeSeries(t, 3.0 * xi(t, p)))
    rc = cli.main(
        ["analyze", "--input", "fid.csv", "--reference", "3.0"]
        + ["--x0", "0.6", "--z0", "0.6", "--out", "series-out"]
    )
    assert rc == 0
    report = json.loads((tmp_path / "series-out" / "report.json").read_text())
    assert report["source"] == "fid.csv"
    assert report["metrics"]["QFI"]["delta"] > 0


def test_analyze_constant_input_is_data_error(monkeypatch, tmp_path, capsys):
    monkeypatch.chdir(tmp_path)
    t = np.linspace(0.0, 0.01, 40)
    write_series(str(tmp_path / "flat.csv"), TimeSeries(t, np.full(40, 0.5)))
    rc = cli.main(["analyze", "--input", "flat.csv", "--out", "o"])
    assert rc == 3
    assert "zero-length" in capsys.readouterr().err


def test_analyze_argument_conflicts(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "x.csv").write_text("0,1\n")
    assert cli.main(["analyze"]) == 2
    assert cli.main(["analyze", "--preset", "20mM", "--input", "x.csv"]) == 2
    assert cli.main(["analyze", "--input", "missing.csv"]) == 3


def _fid(tmp_path):
    p = get_preset("20mM-sim").params
    t = np.linspace(0.0, 0.1, 300)
    path = tmp_path / "fid.csv"
    write_series(str(path), TimeSeries(t, xi(t, p)))
    return str(path)


def test_fit_xi(monkeypatch, tmp_path, capsys):
    monkeypatch.chdir(tmp_path)
    path = _fid(tmp_path)
    rc = cli.main(
        ["fit", "--input", path, "--fix-j", "209.1", "--T1H", "6e-3"]
        + ["--T2C", "0.03", "--out", "fit-out"]
    )
    assert rc == 0
    data = json.loads((tmp_path / "fit-out" / "fit.json").read_text())
    assert abs(data["params"]["T1H"] / 7.1e-3 - 1) < 1e-3
    assert abs(data["params"]["T2C"] / 38.55e-3 - 1) < 1e-3
    assert data["model"] == "xi"
    assert json.loads(capsys.readouterr().out) == data


def test_fit_reads_config(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    path = _fid(tmp_path)
    cfg = tmp_path / "fit.json"
    cfg.write_text(
        json.dumps(
            {
                "params": {"T1H": 6e-3, "T2C": 0.03, "J": 209.1},
                "output_dir": "cfg-out",
            }
        ),
        encoding="utf-8",
    )
    seen = {}

    def fake(series, guess, *args, **kwargs):
        seen["guess"] = guess
        return FitResult(
            params={"T1H": guess.T1H}, residual_rms=0.0, covariance=np.zeros((1, 1))
        )

    monkeypatch.setattr(cli, "fit_xi_model", fake)
    rc = cli.main(["fit", "--input", path, "--config", str(cfg)])
    assert rc == 0
    assert (seen["guess"].T1H, seen["guess"].T2C) == (6e-3, 0.03)
    assert (tmp_path / "cfg-out" / "fit.json").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"fit_model": "xi"}), encoding="utf-8")
    assert cli.main(["fit", "--input", path, "--config", str(bad)]) == 2


def test_fit_bad_guess(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    path = _fid(tmp_path)
    assert cli.main(["fit", "--input", path, "--T2C", "-1"]) == 2
    assert cli.main(["fit", "--input", path, "--restarts", "2"]) == 2


def test_fit_failure_writes_best(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    path = _fid(tmp_path)
    best = FitResult(
        params={"T1H": 1e-3}, residual_rms=0.5, covariance=np.zeros((1, 1))
    )

    def failing(*args, **kwargs):
        raise FitError("did not converge", best=best)

    monkeypatch.setattr(cli, "fit_xi_model", failing)
    rc = cli.main(["fit", "--input", path, "--out", "f"])
    assert rc == 4
    saved = json.loads((tmp_path / "f" / "fit_failed.json").read_text())
    assert saved["params"] == {"T1H": 1e-3}
    assert not (tmp_path / "f" / "fit.json").exists()


def test_sweep_rejects_duplicates(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    rc = cli.main(["sweep", "--presets", "20mM-sim,20mM", "--out", "s"])
    assert rc == 2
    assert not (tmp_path / "s").exists()


def test_sweep_inline_with_rates(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "rates.csv").write_text(
        "concentration_mM,rate_per_s\n20,83.3\n120,588.2\n300,1587.3\n"
    )
    rc = cli.main(
        ["sweep", "--presets", "300mM-sim", "--workers", "1", *SMALL]
        + ["--rates", "rates.csv", "--out", "s"]
    )
    assert rc == 0
    rows = _read_csv(tmp_path / "s" / "summary.csv")
    assert len(rows) == 1
    assert rows[0]["preset"] == "300mM-sim"
    assert rows[0]["status"] == "ok"
    assert rows[0]["verdict"] == "markovian"
    relax = json.loads((tmp_path / "s" / "relaxivity.json").read_text())
    assert relax["r_squared"] > 0.99


def test_sweep_in_worker_processes(monkeypatch, tmp_path):
    monkeypatch.chdir(tmp_path)
    rc = cli.main(
        ["sweep", "--presets", "300mM-sim,20mM-sim", "--workers", "2"]
        + ["--t-max", "0.01", "--points", "50", "--out", "s"]
    )
    assert rc == 0
    rows = _read_csv(tmp_path / "s" / "summary.csv")
    assert [r["preset"] for r in rows] == ["20mM-sim", "300mM-sim"]
    assert all(r["status"] == "ok" for r in rows)
