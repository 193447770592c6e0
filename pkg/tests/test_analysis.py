import math
from dataclasses import replace

import numpy as np
import pytest

import qsl_relax.analysis as analysis
from qsl_relax.analysis import (
    SUMMARY_COLUMNS,
    analyze_model,
    analyze_series,
    prepare_series,
    summary_row,
)
from qsl_relax.dynamics import TimeSeries, sx_series
from qsl_relax.errors import ConfigError, DegeneratePathError
from qsl_relax.geometry import MetricKind
from qsl_relax.presets import Grid, build_config


def _cfg(preset, t_max=0.15, n_points=1500):
    cfg = build_config(preset=preset, env={})
    return replace(cfg, grid=Grid(t_max, n_points))


def _sign_changes(d, floor=1e-4):
    sig = d[np.abs(d) >= floor]
    return int(np.count_nonzero(np.diff(np.sign(sig))))


def test_twenty_mm_metrics_cross_repeatedly():
    result = analyze_model(_cfg("20mM-sim"))
    assert _sign_changes(result.delta_diff.value) >= 3
    times = result.report.crossovers.times
    # checked against a brute-force sqrtm overlap integration on a dense grid
    assert len(times) == 11
    assert times[0] == pytest.approx(0.98e-3, abs=2e-4)
    assert times[-1] == pytest.approx(48.68e-3, abs=2e-4)
    assert result.report.markovianity.is_non_markovian


def test_three_hundred_mm_wy_stays_looser():
    result = analyze_model(_cfg("300mM-sim"))
    d = result.delta_diff
    late = d.t > 2e-3
    assert np.all(d.value[late] > 0)
    assert not result.report.markovianity.is_non_markovian
    timeline = result.report.crossovers.timeline
    assert timeline[-1][2] is MetricKind.WY


def test_report_fields_are_consistent():
    result = analyze_model(_cfg("120mM-sim", t_max=0.03, n_points=200))
    rep = result.report
    assert rep.tau == pytest.approx(0.03)
    assert rep.undefined_points == 1
    assert rep.first_defined_time == pytest.approx(0.03 / 199)
    for m in rep.metrics.values():
        assert m.path_length >= m.geodesic_length
        assert 0.0 < m.qsl_time < rep.tau
        assert m.delta == pytest.approx(
            (m.path_length - m.geodesic_length) / m.geodesic_length
        )
    data = rep.to_dict()
    assert set(data["metrics"]) == {"QFI", "WY"}
    assert data["markovianity"]["verdict"] == "non-markovian"
    assert len(result.delta_qfi) == len(result.delta_wy) == 199
    assert result.coherence.value[0] == 1.0


def test_model_analysis_needs_params():
    cfg = build_config(env={})
    with pytest.raises(ConfigError):
        analyze_model(cfg)


def test_series_analysis_tracks_model():
    cfg = build_config(
        preset="20mM-sim",
        overrides={
            "initial_state": {"x0": 0.6, "z0": 0.6},
            "grid": {"t_max": 0.03, "n_points": 3001},
        },
        env={},
    )
    sx = sx_series(cfg.times(), cfg.bloch(), cfg.params)
    sampled = analyze_series(prepare_series(sx, cfg, smoothing=False), cfg)
    coarse = replace(cfg, grid=Grid(0.03, 31))
    model = analyze_model(coarse)
    for kind in MetricKind:
        a = sampled.report.metrics[kind]
        b = model.report.metrics[kind]
        assert a.geodesic_length == pytest.approx(b.geodesic_length, rel=1e-9)
        assert a.path_length == pytest.approx(b.path_length, rel=1e-3)


def test_prepare_series_rescales_to_x0():
    cfg = build_config(env={})
    t = np.linspace(0.0, 0.01, 50)
    raw = TimeSeries(t, 2.0 * np.exp(-t / 0.01))
    out = prepare_series(raw, cfg, reference=2.0, smoothing=False)
    assert out.value[0] == pytest.approx(cfg.initial_state.x0)
    smoothed = prepare_series(raw, cfg, reference=2.0)
    assert smoothed.value == pytest.approx(out.value, abs=1e-4)


def test_constant_series_is_degenerate():
    cfg = build_config(env={})
    t = np.linspace(0.0, 0.01, 40)
    with pytest.raises(DegeneratePathError):
        analyze_series(TimeSeries(t, np.full(40, 0.5)), cfg)


def test_summary_row_ok():
    cfg = _cfg("300mM-sim", t_max=0.02, n_points=100)
    row = summary_row("300mM", cfg)
    assert set(row) == set(SUMMARY_COLUMNS)
    assert row["status"] == "ok"
    assert row["preset"] == "300mM-sim"
    assert row["verdict"] == "markovian"
    assert row["error"] == ""
    assert row["L_wy"] > row["L_qfi"] > 0
    assert math.isfinite(row["qsl_time_wy_s"])


def test_summary_row_failure_is_contained(monkeypatch):
    def boom(cfg):
        raise DegeneratePathError("zero-length path")

    monkeypatch.setattr(analysis, "analyze_model", boom)
    row = summary_row("20mM-sim", _cfg("20mM-sim"))
    assert row["status"] == "failed"
    assert "zero-length" in row["error"]
    assert row["concentration_mM"] == 20.0
    bad = summary_row("7mM", _cfg("20mM-sim"))
    assert bad["status"] == "failed"
