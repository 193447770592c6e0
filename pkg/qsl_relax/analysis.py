"""End-to-end analysis: path → δ curves → crossovers → verdict → report.

Shared by the ``analyze`` and ``sweep`` commands. Grid points where the
geodesic length is too small for δ to be defined are dropped from the δ
series and counted in the report.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .dynamics import TimeSeries, sx_series
from .errors import DegeneratePathError
from .geometry import (
    GEODESIC_FLOOR,
    DeviationCurve,
    MetricKind,
    MetricSummary,
    ModelPath,
    QslReport,
    SeriesPath,
    crossover_times,
    delta_curve,
    qsl_time,
    qsl_time_series,
)
from .ingest import normalize, smooth
from .markovianity import assess, coherence_series, revival_period
from .presets import RunConfig, get_preset

logger = logging.getLogger(__name__)

SERIES_TOL = 1e-6

SUMMARY_COLUMNS = (
    "preset",
    "concentration_mM",
    "T1H_s",
    "T2C_s",
    "J_hz",
    "status",
    "verdict",
    "revivals",
    "revival_period_s",
    "ell_qfi",
    "L_qfi",
    "delta_qfi",
    "ell_wy",
    "L_wy",
    "delta_wy",
    "qsl_time_qfi_s",
    "qsl_time_wy_s",
    "crossovers",
    "last_crossover_s",
    "error",
)


@dataclass(frozen=True)
class Analysis:
    """Everything ``analyze`` emits.

    Attributes:
        report: Summary at the final grid time.
        curves: Running-endpoint δ curves per metric (NaN where undefined).
        delta_qfi: δ^QFI on the defined points.
        delta_wy: δ^WY on the defined points.
        delta_diff: δ^QFI − δ^WY on the defined points.
        sx: The ⟨σx⟩ path analysed.
        coherence: Normalized ℓ1 coherence of the path.
    """

    report: QslReport
    curves: dict[MetricKind, DeviationCurve]
    delta_qfi: TimeSeries
    delta_wy: TimeSeries
    delta_diff: TimeSeries
    sx: TimeSeries
    coherence: TimeSeries


def _summary(curve: DeviationCurve, qsl: float | None) -> MetricSummary:
    d = float(curve.delta[-1])
    return MetricSummary(
        path_length=float(curve.path_length[-1]),
        geodesic_length=float(curve.geodesic_length[-1]),
        delta=d if np.isfinite(d) else None,
        qsl_time=qsl,
        error=float(curve.error[-1]),
    )


def _assemble(
    curves: dict[MetricKind, DeviationCurve],
    sx: TimeSeries,
    cfg: RunConfig,
    qsl: dict[MetricKind, float | None],
    tol: float,
) -> Analysis:
    qfi, wy = curves[MetricKind.QFI], curves[MetricKind.WY]
    mask = qfi.defined & wy.defined
    if not np.any(mask):
        raise DegeneratePathError(
            "zero-length path: the state never moves away from its start"
        )
    d_qfi = qfi.as_series(mask)
    d_wy = wy.as_series(mask)
    diff = d_qfi.with_values(d_qfi.value - d_wy.value, "delta_diff")
    cross = crossover_times(d_qfi, d_wy, cfg.crossover_noise_floor)
    verdict = assess(sx, cfg.revival_threshold)
    undefined = int(mask.size - np.count_nonzero(mask))
    report = QslReport(
        tau=float(qfi.t[-1]),
        metrics={k: _summary(c, qsl[k]) for k, c in curves.items()},
        crossovers=cross,
        markovianity=verdict,
        quadrature_tol=tol,
        undefined_points=undefined,
        first_defined_time=float(d_qfi.t[0]),
    )
    report.validate()
    if undefined:
        logger.info("%d grid points with undefined relative deviation", undefined)
    return Analysis(report, curves, d_qfi, d_wy, diff, sx, coherence_series(sx))


def analyze_model(cfg: RunConfig) -> Analysis:
    """Analyse the closed-form model configured in ``cfg`` on its grid.

    Raises:
        ConfigError: If ``cfg`` carries no relaxation parameters.
        DegeneratePathError: If δ is undefined on the whole grid.
        ConvergenceError: If the quadrature fails.
    """
    p = cfg.require_params()
    b0 = cfg.bloch()
    times = cfg.times()
    q = cfg.quadrature
    model = ModelPath(p, b0)
    curves: dict[MetricKind, DeviationCurve] = {}
    qsl: dict[MetricKind, float | None] = {}
    for metric in MetricKind:
        logger.info("integrating %s path on %d points", metric.value, times.size)
        curves[metric] = delta_curve(
            model, metric, times, q.rel_tol, abs_tol=q.abs_tol
        )
        if curves[metric].geodesic_length[-1] > GEODESIC_FLOOR:
            qsl[metric] = qsl_time(
                p, b0, float(times[-1]), metric, q.rel_tol, abs_tol=q.abs_tol
            )
        else:
            qsl[metric] = None
    return _assemble(curves, sx_series(times, b0, p), cfg, qsl, q.rel_tol)


def prepare_series(
    series: TimeSeries,
    cfg: RunConfig,
    *,
    reference: float | None = None,
    smoothing: bool = True,
) -> TimeSeries:
    """Turn raw ⟨σx⟩ samples into the path that gets analysed.

    With ``reference`` the samples are normalized and rescaled to the
    configured ``x0``; smoothing uses ``cfg.smoothing``.
    """
    out = series
    if reference is not None:
        out = normalize(out, reference)
        out = out.with_values(out.value * cfg.initial_state.x0, "sx")
    if smoothing:
        out = smooth(out, cfg.smoothing.window, cfg.smoothing.degree)
    return out


def analyze_series(series: TimeSeries, cfg: RunConfig) -> Analysis:
    """Analyse a prepared ⟨σx⟩ series at the configured ``z0``.

    Raises:
        DataError: If the series is too short or leaves the Bloch ball.
        DegeneratePathError: If the path has zero length.
    """
    z0 = cfg.initial_state.z0
    path = SeriesPath(series, z0)
    curves: dict[MetricKind, DeviationCurve] = {}
    qsl: dict[MetricKind, float | None] = {}
    for metric in MetricKind:
        curves[metric] = delta_curve(path, metric)
        try:
            qsl[metric] = qsl_time_series(series, z0, metric)
        except DegeneratePathError:
            qsl[metric] = None
    return _assemble(curves, series, cfg, qsl, SERIES_TOL)


def summary_row(name: str, cfg: RunConfig) -> dict[str, Any]:
    """Analyse one preset for a sweep; failures become a ``failed`` row.

    Args:
        name: Preset name.
        cfg: Base configuration; the preset replaces its parameters.

    Returns:
        dict[str, Any]: One row keyed by :data:`SUMMARY_COLUMNS`.
    """
    row: dict[str, Any] = dict.fromkeys(SUMMARY_COLUMNS)
    row["preset"] = name
    try:
        preset = get_preset(name)
        row.update(
            preset=preset.name,
            concentration_mM=preset.concentration_mM,
            T1H_s=preset.T1H,
            T2C_s=preset.T2C,
            J_hz=preset.J,
        )
        result = analyze_model(replace(cfg, params=preset.params, preset=preset.name))
    except Exception as exc:
        logger.warning("preset %s failed: %s", name, exc)
        row.update(status="failed", error=str(exc))
        return row

    rep = result.report
    verdict = rep.markovianity
    qfi = rep.metrics[MetricKind.QFI]
    wy = rep.metrics[MetricKind.WY]
    row.update(
        status="ok",
        verdict=None if verdict is None else verdict.label,
        revivals=0 if verdict is None else len(verdict.revival_intervals),
        revival_period_s=None if verdict is None else revival_period(verdict),
        ell_qfi=qfi.path_length,
        L_qfi=qfi.geodesic_length,
        delta_qfi=qfi.delta,
        ell_wy=wy.path_length,
        L_wy=wy.geodesic_length,
        delta_wy=wy.delta,
        qsl_time_qfi_s=qfi.qsl_time,
        qsl_time_wy_s=wy.qsl_time,
        crossovers=len(rep.crossovers.times),
        last_crossover_s=rep.crossovers.times[-1] if rep.crossovers.times else None,
        error="",
    )
    return row
