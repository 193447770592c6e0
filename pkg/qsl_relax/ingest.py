"""Experimental-series pipeline: load, normalize, smooth and fit.

CSV input is UTF-8 with ``#`` comments, an optional ``t_s,value`` header and
rows in any order. Fits run Levenberg–Marquardt on log-transformed time
constants so they stay positive without explicit bounds.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import least_squares
from scipy.signal import savgol_filter
from scipy.stats import linregress

from .artifacts import SERIES_HEADER, atomic_write_text, dumps, format_series
from .core import RelaxationParams
from .dynamics import TimeSeries, xi
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    EmptySeriesError,
    FitError,
    SeriesParseError,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

MIN_FIT_POINTS = 8
XTOL = 1e-10
FTOL = 1e-12
MAX_NFEV = 4000
RESTART_JITTER = 0.2
UNIFORM_RTOL = 1e-9
PENALTY = 1e6


# loading and writing ----------------------------------------------------------


def load_series(path: str, fmt: str = "csv", label: str = "sx") -> TimeSeries:
    """Load a two-column series, sorting rows by time.

    Args:
        path: CSV file path.
        fmt: Input format; only ``"csv"`` is understood.
        label: Label for the returned series.

    Returns:
        TimeSeries: The samples in increasing time order.

    Raises:
        ConfigError: For an unknown format.
        DataError: If the file cannot be read or holds duplicate time stamps.
        SeriesParseError: For a malformed row (carries the line number).
        EmptySeriesError: If no data rows are present.
    """
    if fmt != "csv":
        raise ConfigError(f"unsupported series format {fmt!r}")
    times: list[float] = []
    values: list[float] = []
    seen_content = False
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, raw in enumerate(fh, start=1):
                text = raw.strip()
                if not text or text.startswith("#"):
                    continue
                row = [c.strip() for c in next(csv.reader([text]))]
                if not seen_content:
                    seen_content = True
                    if tuple(row) == SERIES_HEADER:
                        continue
                t, v = _parse_row(row, lineno)
                times.append(t)
                values.append(v)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not times:
        raise EmptySeriesError(f"{path}: no data rows")

    t_arr = np.asarray(times)
    v_arr = np.asarray(values)
    order = np.argsort(t_arr, kind="stable")
    t_arr, v_arr = t_arr[order], v_arr[order]
    dup = np.flatnonzero(np.diff(t_arr) == 0)
    if dup.size:
        raise DataError(f"{path}: duplicate time stamp {t_arr[dup[0]]!r}")
    logger.debug("loaded %d samples from %s", t_arr.size, path)
    return TimeSeries(t_arr, v_arr, label)


def _parse_row(row: Sequence[str], lineno: int) -> tuple[float, float]:
    if len(row) != 2:
        raise SeriesParseError(f"expected 2 columns, found {len(row)}", lineno)
    try:
        t, v = float(row[0]), float(row[1])
    except ValueError as exc:
        raise SeriesParseError(f"not a number: {exc}", lineno) from exc
    if not (math.isfinite(t) and math.isfinite(v)):
        raise SeriesParseError("non-finite entry", lineno)
    return t, v


def write_series(path: str, series: TimeSeries) -> None:
    """Write ``series`` in the input schema at 17 significant digits."""
    atomic_write_text(path, format_series(series))


# preprocessing ----------------------------------------------------------------


def normalize(series: TimeSeries, reference: float) -> TimeSeries:
    """Divide every sample by ``reference``.

    Raises:
        DomainError: If ``reference`` is zero or not finite.
    """
    if reference == 0 or not math.isfinite(reference):
        raise DomainError(
            f"normalization reference must be finite and non-zero, got {reference!r}"
        )
    return series.with_values(series.value / reference, f"{series.label}/norm")


def smooth(series: TimeSeries, window: int = 11, degree: int = 3) -> TimeSeries:
    """Local least-squares polynomial smoothing.

    Uniform grids use the Savitzky–Golay filter with polynomial fits on the
    edge windows; irregular grids fit each point's window directly. Both
    reproduce polynomials of degree ``<= degree`` exactly.

    Raises:
        DomainError: If ``window`` is not an odd integer ``>= 5``, ``degree`` is
            outside ``[2, 4]`` or ``>= window``, or ``window`` exceeds the series.
    """
    if int(window) != window or window < 5 or window % 2 == 0:
        raise DomainError(
            f"smoothing window must be an odd integer >= 5, got {window!r}"
        )
    if int(degree) != degree or not 2 <= degree <= 4:
        raise DomainError(f"smoothing degree must be in [2, 4], got {degree!r}")
    if degree >= window:
        raise DomainError("smoothing degree must be below the window length")
    if window > len(series):
        raise DomainError(
            f"window {window} longer than the series ({len(series)} samples)"
        )
    window, degree = int(window), int(degree)
    dt = np.diff(series.t)
    if dt.size == 0 or np.allclose(dt, dt[0], rtol=UNIFORM_RTOL, atol=0.0):
        out = savgol_filter(series.value, window, degree, mode="interp")
    else:
        out = _local_polyfit(series.t, series.value, window, degree)
    return series.with_values(out)


def _local_polyfit(
    t: FloatArray, v: FloatArray, window: int, degree: int
) -> FloatArray:
    n = t.size
    half = window // 2
    out = np.empty(n)
    for i in range(n):
        lo = min(max(i - half, 0), n - window)
        sl = slice(lo, lo + window)
        coef = np.polynomial.polynomial.polyfit(t[sl] - t[i], v[sl], degree)
        out[i] = coef[0]
    return out


# fitting ----------------------------------------------------------------------


@dataclass
class FitResult:
    """Outcome of a least-squares fit.

    Attributes:
        params: Fitted values by name (``T*`` in seconds, ``J`` in hertz,
            ``omega``/``omega_off`` in rad/s, amplitudes dimensionless).
        residual_rms: Root-mean-square residual.
        covariance: Covariance over ``fitted`` in the natural parameter units.
        fitted: Names of the free parameters, in covariance order.
        model: ``"expcos"`` or ``"xi"``.
        flags: Warnings such as a time constant running away.
        nfev: Model evaluations spent.
        converged: False when the optimizer stopped without meeting a tolerance.
    """

    params: dict[str, float]
    residual_rms: float
    covariance: FloatArray = field(repr=False)
    fitted: tuple[str, ...] = ()
    model: str = ""
    flags: tuple[str, ...] = ()
    nfev: int = 0
    converged: bool = True

    def stderr(self, name: str) -> float:
        """Return the one-sigma uncertainty of a fitted parameter."""
        i = self.fitted.index(name)
        return float(math.sqrt(max(self.covariance[i, i], 0.0)))

    def relaxation_params(self) -> RelaxationParams:
        """Return the fitted ``(T1H, T2C, J)`` of a ξ-model fit."""
        p = self.params
        return RelaxationParams(p["T1H"], p["T2C"], p["J"])

    def to_dict(self) -> dict[str, Any]:
        """Return the JSON mapping ``{params, residual_rms, covariance, ...}``."""
        return {
            "params": dict(self.params),
            "residual_rms": self.residual_rms,
            "covariance": np.asarray(self.covariance).tolist(),
            "fitted": list(self.fitted),
            "model": self.model,
            "flags": list(self.flags),
            "nfev": self.nfev,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        """Serialize as stable JSON."""
        return dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> FitResult:
        """Rebuild a result from :meth:`to_dict` output.

        Raises:
            DataError: If required keys are missing.
        """
        try:
            params = {str(k): float(v) for k, v in data["params"].items()}
            cov = np.asarray(data["covariance"], dtype=np.float64)
            rms = float(data["residual_rms"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid fit result: {exc}") from exc
        return cls(
            params=params,
            residual_rms=rms,
            covariance=cov.reshape(cov.shape[0], -1) if cov.size else np.zeros((0, 0)),
            fitted=tuple(data.get("fitted", params)),
            model=str(data.get("model", "")),
            flags=tuple(data.get("flags", ())),
            nfev=int(data.get("nfev", 0)),
            converged=bool(data.get("converged", True)),
        )

    @classmethod
    def from_json(cls, text: str) -> FitResult:
        """Parse :meth:`to_json` output."""
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid fit result JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass(frozen=True)
class _Param:
    name: str
    guess: float
    log: bool


def _least_squares(
    series: TimeSeries,
    layout: Sequence[_Param],
    model: Callable[[FloatArray, dict[str, float]], FloatArray],
    fixed: Mapping[str, float],
    *,
    kind: str,
    seed: int | None,
    restarts: int,
    max_nfev: int,
) -> FitResult:
    t = series.t
    y = series.value

    def unpack(theta: FloatArray) -> dict[str, float]:
        out = dict(fixed)
        for p, v in zip(layout, theta, strict=True):
            out[p.name] = float(math.exp(v)) if p.log else float(v)
        return out

    def residuals(theta: FloatArray) -> FloatArray:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                r = model(t, unpack(theta)) - y
        except (OverflowError, DomainError):
            # trial step left the physical region
            return np.full(y.size, PENALTY)
        return np.where(np.isfinite(r), r, PENALTY)

    theta0 = np.array([math.log(p.guess) if p.log else p.guess for p in layout])
    starts = [theta0]
    if restarts:
        if seed is None:
            raise ConfigError("fit restarts need an explicit seed")
        rng = np.random.default_rng(seed)
        for _ in range(int(restarts)):
            jitter = rng.normal(0.0, RESTART_JITTER, theta0.size)
            scale = np.array([1.0 if p.log else max(abs(p.guess), 1.0) for p in layout])
            starts.append(theta0 + jitter * scale)

    best: Any = None
    for start in starts:
        res = least_squares(
            residuals, start, method="lm", xtol=XTOL, ftol=FTOL, max_nfev=max_nfev
        )
        if best is None or res.cost < best.cost:
            best = res

    theta = np.asarray(best.x, dtype=np.float64)
    values = unpack(theta)
    n, k = t.size, theta.size
    ssr = float(np.sum(best.fun**2))
    jac = np.asarray(best.jac, dtype=np.float64)
    cov_theta = np.linalg.pinv(jac.T @ jac) * (ssr / max(n - k, 1))
    scale = np.array([values[p.name] if p.log else 1.0 for p in layout])
    cov = cov_theta * np.outer(scale, scale)

    flags = _collapse_flags(series, layout, values)
    for flag in flags:
        logger.warning("%s fit: %s", kind, flag)
    result = FitResult(
        params=values,
        residual_rms=float(math.sqrt(ssr / n)),
        covariance=cov,
        fitted=tuple(p.name for p in layout),
        model=kind,
        flags=flags,
        nfev=int(best.nfev),
        converged=bool(best.status > 0),
    )
    if best.status <= 0:
        raise FitError(f"{kind} fit did not converge: {best.message}", best=result)
    logger.info("%s fit converged after %d evaluations", kind, best.nfev)
    return result


def _collapse_flags(
    series: TimeSeries, layout: Sequence[_Param], values: Mapping[str, float]
) -> tuple[str, ...]:
    span = float(series.t[-1] - series.t[0])
    step = float(np.min(np.diff(series.t)))
    flags: list[str] = []
    for p in layout:
        if not p.log or not p.name.startswith("T"):
            continue
        v = values[p.name]
        if v > 100.0 * span:
            flags.append(f"{p.name} ran away to {v:.3g} s (data span {span:.3g} s)")
        elif v < step:
            flags.append(
                f"{p.name} collapsed to {v:.3g} s (below sampling step {step:.3g} s)"
            )
    return tuple(flags)


def _require_fit_data(series: TimeSeries) -> None:
    if len(series) < MIN_FIT_POINTS:
        raise DataError(
            f"need at least {MIN_FIT_POINTS} samples to fit, got {len(series)}"
        )


def _positive(name: str, value: float) -> float:
    if not math.isfinite(value) or value <= 0:
        raise DomainError(f"initial guess for {name} must be positive, got {value!r}")
    return float(value)


def fit_exp_cos(
    series: TimeSeries,
    initial_guess: Mapping[str, float],
    *,
    seed: int | None = None,
    restarts: int = 0,
    max_nfev: int = MAX_NFEV,
) -> FitResult:
    """Fit ``M0·e^{−t/T2C}·cos(ωt)``.

    Args:
        series: Data to fit (``>= 8`` samples).
        initial_guess: ``M0``, ``T2C`` (s) and ``omega`` (rad/s).
        seed: Seed for jittered restarts.
        restarts: Number of extra jittered starts; the lowest cost wins.
        max_nfev: Evaluation budget per start.

    Returns:
        FitResult: With ``omega`` reported as its absolute value.

    Raises:
        DataError: If the series is too short.
        DomainError: If the ``T2C`` guess is not positive.
        FitError: If the optimizer does not converge.
    """
    _require_fit_data(series)
    try:
        layout = [
            _Param("M0", float(initial_guess["M0"]), False),
            _Param("T2C", _positive("T2C", float(initial_guess["T2C"])), True),
            _Param("omega", float(initial_guess.get("omega", 0.0)), False),
        ]
    except KeyError as exc:
        raise ConfigError(f"missing initial guess {exc}") from exc

    def model(t: FloatArray, q: dict[str, float]) -> FloatArray:
        return q["M0"] * np.exp(-t / q["T2C"]) * np.cos(q["omega"] * t)

    res = _least_squares(
        series,
        layout,
        model,
        {},
        kind="expcos",
        seed=seed,
        restarts=restarts,
        max_nfev=max_nfev,
    )
    res.params["omega"] = abs(res.params["omega"])
    return res


def fit_xi_model(
    series: TimeSeries,
    guess: RelaxationParams,
    amplitude: float = 1.0,
    *,
    fix_j: bool = False,
    offset: bool = False,
    omega_off: float = 0.0,
    seed: int | None = None,
    restarts: int = 0,
    max_nfev: int = MAX_NFEV,
) -> FitResult:
    """Fit ``amplitude·ξ(t; T1H, T2C, J)`` to a coherence series.

    Args:
        series: Data to fit (``>= 8`` samples).
        guess: Starting relaxation constants; ``guess.J`` is kept when ``fix_j``.
        amplitude: Starting amplitude.
        fix_j: Freeze ``J`` at ``guess.J``.
        offset: Multiply the model by ``cos(ω_off·t)`` and fit ``omega_off``.
        omega_off: Starting frequency offset in rad/s.
        seed: Seed for jittered restarts.
        restarts: Number of extra jittered starts.
        max_nfev: Evaluation budget per start.

    Returns:
        FitResult: Parameters ``A``, ``T1H``, ``T2C``, ``J`` (and ``omega_off``).

    Raises:
        DataError: If the series is too short.
        FitError: If the optimizer does not converge.
    """
    _require_fit_data(series)
    layout = [
        _Param("A", float(amplitude), False),
        _Param("T1H", guess.T1H, True),
        _Param("T2C", guess.T2C, True),
    ]
    fixed: dict[str, float] = {}
    if fix_j:
        fixed["J"] = guess.J
    else:
        layout.append(_Param("J", guess.J, True))
    if offset:
        layout.append(_Param("omega_off", float(omega_off), False))
    else:
        fixed["omega_off"] = 0.0

    def model(t: FloatArray, q: dict[str, float]) -> FloatArray:
        p = RelaxationParams(q["T1H"], q["T2C"], q["J"])
        out = q["A"] * xi(t, p)
        if q["omega_off"]:
            out = out * np.cos(q["omega_off"] * t)
        return out

    res = _least_squares(
        series,
        layout,
        model,
        fixed,
        kind="xi",
        seed=seed,
        restarts=restarts,
        max_nfev=max_nfev,
    )
    if offset:
        res.params["omega_off"] = abs(res.params["omega_off"])
    return res


def t1_from_null(t_null: float) -> float:
    """Return ``T1 = t_null / ln 2`` from an inversion-recovery null time.

    Raises:
        DomainError: If ``t_null <= 0``.
    """
    if not math.isfinite(t_null) or t_null <= 0:
        raise DomainError(f"null time must be positive, got {t_null!r}")
    return t_null / math.log(2.0)


@dataclass(frozen=True)
class RelaxivityFit:
    """Straight line ``rate = slope·c + intercept`` over concentration.

    Attributes:
        slope: Relaxivity in 1/(s·mM).
        intercept: Rate at zero concentration in 1/s.
        r_squared: Coefficient of determination.
    """

    slope: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict[str, float]:
        """Return a JSON-ready mapping."""
        return {
            "slope_per_s_per_mM": self.slope,
            "intercept_per_s": self.intercept,
            "r_squared": self.r_squared,
        }


def fit_relaxivity(concentrations: ArrayLike, rates: ArrayLike) -> RelaxivityFit:
    """Ordinary least-squares line of relaxation rate against concentration.

    Raises:
        DataError: On length mismatch or non-finite input.
        DomainError: With fewer than two distinct concentrations.
    """
    c = np.asarray(concentrations, dtype=np.float64).reshape(-1)
    r = np.asarray(rates, dtype=np.float64).reshape(-1)
    if c.shape != r.shape:
        raise DataError(f"{c.size} concentrations but {r.size} rates")
    if not (np.all(np.isfinite(c)) and np.all(np.isfinite(r))):
        raise DataError("relaxivity input contains non-finite values")
    if np.unique(c).size < 2:
        raise DomainError("relaxivity fit needs at least two distinct concentrations")
    line = linregress(c, r)
    slope, intercept = float(line.slope), float(line.intercept)
    # constant rates sit exactly on a flat line
    r2 = 1.0 if np.ptp(r) == 0.0 else float(line.rvalue) ** 2
    return RelaxivityFit(slope, intercept, r2)


RATE_COLUMNS = ("concentration_mM", "rate_per_s")


def load_rates(path: str) -> tuple[FloatArray, FloatArray]:
    """Read ``concentration_mM,rate_per_s`` pairs for a relaxivity fit.

    Raises:
        DataError: If the file is unreadable or lacks the two columns.
        SeriesParseError: For a non-numeric cell, with its 1-based file line.
        EmptySeriesError: If there are no rows.
    """
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            raw = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    numbered = [
        (n, ln)
        for n, ln in enumerate(raw, start=1)
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    rows = list(zip((n for n, _ in numbered), csv.reader(ln for _, ln in numbered)))
    if not rows:
        raise DataError(f"{path}: header must name {', '.join(RATE_COLUMNS)}")
    header = [h.strip() for h in rows[0][1]]
    if not set(RATE_COLUMNS) <= set(header):
        raise DataError(f"{path}: header must name {', '.join(RATE_COLUMNS)}")
    ci, ri = header.index(RATE_COLUMNS[0]), header.index(RATE_COLUMNS[1])

    conc: list[float] = []
    rate: list[float] = []
    for n, cells in rows[1:]:
        try:
            conc.append(float(cells[ci].strip()))
            rate.append(float(cells[ri].strip()))
        except (ValueError, IndexError) as exc:
            raise SeriesParseError(f"not a number: {exc}", n) from exc
    if not conc:
        raise EmptySeriesError(f"{path}: no rate rows")
    return np.asarray(conc), np.asarray(rate)
