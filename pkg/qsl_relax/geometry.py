"""Path lengths, geodesic lengths and speed-limit tightness for the carbon qubit.

States are restricted to the x–z plane family ``ρ_t = (I + x_t σx + z0 σz)/2``.
The path length for metric ``f`` is

    ℓ^f(0, τ) = ½ ∫ √h^f(x_t) |dx_t/dt| dt,

bounded below by the geodesic length (Bures angle for QFI, Hellinger angle for
WY). The integrand has a ``1/√(t − t*)`` singularity wherever the state touches
the sphere surface, which the model quadrature removes with ``t = t* + u²``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import quad
from scipy.linalg import sqrtm
from scipy.optimize import brentq

from .core import NORM_TOL, BlochVector, ComplexMatrix, RelaxationParams
from .dynamics import TimeSeries, xi, xi_derivative, xi_with_derivative
from .errors import (
    BoundarySingularityError,
    ConvergenceError,
    DataError,
    DegeneratePathError,
    DegenerateStateError,
    DomainError,
)
from .markovianity import MarkovianityVerdict

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]

DEFAULT_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-13
GEODESIC_FLOOR = 1e-9
NOISE_FLOOR = 1e-4
SINGULAR_GAP = 0.01
KINK_POINTS_PER_PERIOD = 2000
QUAD_LIMIT = 200
CLAMP_TOL = 1e-12
DATA_CLIP_TOL = 1e-6
QSL_BRACKET_POINTS = 65


class MetricKind(str, Enum):
    """Contractive Riemannian metrics supported by the toolkit."""

    QFI = "QFI"
    WY = "WY"


@dataclass(frozen=True)
class ModelPath:
    """Trajectory of the closed-form model, ``x_t = ξ(t)·x0`` at fixed ``z0``."""

    params: RelaxationParams
    b0: BlochVector

    @property
    def z0(self) -> float:
        """Return the conserved ⟨σz⟩."""
        return self.b0.z

    def x(self, t: Any) -> Any:
        """Return ⟨σx⟩ at ``t``."""
        return xi(t, self.params) * self.b0.x

    def dx(self, t: Any) -> Any:
        """Return d⟨σx⟩/dt at ``t``."""
        return xi_derivative(t, self.params) * self.b0.x

    def state(self, t: float) -> tuple[float, float]:
        """Return ``(x_t, dx_t/dt)`` at a scalar time."""
        e, de = xi_with_derivative(t, self.params)
        return e * self.b0.x, de * self.b0.x


@dataclass(frozen=True)
class SeriesPath:
    """Sampled ⟨σx⟩ trajectory with its (fixed) ⟨σz⟩."""

    series: TimeSeries
    z0: float


Path = ModelPath | SeriesPath


def as_path(
    model: ModelPath | SeriesPath | TimeSeries | tuple[RelaxationParams, BlochVector],
    z0: float | None = None,
) -> Path:
    """Normalize the accepted model spellings into a ``ModelPath``/``SeriesPath``.

    Raises:
        DomainError: If a bare series is given without ``z0``.
    """
    if isinstance(model, ModelPath | SeriesPath):
        return model
    if isinstance(model, TimeSeries):
        if z0 is None:
            raise DomainError("a sampled series needs z0 to define the state path")
        return SeriesPath(model, float(z0))
    params, b0 = model
    return ModelPath(params, b0)


# metric factors ---------------------------------------------------------------


def _interior(x_t: float, z0: float) -> tuple[float, float]:
    r2 = x_t * x_t + z0 * z0
    if not r2 < 1.0:
        raise BoundarySingularityError(
            f"metric factor diverges on the sphere surface (x^2+z^2 = {r2!r})"
        )
    return r2, 1.0 - r2


def h_qfi(x_t: float, z0: float) -> float:
    """Quantum Fisher information factor ``(1 − z0²)/(1 − x_t² − z0²)``.

    Raises:
        BoundarySingularityError: If ``x_t² + z0² >= 1``.
    """
    _, gap = _interior(x_t, z0)
    return (1.0 - z0 * z0) / gap


def h_wy(x_t: float, z0: float) -> float:
    """Wigner–Yanase factor; equals :func:`h_qfi` when ``z0 = 0``.

    Raises:
        BoundarySingularityError: If ``x_t² + z0² >= 1``.
        DegenerateStateError: If ``x_t = z0 = 0``.
    """
    r2, gap = _interior(x_t, z0)
    if r2 == 0.0:
        raise DegenerateStateError("Wigner-Yanase factor undefined at the origin")
    # 1 − √gap = r²/(1 + √gap) keeps the second term accurate for small r²
    return x_t * x_t / (r2 * gap) + 2.0 * z0 * z0 / (r2 * (1.0 + math.sqrt(gap)))


def _sqrt_h(x_t: float, z0: float, metric: MetricKind) -> float:
    """Return √h, or ``inf`` on/outside the surface (integrand helper)."""
    r2 = x_t * x_t + z0 * z0
    gap = 1.0 - r2
    if gap <= 0.0:
        return math.inf
    if metric is MetricKind.QFI or r2 == 0.0:
        return math.sqrt((1.0 - z0 * z0) / gap)
    return math.sqrt(
        x_t * x_t / (r2 * gap) + 2.0 * z0 * z0 / (r2 * (1.0 + math.sqrt(gap)))
    )


def speed(t: float, model: ModelPath, metric: MetricKind) -> float:
    """Instantaneous speed ``½ √h^f |dx_t/dt|`` of the model path.

    States within ``NORM_TOL`` of the sphere count as surface points, where the
    speed is ``inf`` unless the path is at rest.
    """
    x, dx = model.state(t)
    if 1.0 - x * x - model.z0 * model.z0 <= NORM_TOL:
        s = math.inf
    else:
        s = _sqrt_h(x, model.z0, metric)
    v = abs(dx)
    if math.isinf(s):
        return 0.0 if v == 0.0 else math.inf
    return 0.5 * s * v


# overlaps and geodesics -------------------------------------------------------


def _gap_checked(x: float, z0: float) -> float:
    gap = 1.0 - x * x - z0 * z0
    if not math.isfinite(gap) or gap < -NORM_TOL:
        raise DomainError(f"non-physical state x={x!r}, z0={z0!r}")
    return max(gap, 0.0)


def _clamp_unit(v: float, what: str) -> float:
    if v > 1.0 + CLAMP_TOL or v < -1.0 - CLAMP_TOL:
        raise DomainError(f"{what} {v!r} outside [-1, 1]")
    return min(max(v, -1.0), 1.0)


def fidelity(x0: float, xt: float, z0: float) -> float:
    """Uhlmann fidelity between two x–z-plane states sharing ``z0``.

    ``F = ½[1 + x0·xt + z0² + √(1−x0²−z0²)·√(1−xt²−z0²)]``.

    Raises:
        DomainError: If either state is non-physical.
    """
    g0 = _gap_checked(x0, z0)
    gt = _gap_checked(xt, z0)
    f = 0.5 * (1.0 + x0 * xt + z0 * z0 + math.sqrt(g0 * gt))
    return min(max(_clamp_unit(f, "fidelity"), 0.0), 1.0)


def affinity(x0: float, xt: float, z0: float) -> float:
    """Quantum affinity ``tr(√ρ0 √ρt)`` between two x–z-plane states.

    Raises:
        DomainError: If either state is non-physical.
    """
    g0 = _gap_checked(x0, z0)
    gt = _gap_checked(xt, z0)
    num = x0 * xt + z0 * z0 + (1.0 + math.sqrt(g0)) * (1.0 + math.sqrt(gt))
    den = 1.0
    for x in (x0, xt):
        r = min(math.sqrt(x * x + z0 * z0), 1.0)
        den *= math.sqrt(1.0 + r) + math.sqrt(1.0 - r)
    a = num / den
    return min(max(_clamp_unit(a, "affinity"), 0.0), 1.0)


def _one_minus_fidelity(x0: float, xt: float, z0: float) -> float:
    s2 = 1.0 - z0 * z0
    p = s2 - x0 * xt
    q = math.sqrt(_gap_checked(x0, z0) * _gap_checked(xt, z0))
    if p + q <= 0.0:
        return 1.0 - fidelity(x0, xt, z0)
    return 0.5 * s2 * (x0 - xt) ** 2 / (p + q)


def _one_minus_affinity(x0: float, xt: float, z0: float) -> float:
    def _split(x: float) -> tuple[float, float, float, float]:
        r = min(math.hypot(x, z0), 1.0)
        plus = math.sqrt(1.0 + r) + math.sqrt(1.0 - r)
        minus = math.sqrt(1.0 + r) - math.sqrt(1.0 - r)
        return plus, minus, (x / r if r else 0.0), (z0 / r if r else 0.0)

    p0, m0, ux0, uz0 = _split(x0)
    pt, mt, uxt, uzt = _split(xt)
    one_minus_cos = 0.5 * ((ux0 - uxt) ** 2 + (uz0 - uzt) ** 2)
    return 0.25 * (
        0.5 * (p0 - pt) ** 2 + 0.5 * (m0 - mt) ** 2 + m0 * mt * one_minus_cos
    )


def geodesic_length(x0: float, xt: float, z0: float, metric: MetricKind) -> float:
    """Geodesic length between ``ρ0`` and ``ρt``.

    QFI gives the Bures angle ``arccos √F``; WY gives the Hellinger angle
    ``arccos A``. Small angles go through ``arcsin`` of a cancellation-free
    ``1 − F`` (``1 − A``) so that short paths keep their relative accuracy.

    Raises:
        DomainError: If either state is non-physical.
    """
    if metric is MetricKind.QFI:
        c = math.sqrt(fidelity(x0, xt, z0))
        if c < math.sqrt(0.5):
            return math.acos(c)
        return math.asin(math.sqrt(max(_one_minus_fidelity(x0, xt, z0), 0.0)))
    c = affinity(x0, xt, z0)
    if c < math.sqrt(0.5):
        return math.acos(c)
    om = max(_one_minus_affinity(x0, xt, z0), 0.0)
    return math.asin(min(math.sqrt(om * (2.0 - om)), 1.0))


def relative_deviation(ell: float, L: float, floor: float = GEODESIC_FLOOR) -> float:
    """Return ``δ = (ℓ − L)/L``; zero when the path is a geodesic.

    Raises:
        DegeneratePathError: If ``L <= floor``.
    """
    if not L > floor:
        raise DegeneratePathError(
            f"geodesic length {L!r} below {floor:g}; relative deviation undefined"
        )
    return (ell - L) / L


def fidelity_matrix(rho: ComplexMatrix, sigma: ComplexMatrix) -> float:
    """Return ``(tr √(√ρ σ √ρ))²`` by matrix square roots."""
    root = sqrtm(rho)
    return float(np.real(np.trace(sqrtm(root @ sigma @ root))) ** 2)


def affinity_matrix(rho: ComplexMatrix, sigma: ComplexMatrix) -> float:
    """Return ``tr(√ρ √σ)`` by matrix square roots."""
    return float(np.real(np.trace(sqrtm(rho) @ sqrtm(sigma))))


# quadrature -------------------------------------------------------------------


def _kinks(model: ModelPath, t0: float, t1: float) -> list[float]:
    """Zeros of dx/dt in ``(t0, t1)``, bracketed on a grid then refined."""
    if model.b0.x == 0.0:
        return []
    n = max(16, math.ceil(KINK_POINTS_PER_PERIOD * model.params.J * (t1 - t0)))
    grid = np.linspace(t0, t1, n + 1)
    d = np.asarray(xi_derivative(grid, model.params))
    roots: list[float] = []
    for i in range(n):
        a, b = d[i], d[i + 1]
        if a == 0.0 and i > 0:
            roots.append(float(grid[i]))
        elif a * b < 0.0:
            roots.append(
                float(
                    brentq(
                        lambda s: float(xi_derivative(s, model.params)),
                        grid[i],
                        grid[i + 1],
                        xtol=1e-15,
                    )
                )
            )
    return roots


def _quad(
    g: Callable[[float], float], lo: float, hi: float, tol: float, abs_tol: float
) -> tuple[float, float]:
    res: Any = quad(
        g, lo, hi, epsabs=abs_tol, epsrel=tol, limit=QUAD_LIMIT, full_output=1
    )
    value, err = float(res[0]), float(res[1])
    if len(res) == 4:
        budget = 1e3 * max(abs_tol, tol * abs(value))
        if err > budget:
            raise ConvergenceError(
                f"path-length quadrature on [{lo:.6g}, {hi:.6g}] missed tolerance: "
                f"{res[3]} (error {err:.3e})"
            )
        logger.debug("quadrature accepted with warning: %s", res[3])
    return value, err


def _piece(
    model: ModelPath,
    metric: MetricKind,
    a: float,
    b: float,
    tol: float,
    abs_tol: float,
) -> tuple[float, float]:
    """Integrate the speed over ``[a, b]``, which contains no kink."""
    if b <= a:
        return 0.0, 0.0
    z0 = model.z0

    def f(t: float) -> float:
        x, dx = model.state(t)
        s = _sqrt_h(x, z0, metric)
        if math.isinf(s):
            return 0.0
        return 0.5 * s * abs(dx)

    def gap(t: float) -> float:
        x = float(model.x(t))
        return 1.0 - x * x - z0 * z0

    near_a = gap(a) < SINGULAR_GAP
    near_b = gap(b) < SINGULAR_GAP
    if near_a and near_b:
        m = 0.5 * (a + b)
        left = _piece_from(f, a, m - a, tol, abs_tol, +1)
        right = _piece_from(f, b, b - m, tol, abs_tol, -1)
        return left[0] + right[0], left[1] + right[1]
    if near_a:
        return _piece_from(f, a, b - a, tol, abs_tol, +1)
    if near_b:
        return _piece_from(f, b, b - a, tol, abs_tol, -1)
    return _quad(f, a, b, tol, abs_tol)


def _piece_from(
    f: Callable[[float], float],
    origin: float,
    width: float,
    tol: float,
    abs_tol: float,
    direction: int,
) -> tuple[float, float]:
    """Integrate ``f`` away from a near-singular ``origin`` using t = origin ± u²."""
    return _quad(
        lambda u: f(origin + direction * u * u) * 2.0 * u,
        0.0,
        math.sqrt(width),
        tol,
        abs_tol,
    )


def _model_curve(
    model: ModelPath,
    metric: MetricKind,
    times: FloatArray,
    tol: float,
    abs_tol: float,
) -> tuple[FloatArray, FloatArray]:
    t0, t1 = float(times[0]), float(times[-1])
    ell = np.zeros(times.size)
    err = np.zeros(times.size)
    if t1 == t0 or model.b0.x == 0.0:
        return ell, err
    kinks = _kinks(model, t0, t1)
    breaks = np.union1d(times, np.asarray(kinks, dtype=np.float64))
    logger.debug("path length: %d pieces, %d kinks", breaks.size - 1, len(kinks))
    total = 0.0
    total_err = 0.0
    j = 1
    for a, b in zip(breaks[:-1], breaks[1:], strict=True):
        v, e = _piece(model, metric, float(a), float(b), tol, abs_tol)
        total += v
        total_err += e
        while j < times.size and times[j] <= b:
            ell[j] = total
            err[j] = total_err
            j += 1
    return ell, err


def _clip_to_ball(x: FloatArray, z0: float) -> FloatArray:
    lim = math.sqrt(max(1.0 - z0 * z0, 0.0))
    return np.clip(x, -lim, lim)


def _series_speed(
    path: SeriesPath, metric: MetricKind
) -> tuple[FloatArray, FloatArray]:
    s = path.series
    s.require_length(2)
    x = s.value
    r2 = x * x + path.z0 * path.z0
    if np.any(r2 > 1.0 + DATA_CLIP_TOL):
        raise DataError(
            f"series '{s.label}' leaves the Bloch ball (max x^2+z0^2 = {r2.max():.6g})"
        )
    x = _clip_to_ball(x, path.z0)
    dx = np.gradient(x, s.t, edge_order=1)
    root = np.array([_sqrt_h(float(v), path.z0, metric) for v in x])
    with np.errstate(invalid="ignore"):
        f = np.where(np.isinf(root) & (dx == 0.0), 0.0, 0.5 * root * np.abs(dx))
    return x, f


def _series_curve(path: SeriesPath, metric: MetricKind) -> FloatArray:
    """Cumulative trapezoid; segments touching the surface use the midpoint rule."""
    t = path.series.t
    x, f = _series_speed(path, metric)
    ell = np.zeros(t.size)
    for i in range(t.size - 1):
        h = t[i + 1] - t[i]
        if np.isfinite(f[i]) and np.isfinite(f[i + 1]):
            seg = 0.5 * h * (f[i] + f[i + 1])
        else:
            xm = 0.5 * (x[i] + x[i + 1])
            slope = abs(x[i + 1] - x[i]) / h
            root = _sqrt_h(float(xm), path.z0, metric)
            seg = 0.0 if slope == 0.0 else 0.5 * root * slope * h
            if not math.isfinite(seg):
                raise DataError("series path touches the Bloch-sphere surface twice")
        ell[i + 1] = ell[i] + seg
    return ell


def path_length_curve(
    model: ModelPath | SeriesPath | TimeSeries | tuple[RelaxationParams, BlochVector],
    metric: MetricKind,
    times: Any = None,
    tol: float = DEFAULT_TOL,
    *,
    z0: float | None = None,
    abs_tol: float = DEFAULT_ABS_TOL,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    """Running-endpoint path length ``ℓ(times[0], τ)`` for every ``τ`` in ``times``.

    Args:
        model: Model path (params and initial state) or sampled series.
        metric: Metric to integrate.
        times: Increasing grid; ignored for series input, whose samples are used.
        tol: Relative quadrature tolerance per piece.
        z0: ⟨σz⟩ for a bare series.
        abs_tol: Absolute quadrature tolerance per piece.

    Returns:
        tuple[FloatArray, FloatArray, FloatArray]: grid, cumulative ℓ, and the
        accumulated quadrature error estimate (zeros for series input).
    """
    path = as_path(model, z0)
    if isinstance(path, SeriesPath):
        ell = _series_curve(path, metric)
        return np.array(path.series.t), ell, np.zeros_like(ell)
    grid = np.asarray(times, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0) or grid[0] < 0:
        raise DataError("time grid must be non-empty, non-negative and increasing")
    ell, err = _model_curve(path, metric, grid, tol, abs_tol)
    return grid, ell, err


def path_length(
    model: ModelPath | SeriesPath | TimeSeries | tuple[RelaxationParams, BlochVector],
    metric: MetricKind,
    t0: float,
    t1: float,
    tol: float = DEFAULT_TOL,
    *,
    z0: float | None = None,
    abs_tol: float = DEFAULT_ABS_TOL,
    full_output: bool = False,
) -> float | tuple[float, float]:
    """Length of the state path between ``t0`` and ``t1`` for ``metric``.

    The model branch integrates adaptively, piecewise between zeros of
    dx/dt, substituting ``t = t* + u²`` at pieces that start or end within
    ``1 − x² − z0² < 0.01`` of the surface. The series branch differentiates
    the samples (central differences, one-sided at the ends) and applies the
    trapezoid rule on the samples inside ``[t0, t1]``.

    Args:
        model: ``(RelaxationParams, BlochVector)``, ``ModelPath``, ``SeriesPath``
            or a ``TimeSeries`` of ⟨σx⟩ (then ``z0`` is required).
        metric: Metric to integrate.
        t0: Start time in seconds.
        t1: End time in seconds, ``t1 > t0``.
        tol: Relative tolerance.
        z0: ⟨σz⟩ for a bare series.
        abs_tol: Absolute tolerance per piece.
        full_output: Also return the accumulated error estimate.

    Returns:
        float | tuple[float, float]: ℓ, or ``(ℓ, error)`` with ``full_output``.

    Raises:
        DomainError: If ``t0 >= t1``.
        DataError: If the series is too short or does not cover ``[t0, t1]``.
        ConvergenceError: If a piece misses its tolerance.
    """
    if not t0 < t1:
        raise DomainError(f"need t0 < t1, got [{t0!r}, {t1!r}]")
    path = as_path(model, z0)
    if isinstance(path, ModelPath):
        if t0 < 0:
            raise DomainError("path must start at t >= 0")
        _, ell, err = path_length_curve(path, metric, [t0, t1], tol, abs_tol=abs_tol)
        value, error = float(ell[-1]), float(err[-1])
    else:
        value, error = _series_length(path, metric, t0, t1), 0.0
    return (value, error) if full_output else value


def _series_length(path: SeriesPath, metric: MetricKind, t0: float, t1: float) -> float:
    t = path.series.t
    if t0 < t[0] - 1e-15 or t1 > t[-1] + 1e-15:
        raise DataError(
            f"series covers [{t[0]:.6g}, {t[-1]:.6g}] s, not [{t0:.6g}, {t1:.6g}] s"
        )
    _, ell, _ = path_length_curve(path, metric)
    return float(np.interp(t1, t, ell) - np.interp(t0, t, ell))


# deviations, QSL time, crossovers ---------------------------------------------


@dataclass(frozen=True, eq=False)
class DeviationCurve:
    """Running-endpoint path length, geodesic length and δ on a grid.

    ``delta`` is NaN wherever the geodesic length is at or below the floor.
    """

    metric: MetricKind
    t: FloatArray = field(repr=False)
    path_length: FloatArray = field(repr=False)
    geodesic_length: FloatArray = field(repr=False)
    delta: FloatArray = field(repr=False)
    error: FloatArray = field(repr=False)

    @property
    def defined(self) -> NDArray[np.bool_]:
        """Mask of grid points where δ is defined."""
        return np.isfinite(self.delta)

    def as_series(self, mask: NDArray[np.bool_] | None = None) -> TimeSeries:
        """Return δ on the defined (or given) points as a ``TimeSeries``."""
        m = self.defined if mask is None else mask
        if not np.any(m):
            raise DegeneratePathError(
                f"relative deviation undefined everywhere ({self.metric.value})"
            )
        label = f"delta_{self.metric.value.lower()}"
        return TimeSeries(self.t[m], self.delta[m], label)


def delta_curve(
    model: ModelPath | SeriesPath | TimeSeries | tuple[RelaxationParams, BlochVector],
    metric: MetricKind,
    times: Any = None,
    tol: float = DEFAULT_TOL,
    *,
    z0: float | None = None,
    abs_tol: float = DEFAULT_ABS_TOL,
    floor: float = GEODESIC_FLOOR,
) -> DeviationCurve:
    """Compute ℓ, L and δ with the running endpoint ``ρ_τ`` for every grid time."""
    path = as_path(model, z0)
    grid, ell, err = path_length_curve(path, metric, times, tol, abs_tol=abs_tol)
    if isinstance(path, ModelPath):
        xs = np.asarray(path.x(grid), dtype=np.float64).reshape(-1)
    else:
        xs = _clip_to_ball(path.series.value, path.z0)
    x0 = float(xs[0])
    geo = np.array([geodesic_length(x0, float(x), path.z0, metric) for x in xs])
    delta = np.full(grid.size, np.nan)
    ok = geo > floor
    delta[ok] = (ell[ok] - geo[ok]) / geo[ok]
    return DeviationCurve(metric, grid, ell, geo, delta, err)


def qsl_time(
    p: RelaxationParams,
    b0: BlochVector,
    tau: float,
    metric: MetricKind,
    tol: float = DEFAULT_TOL,
    *,
    abs_tol: float = DEFAULT_ABS_TOL,
) -> float:
    """Smallest ``t* ∈ (0, τ]`` with ``ℓ(0, t*) >= L(ρ0, ρτ)``.

    The monotone running path length is tabulated on a coarse grid to bracket
    the crossing, which is then refined by root search. Equals ``τ`` when the
    evolution is a geodesic.

    Raises:
        DomainError: If ``tau <= 0``.
        DegeneratePathError: If ``L(ρ0, ρτ) <= 1e-9``.
    """
    if not tau > 0:
        raise DomainError(f"tau must be positive, got {tau!r}")
    model = ModelPath(p, b0)
    target = geodesic_length(b0.x, float(model.x(tau)), b0.z, metric)
    if not target > GEODESIC_FLOOR:
        raise DegeneratePathError(
            f"geodesic length {target!r} too small for a QSL time"
        )

    grid = np.linspace(0.0, tau, QSL_BRACKET_POINTS)
    _, ell, _ = path_length_curve(model, metric, grid, tol, abs_tol=abs_tol)
    if ell[-1] <= target:
        return float(tau)
    i = int(np.argmax(ell >= target))
    a = float(grid[i - 1])

    def excess(t: float) -> float:
        if t <= a:
            return float(ell[i - 1]) - target
        extra = path_length(model, metric, a, t, tol, abs_tol=abs_tol)
        return float(ell[i - 1]) + float(extra) - target

    b = float(grid[i])
    if excess(b) <= 0.0:
        return b
    return float(brentq(excess, a, b, xtol=1e-12 * tau, rtol=1e-12))


def qsl_time_series(series: TimeSeries, z0: float, metric: MetricKind) -> float:
    """QSL time of a sampled path, interpolated inside the crossing interval.

    Raises:
        DegeneratePathError: If the geodesic to the last sample vanishes.
    """
    path = SeriesPath(series, z0)
    d = delta_curve(path, metric)
    target = float(d.geodesic_length[-1])
    if not target > GEODESIC_FLOOR:
        raise DegeneratePathError(
            f"geodesic length {target!r} too small for a QSL time"
        )
    ell = d.path_length
    idx = int(np.argmax(ell >= target))
    if ell[idx] < target or idx == 0:
        return float(series.t[-1]) if ell[idx] < target else float(series.t[0])
    a, b = ell[idx - 1], ell[idx]
    frac = (target - a) / (b - a) if b > a else 1.0
    return float(series.t[idx - 1] + frac * (series.t[idx] - series.t[idx - 1]))


@dataclass(frozen=True)
class CrossoverResult:
    """Zero crossings of ``δ^QFI − δ^WY`` and which metric is tighter in between.

    Attributes:
        times: Crossing times in seconds.
        timeline: ``(start, end, metric)`` intervals; WY when the difference
            is positive, QFI when negative.
    """

    times: tuple[float, ...]
    timeline: tuple[tuple[float, float, MetricKind], ...]


def crossover_times(
    delta_qfi: TimeSeries,
    delta_wy: TimeSeries,
    noise_floor: float = NOISE_FLOOR,
) -> CrossoverResult:
    """Locate sign changes of ``d = δ^QFI − δ^WY`` by linear interpolation.

    Samples with ``|d| < noise_floor`` never decide a sign; a crossing is
    reported between consecutive significant samples of opposite sign, at the
    first raw sign change between them.

    Raises:
        DataError: If the two series are not on the same grid.
    """
    if len(delta_qfi) != len(delta_wy) or not np.allclose(
        delta_qfi.t, delta_wy.t, rtol=1e-12, atol=0.0
    ):
        raise DataError("delta series must share the same time grid")
    t = delta_qfi.t
    d = delta_qfi.value - delta_wy.value
    sig = np.flatnonzero(np.abs(d) >= noise_floor)
    if sig.size == 0:
        return CrossoverResult((), ())
    crossings: list[float] = []
    prev = int(sig[0])
    for j in sig[1:]:
        j = int(j)
        if np.sign(d[j]) != np.sign(d[prev]):
            k = prev + 1
            while k < j and np.sign(d[k]) == np.sign(d[prev]):
                k += 1
            lo, hi = d[k - 1], d[k]
            frac = lo / (lo - hi) if lo != hi else 0.0
            crossings.append(float(t[k - 1] + frac * (t[k] - t[k - 1])))
        prev = j
    edges = [float(t[0]), *crossings, float(t[-1])]
    label = MetricKind.WY if d[sig[0]] > 0 else MetricKind.QFI
    timeline: list[tuple[float, float, MetricKind]] = []
    for a, b in zip(edges[:-1], edges[1:], strict=True):
        timeline.append((a, b, label))
        label = MetricKind.QFI if label is MetricKind.WY else MetricKind.WY
    return CrossoverResult(tuple(crossings), tuple(timeline))


# report -----------------------------------------------------------------------


@dataclass(frozen=True)
class MetricSummary:
    """Path length, geodesic length, δ and QSL time of one metric at τ."""

    path_length: float
    geodesic_length: float
    delta: float | None
    qsl_time: float | None = None
    error: float = 0.0


@dataclass(frozen=True)
class QslReport:
    """Per-metric speed-limit summary with crossovers and a Markovianity verdict."""

    tau: float
    metrics: dict[MetricKind, MetricSummary]
    crossovers: CrossoverResult
    markovianity: MarkovianityVerdict | None = None
    quadrature_tol: float = DEFAULT_TOL
    undefined_points: int = 0
    first_defined_time: float | None = None

    def validate(self) -> None:
        """Check ``ℓ >= L − tol`` and ``δ = (ℓ − L)/L`` for each metric.

        Raises:
            DataError: On an inconsistent report.
        """
        for kind, m in self.metrics.items():
            slack = 10.0 * self.quadrature_tol * max(1.0, m.path_length) + m.error
            if m.path_length < m.geodesic_length - slack:
                raise DataError(
                    f"{kind.value}: path length {m.path_length!r} below geodesic "
                    f"{m.geodesic_length!r}"
                )
            if m.delta is not None:
                expect = (m.path_length - m.geodesic_length) / m.geodesic_length
                if abs(expect - m.delta) > 1e-12 * max(1.0, abs(expect)):
                    raise DataError(f"{kind.value}: delta inconsistent with its fields")

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready mapping."""
        return {
            "tau_s": self.tau,
            "metrics": {
                k.value: {
                    "path_length": m.path_length,
                    "geodesic_length": m.geodesic_length,
                    "delta": m.delta,
                    "qsl_time_s": m.qsl_time,
                    "quadrature_error": m.error,
                }
                for k, m in sorted(self.metrics.items(), key=lambda kv: kv[0].value)
            },
            "crossover_times_s": list(self.crossovers.times),
            "tighter_metric_timeline": [
                {"start_s": a, "end_s": b, "metric": k.value}
                for a, b, k in self.crossovers.timeline
            ],
            "markovianity": (
                None if self.markovianity is None else self.markovianity.to_dict()
            ),
            "quadrature_tol": self.quadrature_tol,
            "undefined_points": self.undefined_points,
            "first_defined_time_s": self.first_defined_time,
        }
