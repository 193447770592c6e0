"""Reduced carbon dynamics: the closed-form envelope ξ(t) and a trotter oracle.

The envelope is

    ξ(t) = e^{−t/2T2C} e^{−t/4T1H} [ (t/4T1H) sinc(a) + cos(a) ],
    a(t) = (t/4T1H) √(16π²J²T1H² − 1),

continued to sinh/cosh when the square root is imaginary and to its ``a → 0``
limit within ``BRANCH_TOL`` of the critical point. The carbon transverse
magnetization follows ``⟨σx⟩_t = ξ(t) ⟨σx⟩_0``; ``⟨σz⟩`` stays frozen.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal, overload

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .core import (
    IDENTITY2,
    BlochVector,
    KrausSet,
    RelaxationParams,
    bit_phase_flip_kraus,
    bloch_to_density,
    check_density,
    compose_kraus,
    coupling_unitary,
    partial_trace_hydrogen,
    phase_damping_kraus,
)
from .errors import DataError, DomainError, StepSizeError, UnsupportedStateError

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Branch = Literal["oscillatory", "critical", "overdamped"]

BRANCH_TOL = 1e-12
STEP_WARN_FACTOR = 0.01
STEP_MAX_FACTOR = 0.1
PLANE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Sampled scalar observable on a strictly increasing time grid.

    Attributes:
        t: Sample times in seconds, ``t[0] >= 0``.
        value: Dimensionless samples, same length as ``t``.
        label: Short tag such as ``"sx"`` or ``"xi"``.
    """

    t: FloatArray = field(repr=False)
    value: FloatArray = field(repr=False)
    label: str = "sx"

    def __post_init__(self) -> None:
        """Validate shapes and monotonic time stamps, then freeze the arrays."""
        t = np.array(self.t, dtype=np.float64, copy=True)
        v = np.array(self.value, dtype=np.float64, copy=True)
        if t.ndim != 1 or v.ndim != 1:
            raise DataError("time series must be one-dimensional")
        if t.shape != v.shape:
            raise DataError(
                f"time and value lengths differ ({t.size} vs {v.size})"
            )
        if t.size == 0:
            raise DataError("time series is empty")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise DataError("time series contains non-finite entries")
        if t[0] < 0:
            raise DataError(f"time series starts before t = 0 ({t[0]!r})")
        if np.any(np.diff(t) <= 0):
            raise DataError("time stamps must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "value", v)

    def __len__(self) -> int:
        """Return the number of samples."""
        return int(self.t.size)

    def with_values(self, value: ArrayLike, label: str | None = None) -> TimeSeries:
        """Return a series on the same grid with new samples."""
        values = np.asarray(value, dtype=np.float64)
        return TimeSeries(self.t, values, label or self.label)

    def require_length(self, n: int) -> None:
        """Raise ``DataError`` unless the series has at least ``n`` samples."""
        if len(self) < n:
            raise DataError(
                f"series '{self.label}' has {len(self)} samples, need at least {n}"
            )


def branch(p: RelaxationParams) -> tuple[Branch, float]:
    """Classify the envelope and return its angular frequency.

    Returns:
        tuple[Branch, float]: The branch name and ``|√(16π²J²T1H² − 1)| / 4T1H``
        (zero on the critical branch).
    """
    disc = (4.0 * np.pi * p.J * p.T1H) ** 2 - 1.0
    if abs(disc) <= BRANCH_TOL:
        return "critical", 0.0
    w = float(np.sqrt(abs(disc)) / (4.0 * p.T1H))
    return ("oscillatory" if disc > 0 else "overdamped"), w


def markovian_regime(p: RelaxationParams) -> bool:
    """Return True when 4πJ·T1H < 1, where ξ has no oscillation left."""
    return branch(p)[0] == "overdamped"


def _sinhc(z: FloatArray) -> FloatArray:
    safe = np.where(z == 0.0, 1.0, z)
    return np.where(z == 0.0, 1.0, np.sinh(safe) / safe)


def _bracket(t: FloatArray, p: RelaxationParams) -> tuple[FloatArray, FloatArray]:
    """Return ``e^{−kt} B(t)`` and ``e^{−kt} B′(t)`` with ``k = 1/4T1H``."""
    k = 0.25 / p.T1H
    kind, w = branch(p)
    decay = np.exp(-k * t)
    if kind == "critical":
        return decay * (1.0 + k * t), decay * k
    wt = w * t
    if kind == "oscillatory":
        sinc = np.sinc(wt / np.pi)
        cos = np.cos(wt)
        return decay * (k * t * sinc + cos), decay * (k * cos - w * w * t * sinc)
    # cosh/sinh overflow long before e^{−kt} underflows; switch to exponentials
    z = np.minimum(wt, 1.0)
    shc = _sinhc(z)
    ch = np.cosh(z)
    near_b = decay * (k * t * shc + ch)
    near_bp = decay * (k * ch + w * w * t * shc)
    slow = np.exp(-(k - w) * t)
    fast = np.exp(-(k + w) * t)
    far_b = 0.5 * ((1.0 + k / w) * slow + (1.0 - k / w) * fast)
    far_bp = 0.5 * ((k + w) * slow + (k - w) * fast)
    small = wt <= 1.0
    return np.where(small, near_b, far_b), np.where(small, near_bp, far_bp)


def _as_times(t: ArrayLike) -> FloatArray:
    arr = np.asarray(t, dtype=np.float64)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise DomainError("time must be finite and non-negative")
    return arr


@overload
def xi(t: float, p: RelaxationParams) -> float: ...
@overload
def xi(t: FloatArray, p: RelaxationParams) -> FloatArray: ...
def xi(t: float | FloatArray, p: RelaxationParams) -> float | FloatArray:
    """Evaluate the coherence envelope ξ(t).

    Args:
        t: Time in seconds (scalar or array), ``t >= 0``.
        p: Relaxation constants.

    Returns:
        float | FloatArray: ξ(t), with ``ξ(0) = 1`` and ``|ξ| <= 1``.

    Raises:
        DomainError: If any ``t < 0``.
    """
    ts = _as_times(t)
    eb, _ = _bracket(ts, p)
    out = np.exp(-ts / (2.0 * p.T2C)) * eb
    return float(out) if out.ndim == 0 else out


@overload
def xi_derivative(t: float, p: RelaxationParams) -> float: ...
@overload
def xi_derivative(t: FloatArray, p: RelaxationParams) -> FloatArray: ...
def xi_derivative(t: float | FloatArray, p: RelaxationParams) -> float | FloatArray:
    """Evaluate dξ/dt in 1/s using the same branch logic as :func:`xi`.

    Raises:
        DomainError: If any ``t < 0``.
    """
    ts = _as_times(t)
    eb, ebp = _bracket(ts, p)
    k = 0.25 / p.T1H
    g2 = 0.5 / p.T2C
    out = np.exp(-ts * g2) * (ebp - (k + g2) * eb)
    return float(out) if out.ndim == 0 else out


def xi_with_derivative(t: float, p: RelaxationParams) -> tuple[float, float]:
    """Return ``(ξ(t), dξ/dt)`` for a scalar time in one branch evaluation."""
    ts = _as_times(t)
    eb, ebp = _bracket(ts, p)
    k = 0.25 / p.T1H
    g2 = 0.5 / p.T2C
    damp = np.exp(-ts * g2)
    return float(damp * eb), float(damp * (ebp - (k + g2) * eb))


def _require_plane(b0: BlochVector) -> None:
    if abs(b0.y) > PLANE_TOL:
        raise UnsupportedStateError(
            f"initial state must lie in the x-z plane (got <sigma_y> = {b0.y!r})"
        )


def evolve_bloch(t: float, b0: BlochVector, p: RelaxationParams) -> BlochVector:
    """Evolve an x–z-plane state: returns ``(ξ(t)·x0, 0, z0)``.

    Raises:
        UnsupportedStateError: If ``b0.y != 0``.
        DomainError: If ``t < 0``.
    """
    _require_plane(b0)
    return BlochVector(xi(t, p) * b0.x, 0.0, b0.z)


def xi_series(times: ArrayLike, p: RelaxationParams) -> TimeSeries:
    """Sample ξ on a grid."""
    ts = _as_times(times)
    return TimeSeries(ts, xi(ts, p), "xi")


def sx_series(times: ArrayLike, b0: BlochVector, p: RelaxationParams) -> TimeSeries:
    """Sample the model ⟨σx⟩_t = ξ(t)·x0 on a grid."""
    _require_plane(b0)
    ts = _as_times(times)
    return TimeSeries(ts, xi(ts, p) * b0.x, "sx")


def trotter_step(dt: float, p: RelaxationParams) -> KrausSet:
    """Return one trotter step: coupling, then carbon dephasing, then hydrogen flip."""
    unitary = KrausSet(coupling_unitary(dt, p.J))
    return compose_kraus(
        unitary, phase_damping_kraus(dt, p.T2C), bit_phase_flip_kraus(dt, p.T1H)
    )


def trotter_simulate(
    tau: float,
    n_steps: int,
    b0: BlochVector,
    p: RelaxationParams,
    *,
    validate: bool = False,
) -> tuple[TimeSeries, TimeSeries, TimeSeries]:
    """Iterate the two-qubit Kraus channels and record the carbon Bloch vector.

    Hydrogen starts maximally mixed. Each of the ``n_steps`` equal steps applies
    :func:`trotter_step`; the carbon marginal is recorded at ``t = 0`` and after
    every step.

    Args:
        tau: Total evolution time in seconds.
        n_steps: Number of steps (``>= 1``).
        b0: Initial carbon state in the x–z plane.
        p: Relaxation constants.
        validate: Check the full density matrix after every step.

    Returns:
        tuple[TimeSeries, TimeSeries, TimeSeries]: Carbon Bloch components.

    Raises:
        StepSizeError: If ``tau / n_steps > 0.1 / J``.
        UnsupportedStateError: If ``b0.y != 0``.
        DomainError: For non-positive ``tau`` or ``n_steps``.
    """
    if not np.isfinite(tau) or tau <= 0:
        raise DomainError(f"tau must be positive, got {tau!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise DomainError(f"n_steps must be a positive integer, got {n_steps!r}")
    _require_plane(b0)
    n = int(n_steps)
    dt = tau / n
    if dt > STEP_MAX_FACTOR / p.J:
        raise StepSizeError(
            f"trotter step {dt:.3e} s exceeds {STEP_MAX_FACTOR}/J = "
            f"{STEP_MAX_FACTOR / p.J:.3e} s"
        )
    if dt > STEP_WARN_FACTOR / p.J:
        logger.warning(
            "trotter step %.3e s is above %.2g/J; expect visible splitting error",
            dt,
            STEP_WARN_FACTOR,
        )

    step = trotter_step(dt, p)
    rho = np.kron(bloch_to_density(b0), 0.5 * IDENTITY2)
    sx = np.empty(n + 1)
    sy = np.empty(n + 1)
    sz = np.empty(n + 1)
    for i in range(n + 1):
        if i:
            rho = step.apply(rho)
            if validate:
                check_density(rho)
        carbon = partial_trace_hydrogen(rho)
        sx[i] = 2.0 * carbon[0, 1].real
        sy[i] = -2.0 * carbon[0, 1].imag
        sz[i] = (carbon[0, 0] - carbon[1, 1]).real
    times = dt * np.arange(n + 1)
    logger.debug("trotter: %d steps of %.3e s", n, dt)
    return (
        TimeSeries(times, sx, "sx"),
        TimeSeries(times, sy, "sy"),
        TimeSeries(times, sz, "sz"),
    )
