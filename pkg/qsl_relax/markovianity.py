"""ℓ1-coherence witness for non-Markovian carbon dynamics.

Under a Markovian (CP-divisible) evolution the ℓ1 coherence in the
``{|0⟩, |1⟩}`` basis can only decrease; any revival beyond a noise threshold
is reported as a signature of memory effects.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np

from .core import BlochVector
from .dynamics import TimeSeries
from .errors import DataError, DegenerateStateError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 1e-3


@dataclass(frozen=True)
class MarkovianityVerdict:
    """Outcome of the coherence-revival witness.

    Attributes:
        is_non_markovian: True iff at least one revival was found.
        revival_intervals: ``(start, end)`` times in seconds of each revival.
        measure: Sum of the coherence gained over the revivals (normalized units).
        threshold: Rise threshold the verdict was computed with.
    """

    is_non_markovian: bool
    revival_intervals: tuple[tuple[float, float], ...]
    measure: float
    threshold: float = DEFAULT_THRESHOLD

    @property
    def label(self) -> str:
        """Return ``"non-markovian"`` or ``"markovian"``."""
        return "non-markovian" if self.is_non_markovian else "markovian"

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-ready mapping."""
        return {
            "verdict": self.label,
            "is_non_markovian": self.is_non_markovian,
            "revival_intervals_s": [list(iv) for iv in self.revival_intervals],
            "measure": self.measure,
            "threshold": self.threshold,
            "revival_period_s": revival_period(self),
        }


def l1_coherence(b: BlochVector) -> float:
    """Return the ℓ1 coherence ``√(x² + y²)`` of a qubit state."""
    return float(np.hypot(b.x, b.y))


def coherence_series(sx: TimeSeries) -> TimeSeries:
    """Return ``|⟨σx⟩_t| / |⟨σx⟩_0|``, the normalized coherence of the path.

    Raises:
        DegenerateStateError: If the first sample is zero.
    """
    ref = abs(float(sx.value[0]))
    if ref == 0.0:
        raise DegenerateStateError("initial coherence is zero; cannot normalize")
    return sx.with_values(np.abs(sx.value) / ref, "coherence")


def revival_intervals(
    c: TimeSeries, threshold: float = DEFAULT_THRESHOLD
) -> MarkovianityVerdict:
    """Find the maximal rises of a coherence series larger than ``threshold``.

    The series is first divided by its initial value, so the threshold is in
    units of the initial coherence. A rise starts at the running minimum once
    the series has climbed more than ``threshold`` above it, and ends at the
    running maximum once the series has fallen more than ``threshold`` below
    it (or at the end of the data).

    Args:
        c: Coherence series.
        threshold: Minimum rise, ``>= 0``.

    Returns:
        MarkovianityVerdict: The detected revivals and their summed gain.

    Raises:
        DataError: If the series has fewer than 3 points.
        DomainError: If ``threshold`` is negative.
    """
    if not threshold >= 0:
        raise DomainError(f"revival threshold must be >= 0, got {threshold!r}")
    if len(c) < 3:
        raise DataError(f"need at least 3 samples for a revival test, got {len(c)}")
    v = np.asarray(c.value, dtype=np.float64)
    ref = abs(v[0]) or float(np.max(np.abs(v)))
    if ref == 0.0:
        return MarkovianityVerdict(False, (), 0.0, threshold)
    v = v / ref
    t = c.t

    spans: list[tuple[int, int]] = []
    lo, hi = 0, -1
    rising = False
    for i in range(1, v.size):
        if not rising:
            if v[i] < v[lo]:
                lo = i
            elif v[i] - v[lo] > threshold:
                rising, hi = True, i
        elif v[i] > v[hi]:
            hi = i
        elif v[hi] - v[i] > threshold:
            spans.append((lo, hi))
            rising, lo = False, i
    if rising:
        spans.append((lo, hi))

    measure = float(sum(v[b] - v[a] for a, b in spans))
    intervals = tuple((float(t[a]), float(t[b])) for a, b in spans)
    logger.debug(
        "revivals: %d above %.3g (measure %.4g)", len(spans), threshold, measure
    )
    return MarkovianityVerdict(bool(spans), intervals, measure, threshold)


def revival_period(verdict: MarkovianityVerdict) -> float | None:
    """Return the mean spacing between revival starts, or None with fewer than two."""
    starts = [a for a, _ in verdict.revival_intervals]
    if len(starts) < 2:
        return None
    return float(np.mean(np.diff(starts)))


def assess(sx: TimeSeries, threshold: float = DEFAULT_THRESHOLD) -> MarkovianityVerdict:
    """Run the witness on a ⟨σx⟩ series (normalize, then detect revivals)."""
    return revival_intervals(coherence_series(sx), threshold)
