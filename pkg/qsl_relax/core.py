"""State representations, Kraus channels and the scalar-coupling unitary.

The two-qubit layout is row-major 4×4 in the basis ``|00⟩, |01⟩, |10⟩, |11⟩``
with carbon as the first tensor factor and hydrogen as the second.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
from numpy.typing import NDArray

from .errors import DomainError

ComplexMatrix = NDArray[np.complex128]

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
COMPLETENESS_TOL = 1e-12

IDENTITY2 = np.eye(2, dtype=np.complex128)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


def _frozen(a: NDArray[np.complex128]) -> ComplexMatrix:
    out = np.array(a, dtype=np.complex128, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BlochVector:
    """Single-qubit state as the expectation values of the Pauli matrices.

    Attributes:
        x: ⟨σx⟩.
        y: ⟨σy⟩.
        z: ⟨σz⟩.

    Raises:
        DomainError: If the vector lies outside the Bloch ball.
    """

    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        """Reject non-physical vectors."""
        for name in ("x", "y", "z"):
            if not np.isfinite(getattr(self, name)):
                raise DomainError(f"Bloch component {name} is not finite")
        if self.norm_squared > 1.0 + NORM_TOL:
            raise DomainError(
                f"non-physical Bloch vector: |r|^2 = {self.norm_squared!r} > 1"
            )

    @property
    def norm_squared(self) -> float:
        """Return x² + y² + z²."""
        return self.x * self.x + self.y * self.y + self.z * self.z

    @property
    def is_pure(self) -> bool:
        """Return True when the state lies on the sphere surface."""
        return abs(self.norm_squared - 1.0) <= NORM_TOL

    def as_array(self) -> NDArray[np.float64]:
        """Return ``[x, y, z]`` as a float array."""
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class RelaxationParams:
    """Relaxation and coupling constants of the carbon–hydrogen pair.

    Attributes:
        T1H: Hydrogen longitudinal relaxation time in seconds.
        T2C: Carbon transverse relaxation time in seconds.
        J: Scalar coupling strength in hertz.
    """

    T1H: float
    T2C: float
    J: float

    def __post_init__(self) -> None:
        """Require strictly positive, finite constants."""
        for name in ("T1H", "T2C", "J"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise DomainError(f"{name} must be positive, got {value!r}")


@dataclass(frozen=True, eq=False)
class TwoQubitDensity:
    """Validated carbon ⊗ hydrogen density matrix.

    Attributes:
        matrix: Read-only 4×4 complex array.
    """

    matrix: ComplexMatrix = field(repr=False)

    def __post_init__(self) -> None:
        """Check shape, Hermiticity, unit trace and positivity."""
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (4, 4):
            raise DomainError(f"two-qubit density must be 4x4, got {m.shape}")
        check_density(m)
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def product(cls, carbon: ComplexMatrix, hydrogen: ComplexMatrix) -> TwoQubitDensity:
        """Build ``carbon ⊗ hydrogen`` from two single-qubit states."""
        return cls(np.kron(carbon, hydrogen))

    def carbon(self) -> BlochVector:
        """Return the carbon marginal as a Bloch vector."""
        return density_to_bloch(partial_trace_hydrogen(self.matrix))


@dataclass(frozen=True, eq=False)
class KrausSet:
    """Ordered Kraus operators of a CPTP map.

    Attributes:
        operators: Read-only stack of shape ``(k, d, d)``.
    """

    operators: ComplexMatrix = field(repr=False)

    def __post_init__(self) -> None:
        """Stack the operators and verify completeness."""
        ops = np.asarray(self.operators, dtype=np.complex128)
        if ops.ndim == 2:
            ops = ops[None, :, :]
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2] or ops.shape[0] == 0:
            raise DomainError(f"bad Kraus operator stack of shape {ops.shape}")
        total = np.einsum("kji,kjl->il", ops.conj(), ops)
        err = float(np.max(np.abs(total - np.eye(ops.shape[1]))))
        if err > COMPLETENESS_TOL:
            raise DomainError(f"Kraus completeness violated by {err:.3e}")
        object.__setattr__(self, "operators", _frozen(ops))

    def __len__(self) -> int:
        """Return the number of operators."""
        return int(self.operators.shape[0])

    @property
    def dim(self) -> int:
        """Return the Hilbert-space dimension the operators act on."""
        return int(self.operators.shape[1])

    def apply(self, rho: ComplexMatrix) -> ComplexMatrix:
        """Apply the channel to ``rho``; see :func:`apply_kraus`."""
        return apply_kraus(rho, self)


def check_density(rho: ComplexMatrix) -> None:
    """Validate Hermiticity, unit trace and positivity of a density matrix.

    Raises:
        DomainError: On the first violated property.
    """
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    if herm > HERMITIAN_TOL:
        raise DomainError(f"density matrix not Hermitian (deviation {herm:.3e})")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > TRACE_TOL:
        raise DomainError(f"density matrix trace {tr.real!r} != 1")
    low = float(np.min(np.linalg.eigvalsh(rho)))
    if low < -PSD_TOL:
        raise DomainError(f"density matrix not PSD (min eigenvalue {low:.3e})")


def bloch_to_density(b: BlochVector) -> ComplexMatrix:
    """Return ``(I + x σx + y σy + z σz) / 2``."""
    return 0.5 * (IDENTITY2 + b.x * SIGMA_X + b.y * SIGMA_Y + b.z * SIGMA_Z)


def density_to_bloch(rho: ComplexMatrix) -> BlochVector:
    """Recover the Bloch vector of a single-qubit density matrix.

    Args:
        rho: 2×2 Hermitian matrix with unit trace.

    Returns:
        BlochVector: ``(tr ρσx, tr ρσy, tr ρσz)``.

    Raises:
        DomainError: If ``rho`` is not 2×2, not Hermitian, or not unit trace, or
            its Bloch vector is non-physical.
    """
    m = np.asarray(rho, dtype=np.complex128)
    if m.shape != (2, 2):
        raise DomainError(f"single-qubit density must be 2x2, got {m.shape}")
    herm = float(np.max(np.abs(m - m.conj().T)))
    if herm > HERMITIAN_TOL:
        raise DomainError(f"density matrix not Hermitian (deviation {herm:.3e})")
    tr = complex(np.trace(m))
    if abs(tr - 1.0) > TRACE_TOL:
        raise DomainError(f"density matrix trace {tr.real!r} != 1")
    off = m[0, 1]
    return BlochVector(
        x=float(2.0 * off.real),
        y=float(-2.0 * off.imag),
        z=float((m[0, 0] - m[1, 1]).real),
    )


def partial_trace_hydrogen(rho: ComplexMatrix) -> ComplexMatrix:
    """Trace the second (hydrogen) factor out of a 4×4 matrix."""
    return np.einsum("ihjh->ij", np.asarray(rho).reshape(2, 2, 2, 2))


def apply_kraus(rho: ComplexMatrix, kraus: KrausSet) -> ComplexMatrix:
    """Return ``Σ_k K_k ρ K_k†``."""
    ops = kraus.operators
    return np.sum(ops @ rho @ ops.conj().transpose(0, 2, 1), axis=0)


def compose_kraus(*sets: KrausSet) -> KrausSet:
    """Compose channels applied left to right into a single Kraus set.

    ``compose_kraus(a, b)`` acts as ``b ∘ a``: operators are the products
    ``B_j A_i``.
    """
    if not sets:
        raise DomainError("compose_kraus needs at least one Kraus set")

    def _then(first: KrausSet, second: KrausSet) -> KrausSet:
        if first.dim != second.dim:
            raise DomainError("cannot compose channels of different dimension")
        prods = np.einsum("jab,ibc->jiac", second.operators, first.operators)
        return KrausSet(prods.reshape(-1, first.dim, first.dim))

    return reduce(_then, sets)


def _check_step(dt: float, name: str, value: float) -> None:
    if not np.isfinite(dt) or dt < 0:
        raise DomainError(f"time step must be non-negative, got {dt!r}")
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"{name} must be positive, got {value!r}")


def phase_damping_kraus(dt: float, T2C: float) -> KrausSet:
    """Carbon phase damping over one step.

    ``K1 = √q I⊗I`` and ``K2 = √(1−q) σz⊗I`` with
    ``q = (1 + e^{−dt/2T2C})/2``, so carbon coherences shrink by
    ``2q − 1 = e^{−dt/2T2C}`` per application.

    Raises:
        DomainError: If ``dt < 0`` or ``T2C <= 0``.
    """
    _check_step(dt, "T2C", T2C)
    q = 0.5 * (1.0 + np.exp(-dt / (2.0 * T2C)))
    eye4 = np.eye(4, dtype=np.complex128)
    return KrausSet(
        np.stack([np.sqrt(q) * eye4, np.sqrt(1.0 - q) * np.kron(SIGMA_Z, IDENTITY2)])
    )


def bit_phase_flip_kraus(dt: float, T1H: float) -> KrausSet:
    """Hydrogen bit-phase flip over one step.

    ``E1 = √p I⊗I`` and ``E2 = √(1−p) I⊗σy`` with
    ``p = (1 + e^{−dt/2T1H})/2``.

    Raises:
        DomainError: If ``dt < 0`` or ``T1H <= 0``.
    """
    _check_step(dt, "T1H", T1H)
    p = 0.5 * (1.0 + np.exp(-dt / (2.0 * T1H)))
    eye4 = np.eye(4, dtype=np.complex128)
    return KrausSet(
        np.stack([np.sqrt(p) * eye4, np.sqrt(1.0 - p) * np.kron(IDENTITY2, SIGMA_Y)])
    )


def coupling_unitary(dt: float, J: float) -> ComplexMatrix:
    """Return ``exp(−i (πJ/2) σz⊗σz dt)``, a diagonal unitary.

    Raises:
        DomainError: If ``dt < 0`` or ``J <= 0``.
    """
    _check_step(dt, "J", J)
    theta = 0.5 * np.pi * J * dt
    signs = np.array([1.0, -1.0, -1.0, 1.0])
    return np.diag(np.exp(-1j * theta * signs))
