import numpy as np
import pytest

from qsl_relax.core import (
    IDENTITY2,
    BlochVector,
    KrausSet,
    RelaxationParams,
    TwoQubitDensity,
    apply_kraus,
    bit_phase_flip_kraus,
    bloch_to_density,
    check_density,
    compose_kraus,
    coupling_unitary,
    density_to_bloch,
    partial_trace_hydrogen,
    phase_damping_kraus,
)
from qsl_relax.errors import DomainError


def test_bloch_vector_rejects_outside_ball():
    with pytest.raises(DomainError):
        BlochVector(1.0, 0.0, 0.1)
    with pytest.raises(DomainError):
        BlochVector(float("nan"), 0.0, 0.0)
    assert BlochVector(1.0, 0.0, 0.0).is_pure
    assert not BlochVector(0.3, 0.0, 0.4).is_pure


def test_density_bloch_conversion():
    b = BlochVector(0.3, -0.2, 0.5)
    rho = bloch_to_density(b)
    assert np.trace(rho) == pytest.approx(1.0)
    back = density_to_bloch(rho)
    assert back.as_array() == pytest.approx(b.as_array(), abs=1e-15)


def test_density_to_bloch_rejects_bad_input():
    with pytest.raises(DomainError):
        density_to_bloch(np.array([[1.0, 0.5], [0.0, 0.0]]))
    with pytest.raises(DomainError):
        density_to_bloch(np.eye(2))
    with pytest.raises(DomainError):
        density_to_bloch(np.eye(3) / 3)


def test_relaxation_params_positive():
    with pytest.raises(DomainError):
        RelaxationParams(0.0, 1e-3, 200.0)
    with pytest.raises(DomainError):
        RelaxationParams(1e-3, -1e-3, 200.0)
    with pytest.raises(DomainError):
        RelaxationParams(1e-3, 1e-3, float("inf"))


def test_check_density_rejects_non_psd():
    with pytest.raises(DomainError):
        check_density(np.diag([1.5, -0.5]).astype(complex))
    check_density(bloch_to_density(BlochVector(0.0, 0.0, 1.0)))


def test_two_qubit_product_and_marginal():
    carbon = bloch_to_density(BlochVector(0.6, 0.0, 0.3))
    state = TwoQubitDensity.product(carbon, 0.5 * IDENTITY2)
    assert state.carbon().as_array() == pytest.approx([0.6, 0.0, 0.3])
    assert not state.matrix.flags.writeable
    with pytest.raises(DomainError):
        TwoQubitDensity(np.eye(2))


def test_partial_trace_of_product():
    a = bloch_to_density(BlochVector(0.1, 0.2, 0.3))
    b = bloch_to_density(BlochVector(0.0, 0.0, -0.4))
    assert partial_trace_hydrogen(np.kron(a, b)) == pytest.approx(a)


def test_kraus_completeness_enforced():
    with pytest.raises(DomainError):
        KrausSet(0.5 * np.eye(2))
    single = KrausSet(np.eye(2))
    assert len(single) == 1
    assert single.dim == 2


def test_phase_damping_shrinks_carbon_coherence():
    dt, t2 = 1e-3, 5e-3
    rho = np.kron(bloch_to_density(BlochVector(1.0, 0.0, 0.0)), 0.5 * IDENTITY2)
    out = apply_kraus(rho, phase_damping_kraus(dt, t2))
    carbon = density_to_bloch(partial_trace_hydrogen(out))
    assert carbon.x == pytest.approx(np.exp(-dt / (2 * t2)), rel=1e-12)
    assert carbon.z == pytest.approx(0.0, abs=1e-15)


def test_bit_phase_flip_acts_on_hydrogen_only():
    dt, t1 = 2e-4, 1e-3
    carbon = bloch_to_density(BlochVector(0.5, 0.0, 0.5))
    hydrogen = bloch_to_density(BlochVector(0.0, 0.0, 1.0))
    out = bit_phase_flip_kraus(dt, t1).apply(np.kron(carbon, hydrogen))
    c = density_to_bloch(partial_trace_hydrogen(out))
    assert c.as_array() == pytest.approx([0.5, 0.0, 0.5], abs=1e-14)
    # hydrogen <sigma_z> decays by 2p - 1
    h = np.einsum("hihj->ij", out.reshape(2, 2, 2, 2))
    assert density_to_bloch(h).z == pytest.approx(np.exp(-dt / (2 * t1)), rel=1e-12)


def test_step_parameters_validated():
    with pytest.raises(DomainError):
        phase_damping_kraus(-1e-6, 1e-3)
    with pytest.raises(DomainError):
        bit_phase_flip_kraus(1e-6, 0.0)
    with pytest.raises(DomainError):
        coupling_unitary(1e-6, -5.0)


def test_coupling_unitary_is_diagonal_unitary():
    u = coupling_unitary(1e-4, 209.1)
    assert u @ u.conj().T == pytest.approx(np.eye(4))
    assert np.count_nonzero(u - np.diag(np.diag(u))) == 0
    theta = 0.5 * np.pi * 209.1 * 1e-4
    assert u[0, 0] == pytest.approx(np.exp(-1j * theta))
    assert u[1, 1] == pytest.approx(np.exp(1j * theta))


def test_compose_kraus_applies_left_to_right():
    rng = np.random.default_rng(3)
    dt = 5e-5
    first = KrausSet(coupling_unitary(dt, 209.1))
    second = bit_phase_flip_kraus(dt, 1e-3)
    third = phase_damping_kraus(dt, 1e-2)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    combined = compose_kraus(first, second, third)
    assert len(combined) == 4
    expected = third.apply(second.apply(first.apply(rho)))
    assert combined.apply(rho) == pytest.approx(expected, abs=1e-14)
    with pytest.raises(DomainError):
        compose_kraus()
    with pytest.raises(DomainError):
        compose_kraus(first, KrausSet(np.eye(2)))


def _random_densities(rng, n, dim=4):
    a = rng.normal(size=(n, dim, dim)) + 1j * rng.normal(size=(n, dim, dim))
    rho = a @ a.conj().transpose(0, 2, 1)
    return rho / np.trace(rho, axis1=1, axis2=2)[:, None, None]


@pytest.mark.parametrize(
    "channel",
    [
        phase_damping_kraus(1e-3, 5e-3),
        bit_phase_flip_kraus(1e-3, 1e-3),
        KrausSet(coupling_unitary(1e-3, 209.1)),
    ],
    ids=["phase_damping", "bit_phase_flip", "coupling"],
)
def test_channels_keep_random_states_physical(channel):
    rng = np.random.default_rng(11)
    for rho in _random_densities(rng, 1000):
        out = channel.apply(rho)
        assert np.trace(out) == pytest.approx(1.0, abs=1e-12)
        assert np.max(np.abs(out - out.conj().T)) <= 1e-13
        assert np.min(np.linalg.eigvalsh(out)) >= -1e-12
        check_density(out)


def test_bloch_round_trip_random_vectors():
    rng = np.random.default_rng(5)
    for _ in range(100):
        d = rng.normal(size=3)
        r = rng.uniform() ** (1 / 3)
        x, y, z = r * d / np.linalg.norm(d)
        b = BlochVector(float(x), float(y), float(z))
        back = density_to_bloch(bloch_to_density(b))
        assert back.as_array() == pytest.approx(b.as_array(), abs=1e-15)


def test_coupling_unitary_special_steps():
    j = 209.1
    quarter = coupling_unitary(1.0 / j, j)
    assert quarter == pytest.approx(np.diag([-1j, 1j, 1j, -1j]), abs=1e-12)
    assert coupling_unitary(0.0, j) == pytest.approx(np.eye(4), abs=0.0)
