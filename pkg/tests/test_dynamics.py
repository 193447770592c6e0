import logging
import math

import numpy as np
import pytest

from qsl_relax.core import BlochVector, RelaxationParams
from qsl_relax.dynamics import (
    TimeSeries,
    branch,
    evolve_bloch,
    markovian_regime,
    sx_series,
    trotter_simulate,
    xi,
    xi_derivative,
    xi_series,
    xi_with_derivative,
)
from qsl_relax.errors import (
    DataError,
    DomainError,
    StepSizeError,
    UnsupportedStateError,
)

J = 209.1
T1H_CRIT = 1.0 / (4 * math.pi * J)
DEEP = RelaxationParams(0.1e-3, 5e-3, J)


def test_time_series_validates():
    with pytest.raises(DataError):
        TimeSeries(np.array([0.0, 0.0]), np.array([1.0, 2.0]))
    with pytest.raises(DataError):
        TimeSeries(np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(DataError):
        TimeSeries(np.array([-1.0, 1.0]), np.array([1.0, 1.0]))
    with pytest.raises(DataError):
        TimeSeries(np.array([0.0, 1.0]), np.array([1.0, np.nan]))
    s = TimeSeries(np.array([0.0, 1.0]), np.array([1.0, 0.5]))
    assert len(s) == 2
    assert not s.value.flags.writeable
    with pytest.raises(DataError):
        s.require_length(3)


def test_branches(p20, p300):
    assert branch(p20)[0] == "oscillatory"
    assert branch(p300)[0] == "oscillatory"
    assert branch(DEEP)[0] == "overdamped"
    assert branch(RelaxationParams(T1H_CRIT, 1e-2, J))[0] == "critical"
    assert markovian_regime(DEEP)
    assert not markovian_regime(p300)


@pytest.mark.parametrize(
    "params",
    [
        RelaxationParams(7.1e-3, 38.55e-3, J),
        RelaxationParams(T1H_CRIT, 1e-2, J),
        DEEP,
    ],
)
def test_xi_starts_at_one_and_stays_bounded(params):
    assert xi(0.0, params) == 1.0
    t = np.linspace(0.0, 0.2, 4001)
    assert np.all(np.abs(xi(t, params)) <= 1.0)


def test_xi_continuous_across_critical_point():
    t = np.linspace(0.0, 0.02, 201)
    crit = xi(t, RelaxationParams(T1H_CRIT, 1e-2, J))
    above = xi(t, RelaxationParams(T1H_CRIT * (1 + 1e-8), 1e-2, J))
    below = xi(t, RelaxationParams(T1H_CRIT * (1 - 1e-8), 1e-2, J))
    assert np.max(np.abs(above - crit)) < 1e-6
    assert np.max(np.abs(below - crit)) < 1e-6


def test_unitary_limit_is_cosine():
    p = RelaxationParams(1e6, 1e6, J)
    t = np.linspace(0.0, 0.02, 101)
    assert xi(t, p) == pytest.approx(np.cos(math.pi * J * t), abs=1e-5)


def test_deep_markovian_envelope_is_monotone():
    t = np.linspace(0.0, 0.05, 501)
    assert np.all(np.diff(xi(t, DEEP)) <= 0)
    assert np.all(xi(t, DEEP) > 0)


def test_long_times_do_not_overflow():
    v = xi(np.array([1.0, 10.0, 1e3]), DEEP)
    assert np.all(np.isfinite(v))
    assert np.all(v >= 0)


@pytest.mark.parametrize(
    "params",
    [
        RelaxationParams(7.1e-3, 38.55e-3, J),
        RelaxationParams(T1H_CRIT, 1e-2, J),
        DEEP,
    ],
)
def test_derivative_matches_finite_difference(params):
    h = 1e-7
    for t in (1e-4, 2.3e-3, 7.7e-3, 0.031):
        fd = (xi(t + h, params) - xi(t - h, params)) / (2 * h)
        assert xi_derivative(t, params) == pytest.approx(fd, abs=1e-4)
        value, slope = xi_with_derivative(t, params)
        assert value == pytest.approx(xi(t, params), abs=1e-15)
        assert slope == pytest.approx(xi_derivative(t, params), abs=1e-12)


def test_negative_time_rejected(p20):
    with pytest.raises(DomainError):
        xi(-1e-3, p20)
    with pytest.raises(DomainError):
        xi_series([0.0, -1.0], p20)


def test_evolve_bloch(p20, b0):
    b = evolve_bloch(5e-3, b0, p20)
    assert b.x == pytest.approx(xi(5e-3, p20) * b0.x)
    assert b.y == 0.0
    assert b.z == b0.z
    with pytest.raises(UnsupportedStateError):
        evolve_bloch(1e-3, BlochVector(0.5, 0.5, 0.0), p20)


def test_sx_series(p120, b0):
    s = sx_series(np.linspace(0, 0.01, 11), b0, p120)
    assert s.label == "sx"
    assert s.value[0] == pytest.approx(b0.x)


def test_trotter_matches_closed_form(p20, p120, p300, b0):
    tau = 0.15
    for p in (p20, p120, p300):
        sx, sy, sz = trotter_simulate(tau, 15000, b0, p)
        model = xi(sx.t, p) * b0.x
        assert np.max(np.abs(sx.value - model)) <= 5e-3
        assert np.max(np.abs(sy.value)) < 1e-9
        assert np.max(np.abs(sz.value - b0.z)) < 1e-9


def test_trotter_error_is_second_order(p20, b0):
    tau = 0.05

    def err(n):
        sx, _, _ = trotter_simulate(tau, n, b0, p20)
        return np.max(np.abs(sx.value - xi(sx.t, p20) * b0.x))

    ratio = err(5000) / err(10000)
    assert 3.5 <= ratio <= 4.5


def test_trotter_step_limits(p20, b0, caplog):
    with pytest.raises(StepSizeError):
        trotter_simulate(0.01, 10, b0, p20)
    with caplog.at_level(logging.WARNING, logger="qsl_relax.dynamics"):
        trotter_simulate(0.01, 100, b0, p20)
    assert "trotter step" in caplog.text
    with pytest.raises(DomainError):
        trotter_simulate(0.01, 0, b0, p20)
    with pytest.raises(UnsupportedStateError):
        trotter_simulate(0.01, 1000, BlochVector(0.0, 1.0, 0.0), p20)


def test_trotter_validate_keeps_density(p300, b0):
    sx, _, _ = trotter_simulate(1e-3, 100, b0, p300, validate=True)
    assert len(sx) == 101
    assert sx.t[-1] == pytest.approx(1e-3)


@pytest.mark.parametrize("T1H", [0.1e-3, 1 / (4 * math.pi * J), 7.1e-3, 10.0])
def test_initial_slope_is_carbon_dephasing(T1H):
    p = RelaxationParams(T1H, 12.8e-3, J)
    assert xi_derivative(0.0, p) == pytest.approx(-1 / (2 * p.T2C), rel=1e-12)


def test_derivative_without_hydrogen_relaxation():
    p = RelaxationParams(1e12, 38.55e-3, J)
    t = np.linspace(0.0, 0.05, 501)
    damp = np.exp(-t / (2 * p.T2C))
    w = math.pi * J
    expected = -damp * (np.cos(w * t) / (2 * p.T2C) + w * np.sin(w * t))
    assert xi_derivative(t, p) == pytest.approx(expected, abs=1e-6)


def test_envelope_bounded_for_random_parameters():
    rng = np.random.default_rng(17)
    for _ in range(10_000):
        p = RelaxationParams(
            10 ** rng.uniform(-5, 0), 10 ** rng.uniform(-4, 0), rng.uniform(10, 500)
        )
        t = rng.uniform(0.0, 0.5)
        assert abs(xi(t, p)) <= 1.0 + 1e-12


def test_trotter_without_relaxation_is_a_rotation():
    p = RelaxationParams(1e12, 1e12, J)
    b = BlochVector(1.0, 0.0, 0.0)
    sx, sy, _ = trotter_simulate(0.02, 1000, b, p)
    assert sx.value == pytest.approx(np.cos(math.pi * J * sx.t), abs=1e-9)
    assert np.max(np.abs(sy.value)) < 1e-9
