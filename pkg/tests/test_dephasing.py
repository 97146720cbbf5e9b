# tests/test_dephasing.py

"""
Tests for the ray transformation functions: the homographic coefficients, the
real dephasing branch, its derivative and the vectorised ray table.
"""

import cmath
import math

import numpy as np
import pytest

from app.core import validate_config
from app.dephasing import (
    MAX_RAPIDITY,
    Phase,
    dephasing,
    dephasing_derivative,
    mobius_coefficients,
    ray_table,
)


def random_cases(count, seed, max_p=10):
    """Randomised (cfg, p, u) triples below threshold."""
    rng = np.random.default_rng(seed)
    for _ in range(count):
        cfg = validate_config(
            {
                "K": int(rng.integers(1, 5)),
                "omega": float(rng.uniform(0.5, 2.0)),
                "rho": float(rng.uniform(0.01, 0.2)),
                "alpha_eff": float(rng.uniform(0.0, 0.95)),
            }
        )
        p = int(rng.integers(-1, max_p + 1))
        u = float(rng.uniform(0.0, cfg.period))
        yield cfg, p, u


def mobius_image(cfg, p, u):
    coeffs = mobius_coefficients(p, cfg)
    z = cmath.exp(1j * cfg.omega * u)
    return (coeffs.a * z + coeffs.b) / (coeffs.b.conjugate() * z + coeffs.a.conjugate())


# -----------------------------------------------------------------------------------
# Phase helpers and coefficients
# -----------------------------------------------------------------------------------

@pytest.mark.parametrize("exponent, expected", [(0, 1), (1, -1j), (2, -1), (3, 1j), (10 ** 12 + 1, -1j), (-1, 1j)])
def test_minus_i_power(exponent, expected):
    # Act & Assert
    assert Phase.minus_i_power(exponent) == expected


def test_i_power_matches_complex_power():
    # Act & Assert
    for exponent in range(12):
        assert Phase.i_power(exponent) == pytest.approx(1j ** exponent)


def test_cosh_sinh_survive_large_rapidity():
    # Act
    cosh, sinh = Phase.cosh_sinh(650.0)

    # Assert
    assert math.isfinite(cosh) and math.isfinite(sinh)
    assert sinh / cosh == pytest.approx(1.0)


def test_cosh_sinh_small_argument():
    # Act
    cosh, sinh = Phase.cosh_sinh(-1e-8)

    # Assert
    assert cosh == pytest.approx(1.0)
    assert sinh == pytest.approx(-1e-8, rel=1e-12)


def test_mobius_coefficients_example():
    """K = 2, p = 1, alpha = 0.1: a = -cosh 0.1, b = -i sinh 0.1."""
    # Arrange
    cfg = validate_config({"K": 2, "omega": 1.0, "rho": 0.5, "alpha": 0.1})

    # Act
    coeffs = mobius_coefficients(1, cfg)

    # Assert
    assert coeffs.a == pytest.approx(-math.cosh(0.1))
    assert coeffs.b == pytest.approx(-1j * math.sinh(0.1))


@pytest.mark.parametrize("p", [-1, 0, 1, 2, 5, 17])
def test_mobius_coefficients_unimodular(p):
    # Arrange
    cfg = validate_config({"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.9})

    # Act
    coeffs = mobius_coefficients(p, cfg)

    # Assert
    assert abs(coeffs.a) ** 2 - abs(coeffs.b) ** 2 == pytest.approx(1.0, abs=1e-12)


# -----------------------------------------------------------------------------------
# Dephasing functions
# -----------------------------------------------------------------------------------

def test_dephasing_reproduces_mobius_image():
    # Act
    errors = [
        abs(cmath.exp(1j * cfg.omega * dephasing(u, p, cfg).value) - mobius_image(cfg, p, u))
        for cfg, p, u in random_cases(100, seed=1)
    ]

    # Assert
    assert max(errors) < 1e-10


def test_derivative_matches_finite_difference():
    # Act
    errors = []
    for cfg, p, u in random_cases(100, seed=2):
        step = 1e-5 / cfg.omega
        numeric = (dephasing(u + step, p, cfg).value - dephasing(u - step, p, cfg).value) / (2 * step)
        exact = dephasing(u, p, cfg).derivative
        errors.append(abs(numeric - exact) / exact)

    # Assert
    assert max(errors) < 1e-6


def test_quasi_periodicity():
    # Act
    residuals = [
        abs(dephasing(u + cfg.period, p, cfg).value - dephasing(u, p, cfg).value - cfg.period)
        for cfg, p, u in random_cases(100, seed=3)
    ]

    # Assert
    assert max(residuals) < 1e-10


def test_derivative_two_routes_agree():
    # Act & Assert
    for cfg, p, u in random_cases(50, seed=4):
        assert dephasing_derivative(u, p, cfg) == pytest.approx(dephasing(u, p, cfg).derivative, rel=1e-10)


@pytest.mark.parametrize("p", [-1, 0, 3, 8])
def test_static_cavity_gives_plain_delay(p):
    # Arrange
    cfg = validate_config({"K": 3, "omega": 1.0, "r": 0.9, "alpha": 0.0})
    u = 1.234

    # Act
    result = dephasing(u, p, cfg)

    # Assert
    assert result.value == pytest.approx(u - p * cfg.length, abs=1e-12)
    assert result.derivative == 1.0
    assert result.branch_index == 0


def test_dephasing_is_increasing():
    # Arrange
    cfg = validate_config({"K": 2, "omega": 1.0, "r": 0.9, "alpha_eff": 0.95})
    times = np.linspace(0.0, 2.0 * cfg.period, 4001)

    # Act
    table = ray_table(times, [7], cfg)

    # Assert
    assert np.all(np.diff(table.values[0]) > 0.0)


def test_largest_slope_grows_with_rapidity():
    """max f'_p = exp(2 |p| alpha) over a period."""
    # Arrange
    cfg = validate_config({"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.9})
    times = np.linspace(0.0, cfg.period, 20001)

    # Act
    table = ray_table(times, [1, 4], cfg)

    # Assert
    assert table.slopes[0].max() == pytest.approx(math.exp(2.0 * cfg.alpha), rel=1e-4)
    assert table.slopes[1].max() == pytest.approx(math.exp(8.0 * cfg.alpha), rel=1e-4)


def test_ray_table_matches_scalar_evaluation():
    # Arrange
    cfg = validate_config({"K": 1, "omega": 1.3, "rho": 0.1, "alpha_eff": 0.7})
    times = np.array([0.0, 0.7, 2.2, 4.0])
    p_values = [-1, 0, 2, 5]

    # Act
    table = ray_table(times, p_values, cfg)

    # Assert
    for row, p in enumerate(p_values):
        for column, u in enumerate(times):
            scalar = dephasing(float(u), p, cfg)
            assert table.values[row, column] == pytest.approx(scalar.value, abs=1e-12)
            assert table.slopes[row, column] == pytest.approx(scalar.derivative, rel=1e-12)


def test_ray_table_drops_rays_beyond_rapidity_cap():
    # Arrange
    cfg = validate_config({"K": 1, "omega": 1.0, "rho": 2.0, "alpha_eff": 0.9})
    too_fast = int(MAX_RAPIDITY / cfg.alpha) + 1

    # Act
    table = ray_table([0.1, 0.2], [1, too_fast], cfg)

    # Assert
    assert np.all(np.isfinite(table.log_slopes[0]))
    assert np.all(table.log_slopes[1] == -np.inf)
    assert np.all(table.slopes[1] == 0.0)


# -----------------------------------------------------------------------------------
# Limits
# -----------------------------------------------------------------------------------

def largest_deviation(alpha, p=3):
    cfg = validate_config({"K": 2, "omega": 1.0, "rho": 0.05, "alpha": alpha})
    times = np.linspace(0.0, cfg.period, 513)
    table = ray_table(times, [p], cfg)
    return np.max(np.abs(table.values[0] - (times - p * cfg.length)))


def test_small_alpha_deviation_is_linear():
    # Act
    deviations = [largest_deviation(alpha) for alpha in (1e-3, 1e-4, 1e-5)]

    # Assert
    assert 5.0 < deviations[0] / deviations[1] < 20.0
    assert 5.0 < deviations[1] / deviations[2] < 20.0


def test_tiny_alpha_is_nearly_a_plain_delay():
    # Arrange
    cfg = validate_config({"K": 2, "omega": 1.0, "rho": 0.05, "alpha": 1e-6})
    u = 0.3 * cfg.period

    # Act
    result = dephasing(u, 4, cfg)

    # Assert
    assert abs(result.value - (u - 4 * cfg.length)) < 1e-4


@pytest.mark.parametrize("p", [-1, 1, 4, 9])
def test_derivative_averages_to_one_over_a_period(p):
    # Arrange
    cfg = validate_config({"K": 2, "omega": 1.0, "r": 0.9, "alpha_eff": 0.95})
    times = np.linspace(0.0, cfg.period, 4096, endpoint=False)

    # Act
    table = ray_table(times, [p], cfg)

    # Assert
    assert table.slopes[0].mean() == pytest.approx(1.0, rel=1e-10)


def test_large_rapidity_agrees_with_mobius_image():
    # Arrange
    cfg = validate_config({"K": 3, "omega": 1.0, "rho": 1.0, "alpha_eff": 0.5})
    p = 40

    # Act
    errors = [
        abs(cmath.exp(1j * dephasing(u, p, cfg).value) - mobius_image(cfg, p, u))
        for u in np.linspace(0.05, cfg.period, 17)
    ]

    # Assert
    assert max(errors) < 1e-6


def test_steep_point_stays_continuous_after_tanh_saturates():
    """At |p| alpha = 32 tanh is 1.0 in double precision; the step is still one full period."""
    # Arrange
    cfg = validate_config({"K": 1, "omega": 1.0, "rho": 1.0, "alpha_eff": 0.8})
    steep = 0.5 * math.pi
    times = np.linspace(steep - 1e-3, steep + 1e-3, 2001)

    # Act
    table = ray_table(times, [80], cfg)

    # Assert
    assert math.tanh(80 * cfg.alpha) == 1.0
    assert np.all(np.isfinite(table.values)) and np.all(np.isfinite(table.log_slopes))
    assert np.all(np.diff(table.values[0]) > -1e-9)
    assert table.values[0, -1] - table.values[0, 0] == pytest.approx(cfg.period, abs=1e-6)
