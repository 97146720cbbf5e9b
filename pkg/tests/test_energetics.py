# tests/test_energetics.py

"""
Tests for the closed-form energies, the resonance factor F and the photon
counts derived from them.
"""

import dataclasses
import math

import numpy as np
import pytest

from app.core import InvalidParameter, PoleProximity, RegimeWarning, ThresholdExceeded, validate_config
from app.energetics import (
    ClosedForm,
    F_factor,
    SMALL_THETA,
    energy_budget,
    photon_ratios,
    photons_per_pulse,
    resonant_factor,
    threshold_budget,
)


# -----------------------------------------------------------------------------------
# F factor
# -----------------------------------------------------------------------------------

@pytest.mark.parametrize("K", [1, 2, 3, 4, 5])
def test_F_in_vacuum(K):
    # Act & Assert
    assert F_factor(0.0, K, 1.0) == pytest.approx(1.0 - 1.0 / K ** 2, abs=1e-15)
    assert abs(F_factor(1e-6, K, 1.0) - (1.0 - 1.0 / K ** 2)) < 1e-5


def test_F_at_room_temperature():
    """The hyperbolic sum is exponentially small, leaving F = 1 + x^2."""
    # Act & Assert
    assert F_factor(3924.0, 3, 1.0) == pytest.approx(1.0 + 3924.0 ** 2, rel=1e-15)


@pytest.mark.parametrize("x", [50.0, 100.0, 200.0])
def test_F_quadruples_when_theta_doubles_at_high_temperature(x):
    # Act
    ratio = F_factor(2.0 * x, 3, 1.0) / F_factor(x, 3, 1.0)

    # Assert
    assert ratio == pytest.approx(4.0, rel=1e-2)


@pytest.mark.parametrize("K", [1, 3])
def test_F_branches_meet(K):
    # Arrange
    below = SMALL_THETA * (1.0 - 1e-9)
    above = SMALL_THETA * (1.0 + 1e-9)

    # Act
    small = F_factor(below, K, 1.0)
    series = F_factor(above, K, 1.0)

    # Assert
    assert series == pytest.approx(small, abs=1e-8)


@pytest.mark.parametrize("x", [0.05, 0.2, 1.0])
def test_F_series_against_direct_sum(x):
    # Arrange
    K = 2
    a = 2.0 * math.pi * K * x
    direct = sum(1.0 / math.sinh(a * l) ** 2 for l in range(1, int(40.0 / a) + 2))

    # Act
    value = F_factor(x, K, 1.0)

    # Assert
    assert value == pytest.approx(1.0 + x * x * (1.0 - 24.0 * direct), rel=1e-10)


def test_F_depends_on_theta_over_omega():
    # Act & Assert
    assert F_factor(2.0, 2, 4.0) == pytest.approx(F_factor(0.5, 2, 1.0), rel=1e-14)


@pytest.mark.parametrize(
    "theta, K, tol, key",
    [(-1.0, 2, 1e-15, "theta"), (1.0, 0, 1e-15, "K"), (1.0, 2, 0.0, "tol")],
)
def test_F_rejects_invalid_input(theta, K, tol, key):
    # Act
    with pytest.raises(InvalidParameter) as exc_info:
        F_factor(theta, K, 1.0, tol)

    # Assert
    assert exc_info.value.key == key


# -----------------------------------------------------------------------------------
# Resonant factor and closed-form pieces
# -----------------------------------------------------------------------------------

def test_resonant_factor_at_threshold():
    # Act & Assert
    assert resonant_factor(0.01, 0.005) == pytest.approx(0.01 / 3.0, rel=1e-14)


def test_resonant_factor_refuses_pole():
    # Act & Assert
    with pytest.raises(PoleProximity):
        resonant_factor(1.0, 1.0 - 1e-8)


def test_resonant_factor_is_continuous_toward_the_pole():
    """Scaled by rho^2 - alpha^2 the factor stays finite and tends to rho^3."""
    # Arrange
    rho = 0.02
    alphas = [rho * (1.0 - 10.0 ** -k) for k in range(1, 6)]

    # Act
    scaled = [resonant_factor(rho, a) * (rho - a) * (rho + a) for a in alphas]

    # Assert
    assert all(math.isfinite(value) for value in scaled)
    assert np.all(np.diff(scaled) > 0)
    assert scaled[-1] == pytest.approx(rho ** 3, rel=3e-5)
    for value, a in zip(scaled, alphas):
        assert value == pytest.approx(rho * a * a, rel=1e-12)


def test_direct_motion_conventions():
    # Act
    dimensionless = ClosedForm.direct_motion(0.1, 2.0, "dimensionless", omega=3.0)
    literal = ClosedForm.direct_motion(0.1, 2.0, "literal", omega=3.0)

    # Assert
    assert dimensionless == pytest.approx(0.01 * 5.0 / 6.0)
    assert literal == pytest.approx(0.01 * 37.0 / 6.0)


def test_direct_motion_rejects_unknown_convention():
    # Act & Assert
    with pytest.raises(InvalidParameter):
        ClosedForm.direct_motion(0.1, 2.0, "natural")


# -----------------------------------------------------------------------------------
# Energy budget
# -----------------------------------------------------------------------------------

def test_static_budget_is_pure_background(static_config):
    # Act
    budget = energy_budget(static_config)

    # Assert
    assert budget.E_motion == 0.0
    assert budget.E_total == pytest.approx(1.0 / 12.0)
    assert budget.E_intracavity == pytest.approx(3.0 / 24.0)
    assert budget.photons_emitted == 0.0
    assert not budget.at_threshold


def test_budget_parts_add_up(warm_config):
    # Act
    budget = energy_budget(warm_config)

    # Assert
    assert budget.E_total == pytest.approx(budget.E_background + budget.E_motion, rel=1e-15)
    assert budget.E_intracavity == pytest.approx(
        budget.E_intracavity_background + budget.E_intracavity_motion, rel=1e-15
    )
    assert budget.photons_emitted == pytest.approx(2.0 * budget.E_motion)


def test_motion_energy_grows_with_alpha_eff():
    # Arrange
    energies = [
        energy_budget(validate_config({"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": a, "theta": 1.0})).E_motion
        for a in (0.3, 0.6, 0.9, 0.99)
    ]

    # Assert
    assert np.all(np.diff(energies) > 0)


def test_threshold_formulas_match_general_ones():
    """At alpha = rho/2 the general expressions reduce to the threshold ones."""
    # Arrange
    rng = np.random.default_rng(7)

    for _ in range(100):
        cfg = validate_config(
            {
                "K": int(rng.integers(1, 6)),
                "omega": float(rng.uniform(0.5, 2.0)),
                "rho": float(10 ** rng.uniform(-5, -1)),
                "alpha_eff": 0.5,
                "theta": float(10 ** rng.uniform(-4, 3)),
            }
        )
        at_threshold = dataclasses.replace(cfg, alpha=cfg.rho / 2.0, alpha_eff=1.0)

        # Act
        general = energy_budget(at_threshold, allow_threshold=True)
        special = threshold_budget(cfg)

        # Assert
        assert general.E_motion == pytest.approx(special.E_motion, rel=1e-12)
        assert general.E_intracavity_motion == pytest.approx(special.E_intracavity_motion, rel=1e-12)
        assert general.at_threshold


def test_budget_refuses_threshold_without_opt_in(warm_config):
    # Arrange
    cfg = dataclasses.replace(warm_config, alpha=warm_config.rho / 2.0, alpha_eff=1.0)

    # Act & Assert
    with pytest.raises(ThresholdExceeded):
        energy_budget(cfg)


def test_vacuum_intracavity_threshold_energy():
    """K = 2 in vacuum stores K F / 72 = 1/48 at threshold."""
    # Arrange
    cfg = validate_config({"K": 2, "omega": 1.0, "rho": 0.01, "alpha_eff": 0.5})

    # Act
    budget = threshold_budget(cfg)

    # Assert
    assert budget.E_intracavity_motion == pytest.approx(1.0 / 48.0, rel=1e-14)
    assert budget.E_background == 0.0


def test_literal_convention_changes_only_direct_term():
    # Arrange
    cfg = validate_config({"K": 3, "omega": 2.0, "r": 0.9, "alpha_eff": 0.9, "theta": 4.0})

    # Act
    dimensionless = energy_budget(cfg)
    literal = energy_budget(cfg, theta_convention="literal")

    # Assert
    shift = cfg.alpha ** 2 * (16.0 - 4.0) / 6.0
    assert literal.E_motion - dimensionless.E_motion == pytest.approx(shift, rel=1e-9)
    assert literal.theta_convention == "literal"


# -----------------------------------------------------------------------------------
# Photon counts
# -----------------------------------------------------------------------------------

def test_room_temperature_intracavity_photons(room_temperature_config):
    # Act
    budget = threshold_budget(room_temperature_config)

    # Assert
    assert budget.photons_intracavity > 1e6


def test_room_temperature_photons_per_pulse(room_temperature_config):
    # Act
    photons = photons_per_pulse(room_temperature_config)

    # Assert
    assert 15.0 <= photons <= 25.0


def test_pulse_photons_scale_with_theta_squared():
    # Arrange
    cold = validate_config({"K": 3, "omega": 1.0, "rho": 1e-4, "alpha_eff": 0.5, "theta": 500.0})
    hot = dataclasses.replace(cold, theta=1000.0)

    # Act
    ratio = photons_per_pulse(hot) / photons_per_pulse(cold)

    # Assert
    assert ratio == pytest.approx(4.0, rel=1e-12)


def test_low_temperature_pulse_count_warns(warm_config):
    # Act
    with pytest.warns(RegimeWarning):
        single = photons_per_pulse(warm_config)
    with pytest.warns(RegimeWarning):
        split = photons_per_pulse(warm_config, pulses_per_period=2)

    # Assert
    assert split == pytest.approx(single / 2.0)
    assert single == pytest.approx(threshold_budget(warm_config).photons_emitted)


def test_photon_ratios_at_high_temperature(room_temperature_config):
    # Act
    ratios = photon_ratios(room_temperature_config)

    # Assert
    assert ratios["emitted"] == pytest.approx(2.0 * room_temperature_config.rho / 3.0, rel=1e-4)
    assert ratios["intracavity"] == pytest.approx(1.0 / 3.0, rel=1e-6)


def test_photon_ratios_in_vacuum(vacuum_config):
    # Act
    ratios = photon_ratios(vacuum_config)

    # Assert
    assert ratios == {"emitted": math.inf, "intracavity": math.inf}
