# tests/conftest.py

import math

import pytest

from app.cli import PRESET_ALIASES, PRESETS, CommandFactory
from app.core import temperature_to_theta, validate_config
from app.radiation import DensityTermFactory


@pytest.fixture(autouse=True)
def restore_registries():
    """
    Snapshot the decorator registries before each test and put them back
    afterwards, so tests that register extra terms or commands stay isolated.
    """
    terms = dict(DensityTermFactory._terms)
    commands = dict(CommandFactory._commands)
    presets = dict(PRESETS)
    aliases = dict(PRESET_ALIASES)
    yield
    DensityTermFactory._terms.clear()
    DensityTermFactory._terms.update(terms)
    CommandFactory._commands.clear()
    CommandFactory._commands.update(commands)
    PRESETS.clear()
    PRESETS.update(presets)
    PRESET_ALIASES.clear()
    PRESET_ALIASES.update(aliases)


@pytest.fixture
def static_config():
    return validate_config({"K": 3, "omega": 1.0, "r": 0.9, "alpha": 0.0, "theta": 1.0})


@pytest.fixture
def vacuum_config():
    """alpha_eff = r = 0.9 in vacuum."""
    return validate_config({"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.9, "theta": 0.0})


@pytest.fixture
def warm_config():
    """alpha_eff = r = 0.9 at theta = omega."""
    return validate_config({"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.9, "theta": 1.0})


@pytest.fixture
def high_finesse_config():
    """rho = 0.005, alpha_eff = 0.8, K = 2, T1 = 0, theta = 10 omega."""
    return validate_config({"K": 2, "omega": 1.0, "rho": 0.005, "alpha_eff": 0.8, "T1": 0.0, "theta": 10.0})


@pytest.fixture
def room_temperature_config():
    omega = 2.0 * math.pi * 1e10
    return validate_config(
        {"K": 3, "omega": omega, "rho": 1e-5, "alpha_eff": 0.999, "theta": temperature_to_theta(300.0)}
    )
