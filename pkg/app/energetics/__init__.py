"""
Closed-form energies integrated over one mechanical period.

All energies are in units of hbar*omega and the temperature enters through
x = theta / omega. Below threshold, in the high-finesse limit,

    E     = x^2/12 + (1/6) rho alpha^2/(rho^2 - alpha^2) F + (1/6) alpha^2 (1 + x^2)
    E_cav = K x^2/24 + (K/24) alpha^2/(rho^2 - alpha^2) F
    F     = 1 + x^2 (1 - 24 sum_{l>=1} 1/sinh^2(2 pi K l x))

and at threshold (alpha = rho/2) they reduce to

    E     = x^2/12 + rho F/18 + rho^2 (1 + x^2)/24
    E_cav = K x^2/24 + K F/72.

Photon counts take two photons per mechanical quantum.
"""

import logging
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Dict

import numpy as np

from app.core import (
    CavityConfig,
    InvalidParameter,
    PoleProximity,
    RegimeWarning,
    ThresholdExceeded,
)

logger = logging.getLogger(__name__)

# theta/omega below which F uses its small-temperature expansion
SMALL_THETA = 1e-3

# |rho - alpha| / rho below which the resonant factor is refused
POLE_TOLERANCE = 1e-6

# theta/omega above which a pulse holds rho x^2 / 9 photons
HIGH_TEMPERATURE = 10.0

PHOTONS_PER_QUANTUM = 2.0

THETA_CONVENTIONS = ("dimensionless", "literal")


@dataclass(frozen=True)
class EnergyBudget:
    """
    Period-integrated energies in units of hbar*omega.

    ``E_total = E_background + E_motion`` and
    ``E_intracavity = E_intracavity_background + E_intracavity_motion``
    hold by construction.
    """

    E_total: float
    E_background: float
    E_motion: float
    E_intracavity: float
    E_intracavity_background: float
    E_intracavity_motion: float
    F_value: float
    photons_emitted: float
    photons_intracavity: float
    at_threshold: bool
    theta_convention: str

    def as_dict(self) -> Dict[str, object]:
        return asdict(self)


class ClosedForm:
    """
    The individual terms of the closed-form energies as static methods.

    Each method takes plain numbers so the terms can be checked one by one.
    """

    @staticmethod
    def background_energy(x: float) -> float:
        """Reflected thermal energy per period, x^2/12."""
        return x * x / 12.0

    @staticmethod
    def intracavity_background(K: int, x: float) -> float:
        """Thermal energy stored in the cavity, K x^2/24."""
        return K * x * x / 24.0

    @staticmethod
    def direct_motion(alpha: float, x: float, theta_convention: str = "dimensionless",
                      omega: float = 1.0) -> float:
        """
        The non-resonant alpha^2 (1 + theta^2)/6 term.

        ``dimensionless`` reads theta^2 as (theta/omega)^2; ``literal`` uses
        theta^2 in the configured frequency unit.
        """
        if theta_convention not in THETA_CONVENTIONS:
            raise InvalidParameter(
                "theta_convention", f"must be one of {THETA_CONVENTIONS}, got {theta_convention!r}"
            )
        theta_term = x * x if theta_convention == "dimensionless" else (x * omega) ** 2
        return alpha * alpha * (1.0 + theta_term) / 6.0

    @staticmethod
    def photons(energy: float) -> float:
        """Photon count for a motion-induced energy in units of hbar*omega."""
        return PHOTONS_PER_QUANTUM * energy


def resonant_factor(rho: float, alpha: float) -> float:
    """
    The cavity-enhanced factor rho alpha^2 / (rho^2 - alpha^2).

    Raises ``PoleProximity`` within a relative distance 1e-6 of alpha = rho.

    >>> round(resonant_factor(1.0, 0.5), 12)
    0.333333333333
    """
    if rho <= 0:
        raise InvalidParameter("rho", f"must be > 0, got {rho}")
    if abs(rho - alpha) / rho < POLE_TOLERANCE:
        raise PoleProximity(f"alpha = {alpha} is within {POLE_TOLERANCE:g} of the pole alpha = rho")
    return rho * alpha * alpha / ((rho - alpha) * (rho + alpha))


def _hyperbolic_sum(a: float, tol: float) -> float:
    """sum_{l>=1} 1/sinh^2(a l), cut once a term falls below tol."""
    count = max(1, math.ceil(math.log(4.0 / tol) / (2.0 * a)))
    l = np.arange(1, count + 1, dtype=float)
    decay = np.exp(-2.0 * a * l)
    terms = 4.0 * decay / np.expm1(-2.0 * a * l) ** 2
    return math.fsum(terms)


def F_factor(theta: float, K: int, omega: float, tol: float = 1e-15) -> float:
    """
    Temperature-dependent resonance factor F.

    Below theta/omega = ``SMALL_THETA`` the sum is replaced by its expansion
    sum 1/sinh^2(a l) = pi^2/(6 a^2) - 1/a + 1/6, which gives
    F = 1 - 1/K^2 + 12 x/(pi K) - 3 x^2 up to exponentially small terms.

    >>> round(F_factor(0.0, 2, 1.0), 12)
    0.75
    """
    if theta < 0 or math.isnan(theta):
        raise InvalidParameter("theta", f"must be >= 0, got {theta}")
    if K < 1:
        raise InvalidParameter("K", f"must be >= 1, got {K}")
    if not tol > 0:
        raise InvalidParameter("tol", f"must be > 0, got {tol}")
    x = theta / omega
    if x < SMALL_THETA:
        return 1.0 - 1.0 / K ** 2 + 12.0 * x / (math.pi * K) - 3.0 * x * x
    a = 2.0 * math.pi * K * x
    return 1.0 + x * x * (1.0 - 24.0 * _hyperbolic_sum(a, tol))


def energy_budget(
    cfg: CavityConfig,
    tol: float = 1e-15,
    allow_threshold: bool = False,
    theta_convention: str = "dimensionless",
) -> EnergyBudget:
    """
    Emitted and stored energies per period for a validated configuration.

    ``allow_threshold`` lets a configuration at alpha_eff = 1 through, which
    is how the threshold formulas are cross-checked.
    """
    if cfg.alpha_eff >= 1.0 and not allow_threshold:
        raise ThresholdExceeded(f"alpha_eff = {cfg.alpha_eff:.6g} >= 1")
    x = cfg.theta_ratio
    F = F_factor(cfg.theta, cfg.K, cfg.omega, tol)
    resonant = resonant_factor(cfg.rho, cfg.alpha)

    E_background = ClosedForm.background_energy(x)
    E_motion = resonant * F / 6.0 + ClosedForm.direct_motion(
        cfg.alpha, x, theta_convention, cfg.omega
    )
    cavity_background = ClosedForm.intracavity_background(cfg.K, x)
    cavity_motion = cfg.K / 24.0 * (resonant / cfg.rho) * F
    logger.debug("energy budget: F=%r E_motion=%r cavity_motion=%r", F, E_motion, cavity_motion)

    return EnergyBudget(
        E_total=E_background + E_motion,
        E_background=E_background,
        E_motion=E_motion,
        E_intracavity=cavity_background + cavity_motion,
        E_intracavity_background=cavity_background,
        E_intracavity_motion=cavity_motion,
        F_value=F,
        photons_emitted=ClosedForm.photons(E_motion),
        photons_intracavity=ClosedForm.photons(cavity_motion),
        at_threshold=cfg.alpha_eff >= 1.0,
        theta_convention=theta_convention,
    )


def threshold_budget(
    cfg: CavityConfig, tol: float = 1e-15, theta_convention: str = "dimensionless"
) -> EnergyBudget:
    """The same energies evaluated at alpha = rho/2, whatever alpha ``cfg`` holds."""
    x = cfg.theta_ratio
    F = F_factor(cfg.theta, cfg.K, cfg.omega, tol)
    half = cfg.rho / 2.0

    E_background = ClosedForm.background_energy(x)
    E_motion = cfg.rho * F / 18.0 + ClosedForm.direct_motion(half, x, theta_convention, cfg.omega)
    cavity_background = ClosedForm.intracavity_background(cfg.K, x)
    cavity_motion = cfg.K * F / 72.0

    return EnergyBudget(
        E_total=E_background + E_motion,
        E_background=E_background,
        E_motion=E_motion,
        E_intracavity=cavity_background + cavity_motion,
        E_intracavity_background=cavity_background,
        E_intracavity_motion=cavity_motion,
        F_value=F,
        photons_emitted=ClosedForm.photons(E_motion),
        photons_intracavity=ClosedForm.photons(cavity_motion),
        at_threshold=True,
        theta_convention=theta_convention,
    )


def photons_per_pulse(cfg: CavityConfig, pulses_per_period: int = 1, tol: float = 1e-15) -> float:
    """
    Motion-induced photons in one emitted pulse at threshold.

    For theta/omega > 10 this is rho x^2 / 9. Elsewhere the threshold photon
    count per period is divided by ``pulses_per_period`` (measure it with
    ``app.analysis.detect_pulses``) and a ``RegimeWarning`` is issued.

    >>> from app.core import validate_config
    >>> cfg = validate_config({"K": 3, "omega": 1.0, "rho": 9e-5, "alpha_eff": 0.5, "theta": 1000.0})
    >>> round(photons_per_pulse(cfg), 9)
    10.0
    """
    x = cfg.theta_ratio
    if x > HIGH_TEMPERATURE:
        return cfg.rho * x * x / 9.0
    if pulses_per_period < 1:
        raise InvalidParameter("pulses_per_period", f"must be >= 1, got {pulses_per_period}")
    warnings.warn(
        f"theta/omega = {x:.4g} <= {HIGH_TEMPERATURE:g}: using the threshold budget "
        f"spread over {pulses_per_period} pulse(s)",
        RegimeWarning,
        stacklevel=2,
    )
    return threshold_budget(cfg, tol).photons_emitted / pulses_per_period


def photon_ratios(cfg: CavityConfig, tol: float = 1e-15) -> Dict[str, float]:
    """
    Motion-induced over thermal energy at threshold, outside and inside the cavity.

    At high temperature these approach 2 rho / 3 and 1/3. Both are infinite
    in vacuum, where there is no thermal energy to compare with.
    """
    budget = threshold_budget(cfg, tol)
    if budget.E_background == 0.0:
        return {"emitted": math.inf, "intracavity": math.inf}
    return {
        "emitted": budget.E_motion / budget.E_background,
        "intracavity": budget.E_intracavity_motion / budget.E_intracavity_background,
    }
