"""
Configuration, unit conventions, physical constants and validation.

Every other package consumes a validated ``CavityConfig``. All internal math
uses natural units (hbar = c = 1): times and lengths share one unit, the
mechanical frequency ``omega`` and the temperature ``theta`` are angular
frequencies in the inverse of that unit. Energies are reported in units of
hbar*omega and energy densities in units of hbar*omega**2; SI conversion only
happens at the CLI boundary through ``Units``.
"""

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, Mapping, Optional, Union

from scipy import constants

logger = logging.getLogger(__name__)

# relative tolerance between r = exp(-2 rho) and sqrt(R1 R2)
MIRROR_TOLERANCE = 1e-9

# tolerance on the unitarity relations R + T = 1 and on redundant inputs
CONSISTENCY_TOLERANCE = 1e-12


# -----------------------------------------------------------------------------------
# Exceptions
# -----------------------------------------------------------------------------------

class CavityError(ValueError):
    """Base class for every domain error raised by the simulator."""


class InvalidParameter(CavityError):
    """
    A configuration field is missing, unknown, non-numeric or out of range.

    The offending key is kept on ``key`` so the CLI can name it.
    """

    def __init__(self, key: str, message: str) -> None:
        self.key = key
        super().__init__(f"{key}: {message}")


class InconsistentMirrors(CavityError):
    """The roundtrip attenuation r disagrees with sqrt(R1 R2)."""


class ThresholdExceeded(CavityError):
    """The effective rapidity reached the parametric oscillation threshold."""


class PoleProximity(CavityError):
    """alpha sits on (or numerically next to) the pole alpha = rho."""


class SingularKernel(CavityError, ZeroDivisionError):
    """Two distinct rays coincide, so the thermal kernel diverges."""


class NoPulses(CavityError):
    """No sample rises far enough above the background to count as a pulse."""


class QuadratureNonConvergence(CavityError, ArithmeticError):
    """Refinement stalled before reaching the requested tolerance."""


class RegimeWarning(UserWarning):
    """An estimate is used outside the regime where it was derived."""


# -----------------------------------------------------------------------------------
# Units
# -----------------------------------------------------------------------------------

class Units:
    """
    Physical constants and the SI <-> natural-unit bridge.

    Internal formulas never see these constants; they are used only where a
    temperature in kelvin or an energy in joules crosses the CLI boundary.
    """

    HBAR: float = constants.hbar
    KB: float = constants.k
    NATURAL = True  # hbar = c = 1 for every internal computation

    @staticmethod
    def temperature_to_theta(temperature: float) -> float:
        """
        Convert a temperature in kelvin into theta = 2 pi kB T / hbar (rad/s).

        >>> round(Units.temperature_to_theta(300.0) / (2 * math.pi * 1e10))
        3928
        """
        if temperature < 0 or math.isnan(temperature):
            raise InvalidParameter("temperature", f"must be >= 0 K, got {temperature}")
        return 2.0 * math.pi * Units.KB * temperature / Units.HBAR

    @staticmethod
    def theta_to_temperature(theta: float) -> float:
        """Inverse of ``temperature_to_theta``."""
        if theta < 0 or math.isnan(theta):
            raise InvalidParameter("theta", f"must be >= 0, got {theta}")
        return theta * Units.HBAR / (2.0 * math.pi * Units.KB)

    @staticmethod
    def energy_to_joules(value: float, omega_si: float) -> float:
        """Energy in units of hbar*omega -> joules, omega in rad/s."""
        return value * Units.HBAR * omega_si

    @staticmethod
    def density_to_si(value: float, omega_si: float) -> float:
        """Energy density (flux) in units of hbar*omega**2 -> watts."""
        return value * Units.HBAR * omega_si ** 2


def temperature_to_theta(temperature: float) -> float:
    """Module-level alias of ``Units.temperature_to_theta``."""
    return Units.temperature_to_theta(temperature)


def theta_to_temperature(theta: float) -> float:
    """Module-level alias of ``Units.theta_to_temperature``."""
    return Units.theta_to_temperature(theta)


def vacuum_visibility_temperature(omega_si: float, fraction: float = 0.1) -> float:
    """
    Temperature (kelvin) at which theta equals ``fraction`` times omega.

    Pulse shaping from vacuum fluctuations dominates the thermal contribution
    only while theta stays around a tenth of the mechanical frequency.
    """
    if omega_si <= 0:
        raise InvalidParameter("omega", f"must be > 0, got {omega_si}")
    if fraction <= 0:
        raise InvalidParameter("fraction", f"must be > 0, got {fraction}")
    return Units.theta_to_temperature(fraction * omega_si)


# -----------------------------------------------------------------------------------
# Configuration
# -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class CavityConfig:
    """
    Validated physical parameters of the oscillating cavity.

    Immutable after validation, so one instance can be shared by any number of
    workers. Build it with ``validate_config``, never directly.
    """

    K: int
    omega: float
    length: float
    alpha: float
    rho: float
    r: float
    R1: float
    T1: float
    R2: float
    T2: float
    theta: float
    alpha_eff: float

    @property
    def period(self) -> float:
        """Mechanical period 2 pi / omega."""
        return 2.0 * math.pi / self.omega

    @property
    def theta_ratio(self) -> float:
        """Dimensionless temperature theta / omega."""
        return self.theta / self.omega

    def as_dict(self) -> Dict[str, float]:
        return asdict(self)

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form of every field."""
        payload = json.dumps(self.as_dict(), sort_keys=True, default=repr)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


KNOWN_KEYS = frozenset(
    {"K", "omega", "length", "alpha", "alpha_eff", "rho", "r",
     "R1", "T1", "R2", "T2", "theta"}
)


def _number(raw: Mapping[str, object], key: str) -> Optional[float]:
    if key not in raw or raw[key] is None:
        return None
    try:
        value = float(raw[key])
    except (TypeError, ValueError):
        raise InvalidParameter(key, f"not a number: {raw[key]!r}") from None
    if math.isnan(value) or math.isinf(value):
        raise InvalidParameter(key, f"must be finite, got {value}")
    return value


def _close(a: float, b: float, tolerance: float) -> bool:
    return abs(a - b) <= tolerance * max(abs(a), abs(b), 1e-300)


def _unit_interval(key: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise InvalidParameter(key, f"must lie in [0, 1], got {value}")
    return value


def _mirror(raw: Mapping[str, object], reflect: str, transmit: str) -> Optional[float]:
    """Reflection coefficient from R and/or T, checking R + T = 1 when both appear."""
    big_r = _number(raw, reflect)
    big_t = _number(raw, transmit)
    if big_r is None and big_t is None:
        return None
    if big_r is None:
        return 1.0 - _unit_interval(transmit, big_t)
    _unit_interval(reflect, big_r)
    if big_t is not None:
        _unit_interval(transmit, big_t)
        if abs(big_r + big_t - 1.0) > CONSISTENCY_TOLERANCE:
            raise InvalidParameter(
                transmit, f"{reflect} + {transmit} must equal 1, got {big_r + big_t}"
            )
    return big_r


def validate_config(
    raw: Mapping[str, object], mirror_tolerance: float = MIRROR_TOLERANCE
) -> CavityConfig:
    """
    Turn a raw parameter set into a fully populated ``CavityConfig``.

    **Accepted keys:** ``K``, ``omega`` (or ``length``), ``alpha`` (or
    ``alpha_eff``), ``rho`` and/or ``r``, ``R1``/``T1``, ``R2``/``T2``,
    ``theta`` (default 0). Mirror 1 defaults to a perfect reflector (T1 = 0)
    and R2 then follows from r = sqrt(R1 R2).

    **Rules:**
    - When both rho and r are given, r wins and rho is recomputed as
      -ln(r)/2, unless the given rho already reproduces r exactly.
    - Redundant inputs (length, alpha_eff, T1, T2) must agree with the
      primary ones.

    **Raises:** ``InvalidParameter``, ``InconsistentMirrors``,
    ``ThresholdExceeded``.

    >>> cfg = validate_config({"K": 2, "omega": 1.0, "rho": 0.05, "alpha": 0.0225})
    >>> round(cfg.alpha_eff, 12)
    0.9
    """
    unknown = sorted(set(raw) - KNOWN_KEYS)
    if unknown:
        raise InvalidParameter(unknown[0], "unknown configuration key")
    if not mirror_tolerance > 0:
        raise InvalidParameter("mirror_tolerance", f"must be > 0, got {mirror_tolerance}")

    # LBYL on the integer order: everything else depends on it
    k_value = _number(raw, "K")
    if k_value is None:
        raise InvalidParameter("K", "missing")
    if k_value != int(k_value) or k_value < 1:
        raise InvalidParameter("K", f"must be a positive integer, got {raw['K']!r}")
    order = int(k_value)

    omega = _number(raw, "omega")
    length = _number(raw, "length")
    if omega is None and length is None:
        raise InvalidParameter("omega", "missing (give omega or length)")
    if omega is None:
        if length <= 0:
            raise InvalidParameter("length", f"must be > 0, got {length}")
        omega = order * math.pi / length
    if omega <= 0:
        raise InvalidParameter("omega", f"must be > 0, got {omega}")
    derived_length = order * math.pi / omega
    if length is not None and not _close(length, derived_length, CONSISTENCY_TOLERANCE):
        raise InvalidParameter("length", f"inconsistent with omega: expected {derived_length}")

    reflect_1 = _mirror(raw, "R1", "T1")
    reflect_2 = _mirror(raw, "R2", "T2")

    rho = _number(raw, "rho")
    r = _number(raw, "r")
    if r is not None:
        if not 0.0 < r < 1.0:
            raise InvalidParameter("r", f"must lie in (0, 1), got {r}")
        if rho is not None and rho > 0 and math.exp(-2.0 * rho) == r:
            pass  # the given rho already reproduces r
        else:
            if rho is not None and not _close(math.exp(-2.0 * rho), r, mirror_tolerance):
                raise InconsistentMirrors(
                    f"r = {r} disagrees with exp(-2 rho) = {math.exp(-2.0 * rho)}"
                )
            rho = -0.5 * math.log(r)
    elif rho is not None:
        if rho <= 0:
            raise InvalidParameter("rho", f"must be > 0, got {rho}")
        r = math.exp(-2.0 * rho)
    elif reflect_1 is not None and reflect_2 is not None:
        r = math.sqrt(reflect_1 * reflect_2)
        if not 0.0 < r < 1.0:
            raise InvalidParameter("R2", f"sqrt(R1 R2) must lie in (0, 1), got {r}")
        rho = -0.5 * math.log(r)
    else:
        raise InvalidParameter("rho", "missing (give rho, r, or both R1 and R2)")
    if rho <= 0:
        raise InvalidParameter("rho", f"must be > 0, got {rho}")

    # default mirror preset: mirror 1 perfectly reflecting
    if reflect_1 is None and reflect_2 is None:
        reflect_1 = 1.0
    if reflect_2 is None:
        if reflect_1 == 0.0:
            raise InvalidParameter("R1", "a transparent mirror 1 needs an explicit R2")
        reflect_2 = r * r / reflect_1
        _unit_interval("R2", reflect_2)
    elif reflect_1 is None:
        if reflect_2 == 0.0:
            raise InvalidParameter("R2", "a transparent mirror 2 needs an explicit R1")
        reflect_1 = r * r / reflect_2
        _unit_interval("R1", reflect_1)
    mirror_r = math.sqrt(reflect_1 * reflect_2)
    if not _close(r, mirror_r, mirror_tolerance):
        raise InconsistentMirrors(
            f"r = {r} but sqrt(R1 R2) = {mirror_r} (tolerance {mirror_tolerance:g})"
        )

    alpha = _number(raw, "alpha")
    alpha_eff = _number(raw, "alpha_eff")
    if alpha is None and alpha_eff is None:
        raise InvalidParameter("alpha", "missing (give alpha or alpha_eff)")
    if alpha is None:
        alpha = alpha_eff * rho / 2.0
    if alpha < 0:
        raise InvalidParameter("alpha", f"must be >= 0, got {alpha}")
    derived_eff = 2.0 * alpha / rho
    if alpha_eff is not None and not _close(alpha_eff, derived_eff, mirror_tolerance):
        raise InvalidParameter("alpha_eff", f"inconsistent with alpha/rho: expected {derived_eff}")
    if derived_eff >= 1.0:
        raise ThresholdExceeded(
            f"alpha_eff = {derived_eff:.6g} >= 1: parametric oscillation threshold reached"
        )

    theta = _number(raw, "theta")
    if theta is None:
        theta = 0.0
    if theta < 0:
        raise InvalidParameter("theta", f"must be >= 0, got {theta}")

    cfg = CavityConfig(
        K=order,
        omega=omega,
        length=derived_length,
        alpha=alpha,
        rho=rho,
        r=r,
        R1=reflect_1,
        T1=1.0 - reflect_1,
        R2=reflect_2,
        T2=1.0 - reflect_2,
        theta=theta,
        alpha_eff=derived_eff,
    )
    logger.debug("validated config %s", cfg)
    return cfg


def load_config_file(path: Union[str, Path]) -> Dict[str, str]:
    """
    Read a flat ``key = value`` text file; ``#`` starts a comment.

    Values are returned as strings; ``validate_config`` (or the CLI's unit
    conversion) turns them into numbers and names the offending key when that
    fails.
    """
    raw: Dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        try:
            key, value = content.split("=", 1)
        except ValueError:
            raise InvalidParameter(f"line {number}", f"expected 'key = value', got {content!r}") from None
        key = key.strip()
        if not key:
            raise InvalidParameter(f"line {number}", "empty key")
        raw[key] = value.strip()
    return raw
