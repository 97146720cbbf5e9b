"""
Ray transformation functions of the oscillating cavity.

For harmonic mirror motion the output ray u is mapped back through p
reflections by the homographic (Moebius) relation

    exp(i omega f_p(u)) = (a_p z + b_p) / (conj(b_p) z + conj(a_p)),   z = exp(i omega u)
    a_p = (-i)**(K p) cosh(p alpha),   b_p = i**(2K+1) (-i)**(K p) sinh(p alpha).

Dividing the image by the static phase (-1)**(K p) z leaves conj(D)/D with
D = 1 + conj(c) tanh(p alpha) z and c = i**(2K+1). Re D >= 1 - |tanh| > 0, so
arg D stays inside (-pi/2, pi/2) and

    f_p(u)  = u - p L - 2 arg(D) / omega
    f'_p(u) = 1 / (cosh(p alpha)**2 |D|**2)

is the continuous, increasing real branch that reduces to u - p L at rest.
"""

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.core import CavityConfig

logger = logging.getLogger(__name__)

# exp(|p| alpha) must stay representable in a double
MAX_RAPIDITY = 700.0

_MINUS_I_POWERS = (1 + 0j, -1j, -1 + 0j, 1j)
_I_POWERS = (1 + 0j, 1j, -1 + 0j, -1j)


@dataclass(frozen=True)
class MobiusCoefficients:
    """The pair (a_p, b_p) for one ray index p; |a|^2 - |b|^2 = 1."""

    p: int
    a: complex
    b: complex


@dataclass(frozen=True)
class DephasingEvaluation:
    """f_p(u) with its derivative and the branch correction applied at the anchor."""

    u: float
    p: int
    value: float
    derivative: float
    branch_index: int


@dataclass(frozen=True)
class RayTable:
    """
    Dephasings of a block of rays sampled at a block of times.

    ``values[k, j]`` is f_{p_k}(t_j) and ``log_slopes[k, j]`` is
    log f'_{p_k}(t_j). Slopes are kept in log form so that attenuation weights
    can be folded in before exponentiating.
    """

    p_values: np.ndarray
    times: np.ndarray
    values: np.ndarray
    log_slopes: np.ndarray

    @property
    def slopes(self) -> np.ndarray:
        return np.exp(self.log_slopes)


class Phase:
    """
    Exact powers of the imaginary unit and overflow-safe hyperbolic functions.

    Powers are reduced modulo 4 in integer arithmetic, never built by repeated
    complex multiplication.
    """

    @staticmethod
    def minus_i_power(exponent: int) -> complex:
        return _MINUS_I_POWERS[exponent % 4]

    @staticmethod
    def i_power(exponent: int) -> complex:
        return _I_POWERS[exponent % 4]

    @staticmethod
    def cosh_sinh(x: float) -> tuple:
        """cosh and sinh through exp(|x|) so that |x| up to ~700 stays finite."""
        big = math.exp(min(abs(x), MAX_RAPIDITY + 9.0))
        small = 1.0 / big
        cosh = 0.5 * (big + small)
        sinh = math.copysign(0.5 * (big - small), x) if abs(x) > 1e-5 else math.sinh(x)
        return cosh, sinh

    @staticmethod
    def log_cosh(x: np.ndarray) -> np.ndarray:
        ax = np.abs(x)
        return np.where(ax == 0.0, 0.0, ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0))


def mobius_coefficients(p: int, cfg: CavityConfig) -> MobiusCoefficients:
    """
    Coefficients of the homographic map after p reflections.

    >>> from app.core import validate_config
    >>> cfg = validate_config({"K": 2, "omega": 1.0, "rho": 0.5, "alpha": 0.1})
    >>> m = mobius_coefficients(1, cfg)
    >>> round(m.a.real, 5), round(m.b.imag, 5)
    (-1.005, -0.10017)
    """
    p = int(p)
    cosh, sinh = Phase.cosh_sinh(p * cfg.alpha)
    phase = Phase.minus_i_power(cfg.K * p)
    a = phase * cosh
    b = Phase.i_power(2 * cfg.K + 1) * phase * sinh
    return MobiusCoefficients(p=p, a=a, b=b)


def _arg_and_log_modulus(phase: np.ndarray, p: np.ndarray, cfg: CavityConfig):
    """
    arg(D) and log|D|^2 for D = 1 + conj(c) tanh(p alpha) exp(i phase).

    Writing conj(c) tanh(x) exp(i phase) = (1 - eps) exp(i psi) with
    eps = 1 - |tanh x| = 2 e^{-2|x|} / (1 + e^{-2|x|}) gives

        Re D = 2 cos^2(psi / 2) - eps cos(psi),   Im D = (1 - eps) sin(psi).

    ``eps`` comes straight from the exponential, so D keeps its small real
    part near psi = pi after tanh itself has rounded to 1 (|x| beyond ~19).

    **Parameters:**
    - phase: omega t, broadcast against ``p``.
    - p: ray indices as floats.

    **Returns:** ``(arg D, log |D|^2)`` with arg D in [-pi/2, pi/2].
    """
    x = p * cfg.alpha
    decay = np.exp(-2.0 * np.abs(x))
    eps = 2.0 * decay / (1.0 + decay)
    # conj(c) = exp(-i (2K+1) pi / 2); a negative tanh adds half a turn
    psi = phase - (2 * cfg.K + 1) * math.pi / 2.0 + np.where(x < 0.0, math.pi, 0.0)
    psi = np.mod(psi + math.pi, 2.0 * math.pi) - math.pi
    real = 2.0 * np.cos(0.5 * psi) ** 2 - eps * np.cos(psi)
    imag = (1.0 - eps) * np.sin(psi)
    with np.errstate(divide="ignore"):
        return np.arctan2(imag, real), np.log(real * real + imag * imag)


def dephasing(u: float, p: int, cfg: CavityConfig) -> DephasingEvaluation:
    """
    Evaluate f_p(u) and f'_p(u).

    The branch is fixed at the anchor u0 = 0 by the integer multiple of the
    period that brings f_p(0) closest to -p L; with the representation above
    that correction is always zero, and it is reported in ``branch_index``.
    """
    p = int(p)
    period = cfg.period
    p_arr = np.array(float(p))
    anchor_arg, _ = _arg_and_log_modulus(np.array(0.0), p_arr, cfg)
    anchor = -p * cfg.length - 2.0 * float(anchor_arg) / cfg.omega
    branch = int(round((anchor + p * cfg.length) / period))

    arg, log_mod = _arg_and_log_modulus(np.array(cfg.omega * u), p_arr, cfg)
    value = u - p * cfg.length - 2.0 * float(arg) / cfg.omega - branch * period
    log_slope = -2.0 * float(Phase.log_cosh(p_arr * cfg.alpha)) - float(log_mod)
    return DephasingEvaluation(
        u=u, p=p, value=value, derivative=math.exp(log_slope), branch_index=branch
    )


def dephasing_derivative(u: float, p: int, cfg: CavityConfig) -> float:
    """f'_p(u) = 1 / |conj(b_p) exp(i omega u) + conj(a_p)|^2, always positive."""
    coeffs = mobius_coefficients(p, cfg)
    z = complex(math.cos(cfg.omega * u), math.sin(cfg.omega * u))
    return 1.0 / abs(coeffs.b.conjugate() * z + coeffs.a.conjugate()) ** 2


def ray_table(times: Sequence[float], p_values: Sequence[int], cfg: CavityConfig) -> RayTable:
    """
    Vectorised dephasings for every (p, t) pair.

    **Parameters:**
    - times: output times t_j.
    - p_values: ray indices p_k; negative values are allowed.
    - cfg: validated cavity configuration.

    **Returns:** a ``RayTable`` with rows ordered like ``p_values``.

    Rays whose rapidity |p| alpha exceeds ``MAX_RAPIDITY`` get a log slope of
    -inf; their attenuation weight makes them negligible anyway.
    """
    times = np.asarray(times, dtype=float)
    p_arr = np.asarray(p_values, dtype=float)
    phase = cfg.omega * times[np.newaxis, :]
    arg, log_mod = _arg_and_log_modulus(phase, p_arr[:, np.newaxis], cfg)
    values = (
        times[np.newaxis, :]
        - p_arr[:, np.newaxis] * cfg.length
        - 2.0 * arg / cfg.omega
    )
    # f' = sech^2(p alpha) / |D|^2, kept in log form
    log_slopes = -2.0 * Phase.log_cosh(p_arr * cfg.alpha)[:, np.newaxis] - log_mod
    too_fast = np.abs(p_arr) * cfg.alpha > MAX_RAPIDITY
    if np.any(too_fast):
        logger.debug("skipping %d rays beyond the rapidity cap", int(too_fast.sum()))
        log_slopes[too_fast, :] = -np.inf
    return RayTable(
        p_values=np.asarray(p_values, dtype=int),
        times=times,
        values=values,
        log_slopes=log_slopes,
    )
