"""
Instantaneous energy density emitted through mirror 2.

The density is the sum of six terms built from the dephasings f_p of the rays
leaving the cavity at time t:

    direct      R2/48pi      {omega^2 (f'_{-1}^2 - 1) + theta^2 f'_{-1}^2}
    even        T1 T2/48pi   sum_n r^{2n} {omega^2 (f'_{2n}^2 - 1) + theta^2 f'_{2n}^2}
    odd         T2^2 R1/48pi sum_n r^{2n} {omega^2 (f'_{2n+1}^2 - 1) + theta^2 f'_{2n+1}^2}
    cross       T2/8pi       sum_n r^{n+1} f'_{-1} f'_{2n+1} k(f_{-1} - f_{2n+1})
    even_pairs -T1 T2/16pi   sum_{n != m} r^{n+m} f'_{2n} f'_{2m} k(f_{2n} - f_{2m})
    odd_pairs  -T2^2 R1/16pi sum_{n != m} r^{n+m} f'_{2n+1} f'_{2m+1} k(f_{2n+1} - f_{2m+1})

with the thermal kernel k(d) = theta^2 / sinh^2(theta d / 2), which becomes the
vacuum kernel 4/d^2 at theta = 0. Each term is a registered ``DensityTerm``
subclass, created through ``DensityTermFactory``.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.core import CavityConfig, InvalidParameter, SingularKernel
from app.dephasing import ray_table

logger = logging.getLogger(__name__)

# below this value of theta |delta| / 2 the kernel uses its Laurent expansion
KERNEL_SWITCH = 1e-4

# elements of one (rays x times) block handled at once
BLOCK_ELEMENTS = 4_000_000

TRUNCATION_MODES = ("pointwise", "period")


# -----------------------------------------------------------------------------------
# Truncation
# -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationPolicy:
    """
    Where the infinite ray sums are cut.

    A term of index n is bounded by a geometric weight q**n that already
    includes the growth of f' below threshold. In ``pointwise`` mode the bound
    holds at every instant, q = exp(-4 rho (1 - alpha_eff)); in ``period`` mode
    it holds for the period average, q = exp(-2 rho (2 - alpha_eff)). Single
    sums stop once q**n drops below ``tail_tolerance``, double sums once
    sqrt(q)**(n+m) does. ``pair_cap`` limits |n - m|; when left to None it is
    derived from the kernel bound.
    """

    tail_tolerance: float = 1e-12
    max_index: int = 10_000
    pair_cap: Optional[int] = None
    mode: str = "pointwise"

    def __post_init__(self) -> None:
        if not self.tail_tolerance > 0:
            raise InvalidParameter("tail_tolerance", f"must be > 0, got {self.tail_tolerance}")
        if self.max_index < 1:
            raise InvalidParameter("max_index", f"must be >= 1, got {self.max_index}")
        if self.pair_cap is not None and self.pair_cap < 0:
            raise InvalidParameter("pair_cap", f"must be >= 0, got {self.pair_cap}")
        if self.mode not in TRUNCATION_MODES:
            raise InvalidParameter("mode", f"must be one of {TRUNCATION_MODES}, got {self.mode!r}")

    def log_ratio(self, cfg: CavityConfig) -> float:
        """log q for the single sums; always negative below threshold."""
        if self.mode == "pointwise":
            return -4.0 * cfg.rho + 8.0 * cfg.alpha
        return -4.0 * cfg.rho + 4.0 * cfg.alpha

    def _limit(self, log_q: float, label: str) -> int:
        index = math.ceil(math.log(self.tail_tolerance) / log_q)
        if index > self.max_index:
            logger.warning(
                "%s sum capped at max_index=%d (tolerance needs %d)", label, self.max_index, index
            )
            return self.max_index
        return max(index, 1)

    def single_limit(self, cfg: CavityConfig) -> int:
        """Largest n kept in the single sums."""
        return self._limit(self.log_ratio(cfg), "single")

    def pair_limit(self, cfg: CavityConfig) -> int:
        """Largest n + m kept in the double sums."""
        return self._limit(0.5 * self.log_ratio(cfg), "pair")

    def diagonal_cap(self, cfg: CavityConfig) -> int:
        """
        Largest |n - m| kept in the kernel sums (0 drops them all).

        Rays whose indices differ by 2j are at least 2 j L - 2 pi / omega
        apart, which bounds the kernel. Diagonals stop once that bound, times
        the attenuation weight and j (for the 1/d^2 tail of the vacuum kernel),
        falls below the tolerance on the omega^2 + theta^2 scale.
        """
        limit = self.pair_limit(cfg)
        if self.pair_cap is not None:
            return min(self.pair_cap, limit)
        log_q2 = 0.5 * self.log_ratio(cfg)
        scale = self.tail_tolerance * (cfg.omega ** 2 + cfg.theta ** 2)
        for j in range(1, limit + 1):
            delta_min = 2.0 * j * cfg.length - cfg.period
            if delta_min <= 0.0:
                continue
            bound = float(thermal_kernel(delta_min, cfg.theta)) * j * math.exp(j * log_q2)
            if bound <= scale:
                logger.debug("kernel sums pruned beyond |n - m| = %d", j - 1)
                return j - 1
        return limit


@dataclass(frozen=True)
class DensityPoint:
    """
    Energy density at one instant, in units of hbar*omega**2.

    ``contrast`` is (e_u - background) / background when theta > 0 and is
    measured against hbar*omega**2/48pi in vacuum, where the background is 0.
    """

    t: float
    e_u: float
    background: float
    contrast: float


# -----------------------------------------------------------------------------------
# Kernel and background
# -----------------------------------------------------------------------------------

def thermal_kernel(delta, theta: float):
    """
    theta^2 / sinh^2(theta delta / 2), with 4/delta^2 at theta = 0.

    Below theta |delta| / 2 = ``KERNEL_SWITCH`` the Laurent series
    4/delta^2 - theta^2/3 + theta^4 delta^2/60 is used.

    **Parameters:**
    - delta: ray separation, scalar or array.
    - theta: temperature in the units of the times.

    **Returns:** a float for scalar input, an array otherwise.

    **Raises:**
    - SingularKernel: when any delta is exactly 0.

    >>> round(thermal_kernel(2.0, 1.0), 5)
    0.72406
    """
    d = np.asarray(delta, dtype=float)
    if np.any(d == 0.0):
        raise SingularKernel("thermal kernel evaluated at coincident rays (delta = 0)")
    if theta == 0.0:
        out = 4.0 / d ** 2
    else:
        x = 0.5 * theta * np.abs(d)
        # 1/sinh^2 x = 4 e^{-2x} / (1 - e^{-2x})^2, which underflows to 0 far out
        with np.errstate(over="ignore", under="ignore"):
            far = theta ** 2 * 4.0 * np.exp(-2.0 * x) / np.expm1(-2.0 * x) ** 2
        near = 4.0 / d ** 2 - theta ** 2 / 3.0 + theta ** 4 * d ** 2 / 60.0
        out = np.where(x < KERNEL_SWITCH, near, far)
    if out.ndim == 0:
        return float(out)
    return out


def background_density(cfg: CavityConfig) -> float:
    """Reflected thermal background hbar theta^2 / 48 pi, in units of hbar*omega**2."""
    return cfg.theta_ratio ** 2 / (48.0 * math.pi)


def contrast_reference(cfg: CavityConfig) -> float:
    """Density against which contrasts are measured (the background, or 1/48pi in vacuum)."""
    background = background_density(cfg)
    return background if background > 0.0 else 1.0 / (48.0 * math.pi)


# -----------------------------------------------------------------------------------
# Shared ray sums
# -----------------------------------------------------------------------------------

class RaySums:
    """
    Dephasings and attenuation weights of one block of times.

    Every density term of the block reads from the same ``RayTable``, which
    holds the rays p = -1 .. 2*top + 1.
    """

    def __init__(
        self,
        times: Sequence[float],
        cfg: CavityConfig,
        trunc: TruncationPolicy,
        classical: bool = False,
    ) -> None:
        self.cfg = cfg
        self.trunc = trunc
        self.times = np.atleast_1d(np.asarray(times, dtype=float))
        self.single_limit = trunc.single_limit(cfg)
        self.pair_limit = trunc.pair_limit(cfg)
        self.diagonal_cap = 0 if classical else trunc.diagonal_cap(cfg)
        # highest family index n any term reads
        self.top = max(self.single_limit, self.pair_limit if self.diagonal_cap > 0 else 0)
        self.table = ray_table(self.times, np.arange(-1, 2 * self.top + 2), cfg)
        self.log_r = math.log(cfg.r)

    def direct(self) -> Tuple[np.ndarray, np.ndarray]:
        """f_{-1} and log f'_{-1}."""
        return self.table.values[0], self.table.log_slopes[0]

    def family(self, parity: int, limit: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        f_{2n+parity} and log(r^n f'_{2n+parity}) for n = 0 .. limit.

        Row 0 of the table is p = -1, so p = 2n + parity sits on row 2n + parity + 1.
        """
        rows = slice(1 + parity, 2 * limit + 2 + parity, 2)
        values = self.table.values[rows]
        n = np.arange(limit + 1, dtype=float)[:, np.newaxis]
        log_weights = n * self.log_r + self.table.log_slopes[rows]
        return values, log_weights

    def kernel(self, delta: np.ndarray, label: str, offset: int) -> np.ndarray:
        """Thermal kernel with the ray indices and time named when rays coincide."""
        hits = np.argwhere(delta == 0.0)
        if hits.size:
            n, column = (int(v) for v in hits[0])
            raise SingularKernel(
                f"{label}: rays n={n} and m={n + offset} coincide at t={float(self.times[column])!r}"
            )
        return thermal_kernel(delta, self.cfg.theta)

    def single_sum(self, parity: int) -> np.ndarray:
        """sum_n r^{2n} {omega^2 (f'^2 - 1) + theta^2 f'^2} over one ray family."""
        _, log_w = self.family(parity, self.single_limit)
        n = np.arange(self.single_limit + 1, dtype=float)[:, np.newaxis]
        squared = np.exp(2.0 * log_w)
        # r^{2n} alone; subtracting it keeps the omega^2 part at 0 for a static mirror
        bare = np.exp(2.0 * (n * self.log_r))
        omega2, theta2 = self.cfg.omega ** 2, self.cfg.theta ** 2
        return omega2 * np.sum(squared - bare, axis=0) + theta2 * np.sum(squared, axis=0)

    def cross_sum(self) -> np.ndarray:
        """sum_n r^{n+1} f'_{-1} f'_{2n+1} k(f_{-1} - f_{2n+1}); diagonal j = n + 1."""
        limit = min(self.pair_limit, self.diagonal_cap - 1)
        if limit < 0:
            return np.zeros_like(self.times)
        f_direct, log_direct = self.direct()
        values, log_w = self.family(1, limit)
        kernel = self.kernel(f_direct[np.newaxis, :] - values, "cross", 0)
        return self.cfg.r * np.exp(log_direct) * np.sum(np.exp(log_w) * kernel, axis=0)

    def pair_sum(self, parity: int) -> np.ndarray:
        """sum_{n != m} r^{n+m} f'_a f'_b k(f_a - f_b), summed as twice the n < m half."""
        total = np.zeros_like(self.times)
        if self.diagonal_cap < 1:
            return total
        values, log_w = self.family(parity, self.pair_limit)
        weights = np.exp(log_w)
        label = "even_pairs" if parity == 0 else "odd_pairs"
        # walk the diagonals m = n + j, keeping n + m <= pair_limit
        for j in range(1, self.diagonal_cap + 1):
            count = (self.pair_limit - j) // 2 + 1
            if count <= 0:
                break
            delta = values[:count] - values[j:j + count]
            kernel = self.kernel(delta, label, j)
            total += np.sum(weights[:count] * weights[j:j + count] * kernel, axis=0)
        return 2.0 * total


# -----------------------------------------------------------------------------------
# Density terms
# -----------------------------------------------------------------------------------

class DensityTerm(ABC):
    """
    One of the six contributions to the emitted energy density.

    ``execute`` returns the raw density (hbar = 1, inverse time squared) for
    every time of the block; terms whose mirror prefactor vanishes are skipped.
    """

    uses_kernel: bool = False

    def __init__(self, rays: RaySums) -> None:
        self.rays = rays
        self.cfg = rays.cfg

    @abstractmethod
    def prefactor(self) -> float:
        """Mirror-coefficient weight in front of the ray sum."""

    @abstractmethod
    def series(self) -> np.ndarray:
        """The ray sum itself."""

    def execute(self) -> np.ndarray:
        weight = self.prefactor()
        if weight == 0.0:
            return np.zeros_like(self.rays.times)
        return weight * self.series()

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(prefactor={self.prefactor()!r})"


class DensityTermFactory:
    """Registry of density terms, keyed by a short name, in evaluation order."""

    _terms: Dict[str, type] = {}

    @classmethod
    def register_term(cls, name: str):
        def decorator(subclass):
            key = name.lower()
            if key in cls._terms:
                raise ValueError(f"Density term '{name}' is already registered.")
            cls._terms[key] = subclass
            return subclass

        return decorator

    @classmethod
    def create_term(cls, name: str, rays: RaySums) -> DensityTerm:
        term_class = cls._terms.get(name.lower())
        if not term_class:
            available = ", ".join(cls._terms)
            raise ValueError(f"Unsupported density term: '{name}'. Available terms: {available}")
        return term_class(rays)

    @classmethod
    def names(cls) -> Tuple[str, ...]:
        return tuple(cls._terms)


@DensityTermFactory.register_term("direct")
class DirectTerm(DensityTerm):
    """Field scattered on the outer side of mirror 2."""

    def prefactor(self) -> float:
        return self.cfg.R2 / (48.0 * math.pi)

    def series(self) -> np.ndarray:
        _, log_slope = self.rays.direct()
        squared = np.exp(2.0 * log_slope)
        return self.cfg.omega ** 2 * (squared - 1.0) + self.cfg.theta ** 2 * squared


@DensityTermFactory.register_term("even")
class EvenTerm(DensityTerm):
    def prefactor(self) -> float:
        return self.cfg.T1 * self.cfg.T2 / (48.0 * math.pi)

    def series(self) -> np.ndarray:
        return self.rays.single_sum(0)


@DensityTermFactory.register_term("odd")
class OddTerm(DensityTerm):
    def prefactor(self) -> float:
        return self.cfg.T2 ** 2 * self.cfg.R1 / (48.0 * math.pi)

    def series(self) -> np.ndarray:
        return self.rays.single_sum(1)


@DensityTermFactory.register_term("cross")
class CrossTerm(DensityTerm):
    uses_kernel = True

    def prefactor(self) -> float:
        return self.cfg.T2 / (8.0 * math.pi)

    def series(self) -> np.ndarray:
        return self.rays.cross_sum()


@DensityTermFactory.register_term("even_pairs")
class EvenPairsTerm(DensityTerm):
    uses_kernel = True

    def prefactor(self) -> float:
        return -self.cfg.T1 * self.cfg.T2 / (16.0 * math.pi)

    def series(self) -> np.ndarray:
        return self.rays.pair_sum(0)


@DensityTermFactory.register_term("odd_pairs")
class OddPairsTerm(DensityTerm):
    uses_kernel = True

    def prefactor(self) -> float:
        return -self.cfg.T2 ** 2 * self.cfg.R1 / (16.0 * math.pi)

    def series(self) -> np.ndarray:
        return self.rays.pair_sum(1)


# -----------------------------------------------------------------------------------
# Public evaluation
# -----------------------------------------------------------------------------------

def _block_terms(
    times: np.ndarray, cfg: CavityConfig, trunc: TruncationPolicy, classical: bool
) -> Dict[str, np.ndarray]:
    rays = RaySums(times, cfg, trunc, classical)
    terms: Dict[str, np.ndarray] = {}
    for name in DensityTermFactory.names():
        term = DensityTermFactory.create_term(name, rays)
        if classical and term.uses_kernel:
            continue
        terms[name] = term.execute() / cfg.omega ** 2
    return terms


def _block_size(cfg: CavityConfig, trunc: TruncationPolicy, classical: bool) -> int:
    top = trunc.single_limit(cfg)
    if not classical:
        top = max(top, trunc.pair_limit(cfg))
    return max(1, BLOCK_ELEMENTS // (2 * top + 3))


def density_profile(
    times: Sequence[float],
    cfg: CavityConfig,
    trunc: Optional[TruncationPolicy] = None,
    classical: bool = False,
) -> np.ndarray:
    """
    Energy density (units of hbar*omega**2) at every requested time.

    Times are processed in blocks small enough to keep the ray table in
    memory.

    **Parameters:**
    - times: instants at which the density is wanted.
    - cfg: validated cavity configuration.
    - trunc: where the ray sums stop; defaults to ``TruncationPolicy()``.
    - classical: drop the hyperbolic-sine kernel terms, which are
      negligible when theta >> omega.

    **Returns:** an array shaped like ``times``.

    **Raises:**
    - SingularKernel: when two rays inside a kernel sum coincide.
    """
    trunc = trunc or TruncationPolicy()
    times = np.atleast_1d(np.asarray(times, dtype=float))
    out = np.empty_like(times)
    size = _block_size(cfg, trunc, classical)
    for start in range(0, times.size, size):
        block = times[start:start + size]
        terms = _block_terms(block, cfg, trunc, classical)
        out[start:start + size] = sum(terms.values())
        logger.debug("density block %d..%d done", start, start + block.size)
    return out


def density_terms(
    t: float,
    cfg: CavityConfig,
    trunc: Optional[TruncationPolicy] = None,
    classical: bool = False,
) -> Dict[str, float]:
    """Per-term breakdown of the density at one instant (units of hbar*omega**2)."""
    trunc = trunc or TruncationPolicy()
    terms = _block_terms(np.array([float(t)]), cfg, trunc, classical)
    return {name: float(values[0]) for name, values in terms.items()}


def energy_density(
    t: float, cfg: CavityConfig, trunc: Optional[TruncationPolicy] = None
) -> DensityPoint:
    """
    Energy density emitted through mirror 2 at time t.

    >>> from app.core import validate_config
    >>> cfg = validate_config({"K": 3, "omega": 1.0, "r": 0.9, "alpha": 0.0, "theta": 1.0})
    >>> point = energy_density(0.3, cfg)
    >>> abs(point.contrast) < 1e-10
    True
    """
    value = float(density_profile([t], cfg, trunc)[0])
    background = background_density(cfg)
    return DensityPoint(
        t=float(t),
        e_u=value,
        background=background,
        contrast=(value - background) / contrast_reference(cfg),
    )
