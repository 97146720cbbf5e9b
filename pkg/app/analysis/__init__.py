"""
Sampling of the emitted density over one period, pulse detection, and the
numerical quadrature used to check the closed-form energies.
"""

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.integrate import IntegrationWarning, quad, trapezoid
from scipy.signal import find_peaks, peak_widths

from app.core import CavityConfig, InvalidParameter, NoPulses, QuadratureNonConvergence
from app.energetics import energy_budget
from app.radiation import (
    TruncationPolicy,
    background_density,
    contrast_reference,
    density_profile,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 2048
MIN_SAMPLES = 64

# excess below this fraction of the density scale is treated as flat
FLAT_TOLERANCE = 1e-9

# rounding noise of a period integral, in units of hbar*omega (1 + x^2)
NOISE_FLOOR = 1e-13

REGULARITY = 0.05

QUADRATURE_METHODS = ("trapezoid", "gauss-kronrod", "uniform")

# relative accuracy asked of the motion energy when it is compared with the closed form
GAP_QUAD_TOL = 1e-3

# series tail tolerance per unit of quadrature tolerance
TAIL_PER_QUAD_TOL = 1e-2


@dataclass(frozen=True)
class DensitySeries:
    """Energy density sampled uniformly over [0, 2 pi / omega), in units of hbar*omega**2."""

    times: np.ndarray
    values: np.ndarray
    background: float
    truncation: TruncationPolicy
    cfg_fingerprint: str
    period: float
    omega: float
    reference: float

    @property
    def step(self) -> float:
        return self.period / self.times.size

    @property
    def excess(self) -> np.ndarray:
        return self.values - self.background

    @property
    def contrast(self) -> np.ndarray:
        return self.excess / self.reference

    def excess_energy(self) -> float:
        """Net excess over the background for the whole period (units of hbar*omega)."""
        return float(np.sum(self.excess)) * self.step * self.omega

    def deficit_energy(self) -> float:
        """Energy missing where the density dips below the background (units of hbar*omega)."""
        return -float(np.sum(np.minimum(self.excess, 0.0))) * self.step * self.omega


@dataclass(frozen=True)
class Pulse:
    """One emitted pulse; energy in units of hbar*omega, height in hbar*omega**2."""

    time: float
    height: float
    width: float
    energy: float
    photons: float


@dataclass(frozen=True)
class PulseTrain:
    pulses: Tuple[Pulse, ...]
    spacing_mean: float
    spacing_std: float
    pulses_per_period: int

    @property
    def regular(self) -> bool:
        """True when the spacing spread stays below 5% of the mean spacing."""
        return self.spacing_std / self.spacing_mean < REGULARITY

    @property
    def total_energy(self) -> float:
        return sum(pulse.energy for pulse in self.pulses)

    @property
    def total_photons(self) -> float:
        return sum(pulse.photons for pulse in self.pulses)


@dataclass(frozen=True)
class EnergyComparison:
    """Motion-induced energy per period from quadrature and from the closed form."""

    quadrature_motion: float
    closed_form_motion: float
    relative_gap: float


# -----------------------------------------------------------------------------------
# Sampling
# -----------------------------------------------------------------------------------

def _profile(
    times: np.ndarray,
    cfg: CavityConfig,
    trunc: TruncationPolicy,
    classical: bool,
    workers: int,
) -> np.ndarray:
    """Density at ``times``, split into contiguous blocks over a thread pool when workers > 1."""
    if workers == 1 or times.size < 2 * workers:
        return density_profile(times, cfg, trunc, classical)
    blocks = np.array_split(times, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        # map keeps block order, so concatenating restores grid order
        parts = list(pool.map(lambda block: density_profile(block, cfg, trunc, classical), blocks))
    return np.concatenate(parts)


def sample_period(
    cfg: CavityConfig,
    n_samples: int = DEFAULT_SAMPLES,
    trunc: Optional[TruncationPolicy] = None,
    workers: int = 1,
    classical: bool = False,
) -> DensitySeries:
    """
    Sample the emitted density on ``n_samples`` uniform times over one period.

    **Parameters:**
    - `cfg (CavityConfig)`: validated cavity.
    - `n_samples (int)`: grid size, at least 64.
    - `trunc (TruncationPolicy)`: where the ray sums stop; pointwise default.
    - `workers (int)`: threads sharing the grid. The series does not depend on it.
    - `classical (bool)`: drop the kernel terms (high temperature).

    **Raises:**
    - `InvalidParameter`: for fewer than 64 samples or no workers.
    """
    if n_samples < MIN_SAMPLES:
        raise InvalidParameter("n_samples", f"must be >= {MIN_SAMPLES}, got {n_samples}")
    if workers < 1:
        raise InvalidParameter("workers", f"must be >= 1, got {workers}")
    trunc = trunc or TruncationPolicy()
    times = np.arange(n_samples) * (cfg.period / n_samples)

    values = _profile(times, cfg, trunc, classical, workers)
    logger.info("sampled %d points over one period (workers=%d)", n_samples, workers)

    return DensitySeries(
        times=times,
        values=values,
        background=background_density(cfg),
        truncation=trunc,
        cfg_fingerprint=cfg.fingerprint(),
        period=cfg.period,
        omega=cfg.omega,
        reference=contrast_reference(cfg),
    )


# -----------------------------------------------------------------------------------
# Pulses
# -----------------------------------------------------------------------------------

def _refine_peak(values: np.ndarray, index: int) -> Tuple[float, float]:
    """Sub-sample offset and height of a maximum from a parabola through 3 points."""
    left, centre, right = values[index - 1], values[index], values[index + 1]
    curvature = left - 2.0 * centre + right
    if curvature >= 0.0:
        return 0.0, float(centre)
    offset = 0.5 * (left - right) / curvature
    return float(offset), float(centre - 0.25 * (left - right) * offset)


def detect_pulses(series: DensitySeries, prominence_factor: float = 0.5) -> PulseTrain:
    """
    Locate the pulses of a sampled period.

    A pulse must rise above the background by at least ``prominence_factor``
    times the largest excess. The series is tiled three times so pulses
    straddling the period boundary are handled like any other.

    **Pulse fields:**
    - `time`: parabola-refined position of the maximum, folded into one period.
    - `width`: full width at half prominence.
    - `energy`: trapezoid integral of the excess over the half-prominence
      support, clipped at 0, in units of hbar*omega.
    - `photons`: two per quantum of that energy.

    **Raises:**
    - `InvalidParameter`: empty series or non-positive prominence factor.
    - `NoPulses`: the series is flat or nothing reaches the prominence.
    """
    if not prominence_factor > 0:
        raise InvalidParameter("prominence_factor", f"must be > 0, got {prominence_factor}")
    if series.values.size == 0:
        raise InvalidParameter("series", "empty density series")

    excess = series.excess
    largest = float(np.max(excess))
    scale = max(abs(series.background), float(np.max(np.abs(series.values))), 1e-300)
    if largest <= FLAT_TOLERANCE * scale:
        raise NoPulses(f"largest excess {largest:.3g} is flat against the scale {scale:.3g}")

    size = excess.size
    step = series.step
    tiled = np.tile(excess, 3)
    peaks, _ = find_peaks(tiled, prominence=prominence_factor * largest)
    # keep the copy in the middle tile only
    peaks = peaks[(peaks >= size) & (peaks < 2 * size)]
    if peaks.size == 0:
        raise NoPulses(f"no maximum reaches {prominence_factor:g} of the largest excess")
    widths, _, left_ips, right_ips = peak_widths(tiled, peaks, rel_height=0.5)

    pulses: List[Pulse] = []
    for peak, width, left, right in zip(peaks, widths, left_ips, right_ips):
        offset, height = _refine_peak(tiled, int(peak))
        lo, hi = int(math.ceil(left)), int(math.floor(right))
        energy = float(trapezoid(tiled[lo:hi + 1], dx=step)) * series.omega
        energy = max(energy, 0.0)
        pulses.append(
            Pulse(
                time=float(((peak - size) + offset) * step % series.period),
                height=height + series.background,
                width=float(width) * step,
                energy=energy,
                photons=2.0 * energy,
            )
        )
    pulses.sort(key=lambda pulse: pulse.time)

    times = np.array([pulse.time for pulse in pulses])
    # the last gap wraps around to the first pulse of the next period
    spacings = np.append(np.diff(times), times[0] + series.period - times[-1])
    logger.info("detected %d pulse(s) per period", len(pulses))
    return PulseTrain(
        pulses=tuple(pulses),
        spacing_mean=float(np.mean(spacings)),
        spacing_std=float(np.std(spacings)),
        pulses_per_period=len(pulses),
    )


def measure_pulse_count(
    cfg: CavityConfig,
    n_samples: int = DEFAULT_SAMPLES,
    trunc: Optional[TruncationPolicy] = None,
    workers: int = 1,
) -> int:
    """Pulses in one sampled period, 0 for a flat one."""
    series = sample_period(cfg, n_samples, trunc, workers)
    try:
        return detect_pulses(series).pulses_per_period
    except NoPulses:
        return 0


# -----------------------------------------------------------------------------------
# Quadrature
# -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class _QuadratureJob:
    """Everything one quadrature method needs."""

    cfg: CavityConfig
    trunc: TruncationPolicy
    quad_tol: float
    offset: float
    classical: bool
    start: int
    limit: int
    baseline: float
    workers: int

    @property
    def floor(self) -> float:
        return NOISE_FLOOR * (1.0 + self.cfg.theta_ratio ** 2)

    def evaluate(self, times: np.ndarray) -> np.ndarray:
        return _profile(times, self.cfg, self.trunc, self.classical, self.workers)

    def settled(self, change: float, estimate: float) -> bool:
        """Tolerance is relative to the part of the estimate above ``baseline``."""
        return change <= max(self.quad_tol * abs(estimate - self.baseline), self.floor)


def _periodic_trapezoid(job: _QuadratureJob) -> float:
    """
    Trapezoid rule on a periodic integrand, doubling the grid until it settles.

    Each doubling reuses the previous samples and only evaluates the
    midpoints.
    """
    cfg = job.cfg
    count = job.start
    step = cfg.period / count
    values = job.evaluate(job.offset + np.arange(count) * step)
    # mean * period * omega = mean * 2 pi
    estimate = float(np.mean(values)) * 2.0 * math.pi
    while count < job.limit:
        midpoints = job.evaluate(job.offset + (np.arange(count) + 0.5) * step)
        refined = 0.5 * (estimate + float(np.mean(midpoints)) * 2.0 * math.pi)
        count, step = 2 * count, step / 2.0
        change = abs(refined - estimate)
        estimate = refined
        logger.debug("trapezoid %d samples: %r (change %.3g)", count, estimate, change)
        if job.settled(change, estimate):
            return estimate
    raise QuadratureNonConvergence(
        f"trapezoid rule still moving after {count} samples (tolerance {job.quad_tol:g})"
    )


def _gauss_kronrod(job: _QuadratureJob) -> float:
    cfg = job.cfg
    coarse = sample_period(cfg, max(MIN_SAMPLES, job.start), job.trunc, job.workers, job.classical)
    try:
        peaks = [pulse.time for pulse in detect_pulses(coarse).pulses]
    except NoPulses:
        peaks = []
    # breakpoints at the pulses, shifted into the integration window
    breakpoints = sorted(job.offset + (t - job.offset) % cfg.period for t in peaks)
    breakpoints = [t for t in breakpoints if job.offset < t < job.offset + cfg.period] or None
    rough = float(np.mean(coarse.values)) * 2.0 * math.pi
    epsabs = max(job.quad_tol * abs(rough - job.baseline), job.floor) / cfg.omega

    def integrand(t: float) -> float:
        return float(density_profile([t], cfg, job.trunc, job.classical)[0])

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, error = quad(
                integrand,
                job.offset,
                job.offset + cfg.period,
                points=breakpoints,
                epsabs=epsabs,
                epsrel=0.0 if job.baseline else job.quad_tol,
                limit=max(50, job.limit // 64),
            )
        except IntegrationWarning as exc:
            raise QuadratureNonConvergence(f"adaptive quadrature did not converge: {exc}") from exc
    logger.debug("gauss-kronrod estimate %r (error %.3g)", value, error)
    return value * cfg.omega


def _uniform(job: _QuadratureJob) -> float:
    times = job.offset + np.linspace(0.0, job.cfg.period, job.limit + 1)
    values = job.evaluate(times)
    return float(trapezoid(values, times)) * job.cfg.omega


_METHODS = {
    "trapezoid": _periodic_trapezoid,
    "gauss-kronrod": _gauss_kronrod,
    "uniform": _uniform,
}


def quadrature_energy(
    cfg: CavityConfig,
    trunc: Optional[TruncationPolicy] = None,
    quad_tol: float = 1e-6,
    method: str = "trapezoid",
    offset: float = 0.0,
    classical: bool = False,
    start_samples: int = 256,
    max_samples: int = 2 ** 15,
    baseline: float = 0.0,
    workers: int = 1,
) -> float:
    """
    Emitted energy per period (units of hbar*omega) by direct integration.

    Only the density itself is used, never the closed forms.

    **Methods:**
    - `trapezoid`: periodic trapezoid rule with grid doubling, which
      converges spectrally for a smooth periodic integrand.
    - `gauss-kronrod`: ``scipy.integrate.quad`` with breakpoints at the
      detected pulses.
    - `uniform`: one trapezoid pass on ``max_samples`` intervals.

    **Parameters:**
    - `quad_tol (float)`: relative tolerance on ``energy - baseline``.
      With the default baseline of 0 this is the whole energy; pass the
      integrated background to converge on the motion-induced part alone.
    - `offset (float)`: start of the integration window.
    - `workers (int)`: threads sharing each batch of density evaluations.

    **Raises:**
    - `QuadratureNonConvergence`: the refinement stalls before ``quad_tol``.
    """
    if method not in _METHODS:
        raise InvalidParameter("method", f"must be one of {QUADRATURE_METHODS}, got {method!r}")
    if not quad_tol > 0:
        raise InvalidParameter("quad_tol", f"must be > 0, got {quad_tol}")
    if start_samples < 2 or max_samples < start_samples:
        raise InvalidParameter("max_samples", "need 2 <= start_samples <= max_samples")
    if workers < 1:
        raise InvalidParameter("workers", f"must be >= 1, got {workers}")
    trunc = trunc or TruncationPolicy(
        tail_tolerance=min(1e-8, quad_tol * TAIL_PER_QUAD_TOL), mode="period"
    )
    job = _QuadratureJob(
        cfg, trunc, quad_tol, offset, classical, start_samples, max_samples, baseline, workers
    )
    energy = _METHODS[method](job)
    logger.info("quadrature (%s) energy per period: %r", method, energy)
    return energy


def gap_truncation(quad_tol: float = GAP_QUAD_TOL) -> TruncationPolicy:
    """Period-mode truncation whose tail stays a hundred times below ``quad_tol``."""
    return TruncationPolicy(tail_tolerance=quad_tol * TAIL_PER_QUAD_TOL, mode="period")


def motion_energy_gap(
    cfg: CavityConfig,
    trunc: Optional[TruncationPolicy] = None,
    quad_tol: float = GAP_QUAD_TOL,
    method: str = "trapezoid",
    workers: int = 1,
) -> EnergyComparison:
    """
    Compare the motion-induced energy from quadrature with the closed form.

    The quadrature side subtracts the background integrated over the period,
    x^2 / 24 in units of hbar*omega, and converges on what is left to
    ``quad_tol`` relative. The default truncation follows ``quad_tol``
    through ``gap_truncation``.
    """
    baseline = background_density(cfg) * 2.0 * math.pi
    trunc = trunc or gap_truncation(quad_tol)
    total = quadrature_energy(
        cfg, trunc, quad_tol, method, baseline=baseline, workers=workers
    )
    numeric = total - baseline
    closed = energy_budget(cfg).E_motion
    gap = abs(numeric - closed) / abs(closed) if closed else abs(numeric)
    logger.info("motion energy: quadrature %r, closed form %r (gap %.3g)", numeric, closed, gap)
    return EnergyComparison(quadrature_motion=numeric, closed_form_motion=closed, relative_gap=gap)


def pulse_energy_bound(series: DensitySeries, train: PulseTrain) -> Tuple[float, float]:
    """
    Total pulse energy against the most it can hold on this grid.

    When the half-prominence supports do not overlap, the total never
    exceeds the net excess plus the deficit below the background.
    """
    return train.total_energy, series.excess_energy() + series.deficit_energy()

