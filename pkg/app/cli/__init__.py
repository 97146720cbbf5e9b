"""
Command-line front end.

Subcommands are ``Command`` subclasses registered on ``CommandFactory``;
each resolves a configuration (preset, then config file, then ``--set``), runs
its workflow and writes plain CSV or JSON next to a ``.manifest.json`` file.

Exit codes: 0 ok, 2 configuration error, 3 threshold or pole, 4 failed
verification or numerical failure, 5 input/output error.
"""

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import math
import sys
import warnings
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import constants

from app.analysis import (
    DEFAULT_SAMPLES,
    GAP_QUAD_TOL,
    detect_pulses,
    gap_truncation,
    measure_pulse_count,
    motion_energy_gap,
    sample_period,
)
from app.core import (
    CavityConfig,
    CavityError,
    InconsistentMirrors,
    InvalidParameter,
    NoPulses,
    PoleProximity,
    RegimeWarning,
    ThresholdExceeded,
    Units,
    load_config_file,
    validate_config,
)
from app.dephasing import dephasing, mobius_coefficients
from app.energetics import HIGH_TEMPERATURE, energy_budget, photons_per_pulse, threshold_budget
from app.radiation import TruncationPolicy, density_profile, contrast_reference

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_THRESHOLD = 3
EXIT_VERIFY = 4
EXIT_IO = 5

DENSITY_HEADER = ("t_over_period", "e_u", "background", "contrast")
SWEEP_HEADER = (
    "param", "value", "peak_density", "pulse_count", "pulse_width", "pulse_photons",
    "E_motion", "photons_emitted", "photons_intracavity", "error",
)
SWEEP_PARAMS = ("alpha_eff", "theta", "r", "K")

# keys only understood with --si-units
SI_KEYS = ("temperature", "frequency")

GAP_LIMIT = 0.05


def _fmt(value: float) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(value), ".17g")


# -----------------------------------------------------------------------------------
# Presets
# -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class Preset:
    """
    A named, versioned parameter set.

    ``si`` presets give omega in rad/s and a temperature in kelvin. The
    version goes up whenever the values change, and every manifest records it.
    """

    name: str
    description: str
    values: Mapping[str, float]
    si: bool = False
    version: int = 1
    aliases: Tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return f"{self.name}@v{self.version}"


PRESETS: Dict[str, Preset] = {}

# alternative name -> registered preset name
PRESET_ALIASES: Dict[str, str] = {}


def register_preset(
    name: str,
    description: str,
    si: bool = False,
    version: int = 1,
    aliases: Sequence[str] = (),
):
    """Decorator turning a function that returns raw values into a registered preset."""

    def decorator(builder: Callable[[], Mapping[str, float]]):
        for key in (name, *aliases):
            if key in PRESETS or key in PRESET_ALIASES:
                raise ValueError(f"Preset '{key}' is already registered.")
        PRESETS[name] = Preset(
            name=name,
            description=description,
            values=dict(builder()),
            si=si,
            version=version,
            aliases=tuple(aliases),
        )
        for alias in aliases:
            PRESET_ALIASES[alias] = name
        return builder

    return decorator


def get_preset(name: str) -> Preset:
    """Look a preset up by its name or one of its aliases."""
    try:
        return PRESETS[PRESET_ALIASES.get(name, name)]
    except KeyError:
        available = ", ".join(sorted(PRESETS))
        raise InvalidParameter("preset", f"unknown preset '{name}'. Available presets: {available}") from None


@register_preset("fig2-vacuum", "alpha_eff = r = 0.9, K = 3, vacuum (theta = 0)", aliases=("pulses-vacuum",))
def _fig2_vacuum():
    return {"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.9, "theta": 0.0}


@register_preset("fig2-theta02", "alpha_eff = r = 0.9, K = 3, theta = 0.2 omega", aliases=("pulses-theta02",))
def _fig2_theta02():
    return {"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.9, "theta": 0.2}


@register_preset("fig2-theta1", "alpha_eff = r = 0.9, K = 3, theta = omega", aliases=("pulses-theta1",))
def _fig2_theta1():
    return {"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.9, "theta": 1.0}


@register_preset(
    "fig3-a05", "room temperature ratio theta = 3924 omega, r = 0.9, alpha_eff = 0.5", aliases=("hot-a05",)
)
def _fig3_a05():
    return {"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.5, "theta": 3924.0}


@register_preset(
    "fig3-a09", "room temperature ratio theta = 3924 omega, r = 0.9, alpha_eff = 0.9", aliases=("hot-a09",)
)
def _fig3_a09():
    return {"K": 3, "omega": 1.0, "r": 0.9, "alpha_eff": 0.9, "theta": 3924.0}


@register_preset(
    "room-temp",
    "omega = 2 pi 10 GHz at 300 K, rho = 1e-5, K = 3, just below threshold",
    si=True,
)
def _room_temp():
    # alpha = rho/2 sits exactly on the threshold, which validation refuses
    return {"K": 3, "omega": 2.0 * math.pi * 1e10, "temperature": 300.0, "rho": 1e-5, "alpha_eff": 0.999}


@register_preset("static", "motionless cavity (alpha = 0), K = 3, r = 0.9, theta = omega")
def _static():
    return {"K": 3, "omega": 1.0, "r": 0.9, "alpha": 0.0, "theta": 1.0}


# -----------------------------------------------------------------------------------
# Configuration resolution and manifests
# -----------------------------------------------------------------------------------

@dataclass
class ResolvedConfig:
    cfg: CavityConfig
    raw: Dict[str, object]
    si: bool
    inputs: Dict[str, str] = field(default_factory=dict)
    preset: Optional[Preset] = None

    @property
    def omega_si(self) -> Optional[float]:
        return self.cfg.omega if self.si else None


def to_natural(raw: Mapping[str, object], si: bool) -> Dict[str, object]:
    """
    Translate SI-only keys: ``temperature`` (K) becomes theta and
    ``frequency`` (Hz) becomes omega. Times stay in seconds, so omega in rad/s
    and theta in rad/s share one unit.
    """
    natural = dict(raw)
    present = [key for key in SI_KEYS if key in natural]
    if present and not si:
        raise InvalidParameter(present[0], "only accepted with --si-units")
    if "temperature" in natural:
        try:
            temperature = float(natural.pop("temperature"))
        except (TypeError, ValueError):
            raise InvalidParameter("temperature", f"not a number: {raw['temperature']!r}") from None
        if "theta" in natural:
            raise InvalidParameter("temperature", "give either temperature or theta")
        natural["theta"] = Units.temperature_to_theta(temperature)
    if "frequency" in natural:
        try:
            frequency = float(natural.pop("frequency"))
        except (TypeError, ValueError):
            raise InvalidParameter("frequency", f"not a number: {raw['frequency']!r}") from None
        natural["omega"] = 2.0 * math.pi * frequency
    if si and "length" in natural:
        natural["length"] = float(natural["length"]) / constants.c
    return natural


def parse_override(text: str) -> Tuple[str, str]:
    """Split one ``--set key=value`` flag."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip() or not value.strip():
        raise InvalidParameter("set", f"expected 'key=value', got {text!r}")
    return key.strip(), value.strip()


def resolve_config(args: argparse.Namespace) -> ResolvedConfig:
    """
    Build the configuration of one run and validate it into a ``CavityConfig``.

    **Resolution order** (later wins):
    - preset values (``--preset``),
    - the config file (``--config``),
    - single parameters given with ``--set key=value``.
    """
    overrides = [parse_override(text) for text in getattr(args, "set", None) or []]
    if not args.preset and not args.config:
        raise InvalidParameter("config", "give --config <path> or --preset <name>")
    raw: Dict[str, object] = {}
    si = bool(args.si_units)
    inputs: Dict[str, str] = {}
    preset = None
    if args.preset:
        preset = get_preset(args.preset)
        raw.update(preset.values)
        si = si or preset.si
    if args.config:
        path = Path(args.config)
        raw.update(load_config_file(path))
        inputs[str(path)] = hashlib.sha256(path.read_bytes()).hexdigest()
    raw.update(overrides)
    tolerance = args.mirror_tolerance
    natural = to_natural(raw, si)
    cfg = validate_config(natural, tolerance) if tolerance else validate_config(natural)
    logger.info("resolved configuration %s", cfg)
    return ResolvedConfig(cfg=cfg, raw=raw, si=si, inputs=inputs, preset=preset)


@dataclass
class RunManifest:
    """Everything needed to regenerate an output file."""

    command: str
    config: Dict[str, object]
    settings: Dict[str, object]
    version: str = __version__
    inputs: Dict[str, str] = field(default_factory=dict)
    preset: Optional[str] = None
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def write(self, output: Path) -> Path:
        path = Path(f"{output}.manifest.json")
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True), encoding="utf-8")
        return path


def _truncation(args: argparse.Namespace, mode: str = "pointwise") -> TruncationPolicy:
    return TruncationPolicy(tail_tolerance=args.tol, mode=mode)


def _write_json(payload: Mapping[str, object], out: Optional[str]) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=float)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


# -----------------------------------------------------------------------------------
# Workflows
# -----------------------------------------------------------------------------------

def cmd_density(
    cfg: CavityConfig,
    n_samples: int,
    out: Path,
    trunc: Optional[TruncationPolicy] = None,
    workers: int = 1,
    classical: bool = False,
) -> Tuple[int, float]:
    """Write one period of the density as CSV; returns (rows, largest contrast)."""
    series = sample_period(cfg, n_samples, trunc, workers, classical)
    contrast = series.contrast
    with open(out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(DENSITY_HEADER)
        for t, value, c in zip(series.times, series.values, contrast):
            writer.writerow((_fmt(t / series.period), _fmt(value), _fmt(series.background), _fmt(c)))
    return series.times.size, float(np.max(contrast))


def _pulse_estimate(
    cfg: CavityConfig,
    tol: float,
    n_samples: int,
    trunc: Optional[TruncationPolicy],
    workers: int,
) -> Dict[str, object]:
    """
    Photons per pulse with the regime it was computed in.

    Above theta/omega = 10 the high-temperature formula needs no pulse count.
    Below it the period is sampled and the pulses counted; a period without
    pulses leaves the estimate empty.
    """
    if cfg.theta_ratio > HIGH_TEMPERATURE:
        return {
            "photons_per_pulse": photons_per_pulse(cfg, tol=tol),
            "photons_per_pulse_regime": "high-temperature",
            "pulses_per_period": None,
        }
    count = measure_pulse_count(cfg, n_samples, trunc, workers)
    if count == 0:
        return {
            "photons_per_pulse": None,
            "photons_per_pulse_regime": "no-pulses",
            "pulses_per_period": 0,
        }
    with warnings.catch_warnings():
        # the regime is reported in the result instead
        warnings.simplefilter("ignore", RegimeWarning)
        per_pulse = photons_per_pulse(cfg, pulses_per_period=count, tol=tol)
    return {
        "photons_per_pulse": per_pulse,
        "photons_per_pulse_regime": "threshold-budget",
        "pulses_per_period": count,
    }


def cmd_energy(
    cfg: CavityConfig,
    omega_si: Optional[float] = None,
    theta_convention: str = "dimensionless",
    tol: float = 1e-15,
    n_samples: int = DEFAULT_SAMPLES,
    trunc: Optional[TruncationPolicy] = None,
    workers: int = 1,
) -> Dict[str, object]:
    """
    Closed-form budget, threshold budget and photon estimates as a JSON-ready dict.

    At theta/omega <= 10 the per-pulse photon count divides the threshold
    budget by the number of pulses measured on ``n_samples`` points.
    """
    budget = energy_budget(cfg, tol, theta_convention=theta_convention)
    at_threshold = threshold_budget(cfg, tol, theta_convention=theta_convention)
    report: Dict[str, object] = {
        "units": "hbar*omega",
        "theta_over_omega": cfg.theta_ratio,
        "theta_convention": theta_convention,
        "budget": budget.as_dict(),
        "threshold": at_threshold.as_dict(),
        **_pulse_estimate(cfg, tol, n_samples, trunc, workers),
    }
    if omega_si is not None:
        energies = {
            key: Units.energy_to_joules(value, omega_si)
            for key, value in budget.as_dict().items()
            if key.startswith("E_")
        }
        report["si"] = {
            "omega_rad_per_s": omega_si,
            "temperature_K": Units.theta_to_temperature(cfg.theta),
            "energies_J": energies,
        }
    return report


@dataclass(frozen=True)
class VerificationCheck:
    name: str
    error: float
    limit: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.limit)

    def as_dict(self) -> Dict[str, object]:
        return {"name": self.name, "error": self.error, "limit": self.limit, "passed": self.passed}


def _dephasing_checks(cfg: CavityConfig, count: int = 16, seed: int = 0) -> List[VerificationCheck]:
    rng = np.random.default_rng(seed)
    phase_error = slope_error = period_error = 0.0
    step = 1e-5 / cfg.omega
    for _ in range(count):
        p = int(rng.integers(-1, 8))
        u = float(rng.uniform(0.0, cfg.period))
        evaluation = dephasing(u, p, cfg)
        coeffs = mobius_coefficients(p, cfg)
        z = complex(math.cos(cfg.omega * u), math.sin(cfg.omega * u))
        image = (coeffs.a * z + coeffs.b) / (coeffs.b.conjugate() * z + coeffs.a.conjugate())
        phase = complex(math.cos(cfg.omega * evaluation.value), math.sin(cfg.omega * evaluation.value))
        phase_error = max(phase_error, abs(phase - image))

        ahead = dephasing(u + step, p, cfg).value
        behind = dephasing(u - step, p, cfg).value
        numeric = (ahead - behind) / (2.0 * step)
        slope_error = max(slope_error, abs(numeric - evaluation.derivative) / evaluation.derivative)

        shifted = dephasing(u + cfg.period, p, cfg).value
        period_error = max(period_error, abs(shifted - evaluation.value - cfg.period) / cfg.period)
    return [
        VerificationCheck("dephasing_phase", phase_error, 1e-10),
        VerificationCheck("dephasing_derivative", slope_error, 1e-6),
        VerificationCheck("quasi_periodicity", period_error, 1e-10),
    ]


def _static_check(cfg: CavityConfig, trunc: TruncationPolicy) -> VerificationCheck:
    static = dataclasses.replace(cfg, alpha=0.0, alpha_eff=0.0)
    times = np.linspace(0.0, static.period, 7, endpoint=False)
    values = density_profile(times, static, trunc)
    background = static.theta_ratio ** 2 / (48.0 * math.pi)
    error = float(np.max(np.abs(values - background))) / contrast_reference(static)
    return VerificationCheck("static_limit", error, 1e-9)


def cmd_verify(
    cfg: CavityConfig,
    quad_tol: float = GAP_QUAD_TOL,
    trunc: Optional[TruncationPolicy] = None,
    workers: int = 1,
) -> List[VerificationCheck]:
    """
    Run the consistency checks of one configuration.

    **Checks:**
    - dephasing against the homographic image, finite differences and
      quasi-periodicity,
    - the static limit at 7 instants, with ``trunc``,
    - the motion-induced energy per period from quadrature against the
      closed form (within 5%), converged to ``quad_tol`` relative with the
      matching ``gap_truncation``. Only expected to hold at high finesse.

    A motionless cavity gets a quadrature check against the background
    instead, run with ``trunc``.
    """
    trunc = trunc or TruncationPolicy()
    checks = _dephasing_checks(cfg)
    checks.append(_static_check(cfg, trunc))
    if cfg.alpha > 0:
        comparison = motion_energy_gap(cfg, quad_tol=quad_tol, workers=workers)
        checks.append(VerificationCheck("quadrature_vs_closed_form", comparison.relative_gap, GAP_LIMIT))
    else:
        comparison = motion_energy_gap(cfg, trunc, quad_tol=quad_tol, workers=workers)
        scale = max(cfg.theta_ratio ** 2 / 24.0, 1.0)
        checks.append(VerificationCheck("quadrature_static", abs(comparison.quadrature_motion) / scale, 1e-9))
    for check in checks:
        logger.info("check %s: error %.3g (limit %.3g)", check.name, check.error, check.limit)
    return checks


def sweep_config(raw: Mapping[str, object], param: str, value: float) -> Dict[str, object]:
    """Raw parameters with ``param`` replaced and the keys it supersedes removed."""
    if param not in SWEEP_PARAMS:
        raise InvalidParameter("param", f"must be one of {SWEEP_PARAMS}, got {param!r}")
    updated = dict(raw)
    if param == "alpha_eff":
        updated.pop("alpha", None)
    elif param == "r":
        for key in ("rho", "R2", "T2"):
            updated.pop(key, None)
    elif param == "theta":
        updated.pop("temperature", None)
    elif param == "K":
        updated.pop("length", None)
    updated[param] = value
    return updated


def _sweep_point(raw, param, value, si, n_samples, trunc, tolerance) -> Dict[str, str]:
    row = {key: "" for key in SWEEP_HEADER}
    row["param"] = param
    row["value"] = _fmt(value)
    try:
        natural = to_natural(sweep_config(raw, param, value), si)
        cfg = validate_config(natural, tolerance) if tolerance else validate_config(natural)
        budget = energy_budget(cfg)
        series = sample_period(cfg, n_samples, trunc)
        row["peak_density"] = _fmt(np.max(series.values))
        row["E_motion"] = _fmt(budget.E_motion)
        row["photons_emitted"] = _fmt(budget.photons_emitted)
        row["photons_intracavity"] = _fmt(budget.photons_intracavity)
        try:
            train = detect_pulses(series)
        except NoPulses:
            row["pulse_count"] = "0"
            return row
        row["pulse_count"] = str(train.pulses_per_period)
        row["pulse_width"] = _fmt(np.mean([pulse.width for pulse in train.pulses]))
        row["pulse_photons"] = _fmt(np.mean([pulse.photons for pulse in train.pulses]))
    except CavityError as exc:
        row["error"] = f"{exc.__class__.__name__}: {exc}"
        logger.warning("sweep point %s=%r failed: %s", param, value, exc)
    return row


def cmd_sweep(
    raw: Mapping[str, object],
    param: str,
    values: Sequence[float],
    out: Path,
    si: bool = False,
    n_samples: int = DEFAULT_SAMPLES,
    trunc: Optional[TruncationPolicy] = None,
    workers: int = 1,
    mirror_tolerance: Optional[float] = None,
) -> List[Dict[str, str]]:
    """
    One CSV row per sweep value, in the order given.

    A point that fails keeps its row with the error recorded; the sweep goes on.
    """
    if param not in SWEEP_PARAMS:
        raise InvalidParameter("param", f"must be one of {SWEEP_PARAMS}, got {param!r}")
    trunc = trunc or TruncationPolicy()

    def run(value: float) -> Dict[str, str]:
        return _sweep_point(raw, param, value, si, n_samples, trunc, mirror_tolerance)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, values))
    else:
        rows = [run(value) for value in values]

    with open(out, "w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=SWEEP_HEADER, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return rows


# -----------------------------------------------------------------------------------
# Commands
# -----------------------------------------------------------------------------------

class Command(ABC):
    """A subcommand bound to its parsed arguments; ``execute`` returns the exit code."""

    def __init__(self, args: argparse.Namespace) -> None:
        self.args = args

    @abstractmethod
    def execute(self) -> int:
        pass  # pragma: no cover

    def manifest(self, resolved: ResolvedConfig, **settings) -> RunManifest:
        return RunManifest(
            command=self.args.command,
            config=resolved.cfg.as_dict(),
            settings=settings,
            inputs=resolved.inputs,
            preset=resolved.preset.label if resolved.preset else None,
        )


class CommandFactory:
    _commands: Dict[str, type] = {}

    @classmethod
    def register_command(cls, name: str):
        def decorator(subclass):
            if name in cls._commands:
                raise ValueError(f"Command '{name}' is already registered.")
            cls._commands[name] = subclass
            return subclass

        return decorator

    @classmethod
    def create_command(cls, name: str, args: argparse.Namespace) -> Command:
        command_class = cls._commands.get(name)
        if not command_class:
            available = ", ".join(cls._commands)
            raise ValueError(f"Unsupported command: '{name}'. Available commands: {available}")
        return command_class(args)


@CommandFactory.register_command("density")
class DensityCommand(Command):
    def execute(self) -> int:
        resolved = resolve_config(self.args)
        out = Path(self.args.out)
        rows, peak = cmd_density(
            resolved.cfg, self.args.samples, out, _truncation(self.args),
            self.args.workers, self.args.classical,
        )
        self.manifest(
            resolved, samples=self.args.samples, tail_tolerance=self.args.tol,
            classical=self.args.classical,
        ).write(out)
        print(f"Wrote {rows} rows to {out} (largest contrast {peak:.6g})")
        return EXIT_OK


@CommandFactory.register_command("energy")
class EnergyCommand(Command):
    def execute(self) -> int:
        resolved = resolve_config(self.args)
        report = cmd_energy(
            resolved.cfg, resolved.omega_si, self.args.convention,
            n_samples=self.args.samples, trunc=_truncation(self.args), workers=self.args.workers,
        )
        _write_json(report, self.args.out)
        if self.args.out:
            self.manifest(
                resolved, theta_convention=self.args.convention, samples=self.args.samples,
                tail_tolerance=self.args.tol,
            ).write(Path(self.args.out))
            print(f"Wrote energy budget to {self.args.out}")
        return EXIT_OK


@CommandFactory.register_command("verify")
class VerifyCommand(Command):
    def execute(self) -> int:
        resolved = resolve_config(self.args)
        checks = cmd_verify(resolved.cfg, self.args.quad_tol, _truncation(self.args), self.args.workers)
        failures = [check.name for check in checks if not check.passed]
        report = {
            "checks": [check.as_dict() for check in checks],
            "failures": failures,
            "passed": not failures,
        }
        _write_json(report, self.args.out)
        if self.args.out:
            self.manifest(
                resolved, quad_tol=self.args.quad_tol, tail_tolerance=self.args.tol,
                gap_tail_tolerance=gap_truncation(self.args.quad_tol).tail_tolerance,
            ).write(Path(self.args.out))
        if failures:
            print(f"Verification failed: {', '.join(failures)}")
            return EXIT_VERIFY
        print(f"All {len(checks)} checks passed.")
        return EXIT_OK


@CommandFactory.register_command("sweep")
class SweepCommand(Command):
    def execute(self) -> int:
        resolved = resolve_config(self.args)
        out = Path(self.args.out)
        values = list(self.args.values)
        rows = cmd_sweep(
            resolved.raw, self.args.param, values, out, resolved.si, self.args.samples,
            _truncation(self.args), self.args.workers, self.args.mirror_tolerance,
        )
        self.manifest(
            resolved, param=self.args.param, values=values, samples=self.args.samples,
            tail_tolerance=self.args.tol,
        ).write(out)
        failed = sum(1 for row in rows if row["error"])
        print(f"Wrote {len(rows)} sweep rows to {out} ({failed} failed)")
        return EXIT_OK


@CommandFactory.register_command("presets")
class PresetsCommand(Command):
    def execute(self) -> int:
        for name in sorted(PRESETS):
            preset = PRESETS[name]
            units = " [SI]" if preset.si else ""
            aliases = f" (also: {', '.join(preset.aliases)})" if preset.aliases else ""
            print(f"{preset.label:16s}{units} {preset.description}{aliases}")
        return EXIT_OK


# -----------------------------------------------------------------------------------
# Entry point
# -----------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' configuration file")
    common.add_argument("--preset", help="named parameter set (see the 'presets' command)")
    common.add_argument("--si-units", action="store_true",
                        help="omega in rad/s, temperature in K, length in m")
    common.add_argument("--tol", type=float, default=1e-10, help="series tail tolerance")
    common.add_argument("--mirror-tolerance", type=float, default=None,
                        help="relative tolerance between r and sqrt(R1 R2)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one parameter after the preset and config file")
    common.add_argument("--verbose", action="store_true", help="log progress at INFO level")

    parser = argparse.ArgumentParser(
        prog="cavity-pulses",
        description="Energy density, pulses and photon budgets of an oscillating cavity.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    density = sub.add_parser("density", parents=[common], help="sample one period of the density")
    density.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    density.add_argument("--workers", type=int, default=1)
    density.add_argument("--classical", action="store_true", help="drop the kernel terms")
    density.add_argument("--out", required=True)

    energy = sub.add_parser("energy", parents=[common], help="closed-form energy budget")
    energy.add_argument("--convention", choices=("dimensionless", "literal"), default="dimensionless")
    energy.add_argument("--samples", type=int, default=DEFAULT_SAMPLES,
                        help="grid used to count pulses at theta/omega <= 10")
    energy.add_argument("--workers", type=int, default=1)
    energy.add_argument("--out")

    verify = sub.add_parser("verify", parents=[common], help="cross-check closed forms and numerics")
    verify.add_argument("--quad-tol", type=float, default=GAP_QUAD_TOL,
                        help="relative tolerance on the motion-induced energy")
    verify.add_argument("--workers", type=int, default=1)
    verify.add_argument("--out")

    sweep = sub.add_parser("sweep", parents=[common], help="scan one parameter")
    sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    sweep.add_argument("--values", nargs="*", type=float, default=[])
    sweep.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--out", required=True)

    sub.add_parser("presets", help="list the registered presets")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    # EAFP: run the command and translate whatever goes wrong into an exit code
    try:
        return CommandFactory.create_command(args.command, args).execute()
    except (ThresholdExceeded, PoleProximity) as exc:
        print(f"Threshold error: {exc}", file=sys.stderr)
        return EXIT_THRESHOLD
    except (InvalidParameter, InconsistentMirrors) as exc:
        print(f"Configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CavityError as exc:
        print(f"Numerical failure: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
