"""Scenario configuration: dotenv-format files, CLI overrides and validation."""

import argparse
import dataclasses
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import dotenv_values

from .control.solver import SolverConfig
from .errors import ConfigError
from .model.thomas import ProcessParams, contact_time_min, kt_from_conditions
from .uncertainty.sampling import UncertaintySpec

logger = logging.getLogger(__name__)

RUN_MODES = (
    "simulate",
    "moments",
    "optimize-det",
    "optimize-stoch",
    "ensemble",
    "compare",
    "mc-compare",
    "sensitivity",
)

# File key prefix -> ScenarioConfig attribute holding that section.
SECTIONS = {"PROCESS": "process", "SOLVER": "solver", "UNCERTAINTY": "uncertainty"}
RUN_KEYS = {"MODE": "mode", "JOBS": "jobs", "ALLOW_UNCONVERGED": "allow_unconverged"}


@dataclass
class ScenarioConfig:
    """Everything one run needs.

    Priority: CLI args > scenario file > defaults
    """

    process: ProcessParams = field(default_factory=ProcessParams)
    solver: SolverConfig = field(default_factory=SolverConfig)
    uncertainty: UncertaintySpec = field(default_factory=UncertaintySpec)
    mode: str = "simulate"
    jobs: int = 1
    allow_unconverged: bool = False
    output_path: Optional[Path] = None

    @property
    def seed(self) -> int:
        return self.uncertainty.seed

    def validate(self) -> List[str]:
        errors = self.process.validate() + self.solver.validate() + self.uncertainty.validate()
        if self.mode not in RUN_MODES:
            errors.append(f"run.mode: expected one of {RUN_MODES}, got {self.mode!r}")
        if self.jobs < 1:
            errors.append("run.jobs: must be >= 1")
        q_start = self.solver.q_start_lph
        if not self.process.q_min_lph <= q_start <= self.process.q_max_lph:
            errors.append(
                f"solver.q_start_lph: {q_start} outside [process.q_min_lph, process.q_max_lph] "
                f"= [{self.process.q_min_lph}, {self.process.q_max_lph}]"
            )
        return errors

    def check(self) -> "ScenarioConfig":
        errors = self.validate()
        if errors:
            raise ConfigError(errors)
        return self


def _parse_value(raw: str, default: Any, path: str) -> Any:
    text = raw.strip()
    if isinstance(default, bool):
        lowered = text.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ValueError(f"{path}: cannot parse {raw!r} as a boolean")
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ValueError(f"{path}: cannot parse {raw!r} as an integer") from None
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ValueError(f"{path}: cannot parse {raw!r} as a number") from None
    if isinstance(default, tuple):
        try:
            return tuple(float(part) for part in text.split(","))
        except ValueError:
            raise ValueError(f"{path}: cannot parse {raw!r} as comma-separated numbers") from None
    return text


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return str(value)


def config_from_mapping(values: Dict[str, Optional[str]]) -> ScenarioConfig:
    """Build and validate a ScenarioConfig from ``SECTION__FIELD`` keys.

    Raises:
        ConfigError: Listing every unknown key, unparsable value and invariant violation
    """
    defaults = ScenarioConfig()
    updates: Dict[str, Dict[str, Any]] = {attr: {} for attr in SECTIONS.values()}
    run_updates: Dict[str, Any] = {}
    errors: List[str] = []

    for key, raw in values.items():
        prefix, sep, name = key.partition("__")
        if not sep or raw is None:
            errors.append(f"{key}: expected SECTION__FIELD=value")
            continue
        try:
            if prefix == "RUN" and name in RUN_KEYS:
                attr = RUN_KEYS[name]
                run_updates[attr] = _parse_value(raw, getattr(defaults, attr), f"run.{attr}")
            elif prefix in SECTIONS:
                section = getattr(defaults, SECTIONS[prefix])
                attr = name.lower()
                if attr not in {f.name for f in dataclasses.fields(section)}:
                    errors.append(f"{SECTIONS[prefix]}.{attr}: unknown key {key}")
                    continue
                path = f"{SECTIONS[prefix]}.{attr}"
                updates[SECTIONS[prefix]][attr] = _parse_value(raw, getattr(section, attr), path)
            else:
                errors.append(f"{key}: unknown key")
        except ValueError as exc:
            errors.append(str(exc))

    if errors:
        raise ConfigError(errors)

    config = ScenarioConfig(
        process=dataclasses.replace(defaults.process, **updates["process"]),
        solver=dataclasses.replace(defaults.solver, **updates["solver"]),
        uncertainty=dataclasses.replace(defaults.uncertainty, **updates["uncertainty"]),
        **run_updates,
    )
    return config.check()


def load_config(path: Optional[Path] = None) -> ScenarioConfig:
    """Load a scenario file; no path or an empty file gives the default scenario.

    Args:
        path: Dotenv-format scenario file

    Returns:
        Validated ScenarioConfig
    """
    if path is None:
        return ScenarioConfig().check()
    path = Path(path)
    if not path.is_file():
        raise ConfigError([f"config: file not found: {path}"])
    values = dotenv_values(path)
    logger.debug(f"Read {len(values)} keys from {path}")
    return config_from_mapping(dict(values))


def serialize_config(config: ScenarioConfig) -> str:
    """Scenario file text; ``load_config`` of this text reproduces ``config``."""
    lines = ["# chromate-flow-control scenario"]
    for prefix, attr in SECTIONS.items():
        section = getattr(config, attr)
        lines.append("")
        for f in dataclasses.fields(section):
            lines.append(f"{prefix}__{f.name.upper()}={_format_value(getattr(section, f.name))}")
    lines.append("")
    for name, attr in RUN_KEYS.items():
        lines.append(f"RUN__{name}={_format_value(getattr(config, attr))}")
    return "\n".join(lines) + "\n"


def config_hash(config: ScenarioConfig) -> str:
    """SHA-256 of the serialized scenario."""
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(
        description="Optimal flow-rate control of ion-exchange chromate removal",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--config", type=str, default=None, help="Scenario file (dotenv format)")
    parser.add_argument("--mode", type=str, choices=RUN_MODES, default=None, help="Run mode")
    parser.add_argument("--seed", type=int, default=None, help="Random seed for ensembles and paths")
    parser.add_argument("--jobs", type=int, default=None, help="Worker processes")
    parser.add_argument("--out", type=str, default=None, help="Output directory (default: ./outputs/<timestamp>)")
    parser.add_argument(
        "--allow-unconverged",
        action="store_true",
        help="Exit 0 even when an optimization hits the iteration cap",
    )
    parser.add_argument("--max-iterations", type=int, default=None, help="Override solver iteration cap")
    return parser.parse_args(argv)


def build_config(args: argparse.Namespace) -> ScenarioConfig:
    """Scenario file plus CLI overrides."""
    config = load_config(Path(args.config) if args.config else None)
    if args.mode is not None:
        config.mode = args.mode
    if args.jobs is not None:
        config.jobs = args.jobs
    if args.allow_unconverged:
        config.allow_unconverged = True
    if args.seed is not None:
        config.uncertainty = dataclasses.replace(config.uncertainty, seed=args.seed)
    if args.max_iterations is not None:
        config.solver = dataclasses.replace(config.solver, max_iterations=args.max_iterations)
    if args.out:
        config.output_path = Path(args.out)
    return config.check()


def print_config(config: ScenarioConfig) -> None:
    """Log the effective configuration."""
    p, s, u = config.process, config.solver, config.uncertainty
    logger.info("=" * 60)
    logger.info("Scenario Configuration")
    logger.info("=" * 60)
    logger.info(f"Mode: {config.mode}  (jobs={config.jobs}, seed={config.seed})")
    logger.info(f"Inlet C0: {p.c0_ppb} ppb   q_m: {p.qm_g_per_l} g/L   V: {p.resin_volume_l} L")
    logger.info(f"K_T = {p.kt_alpha}*CT + {p.kt_beta}*C0 + {p.kt_gamma} (x{p.kt_multiplier})")
    for name, flow in (("q_min", p.q_min_lph), ("q_max", p.q_max_lph)):
        logger.info(
            f"{name}: {flow} L/hr  CT={float(contact_time_min(p, flow)):.4f} min  "
            f"K_T={kt_from_conditions(p, flow):.2f} L/(g hr)"
        )
    logger.info(
        f"Solver: t_final={s.t_final_hr} hr, n_grid={s.n_grid}, tol={s.tolerance:g}, "
        f"max_iter={s.max_iterations}, gain={s.gradient_gain_lph} L/hr, q_start={s.q_start_lph}"
    )
    logger.info(f"Moment mode: {s.moment_mode}   target ratio: {s.target_ratio}")
    logger.info(
        f"Uncertainty: C0 +/-{u.rel_width_c0:.0%}, K_T +/-{u.rel_width_kt:.0%}, q_m +/-{u.rel_width_qm:.0%}, "
        f"{u.distribution}, {u.sample_count} samples, diffusion={u.diffusion_mode}"
    )
    logger.info(f"Config hash: {config_hash(config)[:16]}")
    logger.info("=" * 60)
