#!/usr/bin/env python3
"""Run configuration: model parameters, per-command sections and CLI merging.

A configuration file is JSON with the keys ``params``, ``sections``,
``output``, ``seed`` and ``tolerances``. Section keys are the long CLI flags
of the subcommand with dashes replaced by underscores. Flags given on the
command line override file values; the merged configuration is what gets
hashed into every result envelope.

Example:
    >>> from zgkn.config import RunConfig
    >>> from zgkn.geometry import ModelParams
    >>> config = RunConfig(params=ModelParams(a=0.05))
    >>> len(config.config_hash())
    64
"""

import argparse
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .errors import ConfigError
from .geometry import FINE_STRUCTURE, ModelParams
from .results import canonical_json, sha256_of

logger = logging.getLogger(__name__)

ENV_WORKERS = "ZGKN_WORKERS"
SECTIONS = (
    "spectrum",
    "angular",
    "state",
    "trajectory",
    "interaction",
    "fields",
    "verify",
    "convert",
)
TOLERANCE_KEYS = ("tol_E", "tol_match", "tol_lambda")
_TOP_LEVEL_KEYS = {"params", "sections", "output", "seed", "tolerances"}


def default_workers() -> int:
    """Worker pool size from ZGKN_WORKERS, else min(4, cpu_count)."""
    value = os.environ.get(ENV_WORKERS)
    if value:
        try:
            workers = int(value)
        except ValueError as e:
            raise ConfigError(f"{ENV_WORKERS} must be an integer", value=value) from e
        if workers < 1:
            raise ConfigError(f"{ENV_WORKERS} must be at least 1", value=workers)
        return workers
    return min(4, os.cpu_count() or 1)


@dataclass
class RunConfig:
    """Everything that determines a run's output.

    Attributes:
        params: Model parameters.
        sections: Per-subcommand option dictionaries.
        output: Output paths by kind (``result``, ``csv``, ``grid``, ``state``).
        seed: Optional integer seed for randomized checks.
        tolerances: Solver tolerance overrides.
        warnings: Admissibility warnings; not part of the hash.
    """

    params: ModelParams
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    output: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    tolerances: dict[str, float] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list, compare=False)

    def __post_init__(self):
        unknown = sorted(set(self.sections) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"Unknown config sections: {', '.join(unknown)}", sections=unknown)
        bad = sorted(set(self.tolerances) - set(TOLERANCE_KEYS))
        if bad:
            raise ConfigError(f"Unknown tolerance keys: {', '.join(bad)}", keys=bad)
        for key, value in self.tolerances.items():
            if not isinstance(value, (int, float)) or value <= 0:
                raise ConfigError(f"Tolerance '{key}' must be a positive number", value=value)
        if self.seed is not None and not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer", seed=self.seed)
        self.warnings = self.params.admissibility_warnings()

    def section(self, name: str) -> dict[str, Any]:
        if name not in SECTIONS:
            raise ConfigError(f"Unknown config section '{name}'")
        return dict(self.sections.get(name, {}))

    def tolerance(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))

    def with_section(self, name: str, values: dict[str, Any]) -> "RunConfig":
        """A copy with non-None values merged into a section."""
        merged = {**self.section(name), **{k: v for k, v in values.items() if v is not None}}
        return RunConfig(
            params=self.params,
            sections={**self.sections, name: merged},
            output=dict(self.output),
            seed=self.seed,
            tolerances=dict(self.tolerances),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": self.params.to_dict(),
            "sections": {k: dict(v) for k, v in sorted(self.sections.items())},
            "output": dict(self.output),
            "seed": self.seed,
            "tolerances": dict(self.tolerances),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("A configuration must be a JSON object")
        unknown = sorted(set(data) - _TOP_LEVEL_KEYS)
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}", keys=unknown)
        if "params" not in data:
            raise ConfigError("Configuration lacks 'params'")
        return cls(
            params=ModelParams.from_dict(data["params"]),
            sections=data.get("sections") or {},
            output=data.get("output") or {},
            seed=data.get("seed"),
            tolerances=data.get("tolerances") or {},
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config {path}: {e}", path=str(path)) from e
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        text = canonical_json(self.to_dict(), compact=False)
        Path(path).write_text(text + "\n", encoding="utf-8")

    def config_hash(self) -> str:
        """SHA-256 of the canonical compact JSON of to_dict()."""
        return sha256_of(self.to_dict())

    def model_hash(self) -> str:
        """SHA-256 of the parameters and tolerances only, shared by all subcommands."""
        return sha256_of({"params": self.params.to_dict(), "tolerances": dict(self.tolerances)})


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags every subcommand shares."""
    parser.add_argument("--config", help="JSON run configuration (flags override it)")
    parser.add_argument("--json", action="store_true", help="Print the result envelope as JSON")
    parser.add_argument(
        "--compact", action="store_true", help="Output compact JSON (default: pretty-printed)"
    )
    parser.add_argument("--no-color", action="store_true", help="Disable colored output")
    parser.add_argument("-o", "--output", help="Write the result to a file (.json or .csv)")


def add_model_arguments(parser: argparse.ArgumentParser) -> None:
    """Model parameter flags."""
    group = parser.add_argument_group("model parameters")
    group.add_argument("--a", type=float, help="Signed ring radius in units of hbar/mc")
    group.add_argument("--gamma", type=float, help="Coupling Q Q' (separable hydrogen-like case)")
    group.add_argument("--mass", type=float, help="Particle mass (default: 1)")
    group.add_argument("--charge", type=float, help="Ring charge Q")
    group.add_argument("--point-charge", type=float, help="Point charge Q'")
    group.add_argument("--current", type=float, help="Ring current I (default: Q/(pi a))")
    group.add_argument("--alpha", type=float, help="Fine-structure constant for comparisons")


def params_from_args(args: argparse.Namespace, base: ModelParams | None) -> ModelParams:
    """Merge model flags over base parameters.

    --gamma rebuilds the separable hydrogen-like charges; the individual
    charge flags then still override.
    """
    data = base.to_dict() if base is not None else {}
    a = getattr(args, "a", None)
    if a is not None:
        data["a"] = a
    if "a" not in data:
        raise ConfigError("The ring radius is required (--a or params.a in --config)")
    mass = getattr(args, "mass", None)
    if mass is not None:
        data["m"] = mass
    gamma = getattr(args, "gamma", None)
    if gamma is not None:
        hydro = ModelParams.hydrogenic(
            a=data["a"], gamma=gamma, m=data.get("m", 1.0), alpha=data.get("alpha", FINE_STRUCTURE)
        )
        data.update(charge=hydro.charge, point_charge=hydro.point_charge, current=None)
    for key in ("charge", "point_charge", "current", "alpha"):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return ModelParams.from_dict(data)


def config_from_args(
    args: argparse.Namespace, section: str, keys: Iterable[str] = ()
) -> RunConfig:
    """Load --config if given, then overlay model flags and the section's flags."""
    base = RunConfig.load(args.config) if getattr(args, "config", None) else None
    params = params_from_args(args, base.params if base is not None else None)
    config = RunConfig(
        params=params,
        sections=base.sections if base is not None else {},
        output=base.output if base is not None else {},
        seed=base.seed if base is not None else None,
        tolerances=base.tolerances if base is not None else {},
    )
    values = {key: getattr(args, key, None) for key in keys}
    config = config.with_section(section, values)
    for message in config.warnings:
        logger.warning("%s", message)
    return config


def parse_float_list(text: str | Iterable[float]) -> list[float]:
    """'-0.5,0.5' -> [-0.5, 0.5]; lists pass through."""
    if isinstance(text, str):
        try:
            return [float(v) for v in text.split(",") if v.strip()]
        except ValueError as e:
            raise ConfigError(f"Expected a comma-separated list of numbers, got '{text}'") from e
    return [float(v) for v in text]
