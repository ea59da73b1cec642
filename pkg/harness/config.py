"""Experiment configuration: presets, key=value files and CLI overrides."""

import hashlib
import os
from utils.compat import StrEnum
from pathlib import Path
from typing import Any

from dotenv import dotenv_values, load_dotenv
from pydantic import BaseModel, Field, field_validator

from excitation import epsilon_grid
from instance import WeightDistribution
from lattice import LatticeKind
from scaling.fits import EPSILON_CUT
from utils.logging import get_logger
from utils.rng import MASK64

logger = get_logger(__name__)
load_dotenv()

OUTPUT_DIR_ENV = "DIMERLAB_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "runs"

LIST_KEYS = {"kinds", "sizes", "epsilons", "zeta_window"}
KNOWN_KEYS = {
    "kinds", "sizes", "instances", "mode", "epsilons", "seed", "workers", "out",
    "zeta_window", "epsilon_cut", "n_boot", "winding_only", "distribution", "preset",
}


class ExcitationMode(StrEnum):
    MAX = "max"
    RANDOM = "random"
    EPSILON = "epsilon"


PRESETS: dict[str, dict[str, Any]] = {
    "desk": {
        "kinds": ["H", "Q", "T"],
        "sizes": [8, 16, 24, 32, 48, 64],
        "instances": 2000,
        "mode": "max",
    },
    "full": {
        "kinds": ["H", "Q", "T"],
        "sizes": [8, 16, 24, 32, 48, 64, 96, 128, 160],
        "instances": 10000,
        "mode": "max",
    },
    "epsilon": {
        "kinds": ["H", "Q", "T"],
        "sizes": [20, 50, 100],
        "instances": 1000,
        "mode": "epsilon",
    },
}


def default_output_dir() -> Path:
    return Path(os.getenv(OUTPUT_DIR_ENV) or DEFAULT_OUTPUT_DIR)


class ExperimentConfig(BaseModel):
    """Everything that determines a run.

    `workers` and `out` change where and how fast a run happens, never its
    records, so they are excluded from the config hash.
    """

    kinds: list[LatticeKind] = Field(default_factory=lambda: [LatticeKind.Q])
    sizes: list[int] = Field(default_factory=lambda: list(PRESETS["desk"]["sizes"]))
    instances: int = 2000
    mode: ExcitationMode = ExcitationMode.MAX
    epsilons: list[float] = Field(default_factory=lambda: [float(e) for e in epsilon_grid()])
    seed: int = 0
    workers: int = 1
    out: Path = Field(default_factory=default_output_dir)
    zeta_window: tuple[float, float] = (1.0, 1.5)
    epsilon_cut: float = EPSILON_CUT
    n_boot: int = 200
    winding_only: bool = False
    distribution: WeightDistribution = WeightDistribution.EXPONENTIAL

    @field_validator("kinds")
    @classmethod
    def some_kinds(cls, value: list[LatticeKind]) -> list[LatticeKind]:
        if not value:
            raise ValueError("At least one lattice kind is required")
        return list(dict.fromkeys(value))

    @field_validator("sizes")
    @classmethod
    def even_sizes(cls, value: list[int]) -> list[int]:
        if not value:
            raise ValueError("At least one size is required")
        for L in value:
            if L < 2 or L % 2:
                raise ValueError(f"Size {L} must be even and at least 2")
        return sorted(set(value))

    @field_validator("instances", "workers", "n_boot")
    @classmethod
    def at_least_one(cls, value: int) -> int:
        if value < 1:
            raise ValueError(f"Must be at least 1, got {value}")
        return value

    @field_validator("epsilons")
    @classmethod
    def increasing_grid(cls, value: list[float]) -> list[float]:
        if any(e < 0 for e in value):
            raise ValueError("Epsilon values must be non-negative")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("Epsilon grid must be strictly increasing")
        return value

    @field_validator("seed")
    @classmethod
    def unsigned_seed(cls, value: int) -> int:
        if not 0 <= value <= MASK64:
            raise ValueError(f"Seed must fit in 64 unsigned bits, got {value}")
        return value

    @field_validator("zeta_window")
    @classmethod
    def ordered_window(cls, value: tuple[float, float]) -> tuple[float, float]:
        if not value[0] < value[1]:
            raise ValueError(f"zeta_window exponents must increase, got {value}")
        return value

    def config_hash(self) -> str:
        canonical = self.model_dump_json(exclude={"workers", "out"})
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_config_file(path: Path) -> dict[str, Any]:
    """Read a flat key=value file; comma-separated values become lists.

    Raises:
        FileNotFoundError: The file does not exist.
        ValueError: The file names an unknown key.
    """
    if not path.is_file():
        raise FileNotFoundError(f"Config file not found: {path}")

    values: dict[str, Any] = {}
    for key, raw in dotenv_values(path).items():
        key = key.strip().lower()
        if key not in KNOWN_KEYS:
            raise ValueError(f"Unknown config key '{key}' in {path}")
        if raw is None:
            continue
        values[key] = [part.strip() for part in raw.split(",") if part.strip()] if key in LIST_KEYS else raw.strip()
    return values


def load_config(path: Path | None = None, overrides: dict[str, Any] | None = None) -> ExperimentConfig:
    """Preset, then file values, then CLI overrides.

    Args:
        path: Optional key=value config file.
        overrides: Values from CLI flags; None entries are ignored.

    Returns:
        The validated configuration.
    """
    values: dict[str, Any] = {}
    if path is not None:
        values.update(parse_config_file(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    preset = values.pop("preset", None)
    merged: dict[str, Any] = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ValueError(f"Unknown preset '{preset}', expected one of {sorted(PRESETS)}")
        merged.update(PRESETS[preset])
    merged.update(values)

    config = ExperimentConfig(**merged)
    logger.info(f"Loaded config {config.config_hash()[:12]}: kinds={[str(k) for k in config.kinds]} sizes={config.sizes} mode={config.mode}")
    return config
