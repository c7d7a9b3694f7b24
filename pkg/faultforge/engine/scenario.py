# Copyright (c), CommunityLogiq Software

"""
Campaign scenario: the default.yml style configuration file.

Keys follow the original parameter names (dataset_size, num_runs,
max_faults_per_image, rnd_bit_range, inj_policy, ...). Unknown keys are
rejected so that a typo never silently falls back to a default.
"""

import dataclasses
import hashlib
import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, FrozenSet, Mapping, Optional, Tuple

import yaml
from loguru import logger

from faultforge.errors import ScenarioValidationError
from faultforge.engine.binfmt import PathLike
from faultforge.engine.tensor_core import INJECTABLE_KINDS, LayerKind

SEED_ENV = "FAULTFORGE_SEED"
MAX_SEED = (1 << 64) - 1


class InjectionTarget(str, Enum):
    NEURONS = "neurons"
    WEIGHTS = "weights"


class LayerWeighting(str, Enum):
    UNIFORM = "uniform"
    SIZE_PROPORTIONAL = "size_proportional"


class RndMode(str, Enum):
    BIT_FLIP = "bitflip"
    RANDOM_VALUE = "random_value"
    NO_OP = "noop"


class InjectionPolicy(str, Enum):
    PER_IMAGE = "per_image"
    PER_BATCH = "per_batch"
    PER_EPOCH = "per_epoch"


class FaultPersistence(str, Enum):
    TRANSIENT = "transient"
    PERMANENT = "permanent"


_LAYER_KIND_ORDER = (LayerKind.CONV2D, LayerKind.CONV3D, LayerKind.LINEAR)


@dataclass(frozen=True)
class ScenarioConfig:
    dataset_size: int
    num_runs: int
    max_faults_per_image: int
    inj_target: InjectionTarget
    layer_types: FrozenSet[LayerKind] = INJECTABLE_KINDS
    layer_range: Optional[Tuple[int, int]] = None
    layer_weighting: LayerWeighting = LayerWeighting.SIZE_PROPORTIONAL
    rnd_mode: RndMode = RndMode.BIT_FLIP
    rnd_bit_range: Optional[Tuple[int, int]] = None
    rnd_value_range: Optional[Tuple[float, float]] = None
    inj_policy: InjectionPolicy = InjectionPolicy.PER_IMAGE
    fault_persistence: FaultPersistence = FaultPersistence.TRANSIENT
    batch_size: int = 1
    seed: int = 0
    read_fault_file: Optional[str] = None

    def __post_init__(self):
        validate_scenario(self)

    def replace(self, **changes: Any) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @property
    def batches_per_epoch(self) -> int:
        return math.ceil(self.dataset_size / self.batch_size)

    @property
    def groups_per_epoch(self) -> int:
        match self.inj_policy:
            case InjectionPolicy.PER_IMAGE:
                return self.dataset_size
            case InjectionPolicy.PER_BATCH:
                return self.batches_per_epoch
            case _:
                return 1

    @property
    def num_groups(self) -> int:
        return self.groups_per_epoch * self.num_runs

    def batch_length(self, batch_index: int) -> int:
        start = batch_index * self.batch_size
        return min(self.batch_size, self.dataset_size - start)


_REQUIRED = ("dataset_size", "num_runs", "max_faults_per_image", "inj_target")
_KEYS = tuple(f.name for f in dataclasses.fields(ScenarioConfig))


def _positive_int(key: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
        raise ScenarioValidationError(key, f"expected a positive integer, got {value!r}")
    return value


def _int_pair(key: str, value: Any) -> Tuple[int, int]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, int) for v in value)
    ):
        raise ScenarioValidationError(key, f"expected [lo, hi] integers, got {value!r}")
    return (value[0], value[1])


def _float_pair(key: str, value: Any) -> Tuple[float, float]:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
    ):
        raise ScenarioValidationError(key, f"expected [min, max] numbers, got {value!r}")
    return (float(value[0]), float(value[1]))


def _enum(key: str, cls, value: Any):
    if isinstance(value, cls):
        return value
    try:
        return cls(str(value).strip().lower())
    except ValueError:
        choices = ", ".join(member.value for member in cls)
        raise ScenarioValidationError(key, f"{value!r} is not one of {choices}")


def validate_scenario(cfg: ScenarioConfig):
    for key in ("dataset_size", "num_runs", "max_faults_per_image", "batch_size"):
        _positive_int(key, getattr(cfg, key))

    if not isinstance(cfg.seed, int) or isinstance(cfg.seed, bool) or not 0 <= cfg.seed <= MAX_SEED:
        raise ScenarioValidationError("seed", f"expected an unsigned 64-bit integer, got {cfg.seed!r}")

    if not cfg.layer_types:
        raise ScenarioValidationError("layer_types", "at least one layer type is required")
    unsupported = [kind.value for kind in cfg.layer_types if kind not in INJECTABLE_KINDS]
    if unsupported:
        raise ScenarioValidationError("layer_types", f"not injectable: {', '.join(sorted(unsupported))}")

    if cfg.layer_range is not None:
        lo, hi = cfg.layer_range
        if lo < 0 or lo > hi:
            raise ScenarioValidationError("layer_range", f"expected 0 <= lo <= hi, got [{lo}, {hi}]")

    if cfg.rnd_bit_range is not None:
        lo, hi = cfg.rnd_bit_range
        if not 0 <= lo <= hi <= 31:
            raise ScenarioValidationError("rnd_bit_range", f"expected 0 <= lo <= hi <= 31, got [{lo}, {hi}]")
    elif cfg.rnd_mode == RndMode.BIT_FLIP:
        raise ScenarioValidationError("rnd_bit_range", "required when rnd_mode is bitflip")

    if cfg.rnd_value_range is not None:
        lo, hi = cfg.rnd_value_range
        if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
            raise ScenarioValidationError("rnd_value_range", f"expected finite min <= max, got [{lo}, {hi}]")
    elif cfg.rnd_mode == RndMode.RANDOM_VALUE:
        raise ScenarioValidationError("rnd_value_range", "required when rnd_mode is random_value")


def scenario_from_mapping(raw: Mapping[str, Any]) -> ScenarioConfig:
    if not isinstance(raw, Mapping):
        raise ScenarioValidationError("<root>", "scenario must be a mapping of keys to values")

    for key in raw:
        if key not in _KEYS:
            raise ScenarioValidationError(str(key), "unknown key")
    for key in _REQUIRED:
        if raw.get(key) is None:
            raise ScenarioValidationError(key, "missing required key")

    values: Dict[str, Any] = {
        "dataset_size": _positive_int("dataset_size", raw["dataset_size"]),
        "num_runs": _positive_int("num_runs", raw["num_runs"]),
        "max_faults_per_image": _positive_int("max_faults_per_image", raw["max_faults_per_image"]),
        "inj_target": _enum("inj_target", InjectionTarget, raw["inj_target"]),
    }

    if raw.get("layer_types") is not None:
        types = raw["layer_types"]
        if isinstance(types, str):
            types = [types]
        if not isinstance(types, (list, tuple)):
            raise ScenarioValidationError("layer_types", f"expected a list, got {types!r}")
        try:
            values["layer_types"] = frozenset(LayerKind.parse(str(t)) for t in types)
        except ValueError as e:
            raise ScenarioValidationError("layer_types", str(e))
    if raw.get("layer_range") is not None:
        values["layer_range"] = _int_pair("layer_range", raw["layer_range"])
    if raw.get("layer_weighting") is not None:
        values["layer_weighting"] = _enum("layer_weighting", LayerWeighting, raw["layer_weighting"])
    if raw.get("rnd_mode") is not None:
        values["rnd_mode"] = _enum("rnd_mode", RndMode, raw["rnd_mode"])
    if raw.get("rnd_bit_range") is not None:
        values["rnd_bit_range"] = _int_pair("rnd_bit_range", raw["rnd_bit_range"])
    if raw.get("rnd_value_range") is not None:
        values["rnd_value_range"] = _float_pair("rnd_value_range", raw["rnd_value_range"])
    if raw.get("inj_policy") is not None:
        values["inj_policy"] = _enum("inj_policy", InjectionPolicy, raw["inj_policy"])
    if raw.get("fault_persistence") is not None:
        values["fault_persistence"] = _enum("fault_persistence", FaultPersistence, raw["fault_persistence"])
    if raw.get("batch_size") is not None:
        values["batch_size"] = _positive_int("batch_size", raw["batch_size"])
    if raw.get("seed") is not None:
        seed = raw["seed"]
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ScenarioValidationError("seed", f"expected an unsigned 64-bit integer, got {seed!r}")
        values["seed"] = seed
    if raw.get("read_fault_file") is not None:
        values["read_fault_file"] = str(raw["read_fault_file"])

    return ScenarioConfig(**values)


def parse_scenario(path: PathLike) -> ScenarioConfig:
    with open(path, "r") as f:
        try:
            raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise ScenarioValidationError("<file>", f"{path} is not valid YAML: {e}")
    if raw is None:
        raw = {}
    cfg = scenario_from_mapping(raw)
    logger.debug(f"Parsed scenario {path}: n={num_faults_required(cfg)} target={cfg.inj_target.value}")
    return cfg


def scenario_to_mapping(cfg: ScenarioConfig, include_seed: bool = True) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "dataset_size": cfg.dataset_size,
        "num_runs": cfg.num_runs,
        "max_faults_per_image": cfg.max_faults_per_image,
        "inj_target": cfg.inj_target.value,
        "layer_types": [kind.value for kind in _LAYER_KIND_ORDER if kind in cfg.layer_types],
        "layer_range": list(cfg.layer_range) if cfg.layer_range is not None else None,
        "layer_weighting": cfg.layer_weighting.value,
        "rnd_mode": cfg.rnd_mode.value,
        "rnd_bit_range": list(cfg.rnd_bit_range) if cfg.rnd_bit_range is not None else None,
        "rnd_value_range": list(cfg.rnd_value_range) if cfg.rnd_value_range is not None else None,
        "inj_policy": cfg.inj_policy.value,
        "fault_persistence": cfg.fault_persistence.value,
        "batch_size": cfg.batch_size,
    }
    if include_seed:
        out["seed"] = cfg.seed
        out["read_fault_file"] = cfg.read_fault_file
    return out


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(scenario_to_mapping(cfg), sort_keys=False, default_flow_style=None)


def save_scenario(cfg: ScenarioConfig, path: PathLike):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        f.write(dump_scenario(cfg))


def num_faults_required(cfg: ScenarioConfig) -> int:
    """n = a * b * c"""
    return cfg.dataset_size * cfg.num_runs * cfg.max_faults_per_image


def scenario_hash(cfg: ScenarioConfig) -> int:
    """64-bit digest of every setting that shapes the fault matrix except the seed"""
    canonical = yaml.safe_dump(scenario_to_mapping(cfg, include_seed=False), sort_keys=True)
    digest = hashlib.blake2b(canonical.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def apply_env_overrides(cfg: ScenarioConfig, environ: Optional[Mapping[str, str]] = None) -> ScenarioConfig:
    environ = os.environ if environ is None else environ
    raw = environ.get(SEED_ENV)
    if not raw:
        return cfg
    try:
        seed = int(raw, 0)
    except ValueError:
        raise ScenarioValidationError("seed", f"{SEED_ENV}={raw!r} is not an integer")
    logger.info(f"Seed overridden by {SEED_ENV}: {seed}")
    return cfg.replace(seed=seed)


def sample_scenario_path(name: str) -> Path:
    return Path(__file__).resolve().parent.parent / "scenarios" / f"{name}.yml"
