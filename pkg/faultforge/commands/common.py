# Copyright (c), CommunityLogiq Software

import os
from pathlib import Path
from typing import Optional

from loguru import logger

from faultforge.errors import ScenarioValidationError, ValidationError
from faultforge.engine.dataset import (
    DEFAULT_DATA_SEED,
    DatasetHandle,
    dataset_for_model,
    dataset_from_descriptor,
    load_descriptor,
)
from faultforge.engine.model_registry import Model, builtin_model, builtin_models, load_model
from faultforge.engine.scenario import (
    MAX_SEED,
    ScenarioConfig,
    apply_env_overrides,
    parse_scenario,
    sample_scenario_path,
)

OUT_ENV = "FAULTFORGE_OUT"
DEFAULT_OUT = "faultforge-out"


def add_common_campaign_args(parser, need_dataset: bool = True):
    parser.add_argument(
        "--scenario", "-s", required=True, help="scenario file, or the name of a bundled sample (default, ...)"
    )
    parser.add_argument("--model", "-m", required=True, help="built-in model name or ALFM model file")
    if need_dataset:
        parser.add_argument(
            "--dataset",
            default="synthetic",
            help="'synthetic', 'synthetic:SEED' or a dataset.json descriptor (default: synthetic)",
        )
    parser.add_argument("--seed", type=lambda v: int(v, 0), help="fault seed, overrides FAULTFORGE_SEED")


def get_out_dir(flag: Optional[str]) -> Path:
    # prioritize the flag, then the env variable, then the default
    return Path(flag or os.getenv(OUT_ENV) or DEFAULT_OUT)


def get_scenario(value: str, seed: Optional[int] = None) -> ScenarioConfig:
    path = Path(value)
    if not path.exists():
        sample = sample_scenario_path(value)
        if not sample.exists():
            raise ValidationError(f"scenario {value} is neither a file nor a bundled sample")
        path = sample
    cfg = apply_env_overrides(parse_scenario(path))
    if seed is not None:
        if not 0 <= seed <= MAX_SEED:
            raise ScenarioValidationError("seed", f"{seed} is not a 64-bit unsigned integer")
        cfg = cfg.replace(seed=seed)
    return cfg


def get_model(value: str) -> Model:
    if value in builtin_models():
        return builtin_model(value)
    path = Path(value)
    if not path.exists():
        names = ", ".join(sorted(builtin_models()))
        raise ValidationError(f"model {value} is neither a built-in ({names}) nor a file")
    return load_model(path)


def get_dataset(value: Optional[str], model: Model, count: int) -> DatasetHandle:
    value = value or "synthetic"
    if value == "synthetic" or value.startswith("synthetic:"):
        _, _, seed_str = value.partition(":")
        try:
            seed = int(seed_str, 0) if seed_str else DEFAULT_DATA_SEED
        except ValueError:
            raise ValidationError(f"invalid data set seed in {value!r}")
        return dataset_for_model(model, count, seed)

    path = Path(value)
    if not path.exists():
        raise ValidationError(f"data set {value} is neither 'synthetic[:SEED]' nor a descriptor file")
    logger.debug(f"Rebuilding data set from {path}")
    return dataset_from_descriptor(load_descriptor(path), model)

