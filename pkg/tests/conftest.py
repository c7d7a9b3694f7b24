# Copyright (c), CommunityLogiq Software

import pytest

from faultforge.engine.dataset import dataset_for_model
from faultforge.engine.model_registry import builtin_model
from faultforge.engine.scenario import (
    FaultPersistence,
    InjectionPolicy,
    InjectionTarget,
    RndMode,
    ScenarioConfig,
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("FAULTFORGE_SEED", "FAULTFORGE_OUT", "FAULTFORGE_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.fixture
def tiny_cnn():
    return builtin_model("tiny-cnn")


@pytest.fixture
def tiny_det():
    return builtin_model("tiny-det")


@pytest.fixture
def small_dataset(tiny_cnn):
    return dataset_for_model(tiny_cnn, 8)


def make_scenario(**overrides) -> ScenarioConfig:
    values = dict(
        dataset_size=8,
        num_runs=1,
        max_faults_per_image=1,
        inj_target=InjectionTarget.NEURONS,
        rnd_mode=RndMode.BIT_FLIP,
        rnd_bit_range=(0, 31),
        inj_policy=InjectionPolicy.PER_IMAGE,
        fault_persistence=FaultPersistence.TRANSIENT,
        batch_size=4,
        seed=1,
    )
    values.update(overrides)
    return ScenarioConfig(**values)


@pytest.fixture
def scenario():
    return make_scenario
