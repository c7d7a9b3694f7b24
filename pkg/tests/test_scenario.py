# Copyright (c), CommunityLogiq Software

import pytest

from faultforge.engine.scenario import (
    FaultPersistence,
    InjectionPolicy,
    InjectionTarget,
    LayerWeighting,
    RndMode,
    apply_env_overrides,
    num_faults_required,
    parse_scenario,
    sample_scenario_path,
    save_scenario,
    scenario_hash,
)
from faultforge.errors import ScenarioValidationError

MINIMAL = """
dataset_size: 100
num_runs: 2
max_faults_per_image: 3
inj_target: weights
rnd_bit_range: [0, 31]
"""


def write(tmp_path, text, name="scenario.yml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_echoes_values_and_defaults(tmp_path):
    cfg = parse_scenario(write(tmp_path, MINIMAL))
    assert (cfg.dataset_size, cfg.num_runs, cfg.max_faults_per_image) == (100, 2, 3)
    assert cfg.inj_target == InjectionTarget.WEIGHTS
    assert cfg.rnd_bit_range == (0, 31)
    assert cfg.layer_weighting == LayerWeighting.SIZE_PROPORTIONAL
    assert cfg.inj_policy == InjectionPolicy.PER_IMAGE
    assert cfg.fault_persistence == FaultPersistence.TRANSIENT
    assert cfg.batch_size == 1
    assert num_faults_required(cfg) == 600


@pytest.mark.parametrize(
    "a,b,c,n",
    [(100, 2, 3, 600), (1, 1, 1, 1), (7, 3, 2, 42)],
)
def test_num_faults_required(scenario, a, b, c, n):
    assert num_faults_required(scenario(dataset_size=a, num_runs=b, max_faults_per_image=c)) == n


@pytest.mark.parametrize(
    "text,key",
    [
        (MINIMAL.replace("[0, 31]", "[31, 0]"), "rnd_bit_range"),
        (MINIMAL.replace("[0, 31]", "[0, 32]"), "rnd_bit_range"),
        (MINIMAL + "colour: blue\n", "colour"),
        (MINIMAL.replace("num_runs: 2\n", ""), "num_runs"),
        (MINIMAL.replace("dataset_size: 100", "dataset_size: 0"), "dataset_size"),
        (MINIMAL.replace("weights", "both"), "inj_target"),
        (MINIMAL + "rnd_mode: random_value\n", "rnd_value_range"),
        (MINIMAL + "layer_types: [maxpool2d]\n", "layer_types"),
        (MINIMAL + "seed: -1\n", "seed"),
    ],
)
def test_validation_errors_name_the_key(tmp_path, text, key):
    with pytest.raises(ScenarioValidationError) as e:
        parse_scenario(write(tmp_path, text))
    assert e.value.key == key
    assert key in str(e.value)


def test_random_value_mode(tmp_path):
    text = MINIMAL.replace("rnd_bit_range: [0, 31]", "rnd_mode: random_value\nrnd_value_range: [-2.5, 4]")
    cfg = parse_scenario(write(tmp_path, text))
    assert cfg.rnd_mode == RndMode.RANDOM_VALUE
    assert cfg.rnd_value_range == (-2.5, 4.0)


@pytest.mark.parametrize("name", ["default", "weights_exponent", "detection"])
def test_bundled_samples_round_trip(tmp_path, name):
    cfg = parse_scenario(sample_scenario_path(name))
    path = tmp_path / f"{name}.yml"
    save_scenario(cfg, path)
    assert parse_scenario(path) == cfg


def test_hash_ignores_the_seed(scenario):
    cfg = scenario(seed=1)
    assert scenario_hash(cfg) == scenario_hash(cfg.replace(seed=99))
    assert scenario_hash(cfg) != scenario_hash(cfg.replace(max_faults_per_image=2))


def test_seed_env_override(scenario):
    cfg = scenario(seed=1)
    assert apply_env_overrides(cfg, {"FAULTFORGE_SEED": "0x10"}).seed == 16
    assert apply_env_overrides(cfg, {}).seed == 1
    with pytest.raises(ScenarioValidationError, match="seed"):
        apply_env_overrides(cfg, {"FAULTFORGE_SEED": "many"})


def test_derived_group_counts(scenario):
    cfg = scenario(dataset_size=10, num_runs=3, batch_size=4)
    assert cfg.batches_per_epoch == 3
    assert cfg.batch_length(2) == 2
    assert cfg.num_groups == 30
    assert cfg.replace(inj_policy=InjectionPolicy.PER_BATCH).num_groups == 9
    assert cfg.replace(inj_policy=InjectionPolicy.PER_EPOCH).num_groups == 3
