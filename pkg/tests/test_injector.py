# Copyright (c), CommunityLogiq Software

import numpy as np
import pytest

from faultforge.engine.fault_gen import NeuronFault, WeightFault, generate_fault_matrix
from faultforge.engine.injector import (
    CorruptedModel,
    FlipDirection,
    apply_neuron_faults,
    apply_weight_faults,
    flip_bit,
    make_fault_iterator,
)
from faultforge.engine.model_registry import Linear, Model, weights_digest
from faultforge.engine.monitors import NanInfMonitor
from faultforge.engine.scenario import FaultPersistence, InjectionPolicy, InjectionTarget, RndMode
from faultforge.errors import FaultLocationError, FaultsExhausted, ScenarioMismatchError


def bits(x) -> int:
    return int(np.array([x], dtype=np.float32).view(np.uint32)[0])


def sample_input(model, seed=0):
    rng = np.random.default_rng(seed)
    return rng.random(model.input_shape, dtype=np.float32)


def test_forced_bit_flips():
    assert flip_bit(1.0, 31) == (np.float32(-1.0), FlipDirection.ZERO_TO_ONE)
    assert flip_bit(1.0, 22) == (np.float32(1.5), FlipDirection.ZERO_TO_ONE)
    y, direction = flip_bit(1.0, 30)
    assert y == np.inf and direction == FlipDirection.ZERO_TO_ONE
    assert flip_bit(-1.0, 31) == (np.float32(1.0), FlipDirection.ONE_TO_ZERO)
    with pytest.raises(ValueError):
        flip_bit(1.0, 32)


def test_bit_flips_over_random_floats():
    rng = np.random.default_rng(99)
    patterns = rng.integers(0, 1 << 32, size=20_000, dtype=np.uint64).astype(np.uint32)
    values = patterns.view(np.float32)
    values = values[np.isfinite(values)][:10_000]
    assert len(values) == 10_000

    for x in values:
        original = bits(x)
        for bit in range(32):
            y, direction = flip_bit(x, bit)
            assert bin(original ^ bits(y)).count("1") == 1
            assert (original ^ bits(y)) == 1 << bit
            expected = FlipDirection.ONE_TO_ZERO if original >> bit & 1 else FlipDirection.ZERO_TO_ONE
            assert direction == expected
            assert bits(flip_bit(y, bit)[0]) == original


def test_noop_fault_is_the_identity(tiny_cnn):
    x = np.stack([sample_input(tiny_cnn, s) for s in range(3)])
    fault = NeuronFault(1, 0, 2, -1, 3, 3, value=0.0)
    corrupted = CorruptedModel(tiny_cnn, [(0, fault)], InjectionTarget.NEURONS, RndMode.NO_OP)
    out, applied = corrupted.forward(x)
    assert out.tobytes() == tiny_cnn.forward(x).tobytes()
    assert len(applied) == 1 and applied[0].original == applied[0].corrupted


def test_inf_logit_raises_the_due_flag(tiny_cnn):
    x = np.stack([sample_input(tiny_cnn, s) for s in range(2)])
    fault = NeuronFault(1, 2, 4, -1, 0, 0, value=float("inf"))
    injector = apply_neuron_faults(tiny_cnn, [(7, fault)], RndMode.RANDOM_VALUE)
    monitor = NanInfMonitor(2)
    out = tiny_cnn.forward(x, injectors=(injector,), monitors=(monitor,))
    assert out[1, 4] == np.inf
    assert monitor.flags(0) == (False, False)
    assert monitor.flags(1) == (False, True)
    assert [(a.column, a.slot) for a in injector.applied] == [(7, 1)]


def test_mid_layer_flip_matches_split_model_oracle(tiny_cnn):
    x = sample_input(tiny_cnn, 4)
    fault = NeuronFault(0, 1, 5, -1, 2, 6, value=30.0)
    out, applied = CorruptedModel(tiny_cnn, [(0, fault)], InjectionTarget.NEURONS, RndMode.BIT_FLIP).forward(
        x[np.newaxis]
    )

    # second conv sits at position 3; edit its output by hand between the two halves
    manual = x[np.newaxis]
    for position, layer in enumerate(tiny_cnn.layers):
        manual = layer.forward(manual)
        if position == 3:
            manual[0, 5, 2, 6] = flip_bit(manual[0, 5, 2, 6], 30)[0]
    assert out.tobytes() == manual.tobytes()
    assert bits(applied[0].corrupted) == bits(applied[0].original) ^ (1 << 30)


def test_layers_before_the_fault_are_untouched(tiny_cnn):
    x = sample_input(tiny_cnn, 5)[np.newaxis]
    seen = {}

    def record(tag):
        def hook(layer, out):
            seen.setdefault(tag, {})[layer] = out.copy()

        return hook

    tiny_cnn.forward(x, monitors=(record("clean"),))
    fault = NeuronFault(0, 1, 0, -1, 0, 0, value=30.0)
    CorruptedModel(tiny_cnn, [(0, fault)], InjectionTarget.NEURONS, RndMode.BIT_FLIP).forward(
        x, monitors=(record("faulty"),)
    )
    assert seen["clean"][0].tobytes() == seen["faulty"][0].tobytes()
    assert seen["clean"][1].tobytes() != seen["faulty"][1].tobytes()


def test_out_of_bounds_fault_names_the_column(tiny_cnn):
    bad = NeuronFault(0, 1, 99, -1, 0, 0, value=3.0)
    with pytest.raises(FaultLocationError, match="column 4"):
        CorruptedModel(tiny_cnn, [(4, bad)], InjectionTarget.NEURONS, RndMode.BIT_FLIP)
    with pytest.raises(FaultLocationError, match="column 2"):
        apply_weight_faults(tiny_cnn, [(2, WeightFault(7, 0, 0, -1, 0, 0, value=1.0))])


def small_linear():
    weights = (np.arange(8, dtype=np.float32).reshape(2, 4) + 1) * np.float32(0.25)
    return Model("lin", (4,), [Linear(weights, np.zeros(2, dtype=np.float32))], num_classes=2)


def test_sign_flip_on_a_weight_is_linear():
    model = small_linear()
    x = np.ones(4, dtype=np.float32)
    clean = model.forward(x)
    corrupted = apply_weight_faults(model, [(0, WeightFault(0, 1, 2, -1, 0, 0, value=31.0))])
    out, applied = corrupted.forward(x[np.newaxis])
    w = model.injectable(0).weights[1, 2]
    assert out[0, 1] - clean[1] == np.float32(-2.0) * w
    assert out[0, 0] == clean[0]
    assert applied[0].flip == FlipDirection.ZERO_TO_ONE


def test_transient_weight_faults_never_touch_the_base(tiny_cnn):
    before = weights_digest(tiny_cnn)
    faults = [(0, WeightFault(2, 3, 100, -1, 0, 0, value=30.0)), (1, WeightFault(0, 1, 1, -1, 2, 2, value=31.0))]
    corrupted = apply_weight_faults(tiny_cnn, faults, FaultPersistence.TRANSIENT)
    assert weights_digest(corrupted.model) != before
    corrupted.forward(sample_input(tiny_cnn)[np.newaxis])
    assert weights_digest(tiny_cnn) == before

    corrupted.release()
    assert weights_digest(corrupted.model) == before


def test_rebinding_applies_the_same_faults(tiny_cnn):
    hardened = tiny_cnn.with_clipping({0: (-1.0, 1.0), 1: (-1.0, 1.0), 2: (-10.0, 10.0)})
    fault = NeuronFault(0, 0, 1, -1, 4, 4, value=30.0)
    corrupted = CorruptedModel(tiny_cnn, [(3, fault)], InjectionTarget.NEURONS, RndMode.BIT_FLIP)
    out, applied = corrupted.on(hardened).forward(sample_input(tiny_cnn)[np.newaxis])
    assert np.isfinite(out).all()
    assert [a.column for a in applied] == [3]


def test_iterator_group_counts(tiny_cnn, scenario):
    cfg = scenario(dataset_size=4, num_runs=1, max_faults_per_image=1)
    assert len(list(make_fault_iterator(tiny_cnn, generate_fault_matrix(tiny_cnn, cfg), cfg))) == 4

    cfg = scenario(dataset_size=4, num_runs=2, max_faults_per_image=3)
    models = list(make_fault_iterator(tiny_cnn, generate_fault_matrix(tiny_cnn, cfg), cfg))
    assert len(models) == 8
    assert all(len(m.faults) == 3 for m in models)
    assert [m.columns for m in models[:2]] == [[0, 1, 2], [3, 4, 5]]
    assert [m.epoch for m in models] == [0, 0, 0, 0, 1, 1, 1, 1]

    cfg = scenario(dataset_size=4, num_runs=2, inj_policy=InjectionPolicy.PER_EPOCH)
    assert len(list(make_fault_iterator(tiny_cnn, generate_fault_matrix(tiny_cnn, cfg), cfg))) == 2


def test_iterator_end_of_faults(tiny_cnn, scenario):
    cfg = scenario(dataset_size=2)
    it = make_fault_iterator(tiny_cnn, generate_fault_matrix(tiny_cnn, cfg), cfg)
    next(it), next(it)
    with pytest.raises(FaultsExhausted):
        next(it)


def test_permanent_faults_accumulate_within_an_epoch(tiny_cnn, scenario):
    cfg = scenario(
        dataset_size=3,
        num_runs=2,
        max_faults_per_image=2,
        inj_target=InjectionTarget.WEIGHTS,
        fault_persistence=FaultPersistence.PERMANENT,
    )
    models = list(make_fault_iterator(tiny_cnn, generate_fault_matrix(tiny_cnn, cfg), cfg))
    assert [len(m.faults) for m in models] == [2, 4, 6, 2, 4, 6]
    assert models[3].columns == [6, 7]


def test_iterator_refuses_a_foreign_matrix(tiny_cnn, scenario):
    cfg = scenario(dataset_size=4)
    matrix = generate_fault_matrix(tiny_cnn, cfg)
    with pytest.raises(ScenarioMismatchError):
        make_fault_iterator(tiny_cnn, matrix, cfg.replace(max_faults_per_image=2))
    with pytest.raises(ScenarioMismatchError):
        make_fault_iterator(tiny_cnn, matrix, cfg.replace(inj_target=InjectionTarget.WEIGHTS))
