# Copyright (c), CommunityLogiq Software

import math

import numpy as np
import pytest

from faultforge.engine.model_registry import (
    Linear,
    Model,
    Task,
    builtin_model,
    builtin_models,
    decode_detections,
    enumerate_injectable_layers,
    load_model,
    model_from_bytes,
    model_to_bytes,
    register_layer_verifier,
    save_model,
    unregister_layer_verifier,
    weights_digest,
)
from faultforge.engine.tensor_core import LayerKind
from faultforge.errors import ConfigurationError, ModelFileError, ScenarioValidationError


def test_builtin_models_are_registered():
    models = builtin_models()
    assert {"tiny-cnn", "tiny-3d", "tiny-det"} <= set(models)
    assert models["tiny-det"].task == Task.DETECTION
    with pytest.raises(ConfigurationError):
        builtin_model("resnet-152")


def test_tiny_cnn_layers(tiny_cnn):
    infos = tiny_cnn.layer_infos()
    assert [info.kind for info in infos] == [LayerKind.CONV2D, LayerKind.CONV2D, LayerKind.LINEAR]
    assert [info.neuron_dims for info in infos] == [(8, 1, 16, 16), (16, 1, 8, 8), (10, 1, 1, 1)]
    assert [info.weight_dims for info in infos] == [(8, 3, 1, 3, 3), (16, 8, 1, 3, 3), (10, 1024, 1, 1, 1)]
    for info in infos:
        assert info.element_count_neurons == math.prod(info.neuron_dims)
        assert info.element_count_weights == math.prod(info.weight_dims)
    # 8*27+8 + 16*72+16 + 10*1024+10
    assert tiny_cnn.parameter_count() == 11642
    assert tiny_cnn.parameter_count() <= 50_000
    assert tiny_cnn.layer_infos() == infos


def test_enumeration_filters(tiny_cnn):
    assert len(enumerate_injectable_layers(tiny_cnn)) == 3
    only = enumerate_injectable_layers(tiny_cnn, layer_range=(1, 1))
    assert [info.index for info in only] == [1]
    assert enumerate_injectable_layers(tiny_cnn, kinds=[LayerKind.CONV3D]) == []
    with pytest.raises(ScenarioValidationError, match="layer_range"):
        enumerate_injectable_layers(tiny_cnn, layer_range=(2, 5))


def test_forward_is_deterministic(tiny_cnn):
    x = np.linspace(0, 1, num=3 * 16 * 16, dtype=np.float32).reshape(3, 16, 16)
    first = tiny_cnn.forward(x)
    assert first.shape == (10,)
    assert first.tobytes() == builtin_model.__wrapped__("tiny-cnn").forward(x).tobytes()


def test_tiny_det_decodes_ordered_boxes(tiny_det):
    x = np.full((3, 16, 16), 0.5, dtype=np.float32)
    detections = decode_detections(tiny_det.forward(x), tiny_det)
    assert len(detections) == 5
    for d in detections:
        assert d.x1 < d.x2 and d.y1 < d.y2
        assert 0.0 <= d.score <= 1.0
        assert 0 <= d.cls < tiny_det.num_classes


def test_model_file_round_trip(tmp_path):
    for name, model in builtin_models().items():
        path = tmp_path / f"{name}.alfm"
        save_model(model, path)
        loaded = load_model(path)
        assert weights_digest(loaded) == weights_digest(model)
        assert loaded.layer_infos() == model.layer_infos()
        assert model_to_bytes(loaded) == path.read_bytes()


def test_clip_bounds_survive_the_model_file(tiny_cnn):
    clipped = tiny_cnn.with_clipping({0: (-1.0, 2.0)})
    assert model_from_bytes(model_to_bytes(clipped)).clip_bounds == {0: (-1.0, 2.0)}


def test_truncated_model_file_reports_offset(tiny_cnn):
    data = model_to_bytes(tiny_cnn)
    with pytest.raises(ModelFileError, match="byte offset"):
        model_from_bytes(data[:100])
    with pytest.raises(ModelFileError):
        model_from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ModelFileError, match="trailing"):
        model_from_bytes(data + b"\x00")


def test_parameters_are_read_only(tiny_cnn):
    with pytest.raises(ValueError):
        tiny_cnn.injectable(0).weights[0, 0, 0, 0] = 1.0


class ScaledLinear(Linear):
    pass


def test_custom_layers_need_a_verifier():
    def build():
        weights = np.ones((2, 4), dtype=np.float32)
        return Model("custom", (4,), [ScaledLinear(weights, np.zeros(2, dtype=np.float32))], num_classes=2)

    assert build().num_injectable == 0

    def accept(layer):
        return isinstance(layer, ScaledLinear)

    register_layer_verifier(accept)
    try:
        assert build().num_injectable == 1
    finally:
        unregister_layer_verifier(accept)
    assert build().num_injectable == 0
