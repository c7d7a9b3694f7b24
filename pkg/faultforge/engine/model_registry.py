# Copyright (c), CommunityLogiq Software

"""
Sequential models, their injectable layers, the built-in desk-scale models and
the ALFM model file.

ALFM layout (little-endian): magic "ALFM", version u16, name (u16 length +
utf-8), task u8, num_classes u16, num_boxes u16, input rank u8 + u32 dims,
layer count u32, then per layer a kind code u8 followed by its parameters.
Injectable layers store stride u32, padding u32 (conv only), weight rank u8 +
u32 dims, raw f32 weights, bias length u32 + raw f32 bias, and a clip flag u8
optionally followed by lo/hi f32.
"""

import functools
import hashlib
import math
from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from faultforge.errors import ConfigurationError, ModelFileError, ScenarioValidationError
from faultforge.engine import tensor_core as tc
from faultforge.engine.binfmt import BinaryReader, BinaryWriter, PathLike, read_file, write_file
from faultforge.engine.prng import XorShift64Star
from faultforge.engine.tensor_core import LayerKind, Tensor

MODEL_MAGIC = b"ALFM"
MODEL_VERSION = 1

Shape = Tuple[int, ...]
Hook = Callable[[int, Tensor], None]


class Task(str, Enum):
    CLASSIFICATION = "classification"
    DETECTION = "detection"


class Layer(ABC):
    kind: LayerKind

    @abstractmethod
    def output_shape(self, input_shape: Shape) -> Shape:
        """Per-sample output shape, raises ConfigurationError when incompatible"""

    @abstractmethod
    def forward(self, x: Tensor) -> Tensor:
        """Batched forward pass"""


class InjectableLayer(Layer):
    def __init__(self, weights: Tensor, bias: Tensor):
        self.weights = _frozen(weights)
        self.bias = _frozen(bias)
        if self.bias.shape != (self.weights.shape[0],):
            raise ConfigurationError(
                f"{self.kind.value}: bias shape {self.bias.shape} does not match weights {self.weights.shape}"
            )

    @abstractmethod
    def neuron_dims(self, output_shape: Shape) -> Tuple[int, int, int, int]:
        """(channel, depth, height, width) of the output activation"""

    @abstractmethod
    def weight_dims(self) -> Tuple[int, int, int, int, int]:
        """(out_ch, in_ch, k_depth, k_h, k_w)"""

    @abstractmethod
    def with_parameters(self, weights: Tensor, bias: Tensor) -> "InjectableLayer":
        """Copy of this layer carrying other parameters"""

    def weight_index(self, out_ch: int, in_ch: int, k_depth: int, k_h: int, k_w: int) -> Tuple[int, ...]:
        dims = self.weight_dims()
        if self.kind == LayerKind.LINEAR:
            coords, limits = (out_ch, in_ch), dims[:2]
        elif self.kind == LayerKind.CONV3D:
            coords, limits = (out_ch, in_ch, k_depth, k_h, k_w), dims
        else:
            coords, limits = (out_ch, in_ch, k_h, k_w), (dims[0], dims[1], dims[3], dims[4])
        if any(c < 0 or c >= n for c, n in zip(coords, limits)):
            raise IndexError(f"weight coordinate {coords} outside {limits}")
        return coords

    def neuron_index(
        self, output_shape: Shape, channel: int, depth: int, height: int, width: int
    ) -> Tuple[int, ...]:
        c, d, h, w = self.neuron_dims(output_shape)
        if self.kind == LayerKind.LINEAR:
            coords, limits = (channel,), (c,)
        elif self.kind == LayerKind.CONV3D:
            coords, limits = (channel, depth, height, width), (c, d, h, w)
        else:
            coords, limits = (channel, height, width), (c, h, w)
        if any(v < 0 or v >= n for v, n in zip(coords, limits)):
            raise IndexError(f"neuron coordinate {coords} outside {limits}")
        return coords


class Conv2d(InjectableLayer):
    kind = LayerKind.CONV2D

    def __init__(self, weights: Tensor, bias: Tensor, stride: int = 1, padding: int = 0):
        if np.ndim(weights) != 4:
            raise ConfigurationError(f"conv2d: weights must be 4-d, got shape {np.shape(weights)}")
        super().__init__(weights, bias)
        self.stride = stride
        self.padding = padding

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3 or input_shape[0] != self.weights.shape[1]:
            raise ConfigurationError(
                f"conv2d: input shape {input_shape} incompatible with weights {self.weights.shape}"
            )
        o, _, kh, kw = self.weights.shape
        h = input_shape[1] + 2 * self.padding
        w = input_shape[2] + 2 * self.padding
        if kh > h or kw > w:
            raise ConfigurationError(f"conv2d: kernel {kh}x{kw} larger than padded input {h}x{w}")
        return (o, (h - kh) // self.stride + 1, (w - kw) // self.stride + 1)

    def forward(self, x: Tensor) -> Tensor:
        return tc.conv2d_forward(x, self.weights, self.bias, self.stride, self.padding)

    def neuron_dims(self, output_shape: Shape) -> Tuple[int, int, int, int]:
        return (output_shape[0], 1, output_shape[1], output_shape[2])

    def weight_dims(self) -> Tuple[int, int, int, int, int]:
        o, c, kh, kw = self.weights.shape
        return (o, c, 1, kh, kw)

    def with_parameters(self, weights: Tensor, bias: Tensor) -> "Conv2d":
        return Conv2d(weights, bias, self.stride, self.padding)


class Conv3d(InjectableLayer):
    kind = LayerKind.CONV3D

    def __init__(self, weights: Tensor, bias: Tensor, stride: int = 1, padding: int = 0):
        if np.ndim(weights) != 5:
            raise ConfigurationError(f"conv3d: weights must be 5-d, got shape {np.shape(weights)}")
        super().__init__(weights, bias)
        self.stride = stride
        self.padding = padding

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 4 or input_shape[0] != self.weights.shape[1]:
            raise ConfigurationError(
                f"conv3d: input shape {input_shape} incompatible with weights {self.weights.shape}"
            )
        o = self.weights.shape[0]
        dims = []
        for size, k in zip(input_shape[1:], self.weights.shape[2:]):
            padded = size + 2 * self.padding
            if k > padded:
                raise ConfigurationError(f"conv3d: kernel {self.weights.shape[2:]} larger than padded input")
            dims.append((padded - k) // self.stride + 1)
        return (o, *dims)

    def forward(self, x: Tensor) -> Tensor:
        return tc.conv3d_forward(x, self.weights, self.bias, self.stride, self.padding)

    def neuron_dims(self, output_shape: Shape) -> Tuple[int, int, int, int]:
        return (output_shape[0], output_shape[1], output_shape[2], output_shape[3])

    def weight_dims(self) -> Tuple[int, int, int, int, int]:
        return tuple(self.weights.shape)  # type: ignore[return-value]

    def with_parameters(self, weights: Tensor, bias: Tensor) -> "Conv3d":
        return Conv3d(weights, bias, self.stride, self.padding)


class Linear(InjectableLayer):
    kind = LayerKind.LINEAR

    def __init__(self, weights: Tensor, bias: Tensor):
        if np.ndim(weights) != 2:
            raise ConfigurationError(f"linear: weights must be 2-d, got shape {np.shape(weights)}")
        super().__init__(weights, bias)

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 1 or input_shape[0] != self.weights.shape[1]:
            raise ConfigurationError(
                f"linear: input shape {input_shape} incompatible with weights {self.weights.shape}"
            )
        return (self.weights.shape[0],)

    def forward(self, x: Tensor) -> Tensor:
        return tc.linear_forward(x, self.weights, self.bias)

    def neuron_dims(self, output_shape: Shape) -> Tuple[int, int, int, int]:
        return (output_shape[0], 1, 1, 1)

    def weight_dims(self) -> Tuple[int, int, int, int, int]:
        o, i = self.weights.shape
        return (o, i, 1, 1, 1)

    def with_parameters(self, weights: Tensor, bias: Tensor) -> "Linear":
        return Linear(weights, bias)


class ReLU(Layer):
    kind = LayerKind.RELU

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def forward(self, x: Tensor) -> Tensor:
        return tc.relu(x)


class MaxPool2d(Layer):
    kind = LayerKind.MAXPOOL2D

    def __init__(self, k: int, stride: Optional[int] = None):
        self.k = k
        self.stride = stride or k

    def output_shape(self, input_shape: Shape) -> Shape:
        if len(input_shape) != 3 or self.k > input_shape[1] or self.k > input_shape[2]:
            raise ConfigurationError(f"maxpool2d: window {self.k} incompatible with input {input_shape}")
        c, h, w = input_shape
        return (c, (h - self.k) // self.stride + 1, (w - self.k) // self.stride + 1)

    def forward(self, x: Tensor) -> Tensor:
        return tc.maxpool2d(x, self.k, self.stride)


class Softmax(Layer):
    kind = LayerKind.SOFTMAX

    def output_shape(self, input_shape: Shape) -> Shape:
        return input_shape

    def forward(self, x: Tensor) -> Tensor:
        return tc.softmax(x)


class Flatten(Layer):
    kind = LayerKind.FLATTEN

    def output_shape(self, input_shape: Shape) -> Shape:
        return (math.prod(input_shape),)

    def forward(self, x: Tensor) -> Tensor:
        return tc.flatten(x)


def _frozen(array) -> Tensor:
    tensor = np.array(array, dtype=np.float32, copy=True)
    tensor.flags.writeable = False
    return tensor


def _default_verifier(layer: Layer) -> bool:
    return type(layer) in (Conv2d, Conv3d, Linear)


_layer_verifiers: List[Callable[[Layer], bool]] = [_default_verifier]


def register_layer_verifier(predicate: Callable[[Layer], bool]):
    """Accept additional InjectableLayer subclasses as fault targets.

    Only affects models constructed after the call.
    """
    _layer_verifiers.append(predicate)


def unregister_layer_verifier(predicate: Callable[[Layer], bool]):
    if predicate in _layer_verifiers and predicate is not _default_verifier:
        _layer_verifiers.remove(predicate)


def verify_layer(layer: Layer) -> bool:
    return isinstance(layer, InjectableLayer) and any(v(layer) for v in _layer_verifiers)


class LayerInfo(NamedTuple):
    index: int
    position: int
    kind: LayerKind
    neuron_dims: Tuple[int, int, int, int]
    weight_dims: Tuple[int, int, int, int, int]

    @property
    def element_count_neurons(self) -> int:
        return math.prod(self.neuron_dims)

    @property
    def element_count_weights(self) -> int:
        return math.prod(self.weight_dims)


class Model:
    def __init__(
        self,
        name: str,
        input_shape: Sequence[int],
        layers: Sequence[Layer],
        task: Task = Task.CLASSIFICATION,
        num_classes: int = 0,
        num_boxes: int = 0,
        clip_bounds: Optional[Dict[int, Tuple[float, float]]] = None,
    ):
        self.name = name
        self.input_shape: Shape = tuple(int(d) for d in input_shape)
        self.layers: Tuple[Layer, ...] = tuple(layers)
        self.task = task
        self.num_classes = num_classes
        self.num_boxes = num_boxes

        shapes = []
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.output_shape(shape)
            shapes.append(shape)
        self.output_shapes: Tuple[Shape, ...] = tuple(shapes)

        self._positions = [i for i, layer in enumerate(self.layers) if verify_layer(layer)]
        self._index_of = {pos: idx for idx, pos in enumerate(self._positions)}

        self.clip_bounds: Dict[int, Tuple[float, float]] = dict(clip_bounds or {})
        for index in self.clip_bounds:
            if index not in range(len(self._positions)):
                raise ConfigurationError(f"clip bounds given for unknown injectable layer {index}")

        if task == Task.DETECTION and self.output_shapes and (
            self.output_shapes[-1] != (num_boxes * (5 + num_classes),)
        ):
            raise ConfigurationError(
                f"detection head emits {self.output_shapes[-1]}, expected {num_boxes} boxes of {5 + num_classes}"
            )

    def __repr__(self):
        return f"Model({self.name!r}, {len(self.layers)} layers, {self.num_injectable} injectable)"

    @property
    def num_injectable(self) -> int:
        return len(self._positions)

    def injectable(self, index: int) -> InjectableLayer:
        layer = self.layers[self._positions[index]]
        assert isinstance(layer, InjectableLayer)
        return layer

    def injectable_output_shape(self, index: int) -> Shape:
        return self.output_shapes[self._positions[index]]

    def layer_infos(self) -> List[LayerInfo]:
        infos = []
        for index, position in enumerate(self._positions):
            layer = self.injectable(index)
            infos.append(
                LayerInfo(
                    index=index,
                    position=position,
                    kind=layer.kind,
                    neuron_dims=layer.neuron_dims(self.output_shapes[position]),
                    weight_dims=layer.weight_dims(),
                )
            )
        return infos

    def parameter_count(self) -> int:
        return sum(
            layer.weights.size + layer.bias.size
            for layer in self.layers
            if isinstance(layer, InjectableLayer)
        )

    def forward(
        self,
        x: Tensor,
        injectors: Sequence[Hook] = (),
        monitors: Sequence[Hook] = (),
    ) -> Tensor:
        """Runs the model on one sample or a batch.

        After each injectable layer (bias added, activation not yet applied)
        the injectors may modify the output in place, then clipping bounds are
        applied, then monitors observe the result.
        """
        x = np.asarray(x, dtype=np.float32)
        batched = x.ndim == len(self.input_shape) + 1
        if not batched and tuple(x.shape) != self.input_shape:
            raise ConfigurationError(f"{self.name}: input shape {x.shape}, expected {self.input_shape}")
        out = x if batched else x[np.newaxis]
        if tuple(out.shape[1:]) != self.input_shape:
            raise ConfigurationError(f"{self.name}: input shape {x.shape}, expected {self.input_shape}")

        for position, layer in enumerate(self.layers):
            out = layer.forward(out)
            index = self._index_of.get(position)
            if index is None:
                continue
            for inject in injectors:
                inject(index, out)
            bounds = self.clip_bounds.get(index)
            if bounds is not None:
                out = tc.clamp(out, bounds[0], bounds[1])
            for monitor in monitors:
                monitor(index, out)

        return out if batched else out[0]

    def with_injectable(self, replacements: Dict[int, InjectableLayer], name: Optional[str] = None) -> "Model":
        layers = list(self.layers)
        for index, layer in replacements.items():
            layers[self._positions[index]] = layer
        return self._derive(layers, name or self.name, self.clip_bounds)

    def with_clipping(self, bounds: Dict[int, Tuple[float, float]], name: Optional[str] = None) -> "Model":
        return self._derive(list(self.layers), name or self.name, bounds)

    def _derive(self, layers, name, clip_bounds) -> "Model":
        return Model(
            name,
            self.input_shape,
            layers,
            task=self.task,
            num_classes=self.num_classes,
            num_boxes=self.num_boxes,
            clip_bounds=clip_bounds,
        )


def enumerate_injectable_layers(
    model: Model,
    kinds: Optional[Sequence[LayerKind]] = None,
    layer_range: Optional[Tuple[int, int]] = None,
) -> List[LayerInfo]:
    infos = model.layer_infos()
    if layer_range is not None:
        lo, hi = layer_range
        if not (0 <= lo <= hi < len(infos)):
            raise ScenarioValidationError(
                "layer_range", f"[{lo}, {hi}] outside 0..{len(infos) - 1} for model {model.name}"
            )
        infos = infos[lo : hi + 1]
    if kinds is not None:
        wanted = set(kinds)
        infos = [info for info in infos if info.kind in wanted]
    return infos


def weights_digest(model: Model) -> str:
    h = hashlib.blake2b(digest_size=16)
    for layer in model.layers:
        if isinstance(layer, InjectableLayer):
            h.update(layer.weights.tobytes())
            h.update(layer.bias.tobytes())
    return h.hexdigest()


class Detection(NamedTuple):
    x1: float
    y1: float
    x2: float
    y2: float
    score: float
    cls: int


def _sigmoid(v: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        return 1.0 / (1.0 + np.exp(-v))


def decode_detections(raw: Tensor, model: Model) -> List[Detection]:
    """Decodes the detection head into boxes in input pixel coordinates"""
    height, width = model.input_shape[-2], model.input_shape[-1]
    per_box = 5 + model.num_classes
    values = np.asarray(raw, dtype=np.float64).reshape(model.num_boxes, per_box)

    detections = []
    for row in values:
        sx, sy, sw, sh, score = _sigmoid(row[:5])
        cx, cy = sx * width, sy * height
        bw, bh = 1.0 + sw * (width / 2.0), 1.0 + sh * (height / 2.0)
        cls = int(np.argmax(row[5:])) if model.num_classes else 0
        detections.append(
            Detection(
                float(cx - bw / 2.0),
                float(cy - bh / 2.0),
                float(cx + bw / 2.0),
                float(cy + bh / 2.0),
                float(score),
                cls,
            )
        )
    return detections


_KIND_CODES = {
    LayerKind.CONV2D: 1,
    LayerKind.CONV3D: 2,
    LayerKind.LINEAR: 3,
    LayerKind.RELU: 4,
    LayerKind.MAXPOOL2D: 5,
    LayerKind.SOFTMAX: 6,
    LayerKind.FLATTEN: 7,
}
_KINDS_BY_CODE = {code: kind for kind, code in _KIND_CODES.items()}
_TASK_CODES = {Task.CLASSIFICATION: 0, Task.DETECTION: 1}


def _write_tensor(writer: BinaryWriter, tensor: Tensor):
    writer.pack("B", tensor.ndim)
    writer.pack(f"{tensor.ndim}I", *tensor.shape)
    writer.raw(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def _read_tensor(reader: BinaryReader) -> Tensor:
    (ndim,) = reader.unpack("B")
    shape = reader.unpack(f"{ndim}I")
    count = math.prod(shape)
    data = reader.raw(4 * count)
    return np.frombuffer(data, dtype="<f4").astype(np.float32).reshape(shape)


def model_to_bytes(model: Model) -> bytes:
    writer = BinaryWriter()
    writer.raw(MODEL_MAGIC)
    writer.pack("H", MODEL_VERSION)
    writer.string(model.name)
    writer.pack("BHH", _TASK_CODES[model.task], model.num_classes, model.num_boxes)
    writer.pack("B", len(model.input_shape))
    writer.pack(f"{len(model.input_shape)}I", *model.input_shape)
    writer.pack("I", len(model.layers))

    index = 0
    for layer in model.layers:
        writer.pack("B", _KIND_CODES[layer.kind])
        if isinstance(layer, (Conv2d, Conv3d)):
            writer.pack("II", layer.stride, layer.padding)
        elif isinstance(layer, MaxPool2d):
            writer.pack("II", layer.k, layer.stride)
        if isinstance(layer, InjectableLayer):
            _write_tensor(writer, layer.weights)
            writer.pack("I", layer.bias.size)
            writer.raw(np.ascontiguousarray(layer.bias, dtype="<f4").tobytes())
            bounds = model.clip_bounds.get(index)
            if bounds is None:
                writer.pack("B", 0)
            else:
                writer.pack("Bff", 1, bounds[0], bounds[1])
            index += 1
    return writer.getvalue()


def model_from_bytes(data: bytes) -> Model:
    reader = BinaryReader(data, ModelFileError)
    if reader.raw(4) != MODEL_MAGIC:
        raise ModelFileError("bad magic, not an ALFM file", 0)
    (version,) = reader.unpack("H")
    if version != MODEL_VERSION:
        raise ModelFileError(f"unsupported version {version}", 4)

    name = reader.string()
    task_code, num_classes, num_boxes = reader.unpack("BHH")
    tasks = {code: task for task, code in _TASK_CODES.items()}
    if task_code not in tasks:
        raise reader.fail(f"unknown task code {task_code}")
    (ndim,) = reader.unpack("B")
    input_shape = reader.unpack(f"{ndim}I")
    (count,) = reader.unpack("I")

    layers: List[Layer] = []
    clip_bounds: Dict[int, Tuple[float, float]] = {}
    for _ in range(count):
        (code,) = reader.unpack("B")
        kind = _KINDS_BY_CODE.get(code)
        if kind is None:
            raise reader.fail(f"unknown layer kind code {code}")
        if kind == LayerKind.MAXPOOL2D:
            window, pool_stride = reader.unpack("II")
            layers.append(MaxPool2d(window, pool_stride))
            continue
        stride = padding = 0
        if kind in (LayerKind.CONV2D, LayerKind.CONV3D):
            stride, padding = reader.unpack("II")
        if kind == LayerKind.RELU:
            layers.append(ReLU())
            continue
        if kind == LayerKind.SOFTMAX:
            layers.append(Softmax())
            continue
        if kind == LayerKind.FLATTEN:
            layers.append(Flatten())
            continue

        weights = _read_tensor(reader)
        (bias_len,) = reader.unpack("I")
        bias = np.frombuffer(reader.raw(4 * bias_len), dtype="<f4").astype(np.float32)
        (has_clip,) = reader.unpack("B")
        if has_clip:
            lo, hi = reader.unpack("ff")
            clip_bounds[sum(isinstance(layer, InjectableLayer) for layer in layers)] = (lo, hi)
        try:
            if kind == LayerKind.CONV2D:
                layers.append(Conv2d(weights, bias, stride, padding))
            elif kind == LayerKind.CONV3D:
                layers.append(Conv3d(weights, bias, stride, padding))
            else:
                layers.append(Linear(weights, bias))
        except ConfigurationError as e:
            raise reader.fail(str(e))
    reader.expect_end()

    return Model(
        name,
        input_shape,
        layers,
        task=tasks[task_code],
        num_classes=num_classes,
        num_boxes=num_boxes,
        clip_bounds=clip_bounds,
    )


def save_model(model: Model, path: PathLike):
    write_file(path, model_to_bytes(model))


def load_model(path: PathLike) -> Model:
    return model_from_bytes(read_file(path))


BUILTIN_SEEDS = {
    "tiny-cnn": 0x7C11_0000_0000_0001,
    "tiny-3d": 0x7C11_0000_0000_0002,
    "tiny-det": 0x7C11_0000_0000_0003,
}


def _init_tensor(rng: XorShift64Star, shape: Shape, bound: float) -> Tensor:
    values = [rng.uniform(-bound, bound) for _ in range(math.prod(shape))]
    return np.asarray(values, dtype=np.float32).reshape(shape)


def _seeded(rng: XorShift64Star, shape: Shape) -> Tuple[Tensor, Tensor]:
    # He-uniform weights, small uniform bias
    fan_in = math.prod(shape[1:])
    weights = _init_tensor(rng, shape, math.sqrt(6.0 / fan_in))
    bias = _init_tensor(rng, (shape[0],), 0.1)
    return weights, bias


def _tiny_cnn() -> Model:
    rng = XorShift64Star(BUILTIN_SEEDS["tiny-cnn"])
    return Model(
        "tiny-cnn",
        (3, 16, 16),
        [
            Conv2d(*_seeded(rng, (8, 3, 3, 3)), stride=1, padding=1),
            ReLU(),
            MaxPool2d(2),
            Conv2d(*_seeded(rng, (16, 8, 3, 3)), stride=1, padding=1),
            ReLU(),
            Flatten(),
            Linear(*_seeded(rng, (10, 1024))),
        ],
        num_classes=10,
    )


def _tiny_3d() -> Model:
    rng = XorShift64Star(BUILTIN_SEEDS["tiny-3d"])
    return Model(
        "tiny-3d",
        (1, 4, 6, 6),
        [
            Conv3d(*_seeded(rng, (4, 1, 3, 3, 3)), stride=1, padding=1),
            ReLU(),
            Flatten(),
            Linear(*_seeded(rng, (4, 576))),
        ],
        num_classes=4,
    )


def _tiny_det() -> Model:
    rng = XorShift64Star(BUILTIN_SEEDS["tiny-det"])
    num_boxes, num_classes = 5, 3
    return Model(
        "tiny-det",
        (3, 16, 16),
        [
            Conv2d(*_seeded(rng, (8, 3, 3, 3)), stride=1, padding=1),
            ReLU(),
            MaxPool2d(2),
            Conv2d(*_seeded(rng, (8, 8, 3, 3)), stride=2, padding=1),
            ReLU(),
            Flatten(),
            Linear(*_seeded(rng, (num_boxes * (5 + num_classes), 128))),
        ],
        task=Task.DETECTION,
        num_classes=num_classes,
        num_boxes=num_boxes,
    )


_BUILDERS: Dict[str, Callable[[], Model]] = {
    "tiny-cnn": _tiny_cnn,
    "tiny-3d": _tiny_3d,
    "tiny-det": _tiny_det,
}


@functools.cache
def builtin_model(name: str) -> Model:
    if name not in _BUILDERS:
        raise ConfigurationError(f"unknown built-in model {name!r}, expected one of {sorted(_BUILDERS)}")
    return _BUILDERS[name]()


def builtin_models() -> Dict[str, Model]:
    return {name: builtin_model(name) for name in _BUILDERS}
