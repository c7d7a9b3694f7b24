# Copyright (c), CommunityLogiq Software

"""
Dense float32 operators hosting the fault sites.

Convolutions and the linear layer accumulate in float32 in a fixed order so a
corrupted value propagates the same way on every run:

    conv2d  kernel columns -> kernel rows -> input channel (innermost)
    conv3d  kernel columns -> kernel rows -> kernel depth -> input channel
    linear  inputs in ascending order

The bias is added once the sum is complete. Operators accept a single sample
or a batch with a leading batch axis; every sample is computed independently,
so batching never changes a result. NaN and Inf propagate untouched except in
`clamp`.
"""

from enum import Enum
from typing import Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from faultforge.errors import ConfigurationError

Tensor = npt.NDArray[np.float32]


class LayerKind(str, Enum):
    CONV2D = "conv2d"
    CONV3D = "conv3d"
    LINEAR = "linear"
    RELU = "relu"
    MAXPOOL2D = "maxpool2d"
    SOFTMAX = "softmax"
    FLATTEN = "flatten"

    @property
    def injectable(self) -> bool:
        return self in INJECTABLE_KINDS

    @staticmethod
    def parse(value: str) -> "LayerKind":
        key = value.strip().lower()
        if key in ("fcc", "fc", "dense"):
            key = "linear"
        return LayerKind(key)


INJECTABLE_KINDS = frozenset({LayerKind.CONV2D, LayerKind.CONV3D, LayerKind.LINEAR})


def as_tensor(data: Union[Sequence, np.ndarray], shape: Tuple[int, ...] | None = None) -> Tensor:
    array = np.asarray(data, dtype=np.float32)
    if shape is not None:
        if int(np.prod(shape)) != array.size:
            raise ConfigurationError(
                f"shape {tuple(shape)} does not hold {array.size} elements"
            )
        array = array.reshape(shape)
    return np.ascontiguousarray(array)


def _batched(x: Tensor, sample_ndim: int, op: str) -> Tuple[Tensor, bool]:
    if x.ndim == sample_ndim:
        return x[np.newaxis], False
    if x.ndim == sample_ndim + 1:
        return x, True
    raise ConfigurationError(
        f"{op}: expected a {sample_ndim}-d sample or a batch of them, got shape {x.shape}"
    )


def _check_bias(bias: Tensor, out_channels: int, op: str):
    if bias.shape != (out_channels,):
        raise ConfigurationError(
            f"{op}: bias shape {bias.shape} does not match {out_channels} output channels"
        )


def _out_size(size: int, kernel: int, stride: int, op: str, shapes: str) -> int:
    if kernel > size:
        raise ConfigurationError(f"{op}: kernel larger than padded input ({shapes})")
    return (size - kernel) // stride + 1


def conv2d_forward(
    input: Tensor,
    weights: Tensor,
    bias: Tensor,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    x, batched = _batched(input, 3, "conv2d")
    if weights.ndim != 4 or weights.shape[1] != x.shape[1]:
        raise ConfigurationError(
            f"conv2d: input shape {tuple(input.shape)} incompatible with weights {tuple(weights.shape)}"
        )
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"conv2d: invalid stride {stride} or padding {padding}")

    out_ch, in_ch, kh, kw = weights.shape
    _check_bias(bias, out_ch, "conv2d")
    padded = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    shapes = f"input {tuple(input.shape)}, weights {tuple(weights.shape)}"
    oh = _out_size(padded.shape[2], kh, stride, "conv2d", shapes)
    ow = _out_size(padded.shape[3], kw, stride, "conv2d", shapes)

    acc = np.zeros((x.shape[0], out_ch, oh, ow), dtype=np.float32)
    for j in range(kw):
        cols = slice(j, j + stride * (ow - 1) + 1, stride)
        for i in range(kh):
            rows = slice(i, i + stride * (oh - 1) + 1, stride)
            for c in range(in_ch):
                patch = padded[:, c, rows, cols]
                acc += weights[:, c, i, j][np.newaxis, :, np.newaxis, np.newaxis] * patch[:, np.newaxis]
    out = acc + bias[np.newaxis, :, np.newaxis, np.newaxis]
    return out if batched else out[0]


def conv3d_forward(
    input: Tensor,
    weights: Tensor,
    bias: Tensor,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    x, batched = _batched(input, 4, "conv3d")
    if weights.ndim != 5 or weights.shape[1] != x.shape[1]:
        raise ConfigurationError(
            f"conv3d: input shape {tuple(input.shape)} incompatible with weights {tuple(weights.shape)}"
        )
    if stride < 1 or padding < 0:
        raise ConfigurationError(f"conv3d: invalid stride {stride} or padding {padding}")

    out_ch, in_ch, kd, kh, kw = weights.shape
    _check_bias(bias, out_ch, "conv3d")
    pad = (padding, padding)
    padded = np.pad(x, ((0, 0), (0, 0), pad, pad, pad))
    shapes = f"input {tuple(input.shape)}, weights {tuple(weights.shape)}"
    od = _out_size(padded.shape[2], kd, stride, "conv3d", shapes)
    oh = _out_size(padded.shape[3], kh, stride, "conv3d", shapes)
    ow = _out_size(padded.shape[4], kw, stride, "conv3d", shapes)

    acc = np.zeros((x.shape[0], out_ch, od, oh, ow), dtype=np.float32)
    for j in range(kw):
        cols = slice(j, j + stride * (ow - 1) + 1, stride)
        for i in range(kh):
            rows = slice(i, i + stride * (oh - 1) + 1, stride)
            for k in range(kd):
                depth = slice(k, k + stride * (od - 1) + 1, stride)
                for c in range(in_ch):
                    patch = padded[:, c, depth, rows, cols]
                    w = weights[:, c, k, i, j][np.newaxis, :, np.newaxis, np.newaxis, np.newaxis]
                    acc += w * patch[:, np.newaxis]
    out = acc + bias[np.newaxis, :, np.newaxis, np.newaxis, np.newaxis]
    return out if batched else out[0]


def linear_forward(input: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    x, batched = _batched(input, 1, "linear")
    if weights.ndim != 2 or weights.shape[1] != x.shape[1]:
        raise ConfigurationError(
            f"linear: input length {x.shape[1]} incompatible with weights {tuple(weights.shape)}"
        )
    _check_bias(bias, weights.shape[0], "linear")

    acc = np.zeros((x.shape[0], weights.shape[0]), dtype=np.float32)
    for i in range(weights.shape[1]):
        acc += weights[:, i][np.newaxis, :] * x[:, i][:, np.newaxis]
    out = acc + bias[np.newaxis, :]
    return out if batched else out[0]


def relu(x: Tensor) -> Tensor:
    # np.maximum keeps NaN
    return np.maximum(x, np.float32(0.0))


def maxpool2d(x: Tensor, k: int, stride: int | None = None) -> Tensor:
    xb, batched = _batched(x, 3, "maxpool2d")
    stride = stride or k
    h, w = xb.shape[2], xb.shape[3]
    shapes = f"input {tuple(x.shape)}, window {k}"
    oh = _out_size(h, k, stride, "maxpool2d", shapes)
    ow = _out_size(w, k, stride, "maxpool2d", shapes)

    out = None
    for i in range(k):
        for j in range(k):
            window = xb[:, :, i : i + stride * (oh - 1) + 1 : stride, j : j + stride * (ow - 1) + 1 : stride]
            out = window.copy() if out is None else np.maximum(out, window)
    assert out is not None
    return out if batched else out[0]


def softmax(x: Tensor) -> Tensor:
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return (e / np.sum(e, axis=-1, keepdims=True)).astype(np.float32)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise ConfigurationError(f"clamp: invalid bounds [{lo}, {hi}]")
    lo32, hi32 = np.float32(lo), np.float32(hi)
    clipped = np.minimum(hi32, np.maximum(lo32, x))
    return np.where(np.isnan(x), lo32, clipped).astype(np.float32)


def flatten(x: Tensor, batched: bool = True) -> Tensor:
    if batched:
        return x.reshape(x.shape[0], -1)
    return x.reshape(-1)
