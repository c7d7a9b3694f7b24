# Copyright (c), CommunityLogiq Software

"""
Fault matrix generation and the ALFF fault file.

Every fault of a campaign is drawn before the first inference. A column holds
one fault: six location coordinates and a value (a bit index in bitflip mode,
the literal replacement value in random_value mode).

ALFF layout (little-endian): magic "ALFF", version u16 = 1, target u8
(0 neurons / 1 weights), rows u8 = 7, cols u64, seed u64, scenario_hash u64,
then per column 6 x i64 coordinates and one f64 value, then a CRC32 u32 over
everything after the magic.
"""

import itertools
import struct
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from faultforge.errors import FaultFileError, ScenarioValidationError
from faultforge.engine.binfmt import PathLike, check_crc, check_magic, read_file, seal, write_file
from faultforge.engine.model_registry import LayerInfo, Model, enumerate_injectable_layers
from faultforge.engine.prng import XorShift64Star
from faultforge.engine.scenario import (
    InjectionPolicy,
    InjectionTarget,
    LayerWeighting,
    RndMode,
    ScenarioConfig,
    num_faults_required,
    scenario_hash,
)
from faultforge.engine.tensor_core import LayerKind

FAULT_MAGIC = b"ALFF"
FAULT_VERSION = 1
FAULT_ROWS = 7

_HEADER = struct.Struct("<HBBQQQ")
_COLUMN = struct.Struct("<6qd")


@dataclass(frozen=True)
class NeuronFault:
    batch: int
    layer: int
    channel: int
    depth: int
    height: int
    width: int
    value: float

    def coords(self) -> Tuple[int, int, int, int, int, int]:
        return (self.batch, self.layer, self.channel, self.depth, self.height, self.width)

    def location(self) -> Tuple[int, ...]:
        return self.coords()

    @property
    def bit(self) -> int:
        return int(self.value)


@dataclass(frozen=True)
class WeightFault:
    layer: int
    out_ch: int
    in_ch: int
    k_depth: int
    k_h: int
    k_w: int
    value: float

    def coords(self) -> Tuple[int, int, int, int, int, int]:
        return (self.layer, self.out_ch, self.in_ch, self.k_depth, self.k_h, self.k_w)

    def location(self) -> Tuple[int, ...]:
        return self.coords()

    @property
    def bit(self) -> int:
        return int(self.value)


FaultRecord = Union[NeuronFault, WeightFault]


def fault_from_coords(target: InjectionTarget, coords: Sequence[int], value: float) -> FaultRecord:
    if target == InjectionTarget.NEURONS:
        return NeuronFault(*coords, value=value)
    return WeightFault(*coords, value=value)


@dataclass(frozen=True)
class FaultMatrix:
    target: InjectionTarget
    columns: Tuple[FaultRecord, ...]
    scenario_hash: int
    seed: int

    def __len__(self) -> int:
        return len(self.columns)

    def group(self, index: int, size: int) -> Tuple[FaultRecord, ...]:
        return self.columns[index * size : (index + 1) * size]

    def to_array(self) -> np.ndarray:
        """The 7 x n table, one fault per column"""
        table = np.zeros((FAULT_ROWS, len(self.columns)), dtype=np.float64)
        for col, fault in enumerate(self.columns):
            table[:6, col] = fault.coords()
            table[6, col] = fault.value
        return table


def layer_selection_weights(layers: Sequence[LayerInfo], target: InjectionTarget) -> List[float]:
    """F_i = size_i / sum_j size_j, sizes counted in neurons or weights"""
    if not layers:
        raise ScenarioValidationError("layer_types", "no injectable layer left to weight")
    if target == InjectionTarget.NEURONS:
        counts = [info.element_count_neurons for info in layers]
    else:
        counts = [info.element_count_weights for info in layers]
    total = sum(counts)
    return [count / total for count in counts]


def _batch_row(cfg: ScenarioConfig, group: int, rng: XorShift64Star) -> int:
    """Batch slot a neuron fault of this group hits.

    A PERMANENT PER_IMAGE fault keeps its slot for the rest of the epoch, so
    with batch_size 1 it reaches every later image, and with larger batches only
    the images that share its slot.
    """
    match cfg.inj_policy:
        case InjectionPolicy.PER_IMAGE:
            # no draw: the image's own slot in its batch
            return (group % cfg.dataset_size) % cfg.batch_size
        case InjectionPolicy.PER_BATCH:
            return rng.next_below(cfg.batch_length(group % cfg.batches_per_epoch))
        case _:
            return rng.next_below(min(cfg.batch_size, cfg.dataset_size))


def _draw_value(cfg: ScenarioConfig, rng: XorShift64Star) -> float:
    match cfg.rnd_mode:
        case RndMode.BIT_FLIP:
            assert cfg.rnd_bit_range is not None
            lo, hi = cfg.rnd_bit_range
            return float(lo + rng.next_below(hi - lo + 1))
        case RndMode.RANDOM_VALUE:
            assert cfg.rnd_value_range is not None
            lo, hi = cfg.rnd_value_range
            return float(np.float32(rng.uniform(lo, hi)))
        case _:
            return 0.0


def _draw_neuron(info: LayerInfo, batch: int, rng: XorShift64Star) -> Tuple[int, ...]:
    c, d, h, w = info.neuron_dims
    channel = rng.next_below(c)
    depth = rng.next_below(d) if info.kind == LayerKind.CONV3D else -1
    if info.kind == LayerKind.LINEAR:
        return (batch, info.index, channel, depth, 0, 0)
    return (batch, info.index, channel, depth, rng.next_below(h), rng.next_below(w))


def _draw_weight(info: LayerInfo, rng: XorShift64Star) -> Tuple[int, ...]:
    o, i, kd, kh, kw = info.weight_dims
    out_ch = rng.next_below(o)
    in_ch = rng.next_below(i)
    k_depth = rng.next_below(kd) if info.kind == LayerKind.CONV3D else -1
    if info.kind == LayerKind.LINEAR:
        return (info.index, out_ch, in_ch, k_depth, 0, 0)
    return (info.index, out_ch, in_ch, k_depth, rng.next_below(kh), rng.next_below(kw))


def generate_fault_matrix(model: Model, cfg: ScenarioConfig, seed: int | None = None) -> FaultMatrix:
    """Draws all n = a*b*c faults up front.

    Per fault the draws happen in this order: layer, batch row (neurons, only
    under per_batch/per_epoch), the location coordinates outermost first, then
    the value. Locations within one group of c faults are distinct; a repeated
    location is drawn again.
    """
    seed = cfg.seed if seed is None else seed
    layers = enumerate_injectable_layers(model, sorted(cfg.layer_types), cfg.layer_range)
    if not layers:
        kinds = ", ".join(sorted(kind.value for kind in cfg.layer_types))
        raise ScenarioValidationError(
            "layer_types", f"no injectable layer of type {kinds} in range {cfg.layer_range} of {model.name}"
        )

    target = cfg.inj_target
    if cfg.layer_weighting == LayerWeighting.SIZE_PROPORTIONAL:
        weights = layer_selection_weights(layers, target)
    else:
        weights = [1.0 / len(layers)] * len(layers)
    cumulative = list(itertools.accumulate(weights))

    c = cfg.max_faults_per_image
    if target == InjectionTarget.NEURONS:
        capacity = sum(info.element_count_neurons for info in layers)
    else:
        capacity = sum(info.element_count_weights for info in layers)
    if capacity < c:
        raise ScenarioValidationError(
            "max_faults_per_image", f"{c} distinct faults requested but only {capacity} locations exist"
        )

    n = num_faults_required(cfg)
    rng = XorShift64Star(seed)
    columns: List[FaultRecord] = []
    for group in range(n // c):
        used = set()
        for _ in range(c):
            while True:
                info = layers[rng.choose(cumulative)]
                if target == InjectionTarget.NEURONS:
                    coords = _draw_neuron(info, _batch_row(cfg, group, rng), rng)
                else:
                    coords = _draw_weight(info, rng)
                if coords not in used:
                    break
            used.add(coords)
            columns.append(fault_from_coords(target, coords, _draw_value(cfg, rng)))

    logger.info(
        f"Generated {len(columns)} {target.value} faults for {model.name} over {len(layers)} layers (seed {seed})"
    )
    return FaultMatrix(target, tuple(columns), scenario_hash(cfg), seed)


def fault_matrix_to_bytes(m: FaultMatrix) -> bytes:
    body = bytearray()
    target = 0 if m.target == InjectionTarget.NEURONS else 1
    body += _HEADER.pack(FAULT_VERSION, target, FAULT_ROWS, len(m.columns), m.seed, m.scenario_hash)
    for fault in m.columns:
        body += _COLUMN.pack(*fault.coords(), float(fault.value))
    return seal(FAULT_MAGIC, bytes(body))


def fault_matrix_from_bytes(data: bytes, path: PathLike = "<bytes>") -> FaultMatrix:
    body = check_magic(path, data, FAULT_MAGIC)
    check_crc(path, data, FAULT_MAGIC)
    if len(body) < _HEADER.size:
        raise FaultFileError(path, "truncated", "header incomplete")
    version, target_code, rows, cols, seed, digest = _HEADER.unpack_from(body, 0)
    if version != FAULT_VERSION:
        raise FaultFileError(path, "version", f"expected {FAULT_VERSION}, found {version}")
    if rows != FAULT_ROWS or target_code not in (0, 1):
        raise FaultFileError(path, "format", f"rows={rows} target={target_code}")
    expected = _HEADER.size + cols * _COLUMN.size
    if len(body) < expected:
        raise FaultFileError(path, "truncated", f"{cols} columns need {expected} bytes, found {len(body)}")
    if len(body) > expected:
        raise FaultFileError(path, "format", f"{len(body) - expected} trailing bytes")

    target = InjectionTarget.NEURONS if target_code == 0 else InjectionTarget.WEIGHTS
    columns = []
    for offset in range(_HEADER.size, expected, _COLUMN.size):
        *coords, value = _COLUMN.unpack_from(body, offset)
        columns.append(fault_from_coords(target, coords, value))
    return FaultMatrix(target, tuple(columns), digest, seed)


def save_fault_matrix(m: FaultMatrix, path: PathLike):
    write_file(path, fault_matrix_to_bytes(m))
    logger.info(f"Wrote {len(m)} faults to {path}")


def load_fault_matrix(path: PathLike) -> FaultMatrix:
    return fault_matrix_from_bytes(read_file(path), path)
