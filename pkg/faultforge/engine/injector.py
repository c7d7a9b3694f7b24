# Copyright (c), CommunityLogiq Software

"""
Turns fault records into corrupted executions.

Neuron faults are applied by a hook that runs right after an injectable
layer's bias addition, before the activation. Weight faults are applied to
copy-on-write parameter copies, so the base model is never touched.

Bit numbering follows IEEE-754: bit 0 is the least significant mantissa bit,
bits 23-30 hold the exponent, bit 31 is the sign.
"""

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from faultforge.errors import FaultLocationError, FaultsExhausted, ScenarioMismatchError
from faultforge.engine.fault_gen import FaultMatrix, FaultRecord, NeuronFault, WeightFault
from faultforge.engine.model_registry import Model
from faultforge.engine.scenario import (
    FaultPersistence,
    InjectionTarget,
    RndMode,
    ScenarioConfig,
    scenario_hash,
)
from faultforge.engine.tensor_core import Tensor

# a fault paired with its column in the fault matrix
ColumnFault = Tuple[int, FaultRecord]


class FlipDirection(IntEnum):
    NOT_APPLICABLE = 0
    ZERO_TO_ONE = 1
    ONE_TO_ZERO = 2


def flip_bit(x: float, bit: int) -> Tuple[np.float32, FlipDirection]:
    if not 0 <= bit <= 31:
        raise ValueError(f"bit index {bit} outside 0..31")
    cell = np.array([x], dtype=np.float32)
    pattern = cell.view(np.uint32)
    mask = np.uint32(1 << bit)
    direction = FlipDirection.ONE_TO_ZERO if pattern[0] & mask else FlipDirection.ZERO_TO_ONE
    pattern ^= mask
    return cell[0], direction


def corrupt_value(original: float, fault_value: float, rnd_mode: RndMode) -> Tuple[np.float32, FlipDirection]:
    match rnd_mode:
        case RndMode.BIT_FLIP:
            return flip_bit(original, int(fault_value))
        case RndMode.RANDOM_VALUE:
            return np.float32(fault_value), FlipDirection.NOT_APPLICABLE
        case _:
            return np.float32(original), FlipDirection.NOT_APPLICABLE


@dataclass(frozen=True)
class AppliedFault:
    """One fault as it was applied: the values before and after"""

    column: int
    fault: FaultRecord
    original: np.float32
    corrupted: np.float32
    flip: FlipDirection
    # batch slot hit by a neuron fault, None for weight faults (every slot)
    slot: Optional[int] = None


def _check_layer(model: Model, column: int, layer: int):
    if not 0 <= layer < model.num_injectable:
        raise FaultLocationError(column, f"layer {layer} outside 0..{model.num_injectable - 1} of {model.name}")


class NeuronInjector:
    """Hook that corrupts neuron outputs in place during one forward pass"""

    def __init__(self, model: Model, faults: Sequence[ColumnFault], rnd_mode: RndMode):
        self.rnd_mode = rnd_mode
        self.applied: List[AppliedFault] = []
        self._by_layer: Dict[int, List[Tuple[int, NeuronFault, Tuple[int, ...]]]] = {}
        for column, fault in faults:
            if not isinstance(fault, NeuronFault):
                raise FaultLocationError(column, f"expected a neuron fault, got {fault}")
            _check_layer(model, column, fault.layer)
            if fault.batch < 0:
                raise FaultLocationError(column, f"negative batch row {fault.batch}")
            layer = model.injectable(fault.layer)
            try:
                index = layer.neuron_index(
                    model.injectable_output_shape(fault.layer), fault.channel, fault.depth, fault.height, fault.width
                )
            except IndexError as e:
                raise FaultLocationError(column, str(e))
            self._by_layer.setdefault(fault.layer, []).append((column, fault, index))

    def __call__(self, layer: int, out: Tensor):
        for column, fault, index in self._by_layer.get(layer, ()):
            if fault.batch >= out.shape[0]:
                logger.warning(
                    f"Fault column {column}: batch slot {fault.batch} missing from a batch of {out.shape[0]}, skipped"
                )
                continue
            target = (fault.batch, *index)
            original = out[target]
            corrupted, direction = corrupt_value(original, fault.value, self.rnd_mode)
            out[target] = corrupted
            self.applied.append(AppliedFault(column, fault, np.float32(original), corrupted, direction, fault.batch))

    def reset(self):
        self.applied = []


def apply_neuron_faults(model: Model, faults: Sequence[ColumnFault], rnd_mode: RndMode) -> NeuronInjector:
    return NeuronInjector(model, faults, rnd_mode)


class CorruptedModel:
    """A model with one fault group (or an accumulation of them) applied.

    Weight faults are written into private copies of the touched layers, the
    base model's arrays stay read-only. Neuron faults are held in an injector
    that fires on every forward pass.
    """

    def __init__(
        self,
        base: Model,
        faults: Sequence[ColumnFault],
        target: InjectionTarget,
        rnd_mode: RndMode,
        persistence: FaultPersistence = FaultPersistence.TRANSIENT,
    ):
        self.base = base
        self.faults: Tuple[ColumnFault, ...] = tuple(sorted(faults, key=lambda item: item[0]))
        self.target = target
        self.rnd_mode = rnd_mode
        self.persistence = persistence
        self.weight_faults: List[AppliedFault] = []
        self._restore: List[Tuple[int, Tuple[int, ...], np.float32]] = []
        self._copies: Dict[int, Tensor] = {}
        self.epoch = 0
        self.group = 0

        if target == InjectionTarget.WEIGHTS:
            self.model = self._apply_weights()
        else:
            self.model = base
            # validated once, a fresh injector is built per forward
            NeuronInjector(base, self.faults, rnd_mode)

    def _apply_weights(self) -> Model:
        for column, fault in self.faults:
            if not isinstance(fault, WeightFault):
                raise FaultLocationError(column, f"expected a weight fault, got {fault}")
            _check_layer(self.base, column, fault.layer)
            layer = self.base.injectable(fault.layer)
            try:
                index = layer.weight_index(fault.out_ch, fault.in_ch, fault.k_depth, fault.k_h, fault.k_w)
            except IndexError as e:
                raise FaultLocationError(column, str(e))
            weights = self._copies.get(fault.layer)
            if weights is None:
                weights = layer.weights.copy()
                self._copies[fault.layer] = weights
            original = np.float32(weights[index])
            corrupted, direction = corrupt_value(original, fault.value, self.rnd_mode)
            weights[index] = corrupted
            self._restore.append((fault.layer, index, original))
            self.weight_faults.append(AppliedFault(column, fault, original, corrupted, direction))

        return self._rebuild()

    def _rebuild(self) -> Model:
        if not self._copies:
            return self.base
        replacements = {
            index: self.base.injectable(index).with_parameters(weights, self.base.injectable(index).bias)
            for index, weights in self._copies.items()
        }
        return self.base.with_injectable(replacements)

    @property
    def columns(self) -> List[int]:
        return [column for column, _ in self.faults]

    def forward(self, x: Tensor, monitors=()) -> Tuple[Tensor, List[AppliedFault]]:
        """Runs one forward pass and returns the output with the faults applied during it"""
        if self.target == InjectionTarget.WEIGHTS:
            return self.model.forward(x, monitors=monitors), list(self.weight_faults)
        injector = NeuronInjector(self.model, self.faults, self.rnd_mode)
        out = self.model.forward(x, injectors=(injector,), monitors=monitors)
        return out, injector.applied

    def on(self, model: Model) -> "CorruptedModel":
        """The same fault group applied to another model of identical structure, e.g. a hardened one"""
        rebound = CorruptedModel(model, self.faults, self.target, self.rnd_mode, self.persistence)
        rebound.epoch, rebound.group = self.epoch, self.group
        return rebound

    def combine(self, *others: "CorruptedModel") -> "CorruptedModel":
        merged: Dict[int, FaultRecord] = dict(self.faults)
        for other in others:
            merged.update(other.faults)
        combined = CorruptedModel(self.base, list(merged.items()), self.target, self.rnd_mode, self.persistence)
        combined.epoch, combined.group = self.epoch, self.group
        return combined

    def release(self):
        """Writes the original values back into the private copies, newest first"""
        for layer, index, original in reversed(self._restore):
            self._copies[layer][index] = original
        self._restore.clear()
        self.model = self._rebuild()

    def __repr__(self):
        return f"CorruptedModel({self.base.name!r}, epoch={self.epoch}, group={self.group}, columns={self.columns})"


def apply_weight_faults(
    model: Model,
    faults: Sequence[ColumnFault],
    persistence: FaultPersistence = FaultPersistence.TRANSIENT,
    rnd_mode: RndMode = RndMode.BIT_FLIP,
) -> CorruptedModel:
    return CorruptedModel(model, faults, InjectionTarget.WEIGHTS, rnd_mode, persistence)


@dataclass
class FaultIterator(Iterator[CorruptedModel]):
    """Hands out corrupted models in the order of the fault groups.

    One group of c consecutive columns is consumed per image, per batch or per
    epoch depending on the injection policy. Under permanent persistence the
    groups of earlier scopes in the same epoch stay applied.
    """

    model: Model
    matrix: FaultMatrix
    cfg: ScenarioConfig
    _next_group: int = field(default=0, init=False)

    def __post_init__(self):
        expected = scenario_hash(self.cfg)
        if self.matrix.scenario_hash != expected:
            raise ScenarioMismatchError(
                f"fault matrix was generated for scenario {self.matrix.scenario_hash:016x}, "
                f"this scenario hashes to {expected:016x}"
            )
        if self.matrix.target != self.cfg.inj_target:
            raise ScenarioMismatchError(
                f"fault matrix targets {self.matrix.target.value}, scenario targets {self.cfg.inj_target.value}"
            )
        needed = self.cfg.num_groups * self.cfg.max_faults_per_image
        if len(self.matrix) < needed:
            raise ScenarioMismatchError(f"fault matrix holds {len(self.matrix)} columns, {needed} needed")

    def __iter__(self):
        return self

    def __len__(self) -> int:
        return self.cfg.num_groups - self._next_group

    def columns_of(self, group: int) -> List[ColumnFault]:
        c = self.cfg.max_faults_per_image
        return [(column, self.matrix.columns[column]) for column in range(group * c, (group + 1) * c)]

    def __next__(self) -> CorruptedModel:
        group = self._next_group
        if group >= self.cfg.num_groups:
            raise FaultsExhausted(f"all {self.cfg.num_groups} fault groups consumed")
        self._next_group += 1

        per_epoch = self.cfg.groups_per_epoch
        epoch = group // per_epoch
        first = group
        if self.cfg.fault_persistence == FaultPersistence.PERMANENT:
            first = epoch * per_epoch
        faults: List[ColumnFault] = []
        for g in range(first, group + 1):
            faults.extend(self.columns_of(g))

        corrupted = CorruptedModel(
            self.model, faults, self.cfg.inj_target, self.cfg.rnd_mode, self.cfg.fault_persistence
        )
        corrupted.epoch, corrupted.group = epoch, group
        return corrupted


def make_fault_iterator(model: Model, matrix: FaultMatrix, cfg: ScenarioConfig) -> FaultIterator:
    return FaultIterator(model, matrix, cfg)

