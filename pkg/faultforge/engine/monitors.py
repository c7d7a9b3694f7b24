# Copyright (c), CommunityLogiq Software

"""
Monitors observe (injectable layer index, layer output) after injection and
clipping. They must not modify the tensor.
"""

import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from faultforge.engine.tensor_core import Tensor

Monitor = Callable[[int, Tensor], None]


def detect_nan_inf(tensor: Tensor) -> Tuple[bool, bool]:
    values = np.asarray(tensor)
    return bool(np.isnan(values).any()), bool(np.isinf(values).any())


class CountingMonitor:
    def __init__(self):
        self._lock = threading.Lock()
        self.per_layer: Counter = Counter()

    def __call__(self, layer: int, out: Tensor):
        with self._lock:
            self.per_layer[layer] += 1

    @property
    def events(self) -> int:
        return sum(self.per_layer.values())


class RangeMonitor:
    """Running elementwise min/max of each layer's output"""

    def __init__(self):
        self._lock = threading.Lock()
        self.bounds: Dict[int, Tuple[float, float]] = {}

    def __call__(self, layer: int, out: Tensor):
        lo, hi = float(np.min(out)), float(np.max(out))
        with self._lock:
            previous = self.bounds.get(layer)
            if previous is not None:
                lo, hi = min(lo, previous[0]), max(hi, previous[1])
            self.bounds[layer] = (lo, hi)


@dataclass
class NanInfMonitor:
    """Per-sample NaN/Inf flags for one batched forward pass"""

    batch: int
    nan: np.ndarray = field(init=False)
    inf: np.ndarray = field(init=False)

    def __post_init__(self):
        self.nan = np.zeros(self.batch, dtype=bool)
        self.inf = np.zeros(self.batch, dtype=bool)

    def __call__(self, layer: Optional[int], out: Tensor):
        rows = np.asarray(out).reshape(out.shape[0], -1)
        self.nan |= np.isnan(rows).any(axis=1)
        self.inf |= np.isinf(rows).any(axis=1)

    def observe_output(self, out: Tensor):
        self(None, out)

    def flags(self, slot: int) -> Tuple[bool, bool]:
        return bool(self.nan[slot]), bool(self.inf[slot])
