# Copyright (c), CommunityLogiq Software

import numpy as np
import pytest

from faultforge.engine.binfmt import seal
from faultforge.engine.fault_gen import NeuronFault, WeightFault
from faultforge.engine.injector import FlipDirection
from faultforge.engine.monitors import CountingMonitor, RangeMonitor, detect_nan_inf
from faultforge.engine.runset import (
    RUNSET_MAGIC,
    RunsetRecord,
    load_runset,
    runset_from_bytes,
    runset_to_bytes,
    save_runset,
)
from faultforge.engine.scenario import InjectionTarget
from faultforge.errors import FaultFileError


def records():
    return [
        RunsetRecord(
            0, 0, 1, 0,
            NeuronFault(1, 0, 3, -1, 5, 7, value=30.0),
            np.float32(1.25), np.float32(np.inf),
            FlipDirection.ZERO_TO_ONE, False, True,
        ),
        RunsetRecord(
            1, 2, 9, 17,
            WeightFault(2, 4, 100, -1, 0, 0, value=-3.5),
            np.float32(0.5), np.float32(-3.5),
            FlipDirection.NOT_APPLICABLE, False, False,
        ),
    ]


def test_runset_round_trip(tmp_path):
    path = tmp_path / "campaign.alfr"
    save_runset(records(), path)
    data = path.read_bytes()
    assert data[:4] == RUNSET_MAGIC
    assert len(data) == 4 + 10 + 2 * 64 + 4
    loaded = load_runset(path)
    assert loaded == records()
    assert [r.target for r in loaded] == [InjectionTarget.NEURONS, InjectionTarget.WEIGHTS]


def test_empty_runset():
    assert runset_from_bytes(runset_to_bytes([])) == []


def test_flipped_byte_is_a_checksum_error():
    data = bytearray(runset_to_bytes(records()))
    data[30] ^= 0x40
    with pytest.raises(FaultFileError) as e:
        runset_from_bytes(bytes(data), "campaign.alfr")
    assert e.value.reason == "checksum"
    assert "campaign.alfr" in str(e.value)


def test_damaged_headers_are_checksum_errors():
    data = runset_to_bytes(records())
    for damaged in (data[:4] + b"\x07" + data[5:], data[:6] + b"\x09" + data[7:], data[:-10]):
        with pytest.raises(FaultFileError) as e:
            runset_from_bytes(damaged)
        assert e.value.reason == "checksum"


def test_truncated_and_trailing_runsets():
    body = runset_to_bytes(records())[4:-4]
    with pytest.raises(FaultFileError) as e:
        runset_from_bytes(seal(RUNSET_MAGIC, body[:-10]))
    assert e.value.reason == "truncated"
    with pytest.raises(FaultFileError) as e:
        runset_from_bytes(seal(RUNSET_MAGIC, body + bytes(8)))
    assert e.value.reason == "format"
    with pytest.raises(FaultFileError) as e:
        runset_from_bytes(seal(RUNSET_MAGIC, b"\x02" + body[1:]))
    assert e.value.reason == "version"


def test_detect_nan_inf():
    assert detect_nan_inf(np.zeros((2, 3), dtype=np.float32)) == (False, False)
    assert detect_nan_inf(np.array([1.0, np.nan], dtype=np.float32)) == (True, False)
    assert detect_nan_inf(np.array([-np.inf, 1.0], dtype=np.float32)) == (False, True)


def test_counting_and_range_monitors(tiny_cnn):
    counting, ranges = CountingMonitor(), RangeMonitor()
    x = np.random.default_rng(0).random((2, *tiny_cnn.input_shape), dtype=np.float32)
    tiny_cnn.forward(x, monitors=(counting, ranges))
    tiny_cnn.forward(x[:1], monitors=(counting, ranges))
    assert counting.per_layer == {0: 2, 1: 2, 2: 2}
    assert counting.events == 6

    seen = {}
    tiny_cnn.forward(x, monitors=(lambda layer, out: seen.__setitem__(layer, out.copy()),))
    for layer, (lo, hi) in ranges.bounds.items():
        assert lo == float(seen[layer].min()) and hi == float(seen[layer].max())
