# Copyright (c), CommunityLogiq Software

"""
The ALFR runset: one record per fault applied to one inference.

Layout (little-endian): magic "ALFR", version u16, record count u64, then
64-byte records, then a CRC32 u32 over everything after the magic. A record
holds epoch i32, batch_index i32, image_id i32, fault_column i64, six i32
location coordinates, the fault value f64, original and corrupted f32, flip
direction u8, NaN flag u8, Inf flag u8 and the target u8.
"""

import struct
from dataclasses import dataclass
from typing import Iterable, List, Tuple

import numpy as np

from faultforge.errors import FaultFileError
from faultforge.engine.binfmt import PathLike, check_crc, check_magic, read_file, seal, write_file
from faultforge.engine.fault_gen import FaultRecord, NeuronFault, fault_from_coords
from faultforge.engine.injector import FlipDirection
from faultforge.engine.scenario import InjectionTarget

RUNSET_MAGIC = b"ALFR"
RUNSET_VERSION = 1

_HEADER = struct.Struct("<HQ")
_RECORD = struct.Struct("<iiiq6idffBBBB")
assert _RECORD.size == 64


@dataclass(frozen=True)
class RunsetRecord:
    epoch: int
    batch_index: int
    image_id: int
    fault_column: int
    location: FaultRecord
    original_value: np.float32
    corrupted_value: np.float32
    flip_direction: FlipDirection
    nan_detected: bool
    inf_detected: bool

    @property
    def target(self) -> InjectionTarget:
        return InjectionTarget.NEURONS if isinstance(self.location, NeuronFault) else InjectionTarget.WEIGHTS

    def sort_key(self) -> Tuple[int, int, int, int]:
        return (self.epoch, self.batch_index, self.image_id, self.fault_column)

    def inference_key(self) -> Tuple[int, int, int]:
        return (self.epoch, self.batch_index, self.image_id)


def _pack(record: RunsetRecord) -> bytes:
    return _RECORD.pack(
        record.epoch,
        record.batch_index,
        record.image_id,
        record.fault_column,
        *record.location.coords(),
        float(record.location.value),
        record.original_value,
        record.corrupted_value,
        int(record.flip_direction),
        int(record.nan_detected),
        int(record.inf_detected),
        0 if record.target == InjectionTarget.NEURONS else 1,
    )


def runset_to_bytes(records: Iterable[RunsetRecord]) -> bytes:
    records = list(records)
    body = bytearray(_HEADER.pack(RUNSET_VERSION, len(records)))
    for record in records:
        body += _pack(record)
    return seal(RUNSET_MAGIC, bytes(body))


def runset_from_bytes(data: bytes, path: PathLike = "<bytes>") -> List[RunsetRecord]:
    body = check_magic(path, data, RUNSET_MAGIC)
    check_crc(path, data, RUNSET_MAGIC)
    if len(body) < _HEADER.size:
        raise FaultFileError(path, "truncated", "header incomplete")
    version, count = _HEADER.unpack_from(body, 0)
    if version != RUNSET_VERSION:
        raise FaultFileError(path, "version", f"expected {RUNSET_VERSION}, found {version}")
    expected = _HEADER.size + count * _RECORD.size
    if len(body) < expected:
        raise FaultFileError(path, "truncated", f"{count} records need {expected} bytes, found {len(body)}")
    if len(body) > expected:
        raise FaultFileError(path, "format", f"{len(body) - expected} trailing bytes")

    records = []
    for offset in range(_HEADER.size, expected, _RECORD.size):
        fields = _RECORD.unpack_from(body, offset)
        epoch, batch_index, image_id, column = fields[:4]
        coords, value = fields[4:10], fields[10]
        original, corrupted, flip, nan, inf, target_code = fields[11:]
        if target_code not in (0, 1) or flip not in (0, 1, 2):
            raise FaultFileError(path, "format", f"record at byte {offset} has target {target_code}, flip {flip}")
        target = InjectionTarget.NEURONS if target_code == 0 else InjectionTarget.WEIGHTS
        records.append(
            RunsetRecord(
                epoch,
                batch_index,
                image_id,
                column,
                fault_from_coords(target, coords, value),
                np.float32(original),
                np.float32(corrupted),
                FlipDirection(flip),
                bool(nan),
                bool(inf),
            )
        )
    return records


def save_runset(records: Iterable[RunsetRecord], path: PathLike):
    write_file(path, runset_to_bytes(records))


def load_runset(path: PathLike) -> List[RunsetRecord]:
    return runset_from_bytes(read_file(path), path)
