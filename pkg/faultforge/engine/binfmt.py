# Copyright (c), CommunityLogiq Software

"""
Shared helpers for the little-endian binary files (ALFM models, ALFF fault
matrices, ALFR runsets).
"""

import struct
import zlib
from pathlib import Path
from typing import Any, Callable, Tuple, Union

from faultforge.errors import FaultFileError

PathLike = Union[str, Path]


class BinaryWriter:
    def __init__(self):
        self._buf = bytearray()

    def pack(self, fmt: str, *values: Any):
        self._buf += struct.pack("<" + fmt, *values)

    def raw(self, data: bytes):
        self._buf += data

    def string(self, value: str):
        encoded = value.encode("utf-8")
        self.pack("H", len(encoded))
        self._buf += encoded

    def getvalue(self) -> bytes:
        return bytes(self._buf)


class BinaryReader:
    """Sequential reader that reports the byte offset of every failure"""

    def __init__(self, data: bytes, on_error: Callable[[str, int], Exception], base_offset: int = 0):
        self._data = data
        self._pos = 0
        self._base = base_offset
        self._on_error = on_error

    @property
    def offset(self) -> int:
        return self._base + self._pos

    def remaining(self) -> int:
        return len(self._data) - self._pos

    def fail(self, message: str) -> Exception:
        return self._on_error(message, self.offset)

    def unpack(self, fmt: str) -> Tuple[Any, ...]:
        size = struct.calcsize("<" + fmt)
        if self.remaining() < size:
            raise self.fail(f"truncated: need {size} bytes, {self.remaining()} left")
        values = struct.unpack_from("<" + fmt, self._data, self._pos)
        self._pos += size
        return values

    def raw(self, size: int) -> bytes:
        if self.remaining() < size:
            raise self.fail(f"truncated: need {size} bytes, {self.remaining()} left")
        chunk = self._data[self._pos : self._pos + size]
        self._pos += size
        return chunk

    def string(self) -> str:
        (length,) = self.unpack("H")
        try:
            return self.raw(length).decode("utf-8")
        except UnicodeDecodeError:
            raise self.fail("invalid utf-8 string")

    def expect_end(self):
        if self.remaining() != 0:
            raise self.fail(f"{self.remaining()} unexpected trailing bytes")


def seal(magic: bytes, body: bytes) -> bytes:
    """magic + body + CRC32(body); the checksum covers everything after the magic"""
    return magic + body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def check_magic(path: PathLike, data: bytes, magic: bytes) -> bytes:
    """Returns the body between the magic and the trailing checksum"""
    if len(data) < len(magic) + 4:
        raise FaultFileError(path, "truncated", f"{len(data)} bytes")
    if data[: len(magic)] != magic:
        raise FaultFileError(path, "magic", f"expected {magic!r}, found {data[:len(magic)]!r}")
    return data[len(magic) : -4]


def check_crc(path: PathLike, data: bytes, magic: bytes):
    body = data[len(magic) : -4]
    (stored,) = struct.unpack("<I", data[-4:])
    actual = zlib.crc32(body) & 0xFFFFFFFF
    if stored != actual:
        raise FaultFileError(path, "checksum", f"stored {stored:08x}, computed {actual:08x}")


def write_file(path: PathLike, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(data)


def read_file(path: PathLike) -> bytes:
    with open(path, "rb") as f:
        return f.read()
