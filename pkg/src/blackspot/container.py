"""Versioned binary container shared by networks, baseline models and
pipeline artifacts.

Layout (all integers little-endian)::

    magic      8 bytes   b"BSNGBOX\\0"
    version    u32
    count      u32       number of sections
    section*   name_len u16, name utf-8, tag u8, payload_len u64, payload
    digest     32 bytes  SHA-256 of every preceding byte

The ``tag`` byte identifies the payload kind (network, model family, JSON).
Array payloads written by :func:`pack_arrays` store a JSON metadata blob
followed by named arrays: ``name, dtype code u8, ndim u8, dims u64*, data``.
Float data are 64-bit IEEE little-endian, integer data signed 64-bit.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .errors import CorruptArtifactError, TruncatedArtifactError, VersionError

MAGIC = b"BSNGBOX\x00"
FORMAT_VERSION = 1

TAG_JSON = 0
TAG_NETWORK = 1
TAG_ARRAYS = 2
# 16 + family index: baseline model families (see blackspot.baselines.base.family_tag)
TAG_FAMILY_BASE = 16

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}
_DTYPE_CODES = {"f": 0, "i": 1, "u": 1, "b": 1}


class Writer:
    def __init__(self):
        self._parts = []

    def raw(self, b: bytes):
        self._parts.append(bytes(b))

    def u8(self, x):
        self.raw(struct.pack("<B", x))

    def u16(self, x):
        self.raw(struct.pack("<H", x))

    def u32(self, x):
        self.raw(struct.pack("<I", x))

    def u64(self, x):
        self.raw(struct.pack("<Q", x))

    def text(self, s: str):
        b = s.encode("utf-8")
        self.u64(len(b))
        self.raw(b)

    def f64_array(self, a):
        self.raw(np.ascontiguousarray(a, dtype="<f8").tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Reader:
    def __init__(self, data: bytes, what="container"):
        self.data = memoryview(data)
        self.pos = 0
        self.what = what

    def raw(self, n) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise TruncatedArtifactError(f"{self.what} truncated at byte {self.pos} (needed {n} more)")
        out = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return out

    def u8(self):
        return struct.unpack("<B", self.raw(1))[0]

    def u16(self):
        return struct.unpack("<H", self.raw(2))[0]

    def u32(self):
        return struct.unpack("<I", self.raw(4))[0]

    def u64(self):
        return struct.unpack("<Q", self.raw(8))[0]

    def text(self) -> str:
        return self.raw(self.u64()).decode("utf-8")

    def f64_array(self, count):
        return np.frombuffer(self.raw(8 * count), dtype="<f8").astype(np.float64)

    @property
    def remaining(self):
        return len(self.data) - self.pos


def pack_arrays(meta: dict, arrays: dict) -> bytes:
    w = Writer()
    w.text(json.dumps(meta, sort_keys=True))
    w.u64(len(arrays))
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        code = _DTYPE_CODES[a.dtype.kind]
        w.text(name)
        w.u8(code)
        w.u8(a.ndim)
        for dim in a.shape:
            w.u64(dim)
        w.raw(np.ascontiguousarray(a, dtype=_DTYPES[code]).tobytes())
    return w.getvalue()


def unpack_arrays(payload: bytes):
    r = Reader(payload, "array payload")
    meta = json.loads(r.text())
    arrays = {}
    for _ in range(r.u64()):
        name = r.text()
        dtype = _DTYPES.get(r.u8())
        if dtype is None:
            raise CorruptArtifactError(f"array {name!r}: unknown dtype code")
        shape = tuple(r.u64() for _ in range(r.u8()))
        count = int(np.prod(shape)) if shape else 1
        arrays[name] = np.frombuffer(r.raw(count * dtype.itemsize), dtype=dtype).reshape(shape).copy()
    return meta, arrays


def encode_container(sections) -> bytes:
    """``sections`` is an iterable of ``(name, tag, payload)``."""
    sections = list(sections)
    w = Writer()
    w.raw(MAGIC)
    w.u32(FORMAT_VERSION)
    w.u32(len(sections))
    for name, tag, payload in sections:
        b = name.encode("utf-8")
        w.u16(len(b))
        w.raw(b)
        w.u8(tag)
        w.u64(len(payload))
        w.raw(payload)
    body = w.getvalue()
    return body + hashlib.sha256(body).digest()


def decode_container(data: bytes):
    """Parse a container; returns ``[(name, tag, payload), ...]``."""
    r = Reader(data)
    magic = r.raw(len(MAGIC))
    if magic != MAGIC:
        raise CorruptArtifactError("not a blackspot container (bad magic)")
    version = r.u32()
    if version > FORMAT_VERSION:
        raise VersionError(version, FORMAT_VERSION)
    sections = []
    for _ in range(r.u32()):
        name = r.raw(r.u16()).decode("utf-8")
        tag = r.u8()
        payload = r.raw(r.u64())
        sections.append((name, tag, payload))
    digest = r.raw(32)
    if r.remaining:
        raise CorruptArtifactError(f"{r.remaining} trailing bytes after digest")
    if hashlib.sha256(bytes(r.data[:r.pos - 32])).digest() != digest:
        raise CorruptArtifactError("checksum mismatch")
    return sections


def write_container(path, sections):
    data = encode_container(sections)
    Path(path).write_bytes(data)
    return data


def read_container(path):
    return decode_container(Path(path).read_bytes())
