"""Canonical byte layout shared by every hashing and wire path.

Every value that is ever hashed, signed, or shipped between roles is
encoded here, exactly once, so that all parties agree bit-for-bit.

Layout rules (normative):

* A record is ``MAGIC byte, VERSION byte, TYPE byte`` followed by its
  fields in declaration order.
* Unsigned integers are big-endian fixed width (``u8``/``u32``/``u64``).
* Variable-length byte strings are a ``u32`` length prefix plus the raw
  bytes (``vbytes``).
* Arbitrary-precision non-negative integers are a ``u32`` length prefix
  plus the minimal big-endian magnitude (``vint``); zero encodes as an
  empty magnitude.
* Lists are a ``u32`` element count followed by the encoded elements.

The combination of fixed field order, fixed-width integers and length
prefixes makes each record encoding injective; the TYPE byte keeps the
encodings of distinct record types disjoint.
"""

from __future__ import annotations

import struct

MAGIC = 0xC7
VERSION = 1

TYPE_READING = 0x01
TYPE_WINDOW = 0x02
TYPE_POLICY = 0x03
TYPE_ACC_PARAMS = 0x04
TYPE_ACC_VALUE = 0x05
TYPE_SENSOR_ROW = 0x06
TYPE_META_ROW = 0x07
TYPE_DELETION_PROOF = 0x08
TYPE_CELL_ARRAY = 0x09
TYPE_BUNDLE = 0x0A
TYPE_QUERY_RECORD = 0x0B
TYPE_SEALED_BLOCK = 0x0C
TYPE_READING_PLAINTEXT = 0x0D
TYPE_EPOCH_RECORD = 0x0E


class EncodingError(ValueError):
    """Raised when a value cannot be encoded or bytes cannot be decoded."""


def u8(n: int) -> bytes:
    if not 0 <= n <= 0xFF:
        raise EncodingError(f"u8 out of range: {n}")
    return bytes([n])


def u32(n: int) -> bytes:
    if not 0 <= n <= 0xFFFFFFFF:
        raise EncodingError(f"u32 out of range: {n}")
    return struct.pack(">I", n)


def u64(n: int) -> bytes:
    if not 0 <= n <= 0xFFFFFFFFFFFFFFFF:
        raise EncodingError(f"u64 out of range: {n}")
    return struct.pack(">Q", n)


def vbytes(b: bytes) -> bytes:
    if len(b) > 0xFFFFFFFF:
        raise EncodingError("byte string too long")
    return struct.pack(">I", len(b)) + b


def vint(n: int) -> bytes:
    """Length-prefixed minimal big-endian magnitude of a non-negative int."""
    if n < 0:
        raise EncodingError(f"vint requires a non-negative integer, got {n}")
    magnitude = n.to_bytes((n.bit_length() + 7) // 8, "big")
    return vbytes(magnitude)


def header(type_byte: int) -> bytes:
    return bytes([MAGIC, VERSION, type_byte])


class Reader:
    """Sequential decoder over one canonical record."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0

    def expect_header(self, type_byte: int) -> None:
        head = self.take(3)
        if head[0] != MAGIC:
            raise EncodingError(f"bad magic byte 0x{head[0]:02x}")
        if head[1] != VERSION:
            raise EncodingError(f"unsupported layout version {head[1]}")
        if head[2] != type_byte:
            raise EncodingError(
                f"record type mismatch: expected 0x{type_byte:02x}, got 0x{head[2]:02x}"
            )

    def peek_type(self) -> int:
        if len(self._data) - self._pos < 3:
            raise EncodingError("truncated record header")
        return self._data[self._pos + 2]

    def take(self, n: int) -> bytes:
        if self._pos + n > len(self._data):
            raise EncodingError("truncated record")
        out = self._data[self._pos : self._pos + n]
        self._pos += n
        return out

    def take_u8(self) -> int:
        return self.take(1)[0]

    def take_u32(self) -> int:
        return struct.unpack(">I", self.take(4))[0]

    def take_u64(self) -> int:
        return struct.unpack(">Q", self.take(8))[0]

    def take_vbytes(self) -> bytes:
        return self.take(self.take_u32())

    def take_vint(self) -> int:
        magnitude = self.take_vbytes()
        if magnitude and magnitude[0] == 0:
            raise EncodingError("non-minimal integer magnitude")
        return int.from_bytes(magnitude, "big")

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise EncodingError(
                f"{len(self._data) - self._pos} trailing bytes after record"
            )
