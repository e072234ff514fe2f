"""Domain types, epoch arithmetic, and the retention state machine.

Time is integer milliseconds from a configured origin; there is no
wall-clock or calendar handling here. Epochs tile the timeline without
gaps as half-open windows ``[bt, et)``: an instant on a boundary belongs
to the later epoch, so every reading has exactly one epoch.

Data moves through three states, driven by the retention policy:
``ACCESSIBLE`` until its deletion time, ``IRRECOVERABLE`` until its
verification material expires, then ``PURGED``. Transitions never
reverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

from . import encoding
from .encoding import Reader, header, u8, u64, vbytes
from .errors import DomainError

MAX_PAYLOAD_BYTES = 64 * 1024
DEVICE_ID_MIN_BYTES = 6
DEVICE_ID_MAX_BYTES = 17

#: Sentinel for a verification window that never expires.
NEVER = math.inf


class DataState(IntEnum):
    ACCESSIBLE = 0
    IRRECOVERABLE = 1
    PURGED = 2


@dataclass(frozen=True)
class SensorReading:
    """One raw sensor tuple: device id, capture time, opaque payload."""

    device_id: bytes
    time: int
    payload: bytes

    def __post_init__(self):
        if not DEVICE_ID_MIN_BYTES <= len(self.device_id) <= DEVICE_ID_MAX_BYTES:
            raise DomainError(
                f"device_id must be {DEVICE_ID_MIN_BYTES}-{DEVICE_ID_MAX_BYTES} bytes,"
                f" got {len(self.device_id)}"
            )
        if self.time < 0:
            raise DomainError("reading time must be non-negative")
        if len(self.payload) > MAX_PAYLOAD_BYTES:
            raise DomainError(
                f"payload exceeds maximum of {MAX_PAYLOAD_BYTES} bytes"
            )

    def to_bytes(self) -> bytes:
        return (
            header(encoding.TYPE_READING)
            + vbytes(self.device_id)
            + u64(self.time)
            + vbytes(self.payload)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "SensorReading":
        r = Reader(data)
        reading = cls.read_from(r)
        r.finish()
        return reading

    @classmethod
    def read_from(cls, r: Reader) -> "SensorReading":
        r.expect_header(encoding.TYPE_READING)
        return cls(
            device_id=r.take_vbytes(), time=r.take_u64(), payload=r.take_vbytes()
        )


@dataclass(frozen=True)
class EpochWindow:
    """Half-open time window [bt, et); its id is its begin time."""

    bt: int
    et: int

    def __post_init__(self):
        if self.et <= self.bt:
            raise DomainError(f"empty or inverted window [{self.bt}, {self.et})")

    @property
    def id(self) -> int:
        return self.bt

    @property
    def delta(self) -> int:
        return self.et - self.bt

    def contains(self, t: int) -> bool:
        return self.bt <= t < self.et

    def to_bytes(self) -> bytes:
        return header(encoding.TYPE_WINDOW) + u64(self.bt) + u64(self.et)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EpochWindow":
        r = Reader(data)
        r.expect_header(encoding.TYPE_WINDOW)
        window = cls(bt=r.take_u64(), et=r.take_u64())
        r.finish()
        return window


@dataclass(frozen=True)
class RetentionPolicy:
    """Retention pair: epochs until deletion, epochs until purge of proofs.

    ``p_ver`` may be :data:`NEVER` (infinity), in which case verification
    material is kept forever. ``p_ver >= p_del`` is required: otherwise
    the window in which deletion could be verified would close before
    deletion happens.
    """

    p_del: int
    p_ver: int | float
    delta: int

    def __post_init__(self):
        if self.p_del < 0:
            raise DomainError("p_del must be non-negative")
        if self.delta <= 0:
            raise DomainError("epoch duration must be positive")
        if self.p_ver is not NEVER:
            if not isinstance(self.p_ver, int) or self.p_ver < 1:
                raise DomainError("p_ver must be a positive integer or NEVER")
            if self.p_ver < self.p_del:
                raise DomainError("p_ver must be at least p_del")

    @property
    def verification_unbounded(self) -> bool:
        return self.p_ver is NEVER

    def to_bytes(self) -> bytes:
        unbounded = self.verification_unbounded
        return (
            header(encoding.TYPE_POLICY)
            + u64(self.p_del)
            + u8(1 if unbounded else 0)
            + u64(0 if unbounded else self.p_ver)
            + u64(self.delta)
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "RetentionPolicy":
        r = Reader(data)
        r.expect_header(encoding.TYPE_POLICY)
        p_del = r.take_u64()
        unbounded = r.take_u8() == 1
        p_ver = r.take_u64()
        delta = r.take_u64()
        r.finish()
        return cls(p_del=p_del, p_ver=NEVER if unbounded else p_ver, delta=delta)


def epoch_of(t: int, delta: int, origin: int = 0) -> EpochWindow:
    """Map an instant to the unique epoch containing it.

    Boundary instants belong to the later epoch: ``epoch_of(et) != epoch
    ending at et``.
    """
    if delta <= 0:
        raise DomainError("epoch duration must be positive")
    if t < origin:
        raise DomainError(f"time {t} precedes the configured origin {origin}")
    bt = origin + ((t - origin) // delta) * delta
    return EpochWindow(bt=bt, et=bt + delta)


def window_for_id(epoch_id: int, delta: int) -> EpochWindow:
    return EpochWindow(bt=epoch_id, et=epoch_id + delta)


def deletion_due(epoch: EpochWindow, policy: RetentionPolicy) -> int:
    """Instant at which the epoch's data must have been deleted."""
    return epoch.et + policy.p_del * policy.delta


def verification_expiry(epoch: EpochWindow, policy: RetentionPolicy) -> int | float:
    """Instant after which deletion proofs may be purged; NEVER if unbounded."""
    if policy.verification_unbounded:
        return NEVER
    return epoch.et + policy.p_ver * policy.delta


def state_at(epoch: EpochWindow, policy: RetentionPolicy, now: int) -> DataState:
    """Policy-mandated state of the epoch's data at instant ``now``."""
    if now < deletion_due(epoch, policy):
        return DataState.ACCESSIBLE
    if now < verification_expiry(epoch, policy):
        return DataState.IRRECOVERABLE
    return DataState.PURGED


def canonical_bytes(value) -> bytes:
    """Canonical encoding of any domain value that defines one."""
    to_bytes = getattr(value, "to_bytes", None)
    if to_bytes is None or isinstance(value, (int, bytes)):
        raise DomainError(f"no canonical encoding for {type(value).__name__}")
    return to_bytes()
