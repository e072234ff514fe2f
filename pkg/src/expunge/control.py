"""Provider-side control phase: batch, digest, timestamp, encrypt, tag.

For each epoch the provider turns its readings into two outsourceable
rows. The sensor row carries, in arrival order, one position-salted
digest per reading, the chained cryptographic timestamp, and one
non-deterministic ciphertext per reading. The metadata row carries the
epoch bounds plus the timestamp and both verifiable tags sealed under
the shared key: the accessible tag commits to the ciphertexts exactly as
stored, and the irrecoverable tag commits to what those ciphertexts must
become after the deletion transform runs.

Epochs with no readings still produce a row built around a sentinel
digest so the timestamp chain never skips a link.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)

from . import encoding
from .accumulator import AccumulatorParams, AccumulatorValue, step
from .core import EpochWindow, SensorReading
from .crypto import KeyRing, hybrid_decrypt, hybrid_encrypt, symmetric_encrypt
from .encoding import Reader, header, u32, u64, vbytes
from .engine import CellArray, expunge
from .errors import DomainError, EpochMismatchError, InconsistentRowsError
from .hashing import DEFAULT_HASHER, Hasher

_SENTINEL_LABEL = b"EMPTY"


def batch_epoch(
    readings: list[SensorReading], window: EpochWindow
) -> list[tuple[int, SensorReading]]:
    """Assign 1-based positions in arrival order after window validation."""
    batched = []
    for position, reading in enumerate(readings, start=1):
        if not window.contains(reading.time):
            raise EpochMismatchError(
                f"reading at t={reading.time} outside window [{window.bt}, {window.et})"
            )
        batched.append((position, reading))
    return batched


def reading_digest(
    device_id: bytes,
    epoch_id: int,
    position: int,
    hasher: Hasher = DEFAULT_HASHER,
) -> bytes:
    """Digest binding a device to one position of one epoch.

    Input layout: length-prefixed device id, then epoch id and position
    as fixed-width integers. Salting with the position makes every
    digest in an epoch distinct, even for one device appearing many
    times, so the digest list leaks nothing about device activity.
    """
    if position < 1:
        raise DomainError("positions are 1-based")
    return hasher.digest(vbytes(device_id), u64(epoch_id), u64(position))


def sentinel_digest(epoch_id: int, hasher: Hasher = DEFAULT_HASHER) -> bytes:
    """Stand-in digest for an epoch that recorded no readings."""
    return hasher.digest(_SENTINEL_LABEL, u64(epoch_id))


def timestamp_exponent(digests: tuple[bytes, ...], hasher: Hasher = DEFAULT_HASHER) -> bytes:
    """Digest of the concatenated per-reading digests, in stored order."""
    if not digests:
        raise DomainError("an epoch timestamp needs at least one digest")
    return hasher.digest(*digests)


def epoch_timestamp(
    prev: AccumulatorValue | int,
    digests: tuple[bytes, ...],
    params: AccumulatorParams,
    hasher: Hasher = DEFAULT_HASHER,
) -> AccumulatorValue:
    """Chain the epoch onto the previous timestamp (or the seed)."""
    return step(prev, timestamp_exponent(digests, hasher), params)


def encrypt_reading(
    reading: SensorReading, epoch_id: int, enclave_public: X25519PublicKey
) -> bytes:
    """Non-deterministic encryption of the reading plus its epoch id.

    The epoch id rides inside the plaintext so a ciphertext cannot be
    transplanted into another epoch's row without detection by the
    enclave.
    """
    plaintext = (
        header(encoding.TYPE_READING_PLAINTEXT)
        + vbytes(reading.device_id)
        + u64(reading.time)
        + vbytes(reading.payload)
        + u64(epoch_id)
    )
    return hybrid_encrypt(plaintext, enclave_public)


def decrypt_reading(
    envelope: bytes, enclave_private: X25519PrivateKey
) -> tuple[SensorReading, int]:
    r = Reader(hybrid_decrypt(envelope, enclave_private))
    r.expect_header(encoding.TYPE_READING_PLAINTEXT)
    reading = SensorReading(
        device_id=r.take_vbytes(), time=r.take_u64(), payload=r.take_vbytes()
    )
    epoch_id = r.take_u64()
    r.finish()
    return reading, epoch_id


def accessible_tag(ciphertexts: tuple[bytes, ...], hasher: Hasher = DEFAULT_HASHER) -> bytes:
    """Hash over the raw ciphertext bytes in stored order.

    An epoch with no ciphertexts tags the empty concatenation.
    """
    return hasher.digest(*ciphertexts)


def irrecoverable_tag(
    ciphertexts: tuple[bytes, ...],
    epoch_id: int,
    hasher: Hasher = DEFAULT_HASHER,
) -> bytes:
    """Simulate deletion on a copy of the ciphertexts; return the proof digest.

    Bit-identical to the proof the cloud must later produce by actually
    running the transform over its stored cells.
    """
    array = CellArray.from_ciphertexts(list(ciphertexts), epoch_id, hasher)
    _, proof = expunge(array, hasher=hasher)
    return proof.proof


@dataclass(frozen=True)
class SensorDataRow:
    """Outsourced per-epoch data: digests, chained timestamp, ciphertexts."""

    epoch_id: int
    digests: tuple[bytes, ...]
    crypto_time: AccumulatorValue
    ciphertexts: tuple[bytes, ...]

    def __post_init__(self):
        if not self.digests:
            raise DomainError("a sensor row carries at least one digest")
        size = len(self.digests[0])
        if any(len(d) != size for d in self.digests):
            raise DomainError("digests must share one size")
        if self.ciphertexts and len(self.ciphertexts) != len(self.digests):
            raise DomainError("ciphertexts must align one-to-one with digests")
        if not self.ciphertexts and len(self.digests) != 1:
            raise DomainError("an empty epoch carries exactly the sentinel digest")

    @property
    def digest_size(self) -> int:
        return len(self.digests[0])

    def to_bytes(self) -> bytes:
        parts = [
            header(encoding.TYPE_SENSOR_ROW),
            u64(self.epoch_id),
            u32(self.digest_size),
            u32(len(self.digests)),
            b"".join(self.digests),
            self.crypto_time.to_bytes(),
            u32(len(self.ciphertexts)),
        ]
        parts.extend(vbytes(ct) for ct in self.ciphertexts)
        return b"".join(parts)

    @classmethod
    def read_from(cls, r: Reader) -> "SensorDataRow":
        r.expect_header(encoding.TYPE_SENSOR_ROW)
        epoch_id = r.take_u64()
        digest_size = r.take_u32()
        count = r.take_u32()
        raw = r.take(digest_size * count)
        digests = tuple(
            raw[i * digest_size : (i + 1) * digest_size] for i in range(count)
        )
        r.expect_header(encoding.TYPE_ACC_VALUE)
        crypto_time = AccumulatorValue(r.take_vint())
        ciphertexts = tuple(r.take_vbytes() for _ in range(r.take_u32()))
        return cls(
            epoch_id=epoch_id,
            digests=digests,
            crypto_time=crypto_time,
            ciphertexts=ciphertexts,
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "SensorDataRow":
        r = Reader(data)
        row = cls.read_from(r)
        r.finish()
        return row


@dataclass(frozen=True)
class MetaDataRow:
    """Outsourced per-epoch metadata; all fields beyond the bounds sealed."""

    epoch_id: int
    bt: int
    et: int
    enc_crypto_time: bytes
    enc_accessible_tag: bytes
    enc_irrecoverable_tag: bytes

    def to_bytes(self) -> bytes:
        return (
            header(encoding.TYPE_META_ROW)
            + u64(self.epoch_id)
            + u64(self.bt)
            + u64(self.et)
            + vbytes(self.enc_crypto_time)
            + vbytes(self.enc_accessible_tag)
            + vbytes(self.enc_irrecoverable_tag)
        )

    @classmethod
    def read_from(cls, r: Reader) -> "MetaDataRow":
        r.expect_header(encoding.TYPE_META_ROW)
        return cls(
            epoch_id=r.take_u64(),
            bt=r.take_u64(),
            et=r.take_u64(),
            enc_crypto_time=r.take_vbytes(),
            enc_accessible_tag=r.take_vbytes(),
            enc_irrecoverable_tag=r.take_vbytes(),
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "MetaDataRow":
        r = Reader(data)
        row = cls.read_from(r)
        r.finish()
        return row


def build_outsource_payload(
    window: EpochWindow,
    readings: list[SensorReading],
    prev_crypto_time: AccumulatorValue | int,
    keyring: KeyRing,
    params: AccumulatorParams,
    hasher: Hasher = DEFAULT_HASHER,
) -> tuple[SensorDataRow, MetaDataRow]:
    """Produce one epoch's outsourcing rows, all-or-nothing.

    Any failure in a sub-step propagates before anything is returned, so
    a partial epoch can never be outsourced.
    """
    batched = batch_epoch(readings, window)
    if batched:
        digests = tuple(
            reading_digest(reading.device_id, window.id, position, hasher)
            for position, reading in batched
        )
        ciphertexts = tuple(
            encrypt_reading(reading, window.id, keyring.enclave_public)
            for _, reading in batched
        )
    else:
        digests = (sentinel_digest(window.id, hasher),)
        ciphertexts = ()

    crypto_time = epoch_timestamp(prev_crypto_time, digests, params, hasher)
    ah = accessible_tag(ciphertexts, hasher)
    irh = irrecoverable_tag(ciphertexts, window.id, hasher)

    sensor_row = SensorDataRow(
        epoch_id=window.id,
        digests=digests,
        crypto_time=crypto_time,
        ciphertexts=ciphertexts,
    )
    meta_row = MetaDataRow(
        epoch_id=window.id,
        bt=window.bt,
        et=window.et,
        enc_crypto_time=symmetric_encrypt(keyring.shared_key, crypto_time.to_bytes()),
        enc_accessible_tag=symmetric_encrypt(keyring.shared_key, ah),
        enc_irrecoverable_tag=symmetric_encrypt(keyring.shared_key, irh),
    )
    return sensor_row, meta_row


def check_rows_consistent(sensor_row: SensorDataRow, meta_row: MetaDataRow) -> None:
    """Structural cross-checks a recipient can run without the shared key."""
    if sensor_row.epoch_id != meta_row.epoch_id:
        raise InconsistentRowsError("epoch ids differ between rows")
    if meta_row.epoch_id != meta_row.bt or meta_row.et <= meta_row.bt:
        raise InconsistentRowsError("epoch id does not identify the metadata window")
