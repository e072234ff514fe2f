"""Cloud-side store: persistence, retention scheduling, serving paths.

The store keeps one record per epoch and walks each record through the
one-way state machine. ``tick(now)`` is the scheduler: it is driven
externally (harness clock or wall clock) so that retention timelines
replay deterministically. When an epoch's deletion time passes, the
store runs the overwrite transform on the epoch's own cells, keeps the
resulting proof, and discards the original ciphertexts; when the
verification window passes, it purges cells, proof and metadata, leaving
a tombstone so "purged" remains distinguishable from "never existed".

Persistence is one segment file per epoch plus a small JSON index.
Overwrite-in-place happens on the epoch's own segment. A store created
with ``root=None`` lives purely in memory (benchmarks, quick tests).

``lazy_deletion`` simulates a dishonest cloud for the harness: the
scheduler skips deletion and the bundle path fabricates proofs on
demand, which the attestation time bound is designed to catch.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import encoding
from .accumulator import AccumulatorValue
from .control import MetaDataRow, SensorDataRow, check_rows_consistent
from .core import (
    DataState,
    RetentionPolicy,
    deletion_due,
    state_at,
    verification_expiry,
    window_for_id,
)
from .encoding import Reader, header, u8, u32, u64, vbytes
from .engine import CellArray, DeletionProof, expunge
from .errors import (
    DataExpiredError,
    DomainError,
    DuplicateEpochError,
    NotAuthorizedError,
    UnavailableError,
)
from .hashing import DEFAULT_HASHER, Hasher

logger = logging.getLogger(__name__)

_FIRST_EPOCH_MARKER = 0


@dataclass(frozen=True)
class AttestationBundle:
    """Everything a verifier needs for one epoch, and nothing more."""

    epoch_id: int
    state: DataState
    first_epoch: bool
    prev_crypto_time: AccumulatorValue | None
    crypto_time: AccumulatorValue
    digests: tuple[bytes, ...]
    ciphertexts: tuple[bytes, ...] | None
    cells: CellArray | None
    enc_crypto_time: bytes
    enc_state_tag: bytes
    deletion_proof: DeletionProof | None
    served_at: int

    def to_bytes(self) -> bytes:
        parts = [
            header(encoding.TYPE_BUNDLE),
            u64(self.epoch_id),
            u8(int(self.state)),
            u8(1 if self.first_epoch else 0),
        ]
        if self.prev_crypto_time is None:
            parts.append(u8(_FIRST_EPOCH_MARKER))
        else:
            parts.append(u8(1))
            parts.append(self.prev_crypto_time.to_bytes())
        parts.append(self.crypto_time.to_bytes())
        digest_size = len(self.digests[0]) if self.digests else 0
        parts.append(u32(digest_size))
        parts.append(u32(len(self.digests)))
        parts.append(b"".join(self.digests))
        if self.ciphertexts is not None:
            parts.append(u8(0))
            parts.append(u32(len(self.ciphertexts)))
            parts.extend(vbytes(ct) for ct in self.ciphertexts)
        else:
            parts.append(u8(1))
            parts.append(self.cells.to_bytes())
        parts.append(vbytes(self.enc_crypto_time))
        parts.append(vbytes(self.enc_state_tag))
        if self.deletion_proof is None:
            parts.append(u8(0))
        else:
            parts.append(u8(1))
            parts.append(self.deletion_proof.to_bytes())
        parts.append(u64(self.served_at))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "AttestationBundle":
        r = Reader(data)
        r.expect_header(encoding.TYPE_BUNDLE)
        epoch_id = r.take_u64()
        state = DataState(r.take_u8())
        first_epoch = r.take_u8() == 1
        prev = None
        if r.take_u8() == 1:
            r.expect_header(encoding.TYPE_ACC_VALUE)
            prev = AccumulatorValue(r.take_vint())
        r.expect_header(encoding.TYPE_ACC_VALUE)
        crypto_time = AccumulatorValue(r.take_vint())
        digest_size = r.take_u32()
        count = r.take_u32()
        raw = r.take(digest_size * count)
        digests = tuple(raw[i * digest_size : (i + 1) * digest_size] for i in range(count))
        ciphertexts = None
        cells = None
        if r.take_u8() == 0:
            ciphertexts = tuple(r.take_vbytes() for _ in range(r.take_u32()))
        else:
            r.expect_header(encoding.TYPE_CELL_ARRAY)
            cell_epoch = r.take_u64()
            cell_size = r.take_u32()
            cell_count = r.take_u32()
            raw_cells = r.take(cell_size * cell_count)
            cells = CellArray(
                epoch_id=cell_epoch,
                cell_size=cell_size,
                cells=tuple(
                    raw_cells[i * cell_size : (i + 1) * cell_size]
                    for i in range(cell_count)
                ),
            )
        enc_crypto_time = r.take_vbytes()
        enc_state_tag = r.take_vbytes()
        proof = None
        if r.take_u8() == 1:
            r.expect_header(encoding.TYPE_DELETION_PROOF)
            proof = DeletionProof(
                epoch_id=r.take_u64(), proof=r.take_vbytes(), produced_at=r.take_u64()
            )
        served_at = r.take_u64()
        r.finish()
        return cls(
            epoch_id=epoch_id,
            state=state,
            first_epoch=first_epoch,
            prev_crypto_time=prev,
            crypto_time=crypto_time,
            digests=digests,
            ciphertexts=ciphertexts,
            cells=cells,
            enc_crypto_time=enc_crypto_time,
            enc_state_tag=enc_state_tag,
            deletion_proof=proof,
            served_at=served_at,
        )


@dataclass
class EpochRecord:
    """One epoch's stored material plus its state history."""

    epoch_id: int
    bt: int
    et: int
    first_epoch: bool
    prev_crypto_time: AccumulatorValue | None
    crypto_time: AccumulatorValue | None
    digests: tuple[bytes, ...]
    ciphertexts: tuple[bytes, ...] | None
    cells: CellArray | None
    meta: MetaDataRow | None
    deletion_proof: DeletionProof | None
    state: DataState
    state_history: list[tuple[DataState, int]] = field(default_factory=list)

    def to_bytes(self) -> bytes:
        parts = [
            header(encoding.TYPE_EPOCH_RECORD),
            u64(self.epoch_id),
            u64(self.bt),
            u64(self.et),
            u8(1 if self.first_epoch else 0),
            u8(int(self.state)),
        ]

        def optional(value, encode) -> None:
            if value is None:
                parts.append(u8(0))
            else:
                parts.append(u8(1))
                parts.append(encode(value))

        optional(self.prev_crypto_time, lambda v: v.to_bytes())
        optional(self.crypto_time, lambda v: v.to_bytes())
        digest_size = len(self.digests[0]) if self.digests else 0
        parts.append(u32(digest_size))
        parts.append(u32(len(self.digests)))
        parts.append(b"".join(self.digests))
        if self.ciphertexts is None:
            parts.append(u8(0))
        else:
            parts.append(u8(1))
            parts.append(u32(len(self.ciphertexts)))
            parts.extend(vbytes(ct) for ct in self.ciphertexts)
        optional(self.cells, lambda v: v.to_bytes())
        optional(self.meta, lambda v: v.to_bytes())
        optional(self.deletion_proof, lambda v: v.to_bytes())
        parts.append(u32(len(self.state_history)))
        for state, at in self.state_history:
            parts.append(u8(int(state)))
            parts.append(u64(at))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "EpochRecord":
        r = Reader(data)
        r.expect_header(encoding.TYPE_EPOCH_RECORD)
        epoch_id = r.take_u64()
        bt = r.take_u64()
        et = r.take_u64()
        first_epoch = r.take_u8() == 1
        state = DataState(r.take_u8())

        def optional(decode):
            return decode() if r.take_u8() == 1 else None

        def acc_value():
            r.expect_header(encoding.TYPE_ACC_VALUE)
            return AccumulatorValue(r.take_vint())

        prev = optional(acc_value)
        crypto_time = optional(acc_value)
        digest_size = r.take_u32()
        count = r.take_u32()
        raw = r.take(digest_size * count)
        digests = tuple(raw[i * digest_size : (i + 1) * digest_size] for i in range(count))
        ciphertexts = None
        if r.take_u8() == 1:
            ciphertexts = tuple(r.take_vbytes() for _ in range(r.take_u32()))

        def cell_array():
            r.expect_header(encoding.TYPE_CELL_ARRAY)
            cell_epoch = r.take_u64()
            cell_size = r.take_u32()
            cell_count = r.take_u32()
            raw_cells = r.take(cell_size * cell_count)
            return CellArray(
                epoch_id=cell_epoch,
                cell_size=cell_size,
                cells=tuple(
                    raw_cells[i * cell_size : (i + 1) * cell_size]
                    for i in range(cell_count)
                ),
            )

        cells = optional(cell_array)
        meta = optional(lambda: MetaDataRow.read_from(r))

        def proof():
            r.expect_header(encoding.TYPE_DELETION_PROOF)
            return DeletionProof(
                epoch_id=r.take_u64(), proof=r.take_vbytes(), produced_at=r.take_u64()
            )

        deletion_proof = optional(proof)
        history = []
        for _ in range(r.take_u32()):
            history.append((DataState(r.take_u8()), r.take_u64()))
        r.finish()
        return cls(
            epoch_id=epoch_id,
            bt=bt,
            et=et,
            first_epoch=first_epoch,
            prev_crypto_time=prev,
            crypto_time=crypto_time,
            digests=digests,
            ciphertexts=ciphertexts,
            cells=cells,
            meta=meta,
            deletion_proof=deletion_proof,
            state=state,
            state_history=history,
        )


@dataclass(frozen=True)
class Transition:
    epoch_id: int
    from_state: DataState
    to_state: DataState
    at: int


class CloudStore:
    """Epoch records, the retention scheduler, and both serving paths."""

    def __init__(
        self,
        policy: RetentionPolicy,
        root: Path | None = None,
        sp_allowlist: frozenset[bytes] = frozenset(),
        hasher: Hasher = DEFAULT_HASHER,
        lazy_deletion: bool = False,
    ):
        self.policy = policy
        self.root = Path(root) if root is not None else None
        self.sp_allowlist = frozenset(sp_allowlist)
        self.hasher = hasher
        self.lazy_deletion = lazy_deletion
        self.last_tick: int | None = None
        self.outsourced_bytes = 0
        self._records: dict[int, EpochRecord] = {}
        self._lock = threading.RLock()
        if self.root is not None:
            (self.root / "segments").mkdir(parents=True, exist_ok=True)
            if (self.root / "index.json").exists():
                self._load()

    # -- persistence ---------------------------------------------------------

    def _segment_path(self, epoch_id: int) -> Path:
        return self.root / "segments" / f"{epoch_id:016d}.seg"

    def _persist(self, record: EpochRecord) -> None:
        if self.root is None:
            return
        self._segment_path(record.epoch_id).write_bytes(record.to_bytes())
        self._persist_index()

    def _persist_index(self) -> None:
        index = {
            "last_tick": self.last_tick,
            "outsourced_bytes": self.outsourced_bytes,
            "allowlist": [sp.hex() for sp in sorted(self.sp_allowlist)],
            "epochs": {
                str(eid): record.state.name for eid, record in self._records.items()
            },
        }
        (self.root / "index.json").write_text(json.dumps(index, indent=0))

    def _load(self) -> None:
        index = json.loads((self.root / "index.json").read_text())
        self.last_tick = index["last_tick"]
        self.outsourced_bytes = index["outsourced_bytes"]
        self.sp_allowlist = frozenset(bytes.fromhex(sp) for sp in index["allowlist"])
        for eid in index["epochs"]:
            record = EpochRecord.from_bytes(self._segment_path(int(eid)).read_bytes())
            self._records[record.epoch_id] = record

    # -- ingest path ---------------------------------------------------------

    def ingest(self, sensor_row: SensorDataRow, meta_row: MetaDataRow) -> int:
        """Persist one epoch payload; returns the epoch id acknowledged.

        Epochs must arrive in chain order (strictly increasing ids); the
        previous epoch's timestamp is captured here so bundles can be
        served even after neighbours are purged.
        """
        with self._lock:
            check_rows_consistent(sensor_row, meta_row)
            eid = sensor_row.epoch_id
            if eid in self._records:
                raise DuplicateEpochError(f"epoch {eid} already ingested")
            if self._records and eid <= max(self._records):
                raise DomainError(f"epoch {eid} arrived out of chain order")
            prev = None
            first = not self._records
            if not first:
                prev = self._records[max(self._records)].crypto_time
            record = EpochRecord(
                epoch_id=eid,
                bt=meta_row.bt,
                et=meta_row.et,
                first_epoch=first,
                prev_crypto_time=prev,
                crypto_time=sensor_row.crypto_time,
                digests=sensor_row.digests,
                ciphertexts=sensor_row.ciphertexts,
                cells=None,
                meta=meta_row,
                deletion_proof=None,
                state=DataState.ACCESSIBLE,
                state_history=[(DataState.ACCESSIBLE, meta_row.et)],
            )
            self._records[eid] = record
            self.outsourced_bytes += len(sensor_row.to_bytes()) + len(meta_row.to_bytes())
            self._persist(record)
            return eid

    # -- retention scheduler -------------------------------------------------

    def tick(self, now: int) -> list[Transition]:
        """Apply all state transitions due at or before ``now``.

        A failed overwrite leaves the epoch accessible and is retried on
        the next tick.
        """
        with self._lock:
            if self.last_tick is not None and now < self.last_tick:
                raise DomainError("tick time moved backwards")
            self.last_tick = now
            transitions: list[Transition] = []
            for eid in sorted(self._records):
                record = self._records[eid]
                window = window_for_id(eid, record.et - record.bt)
                if record.state is DataState.ACCESSIBLE:
                    if deletion_due(window, self.policy) <= now:
                        if self.lazy_deletion:
                            continue  # dishonest cloud: pretend, recompute on demand
                        try:
                            self._expunge_record(record, now)
                        except Exception:
                            logger.warning(
                                "expunge failed for epoch %d; will retry", eid, exc_info=True
                            )
                            continue
                        transitions.append(
                            Transition(eid, DataState.ACCESSIBLE, DataState.IRRECOVERABLE, now)
                        )
                if record.state is DataState.IRRECOVERABLE:
                    if verification_expiry(window, self.policy) <= now:
                        self._purge_record(record, now)
                        transitions.append(
                            Transition(eid, DataState.IRRECOVERABLE, DataState.PURGED, now)
                        )
            return transitions

    def _expunge_record(self, record: EpochRecord, now: int) -> None:
        array = CellArray.from_ciphertexts(
            list(record.ciphertexts), record.epoch_id, self.hasher
        )
        overwritten, proof = expunge(array, now=now, hasher=self.hasher)
        record.ciphertexts = None
        record.cells = overwritten
        record.deletion_proof = proof
        record.state = DataState.IRRECOVERABLE
        record.state_history.append((DataState.IRRECOVERABLE, now))
        self._persist(record)

    def _purge_record(self, record: EpochRecord, now: int) -> None:
        record.ciphertexts = None
        record.cells = None
        record.deletion_proof = None
        record.meta = None
        record.digests = ()
        record.crypto_time = None
        record.prev_crypto_time = None
        record.state = DataState.PURGED
        record.state_history.append((DataState.PURGED, now))
        self._persist(record)

    # -- serving paths -------------------------------------------------------

    def _resolve_epoch(self, at: int) -> EpochRecord:
        record = self._records.get(at)
        if record is not None:
            return record
        for candidate in self._records.values():
            if candidate.bt <= at < candidate.et:
                return candidate
        raise UnavailableError(f"no epoch recorded containing {at}")

    def fetch_for_sp(self, epoch_id: int, requester: bytes, now: int) -> tuple[bytes, ...]:
        """Serve an epoch's ciphertexts to a listed service provider.

        The serving path re-checks the policy clock, so data past its
        deletion time is refused even if the scheduler is lagging.
        """
        with self._lock:
            if requester not in self.sp_allowlist:
                raise NotAuthorizedError("requester is not a designated service provider")
            record = self._resolve_epoch(epoch_id)
            window = window_for_id(record.epoch_id, record.et - record.bt)
            if record.state is not DataState.ACCESSIBLE or state_at(
                window, self.policy, now
            ) is not DataState.ACCESSIBLE:
                raise DataExpiredError(f"epoch {record.epoch_id} data expired")
            return record.ciphertexts

    def fetch_bundle(self, at: int, now: int) -> AttestationBundle:
        """Assemble the attestation bundle for the epoch containing ``at``.

        Irrecoverable epochs are served from the stored proof without
        recomputation. In lazy mode an undeleted-but-due epoch instead
        fabricates the proof on demand, which is the detectably slow
        dishonest path.
        """
        with self._lock:
            record = self._resolve_epoch(at)
            if record.state is DataState.PURGED:
                raise UnavailableError(
                    f"verification material for epoch {record.epoch_id} was purged"
                )
            window = window_for_id(record.epoch_id, record.et - record.bt)
            state = record.state
            ciphertexts = record.ciphertexts
            cells = record.cells
            proof = record.deletion_proof
            if (
                self.lazy_deletion
                and record.state is DataState.ACCESSIBLE
                and deletion_due(window, self.policy) <= now
            ):
                array = CellArray.from_ciphertexts(
                    list(record.ciphertexts), record.epoch_id, self.hasher
                )
                overwritten, proof = expunge(array, now=now, hasher=self.hasher)
                state = DataState.IRRECOVERABLE
                ciphertexts = None
                cells = overwritten  # fabricated on demand; nothing was stored
            if state is DataState.IRRECOVERABLE:
                enc_state_tag = record.meta.enc_irrecoverable_tag
            else:
                enc_state_tag = record.meta.enc_accessible_tag
                proof = None
            return AttestationBundle(
                epoch_id=record.epoch_id,
                state=state,
                first_epoch=record.first_epoch,
                prev_crypto_time=record.prev_crypto_time,
                crypto_time=record.crypto_time,
                digests=record.digests,
                ciphertexts=ciphertexts,
                cells=cells,
                enc_crypto_time=record.meta.enc_crypto_time,
                enc_state_tag=enc_state_tag,
                deletion_proof=proof,
                served_at=now,
            )

    # -- inspection ----------------------------------------------------------

    def epoch_ids(self) -> list[int]:
        return sorted(self._records)

    def state_of(self, epoch_id: int) -> DataState:
        return self._records[epoch_id].state

    def record(self, epoch_id: int) -> EpochRecord:
        return self._records[epoch_id]
