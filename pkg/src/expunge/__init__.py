"""Verifiable retention enforcement for outsourced sensor data.

A provider batches sensor readings into epochs, gives every epoch a
chained cryptographic timestamp, encrypts the readings, and outsources
them together with sealed verifiable tags. The cloud must delete each
epoch on schedule by running a memory-hard overwrite transform whose
output proof any third party can check against the provider's tag,
under a time bound that catches proofs fabricated on demand. Query
activity at the service provider is chained into tamper-evident,
auditable blocks.
"""

from .accumulator import AccumulatorParams, AccumulatorValue, setup, step, verify_step
from .attestation import (
    VerificationReport,
    calibrate_time_bound,
    verify_accessible,
    verify_as_sdp,
    verify_bundle,
    verify_completeness,
    verify_irrecoverable,
    verify_membership,
)
from .cloud import AttestationBundle, CloudStore, EpochRecord, Transition
from .control import (
    MetaDataRow,
    SensorDataRow,
    accessible_tag,
    batch_epoch,
    build_outsource_payload,
    encrypt_reading,
    epoch_timestamp,
    irrecoverable_tag,
    reading_digest,
)
from .core import (
    NEVER,
    DataState,
    EpochWindow,
    RetentionPolicy,
    SensorReading,
    canonical_bytes,
    deletion_due,
    epoch_of,
    state_at,
    verification_expiry,
)
from .crypto import KeyRing, generate_keyring
from .engine import (
    ButterflySchedule,
    CellArray,
    DeletionProof,
    combine,
    expunge,
    expunge_duration_estimate,
    schedule_for,
)
from .harness import BenchmarkReport, ScenarioConfig, bench, generate_readings, run_scenario
from .hashing import DEFAULT_HASHER, Hasher
from .querylog import (
    AuditReport,
    QueryBlock,
    QueryLogger,
    QueryRecord,
    SealedBlock,
    append_query,
    audit_block,
    make_query_record,
    seal_block,
)

__version__ = "0.1.0"
