"""Tamper-evident query logging and the provider-side audit.

Users sign their queries; the service provider's trusted component
chains them into blocks and seals each block with a chained accumulator
proof. The provider later decrypts a block and replays the chain: any
dropped, altered, or reordered record shows up as a proof mismatch, and
a suppressed block breaks the chain for its successor.

Run:  python demos/query_log_audit.py
"""

import dataclasses

from expunge import (
    QueryLogger,
    audit_block,
    generate_keyring,
    make_query_record,
    setup,
)

USERS = [b"alice", b"bob"]
keyring = generate_keyring(USERS)
registry = keyring.user_public_keys()
params = setup(modulus_bits=1024)

logger = QueryLogger(
    capacity=3, time_limit=10_000, params=params,
    sdp_public=keyring.sdp_box_public, registry=registry,
)

queries = [
    (b"alice", b"occupancy of building A at 9am"),
    (b"bob", b"heatmap for floor 2"),
    (b"alice", b"where was my phone yesterday"),
    (b"bob", b"occupancy of building B"),
    (b"alice", b"weekly presence summary"),
    (b"bob", b"live AP load"),
]
for i, (user, q) in enumerate(queries):
    record = make_query_record(q, 100 + i, user, keyring.user_signing_keys[user])
    logger.log(record, now=100 + i)
logger.flush(now=200)
print(f"logged {len(queries)} signed queries into {len(logger.sealed_blocks)} sealed blocks\n")

# --- honest audit --------------------------------------------------------------
prev = params.seed
for block in logger.sealed_blocks:
    report = audit_block(block, prev, keyring.sdp_box_private, params, registry)
    print(f"audit block {block.block_id}: ok={report.ok}")
    prev = block.block_proof

# --- a tampering service provider ----------------------------------------------
victim = logger.sealed_blocks[0]
tampered = dataclasses.replace(victim, encrypted_records=victim.encrypted_records[1:])
report = audit_block(tampered, params.seed, keyring.sdp_box_private, params, registry)
print(f"\nafter dropping one record from block 1: ok={report.ok}  (proof mismatch)")

# --- suppressing a whole block ---------------------------------------------------
second = logger.sealed_blocks[1]
report = audit_block(second, params.seed, keyring.sdp_box_private, params, registry)
print(f"auditing block 2 as if block 1 never existed: ok={report.ok}  (chain break)")
