"""Verifier-side checks over attestation bundles.

A verifier holds only public accumulator parameters, the broadcast
retention policy, and (for tag checks) the shared key. From one
epoch's bundle it can establish three independent facts:

* membership: whether its own device appears in the epoch, by
  recomputing position-salted digests; nothing is learned about other
  devices because every digest is salted by position and keyed by a
  device id the verifier does not know;
* completeness: that the received digest list is exactly the one that
  produced the epoch's chained timestamp, by replaying the accumulator
  step from the previous timestamp (or the seed). The cleartext
  timestamp is additionally matched against the provider-sealed copy
  riding in the bundle: without that anchor a dishonest cloud could
  serve a pruned digest list with a self-consistent forged chain;
* state: that the data is in the policy-mandated state: the hash of
  the received ciphertexts must open the sealed accessible tag, or the
  deletion proof must open the sealed irrecoverable tag.

On the irrecoverable path the verifier additionally applies a time
bound: a proof that arrives slower than a calibrated threshold is
evidence the cloud computed it on demand instead of having deleted the
data on schedule. The bound is meaningless for tiny epochs whose
recompute time approaches transport time, so it reports not-applicable
below a calibrated floor.
"""

from __future__ import annotations

from dataclasses import dataclass

from .accumulator import AccumulatorParams, AccumulatorValue, step
from .cloud import AttestationBundle
from .control import reading_digest, timestamp_exponent
from .core import DataState, RetentionPolicy, state_at, window_for_id
from .crypto import symmetric_decrypt
from .engine import EMPTY_EPOCH_CELL_SIZE, expunge_duration_estimate
from .errors import DomainError
from .hashing import DEFAULT_HASHER, Hasher

#: Below this multiple of the round trip, the recompute estimate is too
#: small for the time bound to separate honest from lazy clouds.
TIME_BOUND_FLOOR_ROUND_TRIPS = 4.0


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of verifying one epoch's bundle."""

    epoch_id: int
    role: str
    state_claimed: DataState
    membership_positions: tuple[int, ...] | None
    completeness_ok: bool
    recomputed_alpha: AccumulatorValue | None
    tag_match: bool
    policy_ok: bool
    recomputed_user_hash: bytes | None
    deletion_proof_match: bool | None
    response_time: float | None
    time_bound: float | None
    time_bound_ok: bool | None

    @property
    def state_ok(self) -> bool:
        return self.tag_match and self.policy_ok

    @property
    def verified(self) -> bool:
        """Completeness and state must hold; the time bound, where it applies."""
        return self.completeness_ok and self.state_ok and self.time_bound_ok is not False

    def to_dict(self) -> dict:
        return {
            "epoch_id": self.epoch_id,
            "role": self.role,
            "state_claimed": self.state_claimed.name,
            "membership_positions": (
                None
                if self.membership_positions is None
                else list(self.membership_positions)
            ),
            "completeness_ok": self.completeness_ok,
            "tag_match": self.tag_match,
            "policy_ok": self.policy_ok,
            "state_ok": self.state_ok,
            "deletion_proof_match": self.deletion_proof_match,
            "time_bound_ok": self.time_bound_ok,
            "verified": self.verified,
        }


def verify_membership(
    device_id: bytes, bundle: AttestationBundle, hasher: Hasher = DEFAULT_HASHER
) -> list[int]:
    """All 1-based positions at which the device appears in the epoch.

    A linear scan of hash evaluations, by construction: the verifier
    asks the cloud for no index and reveals nothing about who it is
    looking for.
    """
    matches = []
    for position, digest in enumerate(bundle.digests, start=1):
        if reading_digest(device_id, bundle.epoch_id, position, hasher) == digest:
            matches.append(position)
    return matches


def verify_completeness(
    bundle: AttestationBundle,
    params: AccumulatorParams,
    hasher: Hasher = DEFAULT_HASHER,
) -> tuple[bool, AccumulatorValue | None]:
    """Replay the timestamp link from the digests exactly as received.

    Any omission, addition, or reorder of digests changes the exponent
    and lands the replay on a different group element.
    """
    base = params.seed if bundle.first_epoch else bundle.prev_crypto_time
    if base is None or not bundle.digests:
        return False, None
    try:
        alpha = step(base, timestamp_exponent(bundle.digests, hasher), params)
    except DomainError:
        return False, None
    return alpha == bundle.crypto_time, alpha


def calibrate_time_bound(round_trip: float, recompute_estimate: float) -> tuple[float, bool]:
    """Threshold for the deletion time bound, and whether it applies.

    The bound must sit far below the recompute estimate (to catch lazy
    clouds) but comfortably above honest transport jitter (to avoid
    false accusations).
    """
    tau = max(2.0 * round_trip, recompute_estimate / 10.0)
    applicable = recompute_estimate >= TIME_BOUND_FLOOR_ROUND_TRIPS * round_trip
    return tau, applicable


def verify_bundle(
    bundle: AttestationBundle,
    shared_key: bytes,
    params: AccumulatorParams,
    policy: RetentionPolicy,
    role: str = "user",
    device_id: bytes | None = None,
    response_time: float | None = None,
    time_bound: float | None = None,
    time_bound_applicable: bool = True,
    hasher: Hasher = DEFAULT_HASHER,
) -> VerificationReport:
    """Run every check the role is entitled to and report each outcome.

    Tag decryption failures raise IntegrityError: an unopenable tag is
    tampering evidence, not a mere mismatch.
    """
    membership = None
    if role == "user" and device_id is not None:
        membership = tuple(verify_membership(device_id, bundle, hasher))

    completeness_ok, alpha = verify_completeness(bundle, params, hasher)
    # anchor the cleartext timestamp to the provider-sealed copy
    sealed_ct = symmetric_decrypt(shared_key, bundle.enc_crypto_time)
    completeness_ok = completeness_ok and sealed_ct == bundle.crypto_time.to_bytes()

    window = window_for_id(bundle.epoch_id, policy.delta)
    policy_ok = state_at(window, policy, bundle.served_at) is bundle.state

    user_hash = None
    proof_match = None
    time_bound_ok = None
    if bundle.state is DataState.ACCESSIBLE:
        expected_tag = symmetric_decrypt(shared_key, bundle.enc_state_tag)
        user_hash = hasher.digest(*(bundle.ciphertexts or ()))
        tag_match = user_hash == expected_tag
    else:
        expected_tag = symmetric_decrypt(shared_key, bundle.enc_state_tag)
        if bundle.deletion_proof is None:
            raise DomainError("irrecoverable bundle carries no deletion proof")
        proof_match = bundle.deletion_proof.proof == expected_tag
        tag_match = proof_match
        if response_time is not None and time_bound is not None:
            time_bound_ok = (response_time <= time_bound) if time_bound_applicable else None

    return VerificationReport(
        epoch_id=bundle.epoch_id,
        role=role,
        state_claimed=bundle.state,
        membership_positions=membership,
        completeness_ok=completeness_ok,
        recomputed_alpha=alpha,
        tag_match=tag_match,
        policy_ok=policy_ok,
        recomputed_user_hash=user_hash,
        deletion_proof_match=proof_match,
        response_time=response_time,
        time_bound=time_bound,
        time_bound_ok=time_bound_ok,
    )


def verify_accessible(
    bundle: AttestationBundle,
    shared_key: bytes,
    policy: RetentionPolicy,
    hasher: Hasher = DEFAULT_HASHER,
) -> tuple[bool, bytes]:
    """Accessible-state check: recomputed ciphertext hash against the tag.

    Returns (ok, recomputed hash); ok also requires the policy to agree
    that the epoch should still be accessible at serving time.
    """
    if bundle.state is not DataState.ACCESSIBLE:
        raise DomainError("bundle does not claim the accessible state")
    expected_tag = symmetric_decrypt(shared_key, bundle.enc_state_tag)
    user_hash = hasher.digest(*(bundle.ciphertexts or ()))
    window = window_for_id(bundle.epoch_id, policy.delta)
    policy_ok = state_at(window, policy, bundle.served_at) is DataState.ACCESSIBLE
    return user_hash == expected_tag and policy_ok, user_hash


def verify_irrecoverable(
    bundle: AttestationBundle,
    shared_key: bytes,
    params: AccumulatorParams,
    policy: RetentionPolicy,
    time_bound: float,
    response_time: float,
    time_bound_applicable: bool = True,
    device_id: bytes | None = None,
    hasher: Hasher = DEFAULT_HASHER,
) -> VerificationReport:
    """Irrecoverable-state check including the deletion time bound."""
    if bundle.state is not DataState.IRRECOVERABLE:
        raise DomainError("bundle does not claim the irrecoverable state")
    return verify_bundle(
        bundle,
        shared_key,
        params,
        policy,
        role="user",
        device_id=device_id,
        response_time=response_time,
        time_bound=time_bound,
        time_bound_applicable=time_bound_applicable,
        hasher=hasher,
    )


def verify_as_sdp(
    bundle: AttestationBundle,
    shared_key: bytes,
    params: AccumulatorParams,
    policy: RetentionPolicy,
    response_time: float | None = None,
    time_bound: float | None = None,
    time_bound_applicable: bool = True,
    hasher: Hasher = DEFAULT_HASHER,
) -> VerificationReport:
    """Provider-side verification: the user path minus membership."""
    return verify_bundle(
        bundle,
        shared_key,
        params,
        policy,
        role="sdp",
        device_id=None,
        response_time=response_time,
        time_bound=time_bound,
        time_bound_applicable=time_bound_applicable,
        hasher=hasher,
    )


def recompute_estimate_for_bundle(bundle: AttestationBundle, hasher: Hasher = DEFAULT_HASHER) -> float:
    """Estimated honest-deletion recompute time for this epoch's cells."""
    if bundle.cells is not None:
        return expunge_duration_estimate(len(bundle.cells.cells), bundle.cells.cell_size, hasher)
    ciphertexts = bundle.ciphertexts or ()
    if not ciphertexts:
        return expunge_duration_estimate(2, EMPTY_EPOCH_CELL_SIZE, hasher)
    cell_size = 4 + max(len(ct) for ct in ciphertexts)
    return expunge_duration_estimate(len(ciphertexts), cell_size, hasher)
