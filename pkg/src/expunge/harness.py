"""Multi-role simulation harness.

Generates synthetic WiFi-connectivity readings, wires the four roles
(provider, cloud, service provider, users) together over the wire
protocol, replays scenarios against a virtual clock, and reproduces the
desk-scale benchmark suite.

Protocol logic runs entirely on the virtual clock so state timelines
replay identically; wall time is measured only where a benchmark or the
deletion time bound needs it. Fault-injection flags turn the cloud lazy
(skips deletion, fabricates proofs on demand) or make the service
provider tamper with a sealed query block, so tests can demonstrate
that exactly the right check catches each behaviour.
"""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from .accumulator import AccumulatorParams, setup
from .attestation import (
    calibrate_time_bound,
    recompute_estimate_for_bundle,
    verify_bundle,
)
from .cloud import CloudStore
from .control import (
    accessible_tag,
    build_outsource_payload,
    encrypt_reading,
    epoch_timestamp,
    irrecoverable_tag,
    reading_digest,
)
from .core import NEVER, DataState, RetentionPolicy, SensorReading, epoch_of
from .crypto import KeyRing, generate_keyring, save_keyring
from .engine import CellArray, expunge
from .errors import DataExpiredError, DomainError, UnavailableError
from .hashing import Hasher
from .querylog import QueryLogger, SealedBlock, audit_block, make_query_record
from .wire import CloudService, LoopbackTransport, SocketTransport, SpService, serve

MS_PER_HOUR = 3_600_000
MS_PER_DAY = 24 * MS_PER_HOUR


@dataclass
class ScenarioConfig:
    """Everything a scenario or benchmark run needs, JSON-serializable."""

    delta_ms: int = MS_PER_HOUR
    p_del: int = 2
    p_ver: int | float = 4
    origin_ms: int = 0
    arrival_epochs: int = 8
    drain_epochs: int | None = None
    device_count: int = 20
    user_count: int = 8
    day_rate_per_hour: float = 120.0
    night_rate_per_hour: float = 30.0
    day_hours: tuple[int, int] = (8, 20)
    payload_mean_bytes: int = 230
    payload_jitter_bytes: int = 40
    modulus_bits: int = 2048
    hash_name: str = "sha256"
    seed: int = 7
    queries_per_epoch: int = 2
    block_capacity: int = 4
    block_time_limit_ms: int = 0  # 0: use the epoch duration
    verify_every_epochs: int = 2
    sp_id: str = "sp-main"
    lazy_cloud: bool = False
    tampering_sp: bool = False
    transport: str = "loopback"

    def __post_init__(self):
        if self.day_rate_per_hour < 0 or self.night_rate_per_hour < 0:
            raise DomainError("arrival rates must be non-negative")
        if self.arrival_epochs < 1:
            raise DomainError("need at least one arrival epoch")
        if self.user_count < 1 or self.device_count < 1:
            raise DomainError("need at least one registered user and device")
        if self.transport not in ("loopback", "socket"):
            raise DomainError(f"unknown transport {self.transport!r}")
        if self.drain_epochs is None:
            horizon = self.p_del + 2 if self.p_ver is NEVER else int(self.p_ver) + 2
            self.drain_epochs = horizon

    def require_state_machine_coverage(self) -> None:
        """Scenario runs must cover p_ver + 1 epochs to exercise every state."""
        if self.p_ver is not NEVER:
            covered = self.arrival_epochs + self.drain_epochs
            if covered < self.p_ver + 1:
                raise DomainError(
                    "scenario must cover at least p_ver + 1 epochs for full"
                    " state-machine coverage"
                )

    @property
    def policy(self) -> RetentionPolicy:
        return RetentionPolicy(p_del=self.p_del, p_ver=self.p_ver, delta=self.delta_ms)

    @property
    def block_time_limit(self) -> int:
        return self.block_time_limit_ms or self.delta_ms

    def to_dict(self) -> dict:
        doc = {
            k: v for k, v in self.__dict__.items() if not k.startswith("_")
        }
        doc["p_ver"] = "inf" if self.p_ver is NEVER else self.p_ver
        doc["day_hours"] = list(self.day_hours)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioConfig":
        doc = dict(doc)
        if doc.get("p_ver") == "inf":
            doc["p_ver"] = NEVER
        if "day_hours" in doc:
            doc["day_hours"] = tuple(doc["day_hours"])
        return cls(**doc)

    def save(self, path: Path) -> None:
        path.write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path: Path) -> "ScenarioConfig":
        return cls.from_dict(json.loads(path.read_text()))


class VirtualClock:
    """Monotone simulated clock owned by the orchestrator."""

    def __init__(self, start: int = 0):
        self._now = start

    @property
    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> None:
        if t < self._now:
            raise DomainError(f"clock cannot move backwards ({self._now} -> {t})")
        self._now = t


# -- synthetic readings -------------------------------------------------------


def device_pool(config: ScenarioConfig) -> list[bytes]:
    """Fixed synthetic MAC pool; locally-administered, seed-deterministic."""
    rng = random.Random(config.seed ^ 0x5EED)
    return [
        bytes([0x02]) + rng.randbytes(5) for _ in range(config.device_count)
    ]


def _poisson(rng: random.Random, lam: float) -> int:
    if lam <= 0:
        return 0
    if lam < 30:
        threshold = math.exp(-lam)
        k = 0
        product = rng.random()
        while product > threshold:
            k += 1
            product *= rng.random()
        return k
    return max(0, round(rng.gauss(lam, math.sqrt(lam))))


def _payload(rng: random.Random, config: ScenarioConfig) -> bytes:
    ap = f"ap-{rng.randrange(max(4, config.device_count // 4)):04d}".encode()
    size = max(0, round(rng.gauss(config.payload_mean_bytes, config.payload_jitter_bytes)))
    return ap + b"|" + rng.randbytes(size)


def hourly_rate(config: ScenarioConfig, hour_of_day: int) -> float:
    start, end = config.day_hours
    return (
        config.day_rate_per_hour
        if start <= hour_of_day < end
        else config.night_rate_per_hour
    )


def generate_readings(config: ScenarioConfig) -> list[SensorReading]:
    """Deterministic-for-seed stream over the arrival window.

    Arrival counts are Poisson per hour with a day/night rate profile;
    payloads look like connectivity traps: an access-point id plus an
    opaque body.
    """
    rng = random.Random(config.seed)
    devices = device_pool(config)
    begin = config.origin_ms
    end = begin + config.arrival_epochs * config.delta_ms
    readings: list[SensorReading] = []
    hour_start = begin - (begin % MS_PER_HOUR)
    while hour_start < end:
        window_start = max(begin, hour_start)
        window_end = min(end, hour_start + MS_PER_HOUR)
        rate = hourly_rate(config, (hour_start // MS_PER_HOUR) % 24)
        lam = rate * (window_end - window_start) / MS_PER_HOUR
        count = _poisson(rng, lam)
        times = sorted(rng.randrange(window_start, window_end) for _ in range(count))
        for t in times:
            readings.append(
                SensorReading(
                    device_id=rng.choice(devices),
                    time=t,
                    payload=_payload(rng, config),
                )
            )
        hour_start += MS_PER_HOUR
    return readings


# -- benchmark reporting -------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkEntry:
    name: str
    value: float
    unit: str
    params: dict


@dataclass
class BenchmarkReport:
    label: str
    metadata: dict = field(default_factory=dict)
    entries: list[BenchmarkEntry] = field(default_factory=list)

    def add(self, name: str, value: float, unit: str, **params) -> None:
        self.entries.append(BenchmarkEntry(name, value, unit, params))

    def values(self, name: str) -> list[float]:
        return [e.value for e in self.entries if e.name == name]

    def table(self) -> str:
        lines = [f"# {self.label}"]
        width = max((len(e.name) for e in self.entries), default=0)
        for e in self.entries:
            params = " ".join(f"{k}={v}" for k, v in e.params.items())
            lines.append(f"{e.name:<{width}}  {e.value:>12.6f} {e.unit:<8} {params}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "metadata": self.metadata,
            "entries": [
                {"name": e.name, "value": e.value, "unit": e.unit, "params": e.params}
                for e in self.entries
            ],
        }


def _run_metadata(config: ScenarioConfig) -> dict:
    import platform

    return {
        "python": platform.python_version(),
        "machine": platform.machine(),
        "hash": config.hash_name,
        "modulus_bits": config.modulus_bits,
        "seed": config.seed,
    }


# -- transport plumbing ---------------------------------------------------------


@dataclass(frozen=True)
class TransportCalibration:
    """Linear round-trip model from raw frame probes (fallback baseline)."""

    base_seconds: float
    per_byte_seconds: float

    def round_trip(self, nbytes: int) -> float:
        return self.base_seconds + self.per_byte_seconds * nbytes


def calibrate_transport(transport, probe=None) -> TransportCalibration:
    """Fit round-trip cost from two probe sizes through the error path.

    ``probe(size) -> seconds`` may be supplied directly; by default raw
    frames of the given size are timed against the transport.
    """
    if probe is None:

        def probe(size: int) -> float:
            payload = bytes(size)
            best = math.inf
            for _ in range(3):
                start = time.perf_counter()
                transport.request(255, payload)  # unknown type: served as error
                best = min(best, time.perf_counter() - start)
            return best

    small, big = 1024, 262_144
    t_small = probe(small)
    t_big = probe(big)
    per_byte = max(0.0, (t_big - t_small) / (big - small))
    base = max(1e-9, t_small - per_byte * small)
    return TransportCalibration(base_seconds=base, per_byte_seconds=per_byte)


class RoundTripTracker:
    """Same-size round-trip reference built from honest bundle fetches.

    Accessible-state fetches never involve proof computation, so their
    measured round trips are an honest baseline even against a lazy
    cloud. The time bound for an irrecoverable fetch is derived from the
    most recent accessible fetch, scaled linearly to the bundle size.
    """

    def __init__(self, fallback: TransportCalibration):
        self._fallback = fallback
        self._size: int | None = None
        self._seconds: float | None = None

    def record(self, nbytes: int, seconds: float) -> None:
        if nbytes > 0 and seconds > 0:
            self._size = nbytes
            self._seconds = seconds

    def round_trip(self, nbytes: int) -> float:
        if self._size is None:
            return self._fallback.round_trip(nbytes)
        return self._seconds * max(0.25, nbytes / self._size)


class _Roles:
    """Transport endpoints for one scenario run."""

    def __init__(self, config: ScenarioConfig, store: CloudStore, logger: QueryLogger):
        self.cloud_service = CloudService(store)
        self.sp_service = SpService(logger)
        self._servers = []
        if config.transport == "socket":
            cloud_server = serve(self.cloud_service.handle)
            sp_server = serve(self.sp_service.handle)
            self._servers = [cloud_server, sp_server]
            self.cloud = SocketTransport("127.0.0.1", cloud_server.server_address[1])
            self.sp = SocketTransport("127.0.0.1", sp_server.server_address[1])
        else:
            self.cloud = LoopbackTransport(self.cloud_service.handle)
            self.sp = LoopbackTransport(self.sp_service.handle)

    def close(self) -> None:
        self.cloud.close()
        self.sp.close()
        for server in self._servers:
            server.shutdown()
            server.server_close()


# -- scenario ------------------------------------------------------------------


@dataclass
class ScenarioResult:
    config: ScenarioConfig
    transcript: list[dict]
    report: BenchmarkReport
    summary: dict
    state_dir: Path | None

    def events(self, kind: str) -> list[dict]:
        return [e for e in self.transcript if e["event"] == kind]


def _verify_target(
    roles: _Roles,
    at: int,
    now: int,
    role: str,
    device_id: bytes | None,
    keyring: KeyRing,
    params: AccumulatorParams,
    policy: RetentionPolicy,
    tracker: RoundTripTracker,
    hasher: Hasher,
):
    bundle, elapsed = CloudService.fetch_bundle_via(roles.cloud, at, now)
    time_bound = None
    applicable = True
    if bundle.state is DataState.ACCESSIBLE:
        tracker.record(len(bundle.to_bytes()), elapsed)
    else:
        estimate = recompute_estimate_for_bundle(bundle, hasher)
        rtt = tracker.round_trip(len(bundle.to_bytes()))
        time_bound, applicable = calibrate_time_bound(rtt, estimate)
    report = verify_bundle(
        bundle,
        keyring.shared_key,
        params,
        policy,
        role=role,
        device_id=device_id,
        response_time=elapsed,
        time_bound=time_bound,
        time_bound_applicable=applicable,
        hasher=hasher,
    )
    return report


def run_scenario(config: ScenarioConfig, state_dir: Path | None = None) -> ScenarioResult:
    """Drive the full dataflow end to end and return the transcript.

    Readings flow provider -> cloud; the scheduler expunges and purges
    as the virtual clock crosses policy deadlines; the service provider
    fetches fresh epochs and logs signed user queries; users and the
    provider verify epochs in both states; the provider audits the query
    log at the end.
    """
    config.require_state_machine_coverage()
    hasher = Hasher(config.hash_name)
    policy = config.policy
    rng = random.Random(config.seed ^ 0xC0FFEE)
    devices = device_pool(config)
    user_ids = [f"user-{i:02d}".encode() for i in range(config.user_count)]
    device_owner = {d: user_ids[i % len(user_ids)] for i, d in enumerate(devices)}
    keyring = generate_keyring(user_ids)
    registry = keyring.user_public_keys()
    params = setup(config.modulus_bits)
    sp_id = config.sp_id.encode()

    blocks_dir = None
    if state_dir is not None:
        state_dir = Path(state_dir)
        state_dir.mkdir(parents=True, exist_ok=True)
        blocks_dir = state_dir / "blocks"
        blocks_dir.mkdir(exist_ok=True)

    def block_sink(block: SealedBlock) -> None:
        if blocks_dir is not None:
            (blocks_dir / f"{block.block_id:06d}.blk").write_bytes(block.to_bytes())

    store = CloudStore(
        policy,
        root=(state_dir / "cloud") if state_dir is not None else None,
        sp_allowlist=frozenset({sp_id}),
        hasher=hasher,
        lazy_deletion=config.lazy_cloud,
    )
    logger = QueryLogger(
        capacity=config.block_capacity,
        time_limit=config.block_time_limit,
        params=params,
        sdp_public=keyring.sdp_box_public,
        registry=registry,
        start_time=config.origin_ms,
        sink=block_sink,
        hasher=hasher,
    )
    roles = _Roles(config, store, logger)
    tracker = RoundTripTracker(calibrate_transport(roles.cloud))
    clock = VirtualClock(config.origin_ms)
    transcript: list[dict] = []
    report = BenchmarkReport("scenario", metadata=_run_metadata(config))

    readings = generate_readings(config)
    by_epoch: dict[int, list[SensorReading]] = {}
    for reading in readings:
        window = epoch_of(reading.time, config.delta_ms, config.origin_ms)
        by_epoch.setdefault(window.id, []).append(reading)

    prev_ct = params.seed
    verification_failures = 0
    verifications = 0

    def run_verification(at: int, role: str, device_id: bytes | None, expect: str):
        nonlocal verifications, verification_failures
        vreport = _verify_target(
            roles, at, clock.now, role, device_id, keyring, params, policy,
            tracker, hasher,
        )
        verifications += 1
        if not vreport.verified:
            verification_failures += 1
        transcript.append(
            {
                "t": clock.now,
                "actor": role,
                "event": "verify",
                "expected_state": expect,
                **vreport.to_dict(),
            }
        )
        return vreport

    try:
        windows = [
            epoch_of(config.origin_ms + k * config.delta_ms, config.delta_ms, config.origin_ms)
            for k in range(config.arrival_epochs)
        ]
        for k, window in enumerate(windows):
            clock.advance_to(window.et)
            epoch_readings = by_epoch.get(window.id, [])
            start = time.perf_counter()
            sensor_row, meta_row = build_outsource_payload(
                window, epoch_readings, prev_ct, keyring, params, hasher
            )
            control_seconds = time.perf_counter() - start
            prev_ct = sensor_row.crypto_time
            report.add(
                "control_per_epoch", control_seconds, "s",
                epoch=window.id, readings=len(epoch_readings),
            )
            CloudService.ingest_via(roles.cloud, sensor_row, meta_row)
            transcript.append(
                {
                    "t": clock.now,
                    "actor": "sdp",
                    "event": "ingest",
                    "epoch_id": window.id,
                    "readings": len(epoch_readings),
                }
            )

            for transition in CloudService.tick_via(roles.cloud, clock.now):
                transcript.append(
                    {
                        "t": clock.now,
                        "actor": "cloud",
                        "event": "transition",
                        "epoch_id": transition.epoch_id,
                        "from": transition.from_state.name,
                        "to": transition.to_state.name,
                    }
                )

            try:
                _, fetch_elapsed = CloudService.fetch_sp_via(
                    roles.cloud, window.id, sp_id, clock.now
                )
                report.add("sp_fetch", fetch_elapsed, "s", epoch=window.id)
                transcript.append(
                    {
                        "t": clock.now,
                        "actor": "sp",
                        "event": "sp_fetch",
                        "epoch_id": window.id,
                        "ok": True,
                    }
                )
            except DataExpiredError:
                transcript.append(
                    {
                        "t": clock.now,
                        "actor": "sp",
                        "event": "sp_fetch_denied",
                        "epoch_id": window.id,
                    }
                )

            if k >= 1:
                expired_window = windows[0]
                if store.state_of(expired_window.id) is not DataState.ACCESSIBLE:
                    try:
                        CloudService.fetch_sp_via(
                            roles.cloud, expired_window.id, sp_id, clock.now
                        )
                        transcript.append(
                            {
                                "t": clock.now,
                                "actor": "sp",
                                "event": "sp_fetch_unexpectedly_ok",
                                "epoch_id": expired_window.id,
                            }
                        )
                    except DataExpiredError:
                        transcript.append(
                            {
                                "t": clock.now,
                                "actor": "sp",
                                "event": "sp_fetch_denied",
                                "epoch_id": expired_window.id,
                            }
                        )

            for q in range(config.queries_per_epoch):
                device = rng.choice(devices)
                user_id = device_owner[device]
                record = make_query_record(
                    query=f"occupancy:{device.hex()}:{window.id}".encode(),
                    time=clock.now,
                    user_id=user_id,
                    signing_key=keyring.user_signing_keys[user_id],
                )
                SpService.query_via(roles.sp, record, clock.now)
                transcript.append(
                    {
                        "t": clock.now,
                        "actor": "user",
                        "event": "query",
                        "user": user_id.decode(),
                    }
                )

            if k % config.verify_every_epochs == 0:
                device = rng.choice(devices)
                run_verification(
                    window.id, "user", device, expect=DataState.ACCESSIBLE.name
                )
                run_verification(window.id, "sdp", None, expect=DataState.ACCESSIBLE.name)
                deleted = [
                    eid
                    for eid in store.epoch_ids()
                    if store.state_of(eid) is DataState.IRRECOVERABLE
                ]
                if config.lazy_cloud and not deleted:
                    # the lazy cloud reports nothing deleted; probe an epoch
                    # whose deadline has passed anyway
                    due = [
                        w.id
                        for w in windows[: k + 1]
                        if w.et + policy.p_del * policy.delta <= clock.now
                    ]
                    deleted = due[-1:]
                if deleted:
                    run_verification(
                        deleted[-1], "user", rng.choice(devices),
                        expect=DataState.IRRECOVERABLE.name,
                    )

        # arrival finished: drain the pipeline so late transitions fire
        for _ in range(config.drain_epochs):
            clock.advance_to(clock.now + config.delta_ms)
            for transition in CloudService.tick_via(roles.cloud, clock.now):
                transcript.append(
                    {
                        "t": clock.now,
                        "actor": "cloud",
                        "event": "transition",
                        "epoch_id": transition.epoch_id,
                        "from": transition.from_state.name,
                        "to": transition.to_state.name,
                    }
                )
            logger.advance(clock.now)

        purged = [
            eid for eid in store.epoch_ids() if store.state_of(eid) is DataState.PURGED
        ]
        if purged:
            try:
                CloudService.fetch_bundle_via(roles.cloud, purged[0], clock.now)
                transcript.append(
                    {
                        "t": clock.now,
                        "actor": "user",
                        "event": "bundle_unexpectedly_available",
                        "epoch_id": purged[0],
                    }
                )
            except UnavailableError:
                transcript.append(
                    {
                        "t": clock.now,
                        "actor": "user",
                        "event": "bundle_unavailable",
                        "epoch_id": purged[0],
                    }
                )

        still_verifiable = [
            eid
            for eid in store.epoch_ids()
            if store.state_of(eid) is DataState.IRRECOVERABLE
        ]
        if still_verifiable:
            run_verification(
                still_verifiable[-1], "sdp", None, expect=DataState.IRRECOVERABLE.name
            )

        logger.flush(clock.now)

        if config.tampering_sp and logger.sealed_blocks:
            victim = max(
                range(len(logger.sealed_blocks)),
                key=lambda i: len(logger.sealed_blocks[i].encrypted_records),
            )
            block = logger.sealed_blocks[victim]
            if block.encrypted_records:
                logger.sealed_blocks[victim] = replace(
                    block, encrypted_records=block.encrypted_records[1:]
                )
                block_sink(logger.sealed_blocks[victim])
                transcript.append(
                    {
                        "t": clock.now,
                        "actor": "sp",
                        "event": "tamper_injected",
                        "block_id": block.block_id,
                    }
                )

        audits_failed = 0
        for sealed in logger.sealed_blocks:
            fetched, prev = SpService.audit_fetch_via(roles.sp, sealed.block_id)
            audit = audit_block(
                fetched,
                prev if prev is not None else params.seed,
                keyring.sdp_box_private,
                params,
                registry,
                hasher,
            )
            if not audit.ok:
                audits_failed += 1
            transcript.append(
                {
                    "t": clock.now,
                    "actor": "sdp",
                    "event": "audit",
                    "block_id": sealed.block_id,
                    "ok": audit.ok,
                    "impersonation_suspected": audit.impersonation_suspected,
                }
            )
    finally:
        roles.close()

    summary = {
        "readings": len(readings),
        "epochs": config.arrival_epochs,
        "verifications": verifications,
        "verification_failures": verification_failures,
        "sealed_blocks": len(logger.sealed_blocks),
        "audits_failed": audits_failed,
        "final_clock": clock.now,
        "states": {
            str(eid): store.state_of(eid).name for eid in store.epoch_ids()
        },
    }

    result = ScenarioResult(
        config=config,
        transcript=transcript,
        report=report,
        summary=summary,
        state_dir=state_dir,
    )

    if state_dir is not None:
        config.save(state_dir / "config.json")
        save_keyring(keyring, state_dir / "keyring.json")
        (state_dir / "params.bin").write_bytes(params.to_bytes())
        (state_dir / "policy.bin").write_bytes(policy.to_bytes())
        (state_dir / "meta.json").write_text(
            json.dumps({"clock": clock.now, "sp_id": config.sp_id})
        )
        (state_dir / "transcript.json").write_text(json.dumps(transcript, indent=1))
        (state_dir / "report.json").write_text(json.dumps(report.to_dict(), indent=1))
        (state_dir / "summary.json").write_text(json.dumps(summary, indent=1))
    return result


# -- benchmarks ----------------------------------------------------------------

BENCH_DELTAS_MS = (15 * 60_000, MS_PER_HOUR, MS_PER_DAY)


def _flat_rate_epoch(
    config: ScenarioConfig, delta_ms: int, rng: random.Random
) -> list[SensorReading]:
    """One epoch of readings at the configured day rate, flat profile."""
    count = max(1, round(config.day_rate_per_hour * delta_ms / MS_PER_HOUR))
    devices = device_pool(config)
    times = sorted(rng.randrange(0, delta_ms) for _ in range(count))
    return [
        SensorReading(
            device_id=rng.choice(devices), time=t, payload=_payload(rng, config)
        )
        for t in times
    ]


def bench(config: ScenarioConfig, experiment: int) -> BenchmarkReport:
    """Reproduce one of the five desk-scale experiments.

    1: provider control-phase time per epoch and per day across epoch
    durations; 2: storage ratio outsourced/raw; 3: verification wall
    time for one day (+ year projection); 4: cloud expunge time per
    epoch size; 5: bundle transfer time, measured and at nominal link
    speeds.
    """
    if experiment not in (1, 2, 3, 4, 5):
        raise DomainError("experiment must be 1..5")
    hasher = Hasher(config.hash_name)
    rng = random.Random(config.seed)
    report = BenchmarkReport(f"exp{experiment}", metadata=_run_metadata(config))
    keyring = generate_keyring([])
    params = setup(config.modulus_bits)

    if experiment == 1:
        for delta_ms in BENCH_DELTAS_MS:
            window = epoch_of(0, delta_ms)
            readings = _flat_rate_epoch(config, delta_ms, rng)
            start = time.perf_counter()
            build_outsource_payload(window, readings, params.seed, keyring, params, hasher)
            report.add(
                "control_per_epoch", time.perf_counter() - start, "s",
                delta_ms=delta_ms, readings=len(readings),
            )
        for delta_ms in BENCH_DELTAS_MS:
            epochs = MS_PER_DAY // delta_ms
            encrypt_total = 0.0
            tag_total = 0.0
            prev = params.seed
            for k in range(epochs):
                window = epoch_of(k * delta_ms, delta_ms)
                readings = [
                    SensorReading(r.device_id, r.time + window.bt, r.payload)
                    for r in _flat_rate_epoch(config, delta_ms, rng)
                ]
                digests = tuple(
                    reading_digest(r.device_id, window.id, i + 1, hasher)
                    for i, r in enumerate(readings)
                )
                prev = epoch_timestamp(prev, digests, params, hasher)
                start = time.perf_counter()
                cts = tuple(
                    encrypt_reading(r, window.id, keyring.enclave_public)
                    for r in readings
                )
                encrypt_total += time.perf_counter() - start
                start = time.perf_counter()
                accessible_tag(cts, hasher)
                irrecoverable_tag(cts, window.id, hasher)
                tag_total += time.perf_counter() - start
            report.add("encrypt_per_day", encrypt_total, "s", delta_ms=delta_ms)
            report.add("tags_per_day", tag_total, "s", delta_ms=delta_ms)

    elif experiment == 2:
        store = CloudStore(config.policy, hasher=hasher)
        raw_bytes = 0
        prev = params.seed
        readings = generate_readings(config)
        by_epoch: dict[int, list[SensorReading]] = {}
        for reading in readings:
            raw_bytes += len(reading.to_bytes())
            window = epoch_of(reading.time, config.delta_ms, config.origin_ms)
            by_epoch.setdefault(window.id, []).append(reading)
        for k in range(config.arrival_epochs):
            window = epoch_of(
                config.origin_ms + k * config.delta_ms, config.delta_ms, config.origin_ms
            )
            sensor_row, meta_row = build_outsource_payload(
                window, by_epoch.get(window.id, []), prev, keyring, params, hasher
            )
            prev = sensor_row.crypto_time
            store.ingest(sensor_row, meta_row)
        report.add("raw_bytes", raw_bytes, "B", readings=len(readings))
        report.add("outsourced_bytes", store.outsourced_bytes, "B")
        report.add(
            "storage_ratio",
            store.outsourced_bytes / raw_bytes if raw_bytes else math.inf,
            "x",
        )

    elif experiment == 3:
        day_config = replace(
            config, delta_ms=MS_PER_HOUR, arrival_epochs=24, origin_ms=0,
            night_rate_per_hour=config.day_rate_per_hour, transport="loopback",
        )
        store = CloudStore(day_config.policy, hasher=hasher)
        service = CloudService(store)
        transport = LoopbackTransport(service.handle)
        prev = params.seed
        readings = generate_readings(day_config)
        by_epoch: dict[int, list[SensorReading]] = {}
        for reading in readings:
            window = epoch_of(reading.time, MS_PER_HOUR, 0)
            by_epoch.setdefault(window.id, []).append(reading)
        for k in range(24):
            window = epoch_of(k * MS_PER_HOUR, MS_PER_HOUR, 0)
            sensor_row, meta_row = build_outsource_payload(
                window, by_epoch.get(window.id, []), prev, keyring, params, hasher
            )
            prev = sensor_row.crypto_time
            store.ingest(sensor_row, meta_row)
        now = 24 * MS_PER_HOUR
        start = time.perf_counter()
        for k in range(24):
            bundle, elapsed = CloudService.fetch_bundle_via(
                transport, k * MS_PER_HOUR, now
            )
            verify_bundle(
                bundle, keyring.shared_key, params, day_config.policy,
                role="user", device_id=device_pool(day_config)[0],
                response_time=elapsed, hasher=hasher,
            )
        day_seconds = time.perf_counter() - start
        report.add("verify_day", day_seconds, "s", readings=len(readings))
        report.add("verify_year_projected", day_seconds * 365, "s")

    elif experiment == 4:
        for delta_ms in BENCH_DELTAS_MS:
            window = epoch_of(0, delta_ms)
            readings = _flat_rate_epoch(config, delta_ms, rng)
            cts = [
                encrypt_reading(r, window.id, keyring.enclave_public) for r in readings
            ]
            array = CellArray.from_ciphertexts(cts, window.id)
            start = time.perf_counter()
            expunge(array, hasher=hasher)
            report.add(
                "expunge_per_epoch", time.perf_counter() - start, "s",
                delta_ms=delta_ms, cells=len(cts),
            )

    elif experiment == 5:
        for delta_ms in (MS_PER_HOUR, MS_PER_DAY):
            window = epoch_of(0, delta_ms)
            readings = _flat_rate_epoch(config, delta_ms, rng)
            store = CloudStore(config.policy, hasher=hasher)
            sensor_row, meta_row = build_outsource_payload(
                window, readings, params.seed, keyring, params, hasher
            )
            store.ingest(sensor_row, meta_row)
            transport = LoopbackTransport(CloudService(store).handle)
            bundle, elapsed = CloudService.fetch_bundle_via(transport, window.id, window.et)
            size = len(bundle.to_bytes())
            report.add(
                "bundle_transfer_measured", elapsed, "s",
                delta_ms=delta_ms, bytes=size,
            )
            for label, rate in (("100MBps", 100e6), ("500MBps", 500e6), ("1GBps", 1e9)):
                report.add(
                    "bundle_transfer_nominal", size / rate, "s",
                    delta_ms=delta_ms, link=label, bytes=size,
                )
    return report
