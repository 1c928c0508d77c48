"""Relay store durability, service semantics, HTTP surface, simulator."""

import io
import json
import threading
from datetime import timedelta

import httpx
import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from sapsense.chip import CHEMICAL_ORDER, ChemicalKind
from sapsense.errors import (InvalidRange, PayloadTooLarge, RelayError,
                             UndecodableImage, UnknownDevice, UnknownLayout)
from sapsense.relay import (RelayService, RelayStore, create_app,
                            simulate_device)
from sapsense.relay.store import (MAX_IMAGE_BYTES, format_rfc3339,
                                  parse_rfc3339, utc_now)
from sapsense.synth import (CorpusSpec, IlluminationRamp, TruthCase,
                            WarpParams, generate_corpus, render_chip)


def png_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def tiny_png(shade: int = 128, size: int = 96) -> bytes:
    return png_bytes(np.full((size, size, 3), shade, dtype=np.uint8))


@pytest.fixture(scope="module")
def chip_png(layout, scales):
    concentrations = {k: (6.0 if k is ChemicalKind.PH else 0.0)
                      for k in CHEMICAL_ORDER}
    case = TruthCase(concentrations=concentrations,
                     warp=WarpParams(0.0, 1.0, 0.0, (0.0, 0.0)),
                     noise_sigma=0.0, ramp=IlluminationRamp(0.0, 0.0),
                     seed=42)
    return png_bytes(render_chip(layout, scales, case))


@pytest.fixture()
def service(tmp_path):
    return RelayService(RelayStore(tmp_path / "data"))


@pytest.fixture()
def registered(service):
    return service.register_device(label="bench").device_id


# ---------------------------------------------------------------------------
# Timestamps

def test_rfc3339_round_trip():
    stamp = parse_rfc3339("2026-08-14T10:00:00.25Z")
    assert format_rfc3339(stamp) == "2026-08-14T10:00:00.250000Z"
    offset = parse_rfc3339("2026-08-14T12:00:00+02:00")
    assert format_rfc3339(offset) == "2026-08-14T10:00:00.000000Z"


def test_rfc3339_rejects_garbage():
    with pytest.raises(InvalidRange):
        parse_rfc3339("yesterday-ish")


# ---------------------------------------------------------------------------
# Store

def test_ingest_then_reopen_preserves_pending(tmp_path, registered, service):
    ack = service.ingest(registered, tiny_png(10))
    reopened = RelayStore(service.store.root)
    record = reopened.reading(ack.reading_id)
    assert record is not None
    assert record.status == "pending"
    assert reopened.pending_ids() == [ack.reading_id]


def test_processed_result_survives_reopen(registered, service, chip_png):
    ack = service.ingest(registered, chip_png)
    assert service.process_pending() == 1
    reopened = RelayStore(service.store.root)
    record = reopened.reading(ack.reading_id)
    assert record.status == "done"
    assert record.report["overall"] in {"green", "yellow", "red", "gray"}
    assert record.processed_at >= record.captured_at
    assert reopened.pending_ids() == []


def test_duplicate_upload_same_reading_id(registered, service):
    stamp = parse_rfc3339("2026-08-14T09:00:00Z")
    first = service.ingest(registered, tiny_png(20), stamp)
    before = service.store.readings_path.read_bytes()
    second = service.ingest(registered, tiny_png(20), stamp)
    after = service.store.readings_path.read_bytes()
    assert first.reading_id == second.reading_id
    assert not first.duplicate and second.duplicate
    assert before == after  # idempotent ingest appends nothing


def test_same_bytes_different_capture_time_is_new_reading(registered, service):
    base = utc_now()
    a = service.ingest(registered, tiny_png(30), base)
    b = service.ingest(registered, tiny_png(30), base + timedelta(minutes=15))
    assert a.reading_id != b.reading_id
    images = list((service.store.root / "images").iterdir())
    assert len(images) == 1  # content-addressed: one blob, two readings


def test_reading_ids_monotone_across_restart(tmp_path, chip_png):
    root = tmp_path / "data"
    service = RelayService(RelayStore(root))
    device = service.register_device(label="a").device_id
    first = service.ingest(device, tiny_png(40)).reading_id
    second = RelayService(RelayStore(root)).ingest(device, tiny_png(41))
    assert second.reading_id == first + 1


def test_torn_final_log_line_is_ignored(registered, service):
    kept = service.ingest(registered, tiny_png(50)).reading_id
    with open(service.store.readings_path, "ab") as handle:
        handle.write(b'{"event": "accepted", "readingId": 99, "dev')
    reopened = RelayStore(service.store.root)
    assert reopened.reading(kept) is not None
    assert reopened.reading(99) is None
    # the next id continues from the last intact record
    service2 = RelayService(reopened)
    device2 = service2.register_device(label="b").device_id
    assert service2.ingest(device2, tiny_png(51)).reading_id == kept + 1


def test_query_range_and_order(registered, service):
    base = parse_rfc3339("2026-08-14T00:00:00Z")
    stamps = [base + timedelta(minutes=15 * i) for i in range(5)]
    # upload out of order on purpose
    for i in (3, 0, 4, 2, 1):
        service.ingest(registered, tiny_png(60 + i), stamps[i])
    rows = service.query_readings(registered)
    assert [r.captured_at for r in rows] == stamps
    window = service.query_readings(registered, stamps[1], stamps[3])
    assert [r.captured_at for r in window] == stamps[1:3]  # [from, to)
    assert service.query_readings(registered, stamps[2], stamps[2]) == []
    capped = service.query_readings(registered, limit=2)
    assert [r.captured_at for r in capped] == stamps[:2]


def test_query_rejects_bad_ranges(registered, service):
    later = utc_now()
    earlier = later - timedelta(hours=1)
    with pytest.raises(InvalidRange):
        service.query_readings(registered, later, earlier)
    with pytest.raises(InvalidRange):
        service.query_readings(registered, limit=0)
    with pytest.raises(UnknownDevice):
        service.query_readings("dev-never-registered")


def test_query_limit_clamped_to_1000(registered, service):
    assert service.query_readings(registered, limit=5000) == []


def test_integrity_clean_and_detects_tampering(registered, service):
    service.ingest(registered, tiny_png(70))
    assert service.store.verify_integrity() == []
    blob = next((service.store.root / "images").iterdir())
    blob.write_bytes(b"overwritten")
    problems = RelayStore(service.store.root).verify_integrity()
    assert any("hash mismatch" in p for p in problems)


def test_concurrent_ingest_never_corrupts(registered, service):
    per_thread = 6
    acks = []
    lock = threading.Lock()

    def upload(worker):
        for i in range(per_thread):
            ack = service.ingest(registered, tiny_png(worker * 16 + i))
            with lock:
                acks.append(ack.reading_id)

    threads = [threading.Thread(target=upload, args=(w,)) for w in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()

    assert len(acks) == 8 * per_thread
    assert len(set(acks)) == len(acks)
    assert service.store.verify_integrity() == []
    reopened = RelayStore(service.store.root)
    assert len(reopened.pending_ids()) == len(acks)


# ---------------------------------------------------------------------------
# Service semantics

def test_ingest_rejections(registered, service):
    with pytest.raises(UnknownDevice):
        service.ingest("dev-ghost", tiny_png())
    with pytest.raises(UndecodableImage):
        service.ingest(registered, b"definitely not an image")
    with pytest.raises(PayloadTooLarge):
        service.ingest(registered, b"\x00" * (MAX_IMAGE_BYTES + 1))
    # nothing above may have appended a reading
    assert service.store.pending_ids() == []


def test_register_rejects_unknown_layout(service):
    with pytest.raises(UnknownLayout):
        service.register_device(layout_id="exotic")
    with pytest.raises(UnknownLayout):
        service.register_device(scales_id="exotic")


def test_unanalyzable_upload_becomes_failed_record(registered, service):
    ack = service.ingest(registered, tiny_png(190, size=400))
    assert service.process_pending() == 1
    record = service.get_reading(ack.reading_id)
    assert record.status == "failed"
    assert record.error_code.startswith("PipelineError")
    assert record.report["overall"] == "gray"
    assert len(record.report["interpretations"]) == 6
    assert record.reading is None


def test_future_capture_time_keeps_invariant(registered, service, chip_png):
    future = utc_now() + timedelta(hours=2)
    ack = service.ingest(registered, chip_png, future)
    service.process_pending()
    record = service.get_reading(ack.reading_id)
    assert record.processed_at >= record.captured_at


def test_process_pending_empty_queue_returns_zero(service):
    assert service.process_pending() == 0


def test_worker_thread_processes_in_background(registered, service, chip_png):
    service.start()
    try:
        ack = service.ingest(registered, chip_png)
        deadline = 30.0
        import time
        start = time.monotonic()
        while time.monotonic() - start < deadline:
            record = service.get_reading(ack.reading_id)
            if record.status != "pending":
                break
            time.sleep(0.02)
        assert service.get_reading(ack.reading_id).status == "done"
    finally:
        service.stop()


def test_restart_recovers_accepted_but_unprocessed(tmp_path, chip_png):
    root = tmp_path / "data"
    first = RelayService(RelayStore(root))
    device = first.register_device(label="cam").device_id
    ids = [first.ingest(device, chip_png,
                        utc_now() + timedelta(seconds=i)).reading_id
           for i in range(3)]
    # crash before processing: drop the service, reopen the directory
    revived = RelayService(RelayStore(root))
    assert revived.store.pending_ids() == ids
    assert revived.process_pending() == 3
    assert all(revived.get_reading(i).status == "done" for i in ids)


# ---------------------------------------------------------------------------
# HTTP API

@pytest.fixture()
def client(service):
    return TestClient(create_app(service))


def test_api_register_and_list_devices(client):
    created = client.post("/api/v1/devices",
                          json={"label": "north bed"})
    assert created.status_code == 201
    device_id = created.json()["deviceId"]
    assert len(device_id) <= 64
    rows = client.get("/api/v1/devices").json()
    assert [d["deviceId"] for d in rows] == [device_id]
    assert rows[0]["label"] == "north bed"
    assert rows[0]["lastSeenAt"] is None


def test_api_upload_query_and_fetch(client, service, chip_png):
    device_id = client.post("/api/v1/devices", json={}).json()["deviceId"]
    posted = client.post(
        "/api/v1/devices/%s/images" % device_id, content=chip_png,
        headers={"Content-Type": "image/png",
                 "X-Captured-At": "2026-08-14T08:00:00Z"})
    assert posted.status_code == 202
    body = posted.json()
    assert body["status"] == "pending"
    service.process_pending()

    rows = client.get("/api/v1/devices/%s/readings" % device_id,
                      params={"from": "2026-08-14T00:00:00Z",
                              "to": "2026-08-15T00:00:00Z"}).json()
    assert len(rows) == 1
    assert rows[0]["status"] == "done"
    assert rows[0]["report"]["overall"] in {"green", "yellow", "red"}
    assert "diagnostics" not in rows[0]["reading"]

    full = client.get("/api/v1/readings/%d" % body["readingId"]).json()
    assert len(full["reading"]["measurements"]) == 6
    assert len(full["report"]["interpretations"]) == 6
    assert "diagnostics" in full["reading"]
    assert full["imageRef"]["sha256"]

    seen = client.get("/api/v1/devices").json()[0]["lastSeenAt"]
    assert seen is not None


def test_api_error_codes(client, service, chip_png):
    device_id = client.post("/api/v1/devices", json={}).json()["deviceId"]
    assert client.post("/api/v1/devices/ghost/images",
                       content=chip_png).status_code == 404
    assert client.post("/api/v1/devices/%s/images" % device_id,
                       content=b"nonsense").status_code == 400
    assert client.post("/api/v1/devices/%s/images" % device_id,
                       content=chip_png,
                       headers={"Content-Type": "text/plain"}
                       ).status_code == 415
    assert client.post("/api/v1/devices/%s/images" % device_id,
                       content=chip_png,
                       headers={"X-Captured-At": "not-a-time"}
                       ).status_code == 400
    assert client.get("/api/v1/devices/%s/readings" % device_id,
                      params={"from": "b", "to": "a"}).status_code == 400
    assert client.get("/api/v1/readings/424242").status_code == 404
    assert client.get("/api/v1/chemicals/unobtainium").status_code == 404
    assert client.post("/api/v1/devices",
                       json={"layoutId": "exotic"}).status_code == 400


def test_api_payload_cap(client):
    device_id = client.post("/api/v1/devices", json={}).json()["deviceId"]
    oversized = b"\x89" * (MAX_IMAGE_BYTES + 1)
    response = client.post("/api/v1/devices/%s/images" % device_id,
                           content=oversized)
    assert response.status_code == 413


def test_api_chemical_page(client):
    page = client.get("/api/v1/chemicals/ph").json()
    assert page["displayName"] == "pH"
    assert page["scale"]["values"] == [5.0, 6.0, 7.0, 8.0]
    assert {r["signal"] for r in page["rules"]} == {"green", "yellow", "red"}
    assert page["modifier"] is None
    acephate = client.get("/api/v1/chemicals/acephate").json()
    assert acephate["modifier"]["headline"] == "ACEPHATE_COLD_FALSE_POSITIVE"


def test_api_bearer_token(service):
    client = TestClient(create_app(service, auth_token="sesame"))
    assert client.get("/healthz").status_code == 200
    assert client.get("/api/v1/devices").status_code == 401
    assert client.get("/api/v1/devices",
                      headers={"Authorization": "Bearer wrong"}
                      ).status_code == 401
    assert client.get("/api/v1/devices",
                      headers={"Authorization": "Bearer sesame"}
                      ).status_code == 200


# ---------------------------------------------------------------------------
# Simulator

@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim-corpus")
    generate_corpus(CorpusSpec.noiseless(count=5, seed=13), out)
    return out / "manifest.json"


def test_simulator_end_to_end(tmp_path, small_corpus):
    service = RelayService(RelayStore(tmp_path / "data"))
    service.start()
    try:
        client = TestClient(create_app(service))
        report = simulate_device(small_corpus, client=client,
                                 cadence_s=900.0, time_compression=90000.0)
    finally:
        service.stop()
    assert len(report.uploads) == 5
    assert report.reconciled and report.stored == 5
    assert all(u.attempts == 1 for u in report.uploads)
    # stored readings come back in capture order with full cadence spacing
    rows = service.query_readings(report.device_id)
    stamps = [r.captured_at for r in rows]
    assert stamps == sorted(stamps)
    gaps = {(b - a).total_seconds() for a, b in zip(stamps, stamps[1:])}
    assert gaps == {900.0}
    assert service.store.verify_integrity() == []


def test_simulator_sleeps_compressed_cadence(tmp_path, small_corpus):
    service = RelayService(RelayStore(tmp_path / "data"))
    naps = []
    client = TestClient(create_app(service))
    report = simulate_device(small_corpus, client=client, cadence_s=900.0,
                             time_compression=900.0, sleep=naps.append,
                             reconcile_timeout_s=0.0)
    # 4 inter-upload gaps of 900/900 = 1 s; reconciliation polls may add more
    assert naps[:4] == [1.0, 1.0, 1.0, 1.0]
    assert len(report.uploads) == 5


def test_simulator_retries_transport_errors(tmp_path, small_corpus):
    service = RelayService(RelayStore(tmp_path / "data"))
    inner = TestClient(create_app(service))
    failures = {"left": 2}

    class Flaky:
        def post(self, url, **kwargs):
            if "/images" in url and failures["left"] > 0:
                failures["left"] -= 1
                raise httpx.ConnectError("connection refused")
            return inner.post(url, **kwargs)

        def get(self, url, **kwargs):
            return inner.get(url, **kwargs)

    naps = []
    report = simulate_device(small_corpus, client=Flaky(),
                             time_compression=1e9, sleep=naps.append,
                             reconcile_timeout_s=0.0)
    assert report.uploads[0].attempts == 3
    assert all(u.attempts == 1 for u in report.uploads[1:])
    assert naps[:2] == [1.0, 2.0]  # exponential backoff from 1 s
    assert len(report.uploads) == 5


def test_simulator_gives_up_after_three_attempts(small_corpus):
    class Down:
        def post(self, url, **kwargs):
            raise httpx.ConnectError("nobody home")

    with pytest.raises(RelayError, match="after 3 attempts"):
        simulate_device(small_corpus, client=Down(), sleep=lambda _: None)


def test_simulator_does_not_retry_client_errors(tmp_path, small_corpus):
    service = RelayService(RelayStore(tmp_path / "data"))
    inner = TestClient(create_app(service))
    calls = {"n": 0}

    class Misdirected:
        def post(self, url, **kwargs):
            calls["n"] += 1
            if "/images" in url:
                url = url.replace(report_device, "dev-ghost")
            return inner.post(url, **kwargs)

        def get(self, url, **kwargs):
            return inner.get(url, **kwargs)

    # register through the real path so the simulator has a device id,
    # then sabotage only the uploads
    report_device = service.register_device(label="decoy").device_id
    with pytest.raises(RelayError, match="rejected: 404"):
        simulate_device(small_corpus, client=Misdirected(),
                        device_id=report_device, sleep=lambda _: None)
    assert calls["n"] == 1  # a 404 is final; no retries
