"""Durable storage for the relay: two append-only JSONL logs plus a
content-addressed image directory.

devices.jsonl holds registration events. readings.jsonl holds two event
kinds per reading: "accepted" written at ingest time (before the ack goes
out) and "processed" written when analysis finishes. Every append is
fsynced, so an ack implies the upload survives a crash; on restart,
accepted events without a matching processed event are simply pending
again. Nothing is ever rewritten in place.
"""

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from ..errors import InvalidRange, UnknownDevice

MAX_IMAGE_BYTES = 10 * 1024 * 1024
DEFAULT_QUERY_LIMIT = 100
MAX_QUERY_LIMIT = 1000


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


_FRACTIONAL_SECONDS = re.compile(r"\.(\d+)")


def parse_rfc3339(text: str) -> datetime:
    """RFC 3339 timestamp to an aware UTC datetime. Naive input counts as
    UTC. fromisoformat on 3.10 chokes on Z suffixes and on fractional
    seconds that are not exactly 3 or 6 digits, so both get normalized."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    raw = _FRACTIONAL_SECONDS.sub(
        lambda m: "." + m.group(1)[:6].ljust(6, "0"), raw, count=1)
    try:
        stamp = datetime.fromisoformat(raw)
    except ValueError:
        raise InvalidRange("not an RFC 3339 timestamp: %r" % text)
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return stamp.astimezone(timezone.utc)


def format_rfc3339(stamp: datetime) -> str:
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    return (stamp.astimezone(timezone.utc)
            .isoformat(timespec="microseconds")
            .replace("+00:00", "Z"))


@dataclass(frozen=True)
class DeviceRecord:
    device_id: str
    label: str
    layout_id: str
    scales_id: str
    registered_at: datetime
    last_seen_at: Optional[datetime] = None

    def to_api(self) -> dict:
        return {
            "deviceId": self.device_id,
            "label": self.label,
            "layoutId": self.layout_id,
            "scalesId": self.scales_id,
            "registeredAt": format_rfc3339(self.registered_at),
            "lastSeenAt": (format_rfc3339(self.last_seen_at)
                           if self.last_seen_at else None),
        }


@dataclass(frozen=True)
class ImageRef:
    sha256: str
    path: str
    byte_count: int

    def to_api(self) -> dict:
        return {"sha256": self.sha256, "path": self.path,
                "byteCount": self.byte_count}


@dataclass(frozen=True)
class ReadingRecord:
    reading_id: int
    device_id: str
    captured_at: datetime
    ingested_at: datetime
    image: ImageRef
    status: str = "pending"  # pending | done | failed
    processed_at: Optional[datetime] = None
    error_code: Optional[str] = None
    reading: Optional[dict] = None
    report: Optional[dict] = None

    def to_api(self, include_diagnostics: bool = False) -> dict:
        reading = self.reading
        if reading is not None and not include_diagnostics:
            reading = {k: v for k, v in reading.items() if k != "diagnostics"}
        return {
            "readingId": self.reading_id,
            "deviceId": self.device_id,
            "capturedAt": format_rfc3339(self.captured_at),
            "ingestedAt": format_rfc3339(self.ingested_at),
            "processedAt": (format_rfc3339(self.processed_at)
                            if self.processed_at else None),
            "status": self.status,
            "errorCode": self.error_code,
            "imageRef": self.image.to_api(),
            "reading": reading,
            "report": self.report,
        }


class RelayStore:
    """Thread-safe persistence. All mutation goes through one lock; reads
    return snapshots so query handlers never block appends for long."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.images_dir = self.root / "images"
        self.devices_path = self.root / "devices.jsonl"
        self.readings_path = self.root / "readings.jsonl"
        self.root.mkdir(parents=True, exist_ok=True)
        self.images_dir.mkdir(exist_ok=True)
        self._lock = threading.Lock()
        self._devices: Dict[str, DeviceRecord] = {}
        self._readings: Dict[int, ReadingRecord] = {}
        self._dedupe: Dict[Tuple[str, str, str], int] = {}
        self._next_id = 1
        self._replay()

    # -- recovery -----------------------------------------------------------

    def _replay(self) -> None:
        if self.devices_path.exists():
            for event in self._read_events(self.devices_path):
                if event.get("event") == "registered":
                    record = DeviceRecord(
                        device_id=event["deviceId"],
                        label=event.get("label", ""),
                        layout_id=event.get("layoutId", "default"),
                        scales_id=event.get("scalesId", "default"),
                        registered_at=parse_rfc3339(event["registeredAt"]))
                    self._devices[record.device_id] = record
        if self.readings_path.exists():
            for event in self._read_events(self.readings_path):
                kind = event.get("event")
                if kind == "accepted":
                    record = ReadingRecord(
                        reading_id=int(event["readingId"]),
                        device_id=event["deviceId"],
                        captured_at=parse_rfc3339(event["capturedAt"]),
                        ingested_at=parse_rfc3339(event["ingestedAt"]),
                        image=ImageRef(sha256=event["imageSha256"],
                                       path=event["imagePath"],
                                       byte_count=int(event["imageBytes"])))
                    self._readings[record.reading_id] = record
                    self._dedupe[(record.device_id,
                                  format_rfc3339(record.captured_at),
                                  record.image.sha256)] = record.reading_id
                    self._next_id = max(self._next_id, record.reading_id + 1)
                    self._touch(record.device_id, record.ingested_at)
                elif kind == "processed":
                    reading_id = int(event["readingId"])
                    base = self._readings.get(reading_id)
                    if base is None:
                        continue  # truncated log tail; accepted line was lost
                    self._readings[reading_id] = replace(
                        base,
                        status="done" if event.get("ok") else "failed",
                        processed_at=parse_rfc3339(event["processedAt"]),
                        error_code=event.get("errorCode"),
                        reading=event.get("reading"),
                        report=event.get("report"))
                    self._touch(base.device_id,
                                parse_rfc3339(event["processedAt"]))

    @staticmethod
    def _read_events(path: Path) -> List[dict]:
        events = []
        with open(path, "rb") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                try:
                    events.append(json.loads(line))
                except json.JSONDecodeError:
                    break  # torn final write; everything before it is good
        return events

    def _touch(self, device_id: str, stamp: datetime) -> None:
        device = self._devices.get(device_id)
        if device is None:
            return
        if device.last_seen_at is None or stamp > device.last_seen_at:
            self._devices[device_id] = replace(device, last_seen_at=stamp)

    # -- appends ------------------------------------------------------------

    @staticmethod
    def _append(path: Path, event: dict) -> None:
        line = json.dumps(event, sort_keys=True, separators=(",", ":")) + "\n"
        with open(path, "ab") as handle:
            handle.write(line.encode("utf-8"))
            handle.flush()
            os.fsync(handle.fileno())

    def register_device(self, device_id: str, label: str, layout_id: str,
                        scales_id: str) -> DeviceRecord:
        record = DeviceRecord(device_id=device_id, label=label,
                              layout_id=layout_id, scales_id=scales_id,
                              registered_at=utc_now())
        with self._lock:
            if device_id in self._devices:
                raise InvalidRange("deviceId %r already registered" % device_id)
            self._append(self.devices_path, {
                "event": "registered",
                "deviceId": record.device_id,
                "label": record.label,
                "layoutId": record.layout_id,
                "scalesId": record.scales_id,
                "registeredAt": format_rfc3339(record.registered_at),
            })
            self._devices[device_id] = record
        return record

    def _store_image(self, data: bytes, digest: str) -> str:
        relative = "images/%s" % digest
        target = self.root / relative
        if not target.exists():
            scratch = target.with_name(digest + ".part")
            with open(scratch, "wb") as handle:
                handle.write(data)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(scratch, target)
        return relative

    def accept_upload(self, device_id: str, data: bytes,
                      captured_at: datetime) -> Tuple[ReadingRecord, bool]:
        """Persist the image and an accepted event; returns (record, fresh).

        Same device + capturedAt + bytes is idempotent: the original
        record comes back with fresh=False and nothing is appended.
        """
        digest = hashlib.sha256(data).hexdigest()
        key = (device_id, format_rfc3339(captured_at), digest)
        with self._lock:
            if device_id not in self._devices:
                raise UnknownDevice("unknown deviceId %r" % device_id)
            existing = self._dedupe.get(key)
            if existing is not None:
                return self._readings[existing], False
            path = self._store_image(data, digest)
            record = ReadingRecord(
                reading_id=self._next_id,
                device_id=device_id,
                captured_at=captured_at,
                ingested_at=utc_now(),
                image=ImageRef(sha256=digest, path=path,
                               byte_count=len(data)))
            self._append(self.readings_path, {
                "event": "accepted",
                "readingId": record.reading_id,
                "deviceId": record.device_id,
                "capturedAt": format_rfc3339(record.captured_at),
                "ingestedAt": format_rfc3339(record.ingested_at),
                "imageSha256": digest,
                "imagePath": path,
                "imageBytes": len(data),
            })
            self._next_id += 1
            self._readings[record.reading_id] = record
            self._dedupe[key] = record.reading_id
            self._touch(device_id, record.ingested_at)
        return record, True

    def record_result(self, reading_id: int, ok: bool,
                      processed_at: datetime,
                      error_code: Optional[str] = None,
                      reading: Optional[dict] = None,
                      report: Optional[dict] = None) -> ReadingRecord:
        with self._lock:
            base = self._readings[reading_id]
            updated = replace(base,
                              status="done" if ok else "failed",
                              processed_at=processed_at,
                              error_code=error_code,
                              reading=reading,
                              report=report)
            self._append(self.readings_path, {
                "event": "processed",
                "readingId": reading_id,
                "ok": ok,
                "processedAt": format_rfc3339(processed_at),
                "errorCode": error_code,
                "reading": reading,
                "report": report,
            })
            self._readings[reading_id] = updated
            self._touch(base.device_id, processed_at)
        return updated

    # -- reads --------------------------------------------------------------

    def device(self, device_id: str) -> DeviceRecord:
        with self._lock:
            try:
                return self._devices[device_id]
            except KeyError:
                raise UnknownDevice("unknown deviceId %r" % device_id)

    def list_devices(self) -> List[DeviceRecord]:
        with self._lock:
            return sorted(self._devices.values(),
                          key=lambda d: (d.registered_at, d.device_id))

    def reading(self, reading_id: int) -> Optional[ReadingRecord]:
        with self._lock:
            return self._readings.get(reading_id)

    def pending_ids(self) -> List[int]:
        with self._lock:
            return sorted(r.reading_id for r in self._readings.values()
                          if r.status == "pending")

    def image_bytes(self, record: ReadingRecord) -> bytes:
        return (self.root / record.image.path).read_bytes()

    def query_readings(self, device_id: str,
                       from_ts: Optional[datetime] = None,
                       to_ts: Optional[datetime] = None,
                       limit: Optional[int] = None) -> List[ReadingRecord]:
        """Records with capturedAt in [from_ts, to_ts), ascending."""
        if limit is None:
            limit = DEFAULT_QUERY_LIMIT
        if limit <= 0:
            raise InvalidRange("limit must be positive, got %d" % limit)
        limit = min(limit, MAX_QUERY_LIMIT)
        if from_ts is not None and to_ts is not None and from_ts > to_ts:
            raise InvalidRange("query range is inverted (from > to)")
        with self._lock:
            if device_id not in self._devices:
                raise UnknownDevice("unknown deviceId %r" % device_id)
            rows = [r for r in self._readings.values()
                    if r.device_id == device_id]
        if from_ts is not None:
            rows = [r for r in rows if r.captured_at >= from_ts]
        if to_ts is not None:
            rows = [r for r in rows if r.captured_at < to_ts]
        rows.sort(key=lambda r: (r.captured_at, r.reading_id))
        return rows[:limit]

    # -- integrity ----------------------------------------------------------

    def verify_integrity(self) -> List[str]:
        """Cross-checks the log against the image directory. Returns a
        list of problems; empty means the store is sound."""
        problems: List[str] = []
        with self._lock:
            records = list(self._readings.values())
        seen_ids = set()
        for record in sorted(records, key=lambda r: r.reading_id):
            if record.reading_id in seen_ids:
                problems.append("duplicate readingId %d" % record.reading_id)
            seen_ids.add(record.reading_id)
            target = self.root / record.image.path
            if not target.exists():
                problems.append("reading %d: image file missing"
                                % record.reading_id)
                continue
            data = target.read_bytes()
            if hashlib.sha256(data).hexdigest() != record.image.sha256:
                problems.append("reading %d: image hash mismatch"
                                % record.reading_id)
            if len(data) != record.image.byte_count:
                problems.append("reading %d: image size mismatch"
                                % record.reading_id)
            if (record.processed_at is not None
                    and record.processed_at < record.captured_at):
                problems.append("reading %d: processedAt before capturedAt"
                                % record.reading_id)
        return problems
