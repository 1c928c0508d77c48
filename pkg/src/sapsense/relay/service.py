"""Relay service: accepts uploads, runs the pipeline, answers queries.

Ingest is cheap and synchronous (validate, persist, ack); analysis runs
on a small worker pool fed by a queue. process_pending() drains the queue
synchronously instead, which is what tests and one-shot tools want.
"""

import io
import queue
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime
from typing import Dict, List, Optional, Tuple

from PIL import Image

from ..chip import (CHEMICAL_ORDER, ChemicalKind, default_layout,
                    default_scales, scales_by_chemical)
from ..errors import (PayloadTooLarge, PipelineError, SapsenseError,
                      UndecodableImage, UnknownLayout)
from ..imaging import AnalysisConfig, analyze
from ..interpretation import (GRAY_UNUSABLE, Interpretation, ReadingContext,
                              ReportCard, Signal, chemical_info,
                              default_rule_table, summarize)
from .store import (MAX_IMAGE_BYTES, DeviceRecord, ReadingRecord, RelayStore,
                    utc_now)

_ACCEPTED_FORMATS = ("JPEG", "PNG")


@dataclass(frozen=True)
class IngestAck:
    reading_id: int
    status: str
    duplicate: bool

    def to_api(self) -> dict:
        return {"readingId": self.reading_id, "status": self.status,
                "duplicate": self.duplicate}


def _check_decodable(data: bytes) -> None:
    # verify() parses structure without a full pixel decode, so a 10 MiB
    # upload does not get decompressed twice.
    try:
        with Image.open(io.BytesIO(data)) as img:
            fmt = img.format
            img.verify()
    except Exception:
        raise UndecodableImage("payload is not a decodable image")
    if fmt not in _ACCEPTED_FORMATS:
        raise UndecodableImage("unsupported image format %r" % fmt)


def _failure_report(code: str) -> dict:
    gray = tuple(Interpretation(chemical=c, signal=Signal.GRAY,
                                headline=GRAY_UNUSABLE, suggestion="NONE",
                                rationale="analysis failed: %s" % code)
                 for c in CHEMICAL_ORDER)
    return ReportCard(interpretations=gray, overall=Signal.GRAY,
                      headline=GRAY_UNUSABLE).to_dict()


class RelayService:
    """One deployment's worth of relay state."""

    def __init__(self, store: RelayStore,
                 config: AnalysisConfig = AnalysisConfig(),
                 context: Optional[ReadingContext] = None,
                 workers: int = 1):
        self.store = store
        self.config = config
        self.context = context or ReadingContext()
        self.rule_table = default_rule_table()
        self.workers = max(1, int(workers))
        # Named layout/scales definitions a device may register against.
        self.layouts = {"default": default_layout()}
        self.scales = {"default": scales_by_chemical(default_scales())}
        self._queue: "queue.Queue[Optional[int]]" = queue.Queue()
        self._threads: List[threading.Thread] = []
        self._claimed: set = set()
        self._claim_lock = threading.Lock()

    # -- devices ------------------------------------------------------------

    def register_device(self, label: str = "", layout_id: str = "default",
                        scales_id: str = "default") -> DeviceRecord:
        if layout_id not in self.layouts:
            raise UnknownLayout("unknown layoutId %r" % layout_id)
        if scales_id not in self.scales:
            raise UnknownLayout("unknown scalesId %r" % scales_id)
        while True:
            device_id = "dev-" + secrets.token_urlsafe(9)
            try:
                return self.store.register_device(device_id, label,
                                                  layout_id, scales_id)
            except Exception:
                continue  # astronomically unlikely id collision

    def list_devices(self) -> List[DeviceRecord]:
        return self.store.list_devices()

    # -- ingest -------------------------------------------------------------

    def ingest(self, device_id: str, data: bytes,
               captured_at: Optional[datetime] = None) -> IngestAck:
        if len(data) > MAX_IMAGE_BYTES:
            raise PayloadTooLarge("image is %d bytes; cap is %d"
                                  % (len(data), MAX_IMAGE_BYTES))
        self.store.device(device_id)  # raises UnknownDevice first
        _check_decodable(data)
        record, fresh = self.store.accept_upload(
            device_id, data, captured_at or utc_now())
        if fresh and self._threads:
            self._queue.put(record.reading_id)
        return IngestAck(reading_id=record.reading_id, status=record.status,
                         duplicate=not fresh)

    # -- processing ---------------------------------------------------------

    def _claim(self, reading_id: int) -> bool:
        with self._claim_lock:
            record = self.store.reading(reading_id)
            if record is None or record.status != "pending":
                return False
            if reading_id in self._claimed:
                return False
            self._claimed.add(reading_id)
            return True

    def _process(self, reading_id: int) -> bool:
        if not self._claim(reading_id):
            return False
        try:
            record = self.store.reading(reading_id)
            device = self.store.device(record.device_id)
            layout = self.layouts[device.layout_id]
            scale_map = self.scales[device.scales_id]
            try:
                data = self.store.image_bytes(record)
                reading = analyze(data, layout, scale_map, self.config)
                report = summarize(reading, self.context, self.rule_table)
                self.store.record_result(
                    reading_id, ok=True,
                    processed_at=max(utc_now(), record.captured_at),
                    reading=reading.to_dict(), report=report.to_dict())
            except SapsenseError as exc:
                code = type(exc).__name__
                if isinstance(exc, PipelineError):
                    code = "%s:%s" % (code, exc.stage)
                self.store.record_result(
                    reading_id, ok=False,
                    processed_at=max(utc_now(), record.captured_at),
                    error_code=code, report=_failure_report(code))
            return True
        finally:
            with self._claim_lock:
                self._claimed.discard(reading_id)

    def process_pending(self) -> int:
        """Synchronously analyze every pending upload; returns the count."""
        done = 0
        for reading_id in self.store.pending_ids():
            if self._process(reading_id):
                done += 1
        return done

    # -- worker pool --------------------------------------------------------

    def start(self) -> None:
        if self._threads:
            return
        for _ in range(self.workers):
            thread = threading.Thread(target=self._worker_loop, daemon=True)
            thread.start()
            self._threads.append(thread)
        # Anything accepted before a crash is still pending; pick it up.
        for reading_id in self.store.pending_ids():
            self._queue.put(reading_id)

    def _worker_loop(self) -> None:
        while True:
            reading_id = self._queue.get()
            if reading_id is None:
                return
            try:
                self._process(reading_id)
            except Exception:
                pass  # a broken job must not kill the consumer

    def stop(self) -> None:
        for _ in self._threads:
            self._queue.put(None)
        for thread in self._threads:
            thread.join(timeout=30.0)
        self._threads = []

    # -- queries ------------------------------------------------------------

    def query_readings(self, device_id: str,
                       from_ts: Optional[datetime] = None,
                       to_ts: Optional[datetime] = None,
                       limit: Optional[int] = None) -> List[ReadingRecord]:
        return self.store.query_readings(device_id, from_ts, to_ts, limit)

    def get_reading(self, reading_id: int) -> Optional[ReadingRecord]:
        return self.store.reading(reading_id)

    def chemical_page(self, kind_name: str) -> dict:
        """Educational payload for one chemical: identity, scale, rules."""
        kind = ChemicalKind.from_name(kind_name)
        info = chemical_info()[kind.value]
        scale = self.scales["default"][kind]
        rules = [{
            "min": rule.min_value,
            "minInclusive": rule.min_inclusive,
            "max": rule.max_value,
            "maxInclusive": rule.max_inclusive,
            "signal": rule.signal.value,
            "headline": rule.headline,
            "suggestion": rule.suggestion,
        } for rule in self.rule_table.rules_for(kind)]
        modifier = self.rule_table.modifier_for(kind)
        return {
            "kind": kind.value,
            "displayName": info["display_name"],
            "unit": info["unit"],
            "summary": info["summary"],
            "healthyRange": info["healthy_range"],
            "scale": {
                "values": [knot.value for knot in scale.knots],
                "labels": [knot.label for knot in scale.knots],
            },
            "rules": rules,
            "modifier": None if modifier is None else {
                "maxTemperatureC": modifier.max_temperature_c,
                "signalCap": modifier.signal_cap.value,
                "headline": modifier.headline,
                "suggestion": modifier.suggestion,
            },
        }
