"""Plays a rendered corpus against a relay as if it were a field camera.

The camera in mind snaps a chip photo on a fixed cadence and uploads each
one. Logical capture timestamps keep the full cadence spacing; only the
wall-clock wait between uploads is divided by the time-compression
factor, so a 15-minute cadence at 900x compression uploads once a second
while the stored readings still sit 15 minutes apart.
"""

import time
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Callable, List, Optional, Union

import httpx

from ..errors import RelayError
from ..synth import CorpusManifest
from .store import format_rfc3339, utc_now

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY_S = 1.0


@dataclass(frozen=True)
class UploadReport:
    index: int
    reading_id: int
    captured_at: str
    attempts: int
    latency_s: float
    duplicate: bool

    def to_dict(self) -> dict:
        return {"index": self.index, "readingId": self.reading_id,
                "capturedAt": self.captured_at, "attempts": self.attempts,
                "latencyS": self.latency_s, "duplicate": self.duplicate}


@dataclass
class SessionReport:
    device_id: str
    uploads: List[UploadReport] = field(default_factory=list)
    stored: int = 0
    reconciled: bool = False

    def to_dict(self) -> dict:
        return {"deviceId": self.device_id,
                "uploads": [u.to_dict() for u in self.uploads],
                "stored": self.stored,
                "reconciled": self.reconciled}


def _post_with_retry(client, url: str, sleep, **kwargs):
    """3 attempts with 1 s, 2 s backoff. 4xx responses do not retry;
    resending a rejected payload cannot make it acceptable."""
    delay = RETRY_BASE_DELAY_S
    last = None
    for attempt in range(1, RETRY_ATTEMPTS + 1):
        try:
            response = client.post(url, **kwargs)
        except httpx.HTTPError as exc:
            last = exc
        else:
            if response.status_code < 500:
                return response, attempt
            last = RelayError("server answered %d" % response.status_code)
        if attempt < RETRY_ATTEMPTS:
            sleep(delay)
            delay *= 2
    raise RelayError("upload failed after %d attempts: %s"
                     % (RETRY_ATTEMPTS, last))


def simulate_device(manifest: Union[CorpusManifest, str, Path],
                    base_url: str = "http://127.0.0.1:8000",
                    device_id: Optional[str] = None,
                    cadence_s: float = 900.0,
                    time_compression: float = 1.0,
                    token: Optional[str] = None,
                    label: str = "simulated-camera",
                    client: Optional[httpx.Client] = None,
                    sleep: Callable[[float], None] = time.sleep,
                    reconcile_timeout_s: float = 30.0) -> SessionReport:
    """Upload every corpus image in order, then reconcile against the
    server's stored readings."""
    if not isinstance(manifest, CorpusManifest):
        manifest = CorpusManifest.load(manifest)
    if time_compression <= 0:
        raise RelayError("time compression must be positive")

    own_client = client is None
    if own_client:
        client = httpx.Client(base_url=base_url, timeout=10.0)
    headers = {"Authorization": "Bearer %s" % token} if token else {}

    try:
        if device_id is None:
            response, _ = _post_with_retry(
                client, "/api/v1/devices", sleep, headers=headers,
                json={"label": label, "layoutId": "default",
                      "scalesId": "default"})
            if response.status_code != 201:
                raise RelayError("registration rejected: %d %s"
                                 % (response.status_code, response.text))
            device_id = response.json()["deviceId"]

        report = SessionReport(device_id=device_id)
        session_start = utc_now()
        gap_s = cadence_s / time_compression

        for index, case in enumerate(manifest.cases):
            if index > 0:
                sleep(gap_s)
            captured = session_start + timedelta(seconds=index * cadence_s)
            stamp = format_rfc3339(captured)
            data = manifest.image_path(case).read_bytes()
            began = time.monotonic()
            response, attempts = _post_with_retry(
                client, "/api/v1/devices/%s/images" % device_id, sleep,
                content=data,
                headers={**headers, "Content-Type": "image/png",
                         "X-Captured-At": stamp})
            latency = time.monotonic() - began
            if response.status_code != 202:
                raise RelayError("upload %d rejected: %d %s"
                                 % (index, response.status_code,
                                    response.text))
            ack = response.json()
            report.uploads.append(UploadReport(
                index=index, reading_id=ack["readingId"], captured_at=stamp,
                attempts=attempts, latency_s=latency,
                duplicate=bool(ack.get("duplicate"))))

        # Reconciliation: every upload must come back processed.
        wanted = {u.reading_id for u in report.uploads}
        deadline = time.monotonic() + reconcile_timeout_s
        while True:
            response = client.get(
                "/api/v1/devices/%s/readings" % device_id,
                params={"limit": 1000}, headers=headers)
            rows = response.json() if response.status_code == 200 else []
            settled = [r for r in rows if r["readingId"] in wanted
                       and r["status"] != "pending"]
            report.stored = len(settled)
            if report.stored == len(wanted) or time.monotonic() > deadline:
                break
            sleep(0.05)
        report.reconciled = report.stored == len(report.uploads)
        return report
    finally:
        if own_client:
            client.close()
