"""A morning in the field, compressed: camera uploads every 15 minutes,
relay analyzes each photo, grower checks the dashboard feed afterwards.

Runs a real HTTP server on a spare local port, so what you see here is
byte-for-byte what a deployed relay would serve.
"""

import socket
import tempfile
import threading
import time
from dataclasses import replace
from pathlib import Path

import httpx
import uvicorn

from sapsense.relay import RelayService, RelayStore, create_app, simulate_device
from sapsense.synth import CorpusSpec, generate_corpus

workdir = Path(tempfile.mkdtemp(prefix="field-session-"))
print("working under", workdir)

# eight chips' worth of synthetic guttation, some of them dry
spec = replace(CorpusSpec.perturbed(count=8, seed=11), unreacted_fraction=0.4)
manifest = generate_corpus(spec, workdir / "corpus")
print("rendered %d chips" % len(manifest))

probe = socket.socket()
probe.bind(("127.0.0.1", 0))
port = probe.getsockname()[1]
probe.close()

service = RelayService(RelayStore(workdir / "relay"))
service.start()
server = uvicorn.Server(uvicorn.Config(create_app(service), host="127.0.0.1",
                                       port=port, log_level="warning"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()

base = "http://127.0.0.1:%d" % port
for _ in range(100):
    try:
        httpx.get(base + "/healthz", timeout=0.5)
        break
    except httpx.HTTPError:
        time.sleep(0.05)

try:
    # 15-minute cadence, played back 900x faster
    report = simulate_device(manifest, base_url=base, cadence_s=900.0,
                             time_compression=900.0, label="demo-camera")
    print("device %s uploaded %d, relay confirmed %d"
          % (report.device_id, len(report.uploads), report.stored))

    rows = httpx.get(base + "/api/v1/devices/%s/readings" % report.device_id,
                     params={"limit": 100}, timeout=5.0).json()
    print()
    print("%-22s %-8s %-7s %s" % ("captured", "status", "signal", "headline"))
    for row in rows:
        report_card = row.get("report") or {}
        print("%-22s %-8s %-7s %s"
              % (row["capturedAt"][:19], row["status"],
                 report_card.get("overall", "-"),
                 report_card.get("headline") or ""))

    page = httpx.get(base + "/api/v1/chemicals/nitrate", timeout=5.0).json()
    print()
    print("chemical page: %s (%s), healthy %s"
          % (page["displayName"], page["unit"], page["healthyRange"]))
finally:
    server.should_exit = True
    thread.join(timeout=10.0)
    service.stop()
