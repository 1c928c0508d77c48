"""Ingestion relay: accepts device uploads, analyzes them, serves readings."""

from .store import DeviceRecord, ImageRef, ReadingRecord, RelayStore
from .service import IngestAck, RelayService
from .api import create_app
from .simulator import SessionReport, UploadReport, simulate_device

__all__ = [
    "DeviceRecord",
    "ImageRef",
    "IngestAck",
    "ReadingRecord",
    "RelayService",
    "RelayStore",
    "SessionReport",
    "UploadReport",
    "create_app",
    "simulate_device",
]
