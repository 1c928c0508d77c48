"""HTTP surface over RelayService.

Thin by design: routes validate transport-level concerns (auth, size,
headers) and delegate everything else. Error classes map one-to-one onto
status codes so clients can branch without parsing messages.
"""

from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from ..errors import (InvalidRange, PayloadTooLarge, UndecodableImage,
                      UnknownChemical, UnknownDevice, UnknownLayout)
from .service import RelayService
from .store import MAX_IMAGE_BYTES, parse_rfc3339

_STATUS_FOR = {
    UnknownDevice: 404,
    UnknownChemical: 404,
    UnknownLayout: 400,
    InvalidRange: 400,
    UndecodableImage: 400,
    PayloadTooLarge: 413,
}


class DeviceRegistration(BaseModel):
    label: str = ""
    layoutId: str = "default"
    scalesId: str = "default"


def create_app(service: RelayService,
               auth_token: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="guttation relay", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def bearer_auth(request: Request, call_next):
        if auth_token and request.url.path != "/healthz":
            supplied = request.headers.get("authorization", "")
            if supplied != "Bearer %s" % auth_token:
                return JSONResponse({"detail": "missing or wrong token"},
                                    status_code=401)
        return await call_next(request)

    for exc_type, status in _STATUS_FOR.items():
        def _handler(request, exc, status=status):
            return JSONResponse({"detail": str(exc)}, status_code=status)
        app.add_exception_handler(exc_type, _handler)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/api/v1/devices", status_code=201)
    def register_device(body: DeviceRegistration):
        device = service.register_device(body.label, body.layoutId,
                                         body.scalesId)
        return {"deviceId": device.device_id}

    @app.get("/api/v1/devices")
    def list_devices():
        return [d.to_api() for d in service.list_devices()]

    @app.post("/api/v1/devices/{device_id}/images", status_code=202)
    async def upload_image(device_id: str, request: Request):
        content_type = request.headers.get("content-type", "")
        if content_type and not content_type.startswith("image/"):
            return JSONResponse(
                {"detail": "expected image/jpeg or image/png"},
                status_code=415)
        data = await request.body()
        if len(data) > MAX_IMAGE_BYTES:
            raise PayloadTooLarge("image is %d bytes; cap is %d"
                                  % (len(data), MAX_IMAGE_BYTES))
        header = request.headers.get("x-captured-at")
        captured_at = parse_rfc3339(header) if header else None
        ack = service.ingest(device_id, data, captured_at)
        return ack.to_api()

    @app.get("/api/v1/devices/{device_id}/readings")
    def list_readings(device_id: str, request: Request, limit: int = 100):
        # "from" is a keyword, so both range bounds come off the raw query.
        raw_from = request.query_params.get("from")
        raw_to = request.query_params.get("to")
        from_ts = parse_rfc3339(raw_from) if raw_from else None
        to_ts = parse_rfc3339(raw_to) if raw_to else None
        records = service.query_readings(device_id, from_ts, to_ts, limit)
        return [r.to_api() for r in records]

    @app.get("/api/v1/readings/{reading_id}")
    def get_reading(reading_id: int):
        record = service.get_reading(reading_id)
        if record is None:
            return JSONResponse({"detail": "no such reading"},
                                status_code=404)
        return record.to_api(include_diagnostics=True)

    @app.get("/api/v1/chemicals/{kind}")
    def get_chemical(kind: str):
        return service.chemical_page(kind)

    return app
