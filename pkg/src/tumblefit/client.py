"""HTTP client for the service, in-process by default.

With no server URL the client runs the FastAPI app directly through an ASGI
transport, so the CLI works with zero deployment; pointing it at a remote
base URL sends identical requests over the network.
"""

from __future__ import annotations

import asyncio
from typing import Optional

import httpx

__all__ = ["ServiceClient", "ServiceError"]

_LOCAL_BASE = "http://tumblefit.internal"


class ServiceError(Exception):
    """A request that reached the service but came back as an error.

    `kind` is "data" for rejected input and "numerical" for estimation
    breakdown, mirroring the service's exception mapping.
    """

    def __init__(self, status_code: int, kind: str, message: str, extra: Optional[dict] = None):
        super().__init__(message)
        self.status_code = status_code
        self.kind = kind
        self.extra = extra or {}


def _raise_for_error(response: httpx.Response) -> dict:
    if response.status_code < 400:
        return response.json()
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = None
    if isinstance(detail, dict) and "kind" in detail:
        extra = {k: v for k, v in detail.items() if k not in ("kind", "message")}
        raise ServiceError(response.status_code, detail["kind"], detail["message"], extra)
    if isinstance(detail, list) and detail:
        first = detail[0]
        loc = ".".join(str(p) for p in first.get("loc", []))
        raise ServiceError(response.status_code, "data", f"{loc}: {first.get('msg', 'invalid')}")
    raise ServiceError(response.status_code, "data", response.text[:500])


class ServiceClient:
    """Sync facade over the async app (local) or a remote server."""

    def __init__(self, server: Optional[str] = None, timeout: float = 900.0):
        self.server = server
        self.timeout = timeout
        self._app = None
        if server is None:
            from .service import create_app

            self._app = create_app()

    def _request(self, method: str, path: str, payload: Optional[dict] = None) -> dict:
        if self._app is not None:

            async def go():
                transport = httpx.ASGITransport(app=self._app)
                async with httpx.AsyncClient(
                    transport=transport, base_url=_LOCAL_BASE, timeout=self.timeout
                ) as client:
                    return await client.request(method, path, json=payload)

            response = asyncio.run(go())
        else:
            with httpx.Client(base_url=self.server, timeout=self.timeout) as client:
                response = client.request(method, path, json=payload)
        return _raise_for_error(response)

    def get(self, path: str) -> dict:
        return self._request("GET", path)

    def post(self, path: str, payload: dict) -> dict:
        return self._request("POST", path, payload)
