"""HTTP client for the model-serving wire protocol.

All endpoints exchange UTF-8 JSON. Hidden vectors travel as plain arrays of
IEEE-754 doubles; the serving runtime's internal precision is not assumed.
"""

from __future__ import annotations

import httpx
import numpy as np

from .base import (
    Backend,
    BackendConnectionError,
    BackendError,
    BackendInfo,
    ContextOverflowError,
    NextDistribution,
    ProtocolError,
)

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0


class RemoteBackend(Backend):
    """Client for a server implementing the wire protocol.

    The underlying HTTP client is thread-safe, so one RemoteBackend may serve
    several concurrent decode sessions.
    """

    def __init__(self, endpoint: str, timeout: float = DEFAULT_TIMEOUT):
        self._endpoint = endpoint.rstrip("/")
        self._client = httpx.Client(base_url=self._endpoint, timeout=timeout)
        doc = self._get("/info")
        version = doc.get("protocol_version")
        if version != PROTOCOL_VERSION:
            raise ProtocolError(
                f"server at {self._endpoint} speaks protocol {version}, expected {PROTOCOL_VERSION}"
            )
        try:
            self._info = BackendInfo(
                vocab_size=int(doc["vocab_size"]),
                hidden_dim=int(doc["hidden_dim"]),
                eos_id=int(doc["eos_id"]),
                max_context=int(doc["max_context"]),
                name=str(doc["name"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed /info response: {doc!r}") from exc

    @property
    def endpoint(self) -> str:
        return self._endpoint

    def close(self) -> None:
        self._client.close()

    def backend_info(self) -> BackendInfo:
        return self._info

    def tokenize(self, text: str) -> list[int]:
        doc = self._post("/tokenize", {"text": text})
        return [int(i) for i in self._field(doc, "ids")]

    def detokenize(self, ids: list[int]) -> str:
        doc = self._post("/detokenize", {"ids": list(ids)})
        return str(self._field(doc, "text"))

    def next_distribution(self, tokens: list[int], top_m: int) -> NextDistribution:
        doc = self._post("/next", {"ids": list(tokens), "top_m": int(top_m)})
        try:
            entries = tuple(
                (int(item["id"]), float(item["prob"])) for item in self._field(doc, "top")
            )
            return NextDistribution(
                entries=entries, truncation_mass=float(self._field(doc, "truncation_mass"))
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed /next response: {exc}") from exc

    def context_hiddens(self, tokens: list[int]) -> np.ndarray:
        doc = self._post("/context_hiddens", {"ids": list(tokens)})
        return self._parse_hiddens(doc, expected_rows=len(tokens))

    def candidate_hiddens(self, prefix: list[int], candidates: list[int]) -> np.ndarray:
        doc = self._post(
            "/candidate_hiddens", {"ids": list(prefix), "candidates": list(candidates)}
        )
        return self._parse_hiddens(doc, expected_rows=len(candidates))

    def _parse_hiddens(self, doc: dict, expected_rows: int) -> np.ndarray:
        try:
            arr = np.asarray(self._field(doc, "hiddens"), dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise ProtocolError(f"malformed hiddens payload: {exc}") from exc
        if arr.shape != (expected_rows, self._info.hidden_dim):
            raise ProtocolError(
                f"hiddens shape {arr.shape} != ({expected_rows}, {self._info.hidden_dim})"
            )
        return arr

    @staticmethod
    def _field(doc: dict, key: str):
        if key not in doc:
            raise ProtocolError(f"response missing field {key!r}: {doc!r}")
        return doc[key]

    def _get(self, path: str) -> dict:
        try:
            resp = self._client.get(path)
        except httpx.HTTPError as exc:
            raise BackendConnectionError(f"cannot reach {self._endpoint}{path}: {exc}") from exc
        return self._decode_response(resp, path)

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = self._client.post(path, json=body)
        except httpx.HTTPError as exc:
            raise BackendConnectionError(f"cannot reach {self._endpoint}{path}: {exc}") from exc
        return self._decode_response(resp, path)

    def _decode_response(self, resp: httpx.Response, path: str) -> dict:
        if resp.status_code == 200:
            try:
                doc = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"non-JSON response from {path}") from exc
            if not isinstance(doc, dict):
                raise ProtocolError(f"unexpected response shape from {path}: {doc!r}")
            return doc
        message = self._error_message(resp)
        if resp.status_code == 413:
            raise ContextOverflowError(f"{path}: {message}")
        if resp.status_code == 400:
            raise BackendError(f"{path}: {message}")
        raise BackendError(f"{path}: server error {resp.status_code}: {message}")

    @staticmethod
    def _error_message(resp: httpx.Response) -> str:
        try:
            doc = resp.json()
            if isinstance(doc, dict) and "error" in doc:
                return str(doc["error"])
        except ValueError:
            pass
        return resp.text[:200]


def connect_remote(endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> RemoteBackend:
    """Open a client for the server at ``endpoint`` and fetch its /info."""
    return RemoteBackend(endpoint, timeout=timeout)
