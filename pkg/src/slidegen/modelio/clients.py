"""Model clients: scripted mock, echo, and OpenAI-compatible HTTP."""

from __future__ import annotations

import base64
import json
import os
import threading
from collections import defaultdict
from pathlib import Path

import httpx

from .core import ModelError, ModelRequest, ProviderRefusal, TransportError


class TranscriptExhausted(ModelError):
    pass


class ScriptedClient:
    """Replays replies from a transcript keyed by (role, occurrence index).

    Each record is ``{"role": ..., "index": n, "text": ...}``. ``"index": "*"``
    is a fallback for any occurrence without its own record. An optional
    ``"transient_failures": k`` makes the first k attempts of that occurrence
    raise :class:`TransportError`.
    """

    provider_tag = "mock"
    deterministic = True

    def __init__(self, records):
        self._script: dict[tuple[str, object], dict] = {}
        for rec in records:
            key = (rec["role"], rec["index"] if rec["index"] == "*" else int(rec["index"]))
            if key in self._script:
                raise ValueError(f"duplicate transcript record for {key}")
            self._script[key] = rec
        self._next: dict[str, int] = defaultdict(int)
        self._failures = {k: int(r.get("transient_failures", 0)) for k, r in self._script.items()}
        self._lock = threading.Lock()
        self.requests: list[ModelRequest] = []

    @classmethod
    def from_jsonl(cls, path) -> "ScriptedClient":
        records = []
        for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
            if line.strip():
                try:
                    records.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{n}: invalid JSON: {exc}") from None
        return cls(records)

    def complete(self, request: ModelRequest) -> str:
        role = request.role_name
        with self._lock:
            idx = self._next[role]
            key = (role, idx) if (role, idx) in self._script else (role, "*")
            rec = self._script.get(key)
            if rec is None:
                raise TranscriptExhausted(f"transcript has no reply for {role} #{idx}")
            if self._failures[key] > 0:
                self._failures[key] -= 1
                raise TransportError(f"scripted transport failure for {role} #{idx}")
            self._next[role] += 1
            self.requests.append(request)
        if rec.get("refuse"):
            raise ProviderRefusal(f"{role}: scripted refusal")
        return rec["text"]

    def calls(self, role: str) -> int:
        return self._next[role]


class EchoClient:
    """Replies with the text of the request's last message."""

    provider_tag = "echo"
    deterministic = True

    def complete(self, request: ModelRequest) -> str:
        return request.messages[-1].text


def _sniff_mime(data: bytes) -> str:
    if data.startswith(b"\x89PNG"):
        return "image/png"
    if data.startswith(b"\xff\xd8"):
        return "image/jpeg"
    return "application/octet-stream"


class OpenAICompatClient:
    """Chat-completions client for any OpenAI-compatible endpoint.

    Images are sent inline as base64 data URLs.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        timeout: float = 120.0,
        temperature: float = 0.2,
        transport: httpx.BaseTransport | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.temperature = temperature
        self.provider_tag = f"openai-compat:{model}"
        self._http = httpx.Client(timeout=timeout, transport=transport)

    @staticmethod
    def encode_messages(request: ModelRequest) -> list[dict]:
        out = []
        for m in request.messages:
            if not m.images:
                out.append({"role": m.speaker, "content": m.text})
                continue
            parts = [{"type": "text", "text": m.text}]
            for img in m.images:
                url = f"data:{_sniff_mime(img)};base64,{base64.b64encode(img).decode('ascii')}"
                parts.append({"type": "image_url", "image_url": {"url": url}})
            out.append({"role": m.speaker, "content": parts})
        return out

    def complete(self, request: ModelRequest) -> str:
        payload = {
            "model": self.model,
            "messages": self.encode_messages(request),
            "temperature": self.temperature,
            # Rough chars-per-token ratio; the reply is truncated to max_output_chars anyway.
            "max_tokens": max(16, request.max_output_chars // 3),
        }
        headers = {}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._http.post(f"{self.base_url}/chat/completions", json=payload, headers=headers)
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ModelError(f"HTTP {resp.status_code}: {resp.text[:300]}")
        try:
            choice = resp.json()["choices"][0]
        except (ValueError, KeyError, IndexError) as exc:
            raise TransportError(f"malformed response body: {exc}") from exc
        if choice.get("finish_reason") == "content_filter":
            raise ProviderRefusal(f"{request.role_name}: blocked by provider policy")
        return (choice.get("message") or {}).get("content") or ""
