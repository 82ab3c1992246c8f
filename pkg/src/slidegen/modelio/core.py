"""Requests, replies, call accounting and the retrying ``call`` entry point."""

from __future__ import annotations

import contextlib
import threading
import time
from collections import Counter
from dataclasses import dataclass
from typing import Protocol

from ..errors import SlidegenError

ROLES = ("summarizer", "captioner", "generator", "code_reviewer", "page_reviewer", "judge", "abbreviator")
VISION_ROLES = frozenset({"captioner", "page_reviewer", "judge"})
DEFAULT_MAX_OUTPUT_CHARS = 40_000


class ModelError(SlidegenError):
    pass


class TransportError(ModelError):
    """Transient infrastructure failure; the only kind of failure that is retried."""


class ProviderTimeout(ModelError):
    pass


class ProviderRefusal(ModelError):
    pass


class BudgetExhausted(ModelError):
    pass


@dataclass(frozen=True)
class Message:
    speaker: str  # "system" | "user"
    text: str
    images: tuple[bytes, ...] = ()

    def __post_init__(self):
        if self.speaker not in ("system", "user"):
            raise ValueError(f"unknown speaker {self.speaker!r}")


@dataclass(frozen=True)
class ModelRequest:
    role_name: str
    messages: tuple[Message, ...]
    max_output_chars: int = DEFAULT_MAX_OUTPUT_CHARS
    prompt_id: str = ""

    def __post_init__(self):
        if self.role_name not in ROLES:
            raise ValueError(f"unknown role {self.role_name!r}")
        object.__setattr__(self, "messages", tuple(self.messages))
        if not self.messages:
            raise ValueError("a request needs at least one message")
        if self.messages[0].speaker != "system":
            raise ValueError("the first message must be the system prompt")
        if self.role_name not in VISION_ROLES and any(m.images for m in self.messages):
            raise ValueError(f"role {self.role_name!r} cannot attach images")
        if self.max_output_chars <= 0:
            raise ValueError("max_output_chars must be positive")


@dataclass(frozen=True)
class ModelReply:
    text: str
    latency_ms: int
    provider_tag: str


class ModelClient(Protocol):
    provider_tag: str

    def complete(self, request: ModelRequest) -> str:
        """Return reply text; raise TransportError for retryable failures."""


class CallLedger:
    """Thread-safe per-run call counters.

    Calls are attributed to the stage opened with :meth:`stage`; outside any
    stage they land in ``"unstaged"``.
    """

    def __init__(self, max_calls: int | None = None):
        self.max_calls = max_calls
        self._lock = threading.Lock()
        self._by_role: Counter[str] = Counter()
        self._by_stage: Counter[str] = Counter()
        self._seconds: Counter[str] = Counter()
        self._trace: list[tuple[str, str, str]] = []
        self._in_flight = 0
        self._stage = "unstaged"

    @contextlib.contextmanager
    def stage(self, name: str):
        with self._lock:
            previous, self._stage = self._stage, name
        t0 = time.perf_counter()
        try:
            yield self
        finally:
            with self._lock:
                self._seconds[name] += time.perf_counter() - t0
                self._stage = previous

    @property
    def current_stage(self) -> str:
        return self._stage

    def acquire(self) -> None:
        with self._lock:
            used = sum(self._by_role.values()) + self._in_flight
            if self.max_calls is not None and used >= self.max_calls:
                raise BudgetExhausted(f"run call cap of {self.max_calls} reached")
            self._in_flight += 1

    def release(self, request: ModelRequest | None = None) -> None:
        with self._lock:
            self._in_flight -= 1
            if request is not None:
                self._by_role[request.role_name] += 1
                self._by_stage[self._stage] += 1
                self._trace.append((self._stage, request.role_name, request.prompt_id))

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._by_role.values())

    def role(self, name: str) -> int:
        with self._lock:
            return self._by_role[name]

    def stage_calls(self, name: str) -> int:
        with self._lock:
            return self._by_stage[name]

    def trace(self) -> list[tuple[str, str, str]]:
        with self._lock:
            return list(self._trace)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "total": sum(self._by_role.values()),
                "by_role": dict(sorted(self._by_role.items())),
                "by_stage": dict(sorted(self._by_stage.items())),
            }

    def seconds(self) -> dict[str, float]:
        with self._lock:
            return {k: round(v, 3) for k, v in sorted(self._seconds.items())}


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    initial_delay: float = 1.0
    factor: float = 2.0

    def delays(self):
        d = self.initial_delay
        for _ in range(self.attempts - 1):
            yield d
            d *= self.factor


def call(
    request: ModelRequest,
    client: ModelClient,
    ledger: CallLedger | None = None,
    retry: RetryPolicy = RetryPolicy(),
    sleep=time.sleep,
) -> ModelReply:
    """Send one logical request, retrying transport failures only.

    The ledger is charged once per successful logical call, however many
    attempts it took.
    """
    ledger = ledger if ledger is not None else CallLedger()
    ledger.acquire()
    ok = False
    try:
        delays = retry.delays()
        t0 = time.perf_counter()
        while True:
            try:
                text = client.complete(request)
                break
            except TransportError as exc:
                delay = next(delays, None)
                if delay is None:
                    raise ProviderTimeout(
                        f"{request.role_name}: gave up after {retry.attempts} attempts: {exc}"
                    ) from exc
                sleep(delay)
        if text is None or not text.strip():
            raise ProviderRefusal(f"{request.role_name}: empty reply")
        ok = True
    finally:
        ledger.release(request if ok else None)
    latency = 0 if getattr(client, "deterministic", False) else int((time.perf_counter() - t0) * 1000)
    return ModelReply(text[: request.max_output_chars], latency, client.provider_tag)
