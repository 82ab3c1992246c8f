"""Model access: requests, clients, prompt pack and per-run call accounting."""

from __future__ import annotations

import threading
import time
from typing import Mapping

from .clients import EchoClient, OpenAICompatClient, ScriptedClient, TranscriptExhausted
from .core import (
    DEFAULT_MAX_OUTPUT_CHARS,
    ROLES,
    BudgetExhausted,
    CallLedger,
    Message,
    ModelClient,
    ModelError,
    ModelReply,
    ModelRequest,
    ProviderRefusal,
    ProviderTimeout,
    RetryPolicy,
    TransportError,
    call,
)
from .prompts import MissingBinding, PromptPack, UnknownRole, default_pack, render_prompt


class Models:
    """Clients by role, one prompt pack and one ledger shared by a run."""

    def __init__(
        self,
        clients: ModelClient | Mapping[str, ModelClient],
        prompts: PromptPack | None = None,
        ledger: CallLedger | None = None,
        retry: RetryPolicy = RetryPolicy(),
        sleep=time.sleep,
        max_output_chars: int = DEFAULT_MAX_OUTPUT_CHARS,
    ):
        if hasattr(clients, "complete"):
            clients = {"default": clients}
        self.clients = dict(clients)
        self.prompts = prompts or default_pack()
        self.ledger = ledger if ledger is not None else CallLedger()
        self.retry = retry
        self.sleep = sleep
        self.max_output_chars = max_output_chars
        self._local = threading.local()

    def client_for(self, role: str) -> ModelClient:
        client = self.clients.get(role) or self.clients.get("default")
        if client is None:
            raise ModelError(f"no client configured for role '{role}'")
        return client

    def call(self, request: ModelRequest) -> ModelReply:
        reply = call(request, self.client_for(request.role_name), self.ledger, self.retry, self.sleep)
        self._local.count = self.thread_calls() + 1
        return reply

    def thread_calls(self) -> int:
        """Successful calls made from the current thread, for per-task accounting."""
        return getattr(self._local, "count", 0)

    def request(
        self,
        role: str,
        prompt_key: str,
        bindings: dict[str, str] | None = None,
        images: tuple[bytes, ...] = (),
        followup: str | None = None,
    ) -> ModelRequest:
        messages = self.prompts.render(prompt_key, bindings)
        if images:
            last = messages[-1]
            messages[-1] = Message(last.speaker, last.text, tuple(images))
        if followup:
            messages.append(Message("user", followup))
        return ModelRequest(role, tuple(messages), self.max_output_chars, prompt_key)

    def ask(self, role, prompt_key, bindings=None, images=(), followup=None) -> ModelReply:
        return self.call(self.request(role, prompt_key, bindings, images, followup))

    def ask_parsed(self, role, prompt_key, bindings, parse, errors, images=(), reprompts: int = 1):
        """Ask and parse the reply; on a parse error re-prompt with the error up to ``reprompts`` times.

        Returns ``parse(reply_text)``; re-raises the last parse error when every attempt fails.
        """
        followup = None
        for attempt in range(reprompts + 1):
            reply = self.ask(role, prompt_key, bindings, images, followup)
            try:
                return parse(reply.text)
            except errors as exc:
                if attempt == reprompts:
                    raise
                followup = self.prompts.render("reprompt", {"error": str(exc), "previous": reply.text})[0].text


__all__ = [
    "BudgetExhausted", "CallLedger", "EchoClient", "Message", "MissingBinding", "ModelClient",
    "ModelError", "ModelReply", "ModelRequest", "Models", "OpenAICompatClient", "PromptPack",
    "ProviderRefusal", "ProviderTimeout", "ROLES", "RetryPolicy", "ScriptedClient",
    "TranscriptExhausted", "TransportError", "UnknownRole", "call", "default_pack", "render_prompt",
]
