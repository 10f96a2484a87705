"""Single-turn chat completion with record/replay transcripts.

Every LLM call in the pipeline goes through :class:`LLMGateway`. In ``record``
mode responses are appended to a JSON Lines transcript keyed by a digest of
the request; in ``replay`` mode the transcript is the only backend, so a
pipeline run is fully deterministic and needs no network.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

log = logging.getLogger(__name__)

MODES = ("live", "record", "replay")
ENV_URL = "SPECSVA_LLM_URL"
ENV_KEY = "SPECSVA_LLM_API_KEY"
ENV_MODEL = "SPECSVA_LLM_MODEL"


class GatewayError(RuntimeError):
    pass


class ReplayMiss(GatewayError):
    """The transcript has no response for this request (prompt drift)."""

    def __init__(self, digest: str, request: "ChatRequest"):
        preview = request.user_prompt.strip().splitlines()[0][:80] if request.user_prompt.strip() else ""
        super().__init__(f"no recorded response for request {digest[:12]} ({preview!r})")
        self.digest = digest


class BackendError(GatewayError):
    pass


class TransportError(BackendError):
    """Retryable failure: connection error, timeout, HTTP 408/429 or 5xx."""


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float = 0.7
    max_tokens: int = 2048

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature {self.temperature} outside [0, 2]")
        if not self.system_prompt.strip() or not self.user_prompt.strip():
            raise ValueError("prompts must be non-empty")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_prompt},
            {"role": "user", "content": self.user_prompt},
        ]


def _canonical(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    return "\n".join(line.rstrip() for line in text.split("\n")).rstrip()


def request_digest(req: ChatRequest) -> str:
    """Hash of the canonical (system, user, temperature) triple.

    ``max_tokens`` is left out on purpose so budget tweaks keep recordings valid.
    """
    payload = json.dumps(
        [_canonical(req.system_prompt), _canonical(req.user_prompt), f"{req.temperature:.6g}"],
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Transcript:
    """Ordered ``digest -> response`` entries backed by a JSON Lines file."""

    def __init__(self, path: Optional[os.PathLike] = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                row = json.loads(line)
                digest = row["digest"]
                if digest in self._entries:
                    raise ValueError(f"{self.path}:{lineno}: duplicate digest {digest[:12]}")
                self._entries[digest] = row["response"]

    def __contains__(self, digest: str) -> bool:
        return digest in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, digest: str) -> Optional[str]:
        return self._entries.get(digest)

    def entries(self) -> list[tuple[str, str]]:
        return list(self._entries.items())

    def append(self, digest: str, response: str, request: Optional[ChatRequest] = None) -> str:
        """Store a response unless the digest is already known; return the
        response that is now on record."""
        with self._lock:
            if digest in self._entries:
                return self._entries[digest]
            self._entries[digest] = response
            if self.path is not None:
                row = {"digest": digest, "response": response}
                if request is not None:
                    row["request"] = {
                        "system": request.system_prompt,
                        "user": request.user_prompt,
                        "temperature": request.temperature,
                    }
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
            return response

    def file_digest(self) -> str:
        if self.path is None or not self.path.exists():
            return hashlib.sha256(b"").hexdigest()
        return hashlib.sha256(self.path.read_bytes()).hexdigest()


Backend = Callable[[ChatRequest], str]


class OpenAICompatibleBackend:
    """POSTs to a ``/chat/completions`` style endpoint."""

    def __init__(self, url: str, api_key: str = "", model: str = "gpt-4o", timeout: float = 120.0):
        self.url = url
        self.api_key = api_key
        self.model = model
        self.timeout = timeout

    @classmethod
    def from_env(cls) -> "OpenAICompatibleBackend":
        url = os.environ.get(ENV_URL)
        if not url:
            raise BackendError(f"live mode needs {ENV_URL} to be set")
        return cls(url, os.environ.get(ENV_KEY, ""), os.environ.get(ENV_MODEL, "gpt-4o"))

    def __call__(self, req: ChatRequest) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": req.messages(),
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        try:
            resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code in (408, 429) or resp.status_code >= 500:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        if resp.status_code >= 400:
            # bad key, bad model, bad request: retrying will not help
            raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError) as exc:
            raise BackendError(f"unexpected response shape: {exc}") from exc


class LLMGateway:
    """Thread-safe chat completion front end.

    ``mode`` is ``live`` (backend only), ``record`` (backend, results appended
    to the transcript; requests already on record are answered from it) or
    ``replay`` (transcript only).
    """

    def __init__(
        self,
        backend: Optional[Backend] = None,
        mode: str = "live",
        transcript: Optional[Transcript] = None,
        retries: int = 3,
        backoff: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode == "replay" and transcript is None:
            raise ValueError("replay mode needs a transcript")
        if mode != "replay" and backend is None:
            raise ValueError(f"{mode} mode needs a backend")
        self.backend = backend
        self.mode = mode
        self.transcript = transcript if transcript is not None else Transcript()
        self.retries = retries
        self.backoff = backoff
        self._sleep = sleep
        self._lock = threading.Lock()
        self.calls = 0

    def complete(self, req: ChatRequest) -> str:
        digest = request_digest(req)
        with self._lock:
            self.calls += 1
        if self.mode == "replay":
            text = self.transcript.get(digest)
            if text is None:
                raise ReplayMiss(digest, req)
            return text
        if self.mode == "record" and digest in self.transcript:
            return self.transcript.get(digest)
        text = self._call_backend(req)
        if self.mode == "record":
            text = self.transcript.append(digest, text, req)
        return text

    def _call_backend(self, req: ChatRequest) -> str:
        delay = self.backoff
        for attempt in range(1, self.retries + 1):
            try:
                return self.backend(req)
            except TransportError as exc:
                if attempt == self.retries:
                    raise BackendError(f"backend failed after {attempt} attempts: {exc}") from exc
                log.warning("LLM transport error (attempt %d/%d): %s", attempt, self.retries, exc)
                self._sleep(delay)
                delay *= 2
        raise BackendError("no attempts made")  # retries < 1


def open_gateway(mode: str, transcript_path: Optional[os.PathLike] = None,
                 backend: Optional[Backend] = None) -> LLMGateway:
    """Gateway for CLI use: live/record backends come from the environment."""
    transcript = Transcript(transcript_path) if transcript_path is not None else None
    if mode == "replay":
        if transcript is None or not transcript.path.exists():
            raise GatewayError(f"replay mode needs an existing transcript, got {transcript_path}")
        return LLMGateway(mode="replay", transcript=transcript)
    if backend is None:
        backend = OpenAICompatibleBackend.from_env()
    return LLMGateway(backend, mode=mode, transcript=transcript)
