"""Adjacency providers: an OpenAI-style chat-completions client and two mocks.

Responses are cached on disk keyed by (prompt hash, model id) so a whole
training run can be replayed without touching the network.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

from ..errors import ConfigError
from .parse import RawAdjacency, parse_adjacency, serialize_matrix
from .prompt import PromptBundle

PROVIDER_KINDS = ("http_chat", "mock_uniform", "mock_heuristic")


class ProviderFailure(RuntimeError):
    """A provider could not produce a response. ``category`` is network, protocol or timeout."""

    def __init__(self, category: str, message: str):
        self.category = category
        super().__init__(f"{category}: {message}")


@dataclass
class ProviderConfig:
    kind: str = "mock_uniform"
    base_url: str = ""
    model: str = "local-model"
    temperature: float = 0.0
    max_tokens: int = 512
    timeout: float = 30.0
    retry_count: int = 2
    cache_dir: str = ""

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ConfigError(f"unknown provider kind {self.kind!r}; expected one of {PROVIDER_KINDS}")
        if self.kind == "http_chat" and not self.base_url:
            raise ConfigError("http_chat provider needs a base_url")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.retry_count < 0:
            raise ConfigError("retry_count must be >= 0")

    @property
    def model_id(self) -> str:
        return self.model if self.kind == "http_chat" else self.kind


class HttpChatProvider:
    name = "http_chat"

    def __init__(self, cfg: ProviderConfig, session: requests.Session | None = None):
        self.cfg = cfg
        self.session = session or requests.Session()
        self.calls = 0

    @property
    def url(self) -> str:
        return self.cfg.base_url.rstrip("/") + "/v1/chat/completions"

    def complete(self, bundle: PromptBundle) -> str:
        body = {
            "model": self.cfg.model,
            "messages": bundle.messages(),
            "temperature": self.cfg.temperature,
            "max_tokens": self.cfg.max_tokens,
        }
        self.calls += 1
        try:
            resp = self.session.post(self.url, json=body, timeout=self.cfg.timeout)
        except requests.Timeout as exc:
            raise ProviderFailure("timeout", str(exc)) from exc
        except requests.RequestException as exc:
            raise ProviderFailure("network", str(exc)) from exc
        if not 200 <= resp.status_code < 300:
            raise ProviderFailure("protocol", f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderFailure("protocol", f"malformed response envelope: {exc!r}") from exc
        if not isinstance(content, str):
            raise ProviderFailure("protocol", "message content is not a string")
        return content


def uniform_adjacency(n: int) -> np.ndarray:
    m = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(m, 0.0)
    return m


class MockUniformProvider:
    """Every off-diagonal entry 1/(n-1), zero diagonal."""

    name = "mock_uniform"

    def __init__(self, cfg: ProviderConfig | None = None):
        self.calls = 0

    def complete(self, bundle: PromptBundle) -> str:
        self.calls += 1
        return serialize_matrix(uniform_adjacency(bundle.n))


# base affinity per unordered role pair
ROLE_AFFINITY = {
    frozenset(["speaker", "listener"]): 1.0,
    frozenset(["navigator"]): 1.0,
    frozenset(["pusher"]): 1.0,
    frozenset(["evader"]): 1.0,
}
PROXIMITY_FACTOR = {"close": 1.0, "medium": 0.6, "far": 0.3}
_TEAMMATE = re.compile(r"teammate agent (\d+) at (close|medium|far) range")


class MockHeuristicProvider:
    """Rule-based stand-in for an LLM.

    Weight(i, j) is the role-pair affinity, scaled by how close agent i reports
    agent j to be when its summary mentions j. Deterministic; zero diagonal.
    """

    name = "mock_heuristic"

    def __init__(self, cfg: ProviderConfig | None = None):
        self.calls = 0

    def complete(self, bundle: PromptBundle) -> str:
        self.calls += 1
        n = bundle.n
        m = np.zeros((n, n))
        for i in range(n):
            seen = {}
            if i < len(bundle.summaries):
                seen = {int(j): PROXIMITY_FACTOR[b] for j, b in _TEAMMATE.findall(bundle.summaries[i])}
            for j in range(n):
                if i == j:
                    continue
                pair = frozenset([bundle.roles[i], bundle.roles[j]]) if bundle.roles else frozenset()
                m[i, j] = ROLE_AFFINITY.get(pair, 0.5) * seen.get(j, 1.0)
        return serialize_matrix(m)


def make_provider(cfg: ProviderConfig):
    return {"http_chat": HttpChatProvider, "mock_uniform": MockUniformProvider,
            "mock_heuristic": MockHeuristicProvider}[cfg.kind](cfg)


class ResponseCache:
    """One JSON file per (prompt hash, model id); written via temp file + rename."""

    def __init__(self, directory: str | os.PathLike):
        self.dir = Path(directory)

    def key(self, prompt_hash: str, model: str) -> str:
        return hashlib.sha256(f"{prompt_hash}\0{model}".encode()).hexdigest()

    def path(self, prompt_hash: str, model: str) -> Path:
        return self.dir / f"{self.key(prompt_hash, model)}.json"

    def get(self, prompt_hash: str, model: str) -> str | None:
        try:
            with open(self.path(prompt_hash, model), encoding="utf-8") as fh:
                return json.load(fh)["response_text"]
        except (FileNotFoundError, ValueError, KeyError):
            return None

    def put(self, bundle: PromptBundle, model: str, text: str) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        record = {"prompt": {"system": bundle.system, "user": bundle.user},
                  "response_text": text, "model": model, "timestamp": time.time()}
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(record, fh)
        os.replace(tmp, self.path(bundle.prompt_hash, model))


def request_text(bundle: PromptBundle, cfg: ProviderConfig, provider=None) -> tuple[str, bool]:
    """Raw response text for ``bundle`` and whether it came from the cache."""
    cache = ResponseCache(cfg.cache_dir) if cfg.cache_dir else None
    if cache is not None:
        hit = cache.get(bundle.prompt_hash, cfg.model_id)
        if hit is not None:
            return hit, True
    provider = provider if provider is not None else make_provider(cfg)
    text = provider.complete(bundle)
    if cache is not None:
        cache.put(bundle, cfg.model_id, text)
    return text, False


def query_provider(bundle: PromptBundle, cfg: ProviderConfig, provider=None) -> RawAdjacency:
    """Query (or replay from cache) and parse.

    Raises :class:`ProviderFailure` or :class:`~coordprior.prior.parse.ParseFailure`.
    """
    text, _ = request_text(bundle, cfg, provider)
    raw = parse_adjacency(text, bundle.n)
    raw.provider = cfg.kind
    raw.model = cfg.model_id
    return raw
