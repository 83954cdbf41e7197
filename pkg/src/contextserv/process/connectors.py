"""Service connectors: a seeded in-process endpoint table and a JSON-over-HTTP client.

A connector answers ``invoke(endpoint, operation, payload) -> dict``.  The
payload maps each input variable to its value; the reply maps output
variables (or parts of the output message) to values.
"""

from __future__ import annotations

import copy
import json
import random
import threading
import urllib.error
import urllib.request
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Protocol

from ..errors import ConnectorError


class Connector(Protocol):
    def invoke(self, endpoint: str, operation: str | None, payload: dict) -> dict: ...


@dataclass(frozen=True)
class EndpointSpec:
    name: str
    latency_ms: int = 0
    jitter_ms: int = 0
    fail_rate: float = 0.0
    returns: Mapping[str, Any] = field(default_factory=dict)
    # a live service answering JSON POSTs; overrides ``returns``
    url: str | None = None
    # optional programmatic reply; overrides ``returns`` and ``url``
    responder: Callable[[str | None, dict], dict] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.fail_rate <= 1.0:
            raise ValueError(f"endpoint {self.name}: fail_rate must be in [0, 1]")
        if self.latency_ms < 0 or self.jitter_ms < 0:
            raise ValueError(f"endpoint {self.name}: latency and jitter must be non-negative")


class SimulatedConnector:
    """Endpoint table with seeded latency and fault injection.

    Each endpoint draws from its own RNG stream, so the outcome of a call
    depends only on the seed and how often that endpoint was called before.
    With a ``clock`` exposing ``advance`` the simulated latency moves time.
    """

    def __init__(self, endpoints=(), seed: int = 0, clock=None):
        self.seed = seed
        self.clock = clock
        self._lock = threading.Lock()
        self._endpoints: dict[str, EndpointSpec] = {}
        self._rngs: dict[str, random.Random] = {}
        self.calls: Counter = Counter()
        for spec in endpoints.values() if isinstance(endpoints, Mapping) else endpoints:
            self.add(spec)

    def add(self, spec: EndpointSpec) -> None:
        with self._lock:
            self._endpoints[spec.name] = spec
            self._rngs[spec.name] = random.Random(f"{self.seed}:{spec.name}")

    def __contains__(self, name: str) -> bool:
        return name in self._endpoints

    def invoke(self, endpoint: str, operation: str | None, payload: dict) -> dict:
        with self._lock:
            spec = self._endpoints.get(endpoint)
            if spec is None:
                raise ConnectorError(f"no endpoint named {endpoint!r}")
            rng = self._rngs[endpoint]
            self.calls[endpoint] += 1
            latency = spec.latency_ms + (rng.randint(0, spec.jitter_ms) if spec.jitter_ms else 0)
            failed = spec.fail_rate > 0 and rng.random() < spec.fail_rate
        if self.clock is not None and latency and hasattr(self.clock, "advance"):
            self.clock.advance(latency)
        if failed:
            raise ConnectorError(f"endpoint {endpoint!r} failed (injected fault)")
        if spec.responder is not None:
            return dict(spec.responder(operation, copy.deepcopy(payload)))
        if spec.url is not None:
            return HttpConnector({endpoint: spec.url}).invoke(endpoint, operation, payload)
        return copy.deepcopy(dict(spec.returns))


class HttpConnector:
    """POSTs ``{"operation": ..., "payload": ...}`` as JSON and expects a JSON object back."""

    def __init__(self, urls: Mapping[str, str], timeout_s: float = 5.0):
        self.urls = dict(urls)
        self.timeout_s = timeout_s

    def invoke(self, endpoint: str, operation: str | None, payload: dict) -> dict:
        url = self.urls.get(endpoint)
        if url is None:
            raise ConnectorError(f"no URL configured for endpoint {endpoint!r}")
        body = json.dumps({"operation": operation, "payload": payload}).encode()
        req = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                reply = json.loads(resp.read().decode() or "{}")
        except (urllib.error.URLError, TimeoutError, OSError, ValueError) as exc:
            raise ConnectorError(f"{endpoint}: {exc}") from exc
        if not isinstance(reply, dict):
            raise ConnectorError(f"{endpoint}: reply is not a JSON object")
        return reply
