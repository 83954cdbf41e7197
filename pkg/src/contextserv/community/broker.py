"""Context service communities: provider registry, quality-scored selection and retrieval."""

from __future__ import annotations

import enum
import os
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

from ..clock import SystemClock
from ..errors import (
    DuplicateProvider,
    InvalidProvider,
    NoEligibleProvider,
    ProviderFailure,
    RetrievalFailed,
    UnknownCommunity,
    UnknownProvider,
)
from ..model import ContextValue
from .monitor import InvokeEvent, MonitorEvent, MonitorLog
from .quality import QualityVector, canonical_attribute, evaluate_quality, latest_state
from .scoring import AttributeSpec, SelectionResult, ValueMatrix, check_weights, select_from_matrix

LOG_DIR_ENV = "CONTEXTSERV_LOG_DIR"
DEFAULT_MAX_EXPECTED_MS = 2000


@dataclass(frozen=True)
class ProviderRecord:
    id: str
    community: str
    precision: float
    correctness_probability: float
    refresh_rate: float
    execution_price: float
    endpoint: str | None = None

    def __post_init__(self):
        if not self.id or any(ch.isspace() for ch in self.id):
            raise InvalidProvider(f"bad provider id {self.id!r}")
        if not 0.0 <= self.correctness_probability <= 1.0:
            raise InvalidProvider(f"{self.id}: correctnessProbability {self.correctness_probability} outside [0, 1]")
        if not self.refresh_rate > 0:
            raise InvalidProvider(f"{self.id}: refreshRate must be positive")
        if self.execution_price < 0:
            raise InvalidProvider(f"{self.id}: executionPrice must not be negative")


class BoundKind(enum.Enum):
    MAX = "Max"  # value <= bound
    MIN = "Min"  # value >= bound


@dataclass(frozen=True)
class SelectionConstraint:
    attribute: str
    bound_kind: BoundKind
    bound: float

    def __post_init__(self):
        canonical_attribute(self.attribute)

    def satisfied_by(self, q: QualityVector) -> bool:
        v = q.get(self.attribute)
        return v <= self.bound if self.bound_kind is BoundKind.MAX else v >= self.bound

    @classmethod
    def parse(cls, text: str) -> "SelectionConstraint":
        """``attr:max:v`` or ``attr:min:v``."""
        try:
            attr, kind, bound = text.split(":")
            return cls(attr, BoundKind(kind.capitalize()), float(bound))
        except ValueError as exc:
            raise ValueError(f"bad constraint {text!r}; expected attr:max:v or attr:min:v") from exc


@dataclass(frozen=True)
class CommunityConfig:
    id: str
    context_name: str
    attributes: tuple[AttributeSpec, ...]
    t_theta: int = 60_000
    theta: int = 60_000
    history_window: int | None = None  # None = whole history
    max_expected_ms: int = DEFAULT_MAX_EXPECTED_MS
    timeout_ms: int | None = None
    constraints: tuple[SelectionConstraint, ...] = ()

    def __post_init__(self):
        for spec in self.attributes:
            canonical_attribute(spec.name)
        names = [canonical_attribute(s.name) for s in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError(f"community {self.id}: attribute listed twice")
        check_weights([s.weight for s in self.attributes])
        if self.t_theta <= 0 or self.theta <= 0:
            raise ValueError(f"community {self.id}: t_theta and theta must be positive")
        if self.history_window is not None and self.history_window < 1:
            raise ValueError(f"community {self.id}: history window must be at least 1")


class ProviderEndpoint(Protocol):
    def fetch(self, now: int) -> tuple[Any, int, int]:
        """Return (value, measured_at_ms, response_ms) or raise ProviderFailure."""
        ...


def rank_qualities(config: CommunityConfig, qualities, constraints=(), available=None) -> SelectionResult:
    """Filter, score and rank providers from already computed quality vectors.

    ``qualities`` is a sequence of (provider_id, QualityVector) in
    registration order.
    """
    eligible = [(pid, q) for pid, q in qualities if all(c.satisfied_by(q) for c in constraints)]
    if not eligible:
        raise NoEligibleProvider(f"no provider of {config.id} satisfies the constraints")
    cols = tuple(s.name for s in config.attributes)
    fields = [canonical_attribute(c) for c in cols]
    rows = [[q.get(f) for f in fields] for _, q in eligible]
    matrix = ValueMatrix.from_rows([pid for pid, _ in eligible], cols, rows)
    return select_from_matrix(matrix, config.attributes, available)


@dataclass
class _Member:
    record: ProviderRecord
    endpoint: Any = None


@dataclass
class _Community:
    config: CommunityConfig
    members: dict[str, _Member] = field(default_factory=dict)  # insertion = registration order


class CommunityBroker:
    """Registry of communities with monitoring-driven selection.

    Mutations take an exclusive lock; a selection copies membership and the
    relevant log entries under the same lock and scores outside it.
    """

    def __init__(self, clock=None, log: MonitorLog | None = None, log_dir: str | Path | None = None):
        self.clock = clock or SystemClock()
        if log is None:
            log_dir = log_dir or os.environ.get(LOG_DIR_ENV)
            path = None
            if log_dir:
                Path(log_dir).mkdir(parents=True, exist_ok=True)
                path = Path(log_dir) / "monitor.log"
            log = MonitorLog(path)
        self.log = log
        self._lock = threading.RLock()
        self._communities: dict[str, _Community] = {}
        self._known: set[str] = set()

    # registry
    def add_community(self, config: CommunityConfig) -> None:
        with self._lock:
            if config.id in self._communities:
                raise ValueError(f"community {config.id!r} already exists")
            self._communities[config.id] = _Community(config)

    def community(self, community_id: str) -> CommunityConfig:
        return self._get(community_id).config

    def communities(self) -> list[str]:
        with self._lock:
            return list(self._communities)

    def _get(self, community_id: str) -> _Community:
        try:
            return self._communities[community_id]
        except KeyError:
            raise UnknownCommunity(f"unknown community {community_id!r}") from None

    def add_context_source(self, community_id: str, record: ProviderRecord, endpoint=None) -> int:
        """Register a provider; returns the community size afterwards."""
        with self._lock:
            com = self._get(community_id)
            if record.id in com.members:
                raise DuplicateProvider(f"provider {record.id!r} already in {community_id!r}")
            com.members[record.id] = _Member(record, endpoint)
            self._known.add(record.id)
            return len(com.members)

    def remove_context_source(self, community_id: str, provider_id: str) -> int:
        with self._lock:
            com = self._get(community_id)
            if provider_id not in com.members:
                raise UnknownProvider(f"provider {provider_id!r} is not in {community_id!r}")
            del com.members[provider_id]  # monitor history stays in the log
            return len(com.members)

    def set_endpoint(self, community_id: str, provider_id: str, endpoint) -> None:
        with self._lock:
            com = self._get(community_id)
            if provider_id not in com.members:
                raise UnknownProvider(f"provider {provider_id!r} is not in {community_id!r}")
            com.members[provider_id].endpoint = endpoint

    def providers(self, community_id: str) -> list[ProviderRecord]:
        with self._lock:
            return [m.record for m in self._get(community_id).members.values()]

    def _find(self, provider_id: str) -> tuple[_Community, _Member]:
        for com in self._communities.values():
            if provider_id in com.members:
                return com, com.members[provider_id]
        raise UnknownProvider(f"unknown provider {provider_id!r}")

    # monitoring
    def record_event(self, event: MonitorEvent) -> MonitorEvent:
        with self._lock:
            if event.provider_id not in self._known:
                raise UnknownProvider(f"event for unknown provider {event.provider_id!r}")
            return self.log.append(event)

    def _now(self, now):
        return self.clock.now_ms() if now is None else now

    def evaluate_quality(self, provider_id: str, now: int | None = None) -> QualityVector:
        with self._lock:
            com, member = self._find(provider_id)
            events = self.log.events_for(provider_id)
        return evaluate_quality(member.record, events, com.config, self._now(now))

    # selection
    def _snapshot(self, community_id: str):
        with self._lock:
            com = self._get(community_id)
            records = [m.record for m in com.members.values()]
            endpoints = {pid: m.endpoint for pid, m in com.members.items()}
            events = self.log.snapshot([r.id for r in records])
            return com.config, records, endpoints, events

    def select_context_source(self, community_id: str, constraints=None, now: int | None = None) -> SelectionResult:
        """Rank the community's providers; ``constraints=None`` uses the community defaults."""
        config, records, _, events = self._snapshot(community_id)
        now = self._now(now)
        if constraints is None:
            constraints = config.constraints
        if not records:
            raise NoEligibleProvider(f"community {community_id!r} has no providers")
        qualities = [(r.id, evaluate_quality(r, events[r.id], config, now)) for r in records]
        available = {r.id: latest_state(events[r.id], now) for r in records}
        return rank_qualities(config, qualities, constraints, available)

    def retrieve_context(self, community_id: str, now: int | None = None) -> ContextValue:
        """Fetch the community's context from the best provider, falling back down the ranking."""
        config, _, endpoints, events = self._snapshot(community_id)
        now = self._now(now)
        try:
            ranked = self.select_context_source(community_id, None, now).ranked
        except NoEligibleProvider as exc:
            raise RetrievalFailed(f"{community_id}: {exc}") from exc
        errors = []
        for pid, _ in ranked:
            if not latest_state(events.get(pid, ()), now):
                continue
            try:
                return self._attempt(config, pid, endpoints.get(pid), now)
            except ProviderFailure as exc:
                errors.append(str(exc))
        raise RetrievalFailed(f"{community_id}: every provider failed ({'; '.join(errors) or 'none available'})")

    def retrieve_from(self, provider_id: str, now: int | None = None) -> ContextValue:
        """Fetch directly from one provider (a context sourced from a single service)."""
        with self._lock:
            com, member = self._find(provider_id)
            config, endpoint = com.config, member.endpoint
        try:
            return self._attempt(config, provider_id, endpoint, self._now(now))
        except ProviderFailure as exc:
            raise RetrievalFailed(str(exc)) from exc

    def _attempt(self, config: CommunityConfig, pid: str, endpoint, now: int) -> ContextValue:
        """One logged invocation; raises ProviderFailure after recording the failed Invoke."""
        try:
            if endpoint is None:
                raise ProviderFailure(f"provider {pid!r} has no endpoint")
            value, measured_at, response_ms = endpoint.fetch(now)
            if config.timeout_ms is not None and response_ms > config.timeout_ms:
                raise ProviderFailure(f"provider {pid!r} timed out after {response_ms} ms", response_ms)
        except ProviderFailure as exc:
            self.record_event(InvokeEvent(pid, now, int(exc.response_ms), False, now))
            raise
        self.record_event(InvokeEvent(pid, now, int(response_ms), True, int(measured_at)))
        return ContextValue(config.context_name, value, int(measured_at), pid)
