"""Simulated context providers and seeded provider fleets."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any

from .community.broker import CommunityConfig, ProviderRecord
from .community.monitor import StateEvent
from .community.quality import NEGATIVE_BY_DEFAULT, QualityVector
from .community.scoring import AttributeSpec, Polarity
from .errors import ProviderFailure


@dataclass(frozen=True)
class SimulatedProvider:
    """A provider endpoint whose behaviour is a pure function of (seed, id, time)."""

    id: str
    base_response_ms: int = 10
    jitter_ms: int = 0
    availability_schedule: tuple[tuple[int, int, bool], ...] = ()  # (from, to, available), to exclusive
    fail_rate: float = 0.0
    value: Any = 0.0
    value_range: tuple[float, float] | None = None
    staleness_ms: int = 0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fail_rate <= 1.0:
            raise ValueError(f"{self.id}: fail_rate must be in [0, 1]")
        spans = sorted(self.availability_schedule)
        for (a0, a1, _), (b0, _, _) in zip(spans, spans[1:]):
            if b0 < a1:
                raise ValueError(f"{self.id}: availability schedule intervals overlap")
        for f, t, _ in spans:
            if t <= f:
                raise ValueError(f"{self.id}: empty schedule interval {f}-{t}")

    def available_at(self, now: int) -> bool:
        for f, t, avail in self.availability_schedule:
            if f <= now < t:
                return avail
        return True

    def value_at(self, now: int, rng: random.Random | None = None):
        if self.value_range is None:
            return self.value
        rng = rng or random.Random(f"{self.seed}:{self.id}:{now}:v")
        lo, hi = self.value_range
        return round(rng.uniform(lo, hi), 2)

    def fetch(self, now: int) -> tuple[Any, int, int]:
        rng = random.Random(f"{self.seed}:{self.id}:{now}")
        response = self.base_response_ms + (rng.randint(0, self.jitter_ms) if self.jitter_ms else 0)
        if not self.available_at(now):
            raise ProviderFailure(f"provider {self.id!r} is unavailable", 0)
        if self.fail_rate and rng.random() < self.fail_rate:
            raise ProviderFailure(f"provider {self.id!r} failed (injected fault)", response)
        measured = now - (rng.randint(0, self.staleness_ms) if self.staleness_ms else 0)
        return self.value_at(now, rng), measured, response

    def state_events(self) -> list[StateEvent]:
        """State changes implied by the schedule, for seeding a monitor log."""
        out = []
        for f, t, avail in sorted(self.availability_schedule):
            out.append(StateEvent(self.id, f, avail))
            if not avail:
                out.append(StateEvent(self.id, t, True))
        return out


@dataclass
class Fleet:
    config: CommunityConfig
    records: list[ProviderRecord]
    providers: list[SimulatedProvider] = field(default_factory=list)
    qualities: list[tuple[str, QualityVector]] = field(default_factory=list)


DEFAULT_FLEET_ATTRIBUTES = ("executionPrice", "responseTime", "availability", "reliability")


def build_fleet(n: int, seed: int = 0, community: str = "bench", attributes=DEFAULT_FLEET_ATTRIBUTES) -> Fleet:
    """n seeded providers with registration data, simulated endpoints and precomputed quality."""
    if n < 1:
        raise ValueError("a fleet needs at least one provider")
    rng = random.Random(seed)
    specs = tuple(
        AttributeSpec(a, Polarity.NEGATIVE if a in NEGATIVE_BY_DEFAULT else Polarity.POSITIVE, 1.0 / len(attributes))
        for a in attributes
    )
    # make the weights sum to exactly 1 despite rounding
    total = sum(s.weight for s in specs[:-1])
    specs = specs[:-1] + (AttributeSpec(specs[-1].name, specs[-1].polarity, 1.0 - total),)
    config = CommunityConfig(community, f"{community}Context", specs)
    fleet = Fleet(config, [])
    for i in range(n):
        pid = f"{community}-p{i + 1}"
        rec = ProviderRecord(pid, community, precision=round(rng.uniform(0.5, 1.0), 3),
                             correctness_probability=round(rng.uniform(0.5, 1.0), 3),
                             refresh_rate=round(rng.uniform(0.1, 10.0), 3),
                             execution_price=round(rng.uniform(0.0, 20.0), 2))
        sim = SimulatedProvider(pid, base_response_ms=rng.randint(5, 200), jitter_ms=rng.randint(0, 20),
                                value_range=(10.0, 40.0), seed=seed)
        q = QualityVector(rec.precision, round(rng.uniform(0, 5), 2), rec.correctness_probability, rec.refresh_rate,
                          round(rng.uniform(0, 1), 3), rec.execution_price, float(sim.base_response_ms),
                          round(rng.uniform(0.5, 1), 3), round(rng.uniform(0.5, 1), 3))
        fleet.records.append(rec)
        fleet.providers.append(sim)
        fleet.qualities.append((pid, q))
    return fleet
