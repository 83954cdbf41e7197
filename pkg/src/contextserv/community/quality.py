"""Per-provider quality vectors computed from registration data and the monitor log."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from .monitor import InvokeEvent, RateEvent, StateEvent

# cold-start values used when a provider has no relevant history
DEFAULT_TRUSTWORTHINESS = 2.5
DEFAULT_RESPONSE_TIME = 0.0
DEFAULT_RELIABILITY = 1.0
DEFAULT_AVAILABILITY = 1.0
DEFAULT_UP_TO_DATENESS = 0.0

# canonical attribute name -> QualityVector field
ATTRIBUTES = {
    "precision": "precision",
    "trustWorthiness": "trustworthiness",
    "correctnessProbability": "correctness_probability",
    "refreshRate": "refresh_rate",
    "upToDateness": "up_to_dateness",
    "executionPrice": "execution_price",
    "responseTime": "response_time",
    "availability": "availability",
    "reliability": "reliability",
}
NEGATIVE_BY_DEFAULT = frozenset({"executionPrice", "responseTime", "refreshRate"})
_ALIASES = {k.lower(): k for k in ATTRIBUTES}
_ALIASES.update({v.lower(): k for k, v in ATTRIBUTES.items()})
_ALIASES["correctnessprobablity"] = "correctnessProbability"
_ALIASES["uptodateness"] = "upToDateness"
_ALIASES["up-to-dateness"] = "upToDateness"


def canonical_attribute(name: str) -> str:
    try:
        return _ALIASES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown quality attribute {name!r}") from None


@dataclass(frozen=True)
class QualityVector:
    precision: float
    trustworthiness: float
    correctness_probability: float
    refresh_rate: float
    up_to_dateness: float
    execution_price: float
    response_time: float
    availability: float
    reliability: float

    def get(self, attribute: str) -> float:
        return getattr(self, ATTRIBUTES[canonical_attribute(attribute)])

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def _last(seq: list, h: int | None) -> list:
    return seq if h is None else seq[-h:] if h > 0 else []


def up_to_dateness(t_cur: int, t_med: int | None, t_theta: int) -> float:
    if t_med is None:
        return DEFAULT_UP_TO_DATENESS
    age = t_cur - t_med
    if age < t_theta:
        return min(1.0, 1.0 - age / t_theta)
    return 0.0


def available_time(states: list[StateEvent], now: int, theta: int) -> int:
    """Milliseconds spent available during [now - theta, now]."""
    start = now - theta
    status = True  # assume available until told otherwise
    inside = []
    for ev in states:
        if ev.at > now:
            break
        if ev.at <= start:
            status = ev.available
        else:
            inside.append(ev)
    total, cursor = 0, start
    for ev in inside:
        if status:
            total += ev.at - cursor
        cursor, status = ev.at, ev.available
    if status:
        total += now - cursor
    return total


def latest_state(events, now: int) -> bool:
    status = True
    for ev in events:
        if isinstance(ev, StateEvent) and ev.at <= now:
            status = ev.available
    return status


def evaluate_quality(record, events, settings, now: int) -> QualityVector:
    """Aggregate one provider's quality at time ``now``.

    ``settings`` is the provider's CommunityConfig (t_theta, theta,
    history_window, max_expected_ms).  ``events`` must be that provider's log in (at, arrival) order; events
    stamped after ``now`` are ignored.
    """
    h = settings.history_window
    invokes = [e for e in events if isinstance(e, InvokeEvent) and e.at <= now]
    ratings = [e for e in events if isinstance(e, RateEvent) and e.at <= now]
    states = [e for e in events if isinstance(e, StateEvent)]

    window = _last(ratings, h)
    trust = sum(e.rating for e in window) / len(window) if window else DEFAULT_TRUSTWORTHINESS

    recent = _last(invokes, h)
    if recent:
        resp = sum(e.response_ms for e in recent) / len(recent)
        ok = sum(1 for e in recent if e.success and e.response_ms <= settings.max_expected_ms)
        rel = ok / len(recent)
    else:
        resp, rel = DEFAULT_RESPONSE_TIME, DEFAULT_RELIABILITY

    # a failed call returns no context, so only successes date the information
    t_med = next((e.measured_at for e in reversed(invokes) if e.success), None)
    utd = up_to_dateness(now, t_med, settings.t_theta)

    if settings.theta <= 0:
        ava = DEFAULT_AVAILABILITY
    else:
        ava = available_time(states, now, settings.theta) / settings.theta

    return QualityVector(
        precision=float(record.precision),
        trustworthiness=float(trust),
        correctness_probability=float(record.correctness_probability),
        refresh_rate=float(record.refresh_rate),
        up_to_dateness=float(utd),
        execution_price=float(record.execution_price),
        response_time=float(resp),
        availability=float(ava),
        reliability=float(rel),
    )
