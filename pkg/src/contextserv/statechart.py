"""Flat statecharts that compute composite context values.

No hierarchy, parallel regions, history or event queues.  Each ``step``
fires at most one transition: the first outgoing transition of the current
state, in declaration order, whose guard holds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .errors import InvalidChart, MissingContext
from .model import ContextConstraint, ContextDefinition, ContextKind, ContextValue, evaluate_constraints
from .rules.functions import DEFAULT_REGISTRY


@dataclass(frozen=True)
class Transition:
    source: str
    guard: tuple[ContextConstraint, ...]  # conjunction
    target: str


@dataclass(frozen=True)
class Statechart:
    name: str
    states: tuple[str, ...]
    initial: str
    transitions: tuple[Transition, ...]
    emission: Mapping[str, Any]

    def outgoing(self, state: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == state]

    def referenced_contexts(self) -> set[str]:
        return {name for t in self.transitions for c in t.guard for name in c.contexts()}


def load_statechart(name, states, initial, transitions, emission) -> Statechart:
    """Build a chart from its parsed parts, enforcing every structural invariant."""
    states = tuple(states)
    if not states:
        raise InvalidChart(f"chart {name!r} declares no states")
    if len(set(states)) != len(states):
        raise InvalidChart(f"chart {name!r} declares a state twice")
    if initial not in states:
        raise InvalidChart(f"chart {name!r}: initial state {initial!r} is not declared")
    seen = set()
    transitions = tuple(transitions)
    for t in transitions:
        for end in (t.source, t.target):
            if end not in states:
                raise InvalidChart(f"chart {name!r}: transition endpoint {end!r} is not a declared state")
        key = (t.source, frozenset(t.guard))
        if key in seen:
            raise InvalidChart(f"chart {name!r}: duplicate transition from {t.source!r} with the same guard")
        seen.add(key)
    emission = dict(emission)
    missing = [s for s in states if s not in emission]
    if missing:
        raise InvalidChart(f"chart {name!r}: no emission for state(s) {', '.join(missing)}")
    extra = set(emission) - set(states)
    if extra:
        raise InvalidChart(f"chart {name!r}: emission for undeclared state(s) {', '.join(sorted(extra))}")
    kinds = {_emit_kind(v) for v in emission.values()}
    if len(kinds) > 1:
        raise InvalidChart(f"chart {name!r}: emissions mix value types")
    return Statechart(name, states, initial, transitions, emission)


def _emit_kind(v) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, int):
        return "int"
    return type(v).__name__


@dataclass(frozen=True)
class ChartInstance:
    chart: Statechart
    current: str
    last_update: int = 0

    @classmethod
    def start(cls, chart: Statechart, now: int = 0) -> "ChartInstance":
        return cls(chart, chart.initial, now)


def step(instance: ChartInstance, env: Mapping, now: int, functions=DEFAULT_REGISTRY) -> ChartInstance:
    outgoing = instance.chart.outgoing(instance.current)
    needed = {name for t in outgoing for c in t.guard for name in c.contexts()}
    absent = sorted(n for n in needed if n not in env)
    if absent:
        raise MissingContext(f"chart {instance.chart.name!r} needs context(s) {', '.join(absent)}")
    for t in outgoing:
        if evaluate_constraints(t.guard, env, functions):
            return replace(instance, current=t.target, last_update=now)
    return replace(instance, last_update=now)


def current_composite_value(instance: ChartInstance, context_name: str | None = None) -> ContextValue:
    return ContextValue(
        context_name or instance.chart.name,
        instance.chart.emission[instance.current],
        instance.last_update,
    )


def dependency_order(contexts: Mapping[str, ContextDefinition]) -> list[str]:
    """Contexts in an order where every child precedes its composite parent.

    Raises InvalidChart on a dependency cycle.
    """
    order: list[str] = []
    state: dict[str, int] = {}

    def visit(name: str, trail: tuple):
        mark = state.get(name)
        if mark == 2:
            return
        if mark == 1:
            raise InvalidChart(f"composite context cycle: {' -> '.join((*trail, name))}")
        state[name] = 1
        ctx = contexts.get(name)
        if ctx is not None and ctx.kind is ContextKind.COMPOSITE:
            for child in ctx.children:
                visit(child, (*trail, name))
        state[name] = 2
        order.append(name)

    for name in contexts:
        visit(name, ())
    return order


@dataclass
class CompositeEvaluator:
    """Owns one ChartInstance per composite context and refreshes them bottom-up."""

    contexts: Mapping[str, ContextDefinition]
    charts: Mapping[str, Statechart]
    instances: dict = field(default_factory=dict)

    def __post_init__(self):
        self.order = dependency_order(self.contexts)

    def instance(self, name: str, now: int = 0) -> ChartInstance:
        if name not in self.instances:
            ctx = self.contexts[name]
            self.instances[name] = ChartInstance.start(self.charts[ctx.chart], now)
        return self.instances[name]

    def evaluate(self, name: str, env: dict, now: int, recurse: bool = True) -> ContextValue:
        """Step the chart of ``name`` (after its composite children) and return its value.

        ``env`` maps context names to values; composite results are written
        back into it so parents see their children's fresh values.  With
        ``recurse=False`` the children's current values in ``env`` are used
        as they are.
        """
        ctx = self.contexts[name]
        for child in ctx.children if recurse else ():
            if self.contexts.get(child) is not None and self.contexts[child].kind is ContextKind.COMPOSITE:
                self.evaluate(child, env, now)
        inst = step(self.instance(name, now), env, now)
        self.instances[name] = inst
        value = current_composite_value(inst, name)
        env[name] = value.value
        return value
