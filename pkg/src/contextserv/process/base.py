"""Base process model: business activities, events, parallel gateways and sequence flows.

There are no decision gateways; all decision logic lives in rules woven in
as aspects.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Any

from ..errors import InvalidProcess


class EventKind(enum.Enum):
    START = "Start"
    END = "End"
    FAULT = "Fault"


class GatewayMode(enum.Enum):
    FORK = "Fork"
    JOIN = "Join"


@dataclass(frozen=True)
class BusinessActivity:
    name: str
    operation: str | None = None  # "service.operation"
    endpoint: str | None = None  # None: use the operation's service name
    variable: bool = False  # advisory: marks an adaptation point
    inputs: tuple[str, ...] = ()  # extra process variables sent to the endpoint
    outputs: tuple[str, ...] = ()  # extra process variables taken from the reply

    @property
    def service(self) -> str | None:
        return self.operation.split(".", 1)[0] if self.operation else None

    @property
    def operation_name(self) -> str | None:
        return self.operation.split(".", 1)[1] if self.operation and "." in self.operation else None

    @property
    def resolved_endpoint(self) -> str:
        return self.endpoint or self.service or self.name


@dataclass(frozen=True)
class Event:
    name: str
    kind: EventKind
    # Fault events only: activities whose failures this event catches (empty = any)
    handles: tuple[str, ...] = ()


@dataclass(frozen=True)
class ParallelGateway:
    name: str
    mode: GatewayMode


@dataclass(frozen=True)
class VariableSpec:
    name: str
    type: str = "Text"
    initial: Any = None


@dataclass(frozen=True)
class BaseModel:
    name: str
    activities: tuple[BusinessActivity, ...] = ()
    events: tuple[Event, ...] = ()
    gateways: tuple[ParallelGateway, ...] = ()
    flows: tuple[tuple[str, str], ...] = ()
    variables: tuple[VariableSpec, ...] = ()

    @cached_property
    def objects(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for obj in (*self.activities, *self.events, *self.gateways):
            out.setdefault(obj.name, obj)
        return out

    def activity_names(self) -> list[str]:
        return [a.name for a in self.activities]

    def activity(self, name: str) -> BusinessActivity | None:
        obj = self.objects.get(name)
        return obj if isinstance(obj, BusinessActivity) else None

    @cached_property
    def _succ(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n: [] for n in self.objects}
        for a, b in self.flows:
            out.setdefault(a, []).append(b)
        return out

    @cached_property
    def _pred(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {n: [] for n in self.objects}
        for a, b in self.flows:
            out.setdefault(b, []).append(a)
        return out

    def successors(self, name: str) -> list[str]:
        return self._succ.get(name, [])

    def predecessors(self, name: str) -> list[str]:
        return self._pred.get(name, [])

    @property
    def start(self) -> Event:
        starts = [e for e in self.events if e.kind is EventKind.START]
        if len(starts) != 1:
            raise InvalidProcess(f"process {self.name!r} needs exactly one Start event")
        return starts[0]

    def fault_events(self) -> list[Event]:
        return [e for e in self.events if e.kind is EventKind.FAULT]

    def fault_handler(self, activity: str | None) -> Event | None:
        """The Fault event catching failures of ``activity``: a specific one first, else a catch-all."""
        faults = self.fault_events()
        for e in faults:
            if activity is not None and activity in e.handles:
                return e
        return next((e for e in faults if not e.handles), None)

    def fork_regions(self) -> dict[str, tuple[str, list[list[str]]]]:
        """fork name -> (matching join, objects on each branch, nested regions included)."""
        regions: dict[str, tuple[str, list[list[str]]]] = {}
        for g in self.gateways:
            if g.mode is GatewayMode.FORK:
                regions[g.name] = _region(self, g.name, regions)
        return regions


def _region(base: BaseModel, fork: str, memo: dict) -> tuple[str, list[list[str]]]:
    if fork in memo:
        return memo[fork]
    joins, branches = set(), []
    for first in base.successors(fork):
        branch: list[str] = []
        node = first
        seen = set()
        while True:
            if node in seen:
                raise InvalidProcess(f"cycle through {node!r} in a branch of {fork!r}")
            seen.add(node)
            obj = base.objects.get(node)
            if isinstance(obj, ParallelGateway) and obj.mode is GatewayMode.JOIN:
                joins.add(node)
                break
            if isinstance(obj, ParallelGateway):
                inner_join, inner = _region(base, node, memo)
                branch.append(node)
                branch.extend(n for b in inner for n in b)
                branch.append(inner_join)
                nxt = base.successors(inner_join)
            else:
                if isinstance(obj, Event) and obj.kind is EventKind.END:
                    raise InvalidProcess(f"branch of {fork!r} reaches End {node!r} before a Join")
                branch.append(node)
                nxt = base.successors(node)
            if len(nxt) != 1:
                raise InvalidProcess(f"branch of {fork!r} does not continue to a single object after {node!r}")
            node = nxt[0]
        branches.append(branch)
    if len(joins) != 1:
        raise InvalidProcess(f"branches of fork {fork!r} do not meet at one Join")
    join = joins.pop()
    if len(base.predecessors(join)) != len(branches):
        raise InvalidProcess(f"join {join!r} does not match fork {fork!r}")
    memo[fork] = (join, branches)
    return memo[fork]


def base_problems(base: BaseModel) -> list[str]:
    """Every structural problem of a base model, as messages (empty = well formed)."""
    problems: list[str] = []
    names = [o.name for o in (*base.activities, *base.events, *base.gateways)]
    dupes = sorted({n for n in names if names.count(n) > 1})
    problems.extend(f"flow object {n!r} declared twice" for n in dupes)
    for a, b in base.flows:
        for end in (a, b):
            if end not in base.objects:
                problems.append(f"flow {a} -> {b} references unknown object {end!r}")
    if problems:
        return problems
    starts = [e for e in base.events if e.kind is EventKind.START]
    ends = [e for e in base.events if e.kind is EventKind.END]
    if len(starts) != 1:
        problems.append(f"expected exactly one Start event, found {len(starts)}")
    if not ends:
        problems.append("no End event")
    for name, obj in base.objects.items():
        n_in, n_out = len(base.predecessors(name)), len(base.successors(name))
        if isinstance(obj, Event):
            if obj.kind is EventKind.START and (n_in or n_out != 1):
                problems.append(f"Start {name!r} must have no incoming and one outgoing flow")
            elif obj.kind is EventKind.END and (n_out or not n_in):
                problems.append(f"End {name!r} must have incoming flows and no outgoing flow")
            elif obj.kind is EventKind.FAULT and (n_in or n_out > 1):
                problems.append(f"Fault {name!r} takes no incoming flow and at most one outgoing")
            if obj.kind is EventKind.FAULT:
                for act in obj.handles:
                    if base.activity(act) is None:
                        problems.append(f"Fault {name!r} handles unknown activity {act!r}")
        elif isinstance(obj, BusinessActivity):
            if n_in != 1 or n_out != 1:
                problems.append(f"activity {name!r} must have one incoming and one outgoing flow")
        elif obj.mode is GatewayMode.FORK and (n_in != 1 or n_out < 2):
            problems.append(f"fork {name!r} needs one incoming and at least two outgoing flows")
        elif obj.mode is GatewayMode.JOIN and (n_in < 2 or n_out != 1):
            problems.append(f"join {name!r} needs at least two incoming flows and one outgoing")
    if problems:
        return problems
    roots = [starts[0].name, *(e.name for e in base.fault_events())]
    reached: set[str] = set()
    stack = list(roots)
    while stack:
        n = stack.pop()
        if n not in reached:
            reached.add(n)
            stack.extend(base.successors(n))
    problems.extend(f"{n!r} is unreachable" for n in names if n not in reached)
    if _has_cycle(base):
        problems.append("sequence flows form a cycle")
        return problems
    try:
        regions = base.fork_regions()
    except InvalidProcess as exc:
        problems.append(str(exc))
    else:
        joins = [j for j, _ in regions.values()]
        for g in base.gateways:
            if g.mode is GatewayMode.JOIN and joins.count(g.name) != 1:
                problems.append(f"join {g.name!r} has no matching fork")
    return problems


def _has_cycle(base: BaseModel) -> bool:
    state: dict[str, int] = {}

    def visit(n: str) -> bool:
        state[n] = 1
        for m in base.successors(n):
            if state.get(m) == 1 or (m not in state and visit(m)):
                return True
        state[n] = 2
        return False

    return any(n not in state and visit(n) for n in base.objects)


def check_base(base: BaseModel) -> BaseModel:
    problems = base_problems(base)
    if problems:
        raise InvalidProcess(f"process {base.name!r}: " + "; ".join(problems))
    return base
