"""Executable process IR and its line-oriented file format.

File layout, one record per line (JSON objects are compact, keys sorted)::

    IR <process-name> <switch|aspect>
    NODE <id> <kind> <json-attrs>
    EDGE <from-id> <to-id>
    RULE <json-string of the printed rule>

Node ids contain no whitespace.  Records appear in IR order, so writing a
parsed file reproduces it byte for byte.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Union

from ..errors import ParseError
from ..model import ContextConstraint, ContextRef
from ..rules import ast as A
from ..rules.parser import parse_actions, parse_rule
from ..rules.printer import pretty_print, print_actions
from ..weave import Aspect, AspectKind, Position


class Mode(enum.Enum):
    SWITCH = "switch"
    ASPECT = "aspect"


class InvokeKind(enum.Enum):
    OPERATION = "operation"  # a business activity calling an endpoint
    CONTEXT = "context"  # atomic context retrieval (community or provider)
    COMPOSITE = "composite"  # statechart evaluation of a composite context
    ACTION = "action"  # trigger actions run inline in a switch branch


@dataclass(frozen=True)
class ProcessRoot:
    id: str
    name: str
    service: str


@dataclass(frozen=True)
class VariableDecl:
    id: str
    name: str
    type: str
    initial: Any = None


@dataclass(frozen=True)
class InvokeNode:
    id: str
    kind: InvokeKind
    target: str  # endpoint, context name or chart name
    activity: str | None = None
    operation: str | None = None
    in_vars: tuple[str, ...] = ()
    out_vars: tuple[str, ...] = ()
    actions: tuple = ()  # ACTION kind only
    source: str | None = None  # CONTEXT kind: "Community:<id>" or "Service:<provider>"
    detached: bool = False  # emitted for totality only, never on a control path


@dataclass(frozen=True)
class AssignNode:
    id: str
    source: str  # context name
    target: str  # message variable
    part: str
    part_type: str


@dataclass(frozen=True)
class SwitchNode:
    id: str
    cases: tuple[tuple[tuple[ContextConstraint, ...], str], ...]  # (conjunction, branch entry)
    default: str | None = None  # None: fall through to the plain successor


@dataclass(frozen=True)
class AspectPoint:
    id: str
    target: str
    position: Position
    aspects: tuple[Aspect, ...]


@dataclass(frozen=True)
class EventNode:
    id: str
    kind: str  # Start | End | Fault
    handles: tuple[str, ...] = ()


@dataclass(frozen=True)
class GatewayNode:
    id: str
    mode: str  # Fork | Join


IRNode = Union[ProcessRoot, VariableDecl, InvokeNode, AssignNode, SwitchNode, AspectPoint, EventNode, GatewayNode]

KIND_NAMES = {
    ProcessRoot: "ProcessRoot",
    VariableDecl: "VariableDecl",
    InvokeNode: "InvokeNode",
    AssignNode: "AssignNode",
    SwitchNode: "SwitchNode",
    AspectPoint: "AspectPoint",
    EventNode: "Event",
    GatewayNode: "Gateway",
}
_BY_NAME = {v: k for k, v in KIND_NAMES.items()}


@dataclass(frozen=True)
class ExecutableProcess:
    name: str
    mode: Mode
    nodes: tuple[IRNode, ...]
    edges: tuple[tuple[str, str], ...]
    rules: tuple[A.RuleAst, ...] = ()
    # audit: (element kind, element name, node ids) for every transformed model element
    mapping: tuple[tuple[str, str, tuple[str, ...]], ...] = field(default=(), compare=False)

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate IR node ids: {dup}")
        roots = [n for n in self.nodes if isinstance(n, ProcessRoot)]
        if len(roots) != 1:
            raise ValueError("an executable process has exactly one ProcessRoot")

    @property
    def root(self) -> ProcessRoot:
        return next(n for n in self.nodes if isinstance(n, ProcessRoot))

    def node(self, node_id: str) -> IRNode:
        return self.by_id[node_id]

    @property
    def by_id(self) -> dict[str, IRNode]:
        cached = self.__dict__.get("_by_id")
        if cached is None:
            cached = {n.id: n for n in self.nodes}
            object.__setattr__(self, "_by_id", cached)
        return cached

    def successors(self, node_id: str) -> list[str]:
        return [b for a, b in self.edges if a == node_id]

    def predecessors(self, node_id: str) -> list[str]:
        return [a for a, b in self.edges if b == node_id]

    def variables(self) -> list[VariableDecl]:
        return [n for n in self.nodes if isinstance(n, VariableDecl)]

    def of_kind(self, cls) -> list:
        return [n for n in self.nodes if isinstance(n, cls)]

    def activity_nodes(self) -> dict[str, InvokeNode]:
        return {n.activity: n for n in self.nodes
                if isinstance(n, InvokeNode) and n.kind is InvokeKind.OPERATION and n.activity and not n.detached}


# serialisation helpers
def _operand_json(o):
    return {"ctx": o.name} if isinstance(o, ContextRef) else {"const": o}


def _operand_from(d):
    return ContextRef(d["ctx"]) if "ctx" in d else d["const"]


def constraint_to_json(c: ContextConstraint) -> dict:
    return {"op": c.operator, "operands": [_operand_json(o) for o in c.operands]}


def constraint_from_json(d: dict) -> ContextConstraint:
    return ContextConstraint(d["op"], tuple(_operand_from(o) for o in d["operands"]))


def _aspect_json(a: Aspect) -> dict:
    return {"kind": a.kind.value, "target": a.target, "rules": list(a.rules), "extras": list(a.extras)}


def _aspect_from(d: dict) -> Aspect:
    return Aspect(AspectKind(d["kind"]), d["target"], tuple(d["rules"]), tuple(d["extras"]))


def node_attrs(n: IRNode) -> dict:
    if isinstance(n, ProcessRoot):
        return {"name": n.name, "service": n.service}
    if isinstance(n, VariableDecl):
        return {"name": n.name, "type": n.type, "initial": n.initial}
    if isinstance(n, InvokeNode):
        d: dict[str, Any] = {"kind": n.kind.value, "target": n.target}
        if n.activity is not None:
            d["activity"] = n.activity
        if n.operation is not None:
            d["operation"] = n.operation
        if n.in_vars:
            d["in"] = list(n.in_vars)
        if n.out_vars:
            d["out"] = list(n.out_vars)
        if n.actions:
            d["actions"] = print_actions(n.actions)
        if n.source is not None:
            d["source"] = n.source
        if n.detached:
            d["detached"] = True
        return d
    if isinstance(n, AssignNode):
        return {"source": n.source, "target": n.target, "part": n.part, "type": n.part_type}
    if isinstance(n, SwitchNode):
        d = {"cases": [{"when": [constraint_to_json(c) for c in conj], "goto": entry} for conj, entry in n.cases]}
        if n.default is not None:
            d["default"] = n.default
        return d
    if isinstance(n, AspectPoint):
        return {"target": n.target, "position": n.position.value, "aspects": [_aspect_json(a) for a in n.aspects]}
    if isinstance(n, EventNode):
        d = {"kind": n.kind}
        if n.handles:
            d["handles"] = list(n.handles)
        return d
    if isinstance(n, GatewayNode):
        return {"mode": n.mode}
    raise TypeError(f"not an IR node: {n!r}")


def node_from(kind: str, node_id: str, d: dict) -> IRNode:
    cls = _BY_NAME.get(kind)
    if cls is ProcessRoot:
        return ProcessRoot(node_id, d["name"], d["service"])
    if cls is VariableDecl:
        return VariableDecl(node_id, d["name"], d["type"], d.get("initial"))
    if cls is InvokeNode:
        actions = parse_actions(d["actions"]) if d.get("actions") else ()
        return InvokeNode(node_id, InvokeKind(d["kind"]), d["target"], d.get("activity"), d.get("operation"),
                          tuple(d.get("in", ())), tuple(d.get("out", ())), tuple(actions), d.get("source"),
                          bool(d.get("detached", False)))
    if cls is AssignNode:
        return AssignNode(node_id, d["source"], d["target"], d["part"], d["type"])
    if cls is SwitchNode:
        cases = tuple((tuple(constraint_from_json(c) for c in case["when"]), case["goto"]) for case in d["cases"])
        return SwitchNode(node_id, cases, d.get("default"))
    if cls is AspectPoint:
        return AspectPoint(node_id, d["target"], Position(d["position"]), tuple(_aspect_from(a) for a in d["aspects"]))
    if cls is EventNode:
        return EventNode(node_id, d["kind"], tuple(d.get("handles", ())))
    if cls is GatewayNode:
        return GatewayNode(node_id, d["mode"])
    raise ParseError(f"unknown IR node kind {kind!r}")


def _dump(d) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def dump_ir(proc: ExecutableProcess) -> str:
    lines = [f"IR {proc.name} {proc.mode.value}"]
    lines += [f"NODE {n.id} {KIND_NAMES[type(n)]} {_dump(node_attrs(n))}" for n in proc.nodes]
    lines += [f"EDGE {a} {b}" for a, b in proc.edges]
    lines += [f"RULE {_dump(pretty_print(r))}" for r in proc.rules]
    return "\n".join(lines) + "\n"


def load_ir(text: str) -> ExecutableProcess:
    header = None
    nodes, edges, rules = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        tag, _, rest = raw.partition(" ")
        try:
            if tag == "IR" and header is None:
                name, mode = rest.split(" ")
                header = (name, Mode(mode))
            elif tag == "NODE":
                node_id, kind, attrs = rest.split(" ", 2)
                nodes.append(node_from(kind, node_id, json.loads(attrs)))
            elif tag == "EDGE":
                a, b = rest.split(" ")
                edges.append((a, b))
            elif tag == "RULE":
                rules.append(parse_rule(json.loads(rest)))
            else:
                raise ParseError(f"unexpected record {tag!r}", lineno, 1)
        except (ValueError, KeyError) as exc:
            raise ParseError(f"malformed IR record: {exc}", lineno, 1) from exc
    if header is None:
        raise ParseError("missing IR header", 1, 1)
    return ExecutableProcess(header[0], header[1], tuple(nodes), tuple(edges), tuple(rules))
