"""Context model: contexts, sources, context-aware objects, bindings and triggers.

All types are immutable once built; a ``ModelBundle`` is safe to share
between threads.  Value stores passed to the evaluation helpers are plain
mappings from context name to value (``ContextValue`` entries are unwrapped).
"""

from __future__ import annotations

import enum
import operator
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Union

from .errors import InvalidPath, MissingContext, TypeMismatch
from .rules import ast as rast
from .rules.functions import DEFAULT_REGISTRY, FunctionRegistry


class ValueType(enum.Enum):
    BOOLEAN = "Boolean"
    INTEGER = "Integer"
    DECIMAL = "Decimal"
    TEXT = "Text"
    # message parts only; contexts are always scalar
    LIST = "List"

    @classmethod
    def parse(cls, name: str) -> "ValueType":
        for vt in cls:
            if vt.value.lower() == name.lower():
                return vt
        raise ValueError(f"unknown value type {name!r}")


SCALAR_TYPES = (ValueType.BOOLEAN, ValueType.INTEGER, ValueType.DECIMAL, ValueType.TEXT)


def value_matches(vt: ValueType, value: Any) -> bool:
    if vt is ValueType.BOOLEAN:
        return isinstance(value, bool)
    if vt is ValueType.INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if vt is ValueType.DECIMAL:
        return isinstance(value, float)
    if vt is ValueType.TEXT:
        return isinstance(value, str)
    return isinstance(value, (list, tuple))


def coerce_value(vt: ValueType, value: Any) -> Any:
    """Widen an integer to Decimal; anything else must already match."""
    if vt is ValueType.DECIMAL and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if vt is ValueType.LIST and isinstance(value, tuple):
        value = list(value)
    if not value_matches(vt, value):
        raise TypeMismatch(f"value {value!r} is not of type {vt.value}")
    return value


def default_value(vt: ValueType) -> Any:
    return {ValueType.BOOLEAN: False, ValueType.INTEGER: 0, ValueType.DECIMAL: 0.0,
            ValueType.TEXT: "", ValueType.LIST: []}[vt]


class ContextKind(enum.Enum):
    ATOMIC = "Atomic"
    COMPOSITE = "Composite"


class SourceKind(enum.Enum):
    SERVICE = "Service"
    COMMUNITY = "Community"


@dataclass(frozen=True)
class ContextSourceRef:
    kind: SourceKind
    target: str


@dataclass(frozen=True)
class ContextDefinition:
    name: str
    kind: ContextKind
    value_type: ValueType
    source: ContextSourceRef | None = None
    chart: str | None = None
    children: tuple[str, ...] = ()
    # where the value lives in a process environment, e.g. "Weather.temperature"
    property_path: str | None = None

    @property
    def var_path(self) -> rast.PropertyPath:
        if not self.property_path:
            return rast.PropertyPath(self.name)
        segs = self.property_path.split(".")
        if len(segs) == 1:
            return rast.PropertyPath(segs[0])
        return rast.PropertyPath(segs[0], None, tuple(segs[1:-1]), segs[-1])


@dataclass(frozen=True)
class ContextValue:
    context_name: str
    value: Any
    measured_at: int
    provider_id: str | None = None


class MessageDir(enum.Enum):
    INPUT = "Input"
    OUTPUT = "Output"

    @classmethod
    def parse(cls, name: str) -> "MessageDir":
        for d in cls:
            if d.value.lower() == name.lower():
                return d
        raise InvalidPath(f"message must be input or output, got {name!r}")


@dataclass(frozen=True)
class CAObjectPath:
    """Service / operation / message / part, the WSDL-style object hierarchy."""

    service: str
    operation: str | None = None
    message: MessageDir | None = None
    part: str | None = None

    def __post_init__(self):
        if self.part is not None and self.message is None:
            raise InvalidPath("a part requires a message")
        if self.message is not None and self.operation is None:
            raise InvalidPath("a message requires an operation")

    @classmethod
    def parse(cls, text: str) -> "CAObjectPath":
        segs = text.split(".")
        if not 1 <= len(segs) <= 4 or not all(segs):
            raise InvalidPath(f"bad object path {text!r}")
        msg = MessageDir.parse(segs[2]) if len(segs) > 2 else None
        return cls(segs[0], segs[1] if len(segs) > 1 else None, msg, segs[3] if len(segs) > 3 else None)

    def __str__(self) -> str:
        segs = [self.service, self.operation, self.message.value.lower() if self.message else None, self.part]
        return ".".join(s for s in segs if s is not None)


@dataclass(frozen=True)
class PartModel:
    name: str
    type: ValueType


@dataclass(frozen=True)
class MessageModel:
    name: str
    parts: tuple[PartModel, ...] = ()

    def part(self, name: str) -> PartModel | None:
        return next((p for p in self.parts if p.name == name), None)


@dataclass(frozen=True)
class OperationModel:
    name: str
    input: MessageModel | None = None
    output: MessageModel | None = None

    def message(self, d: MessageDir) -> MessageModel | None:
        return self.input if d is MessageDir.INPUT else self.output


@dataclass(frozen=True)
class ServiceModel:
    name: str
    operations: tuple[OperationModel, ...] = ()

    def operation(self, name: str) -> OperationModel | None:
        return next((o for o in self.operations if o.name == name), None)


@dataclass(frozen=True)
class ContextBindingSpec:
    context: str
    target: CAObjectPath


@dataclass(frozen=True)
class ContextRef:
    name: str


Operand = Union[ContextRef, bool, int, float, str]

RELATIONAL = {
    "Eq": operator.eq,
    "Neq": operator.ne,
    "Lt": operator.lt,
    "Leq": operator.le,
    "Gt": operator.gt,
    "Geq": operator.ge,
}
SYMBOLS = {"Eq": "=", "Neq": "!=", "Lt": "<", "Leq": "<=", "Gt": ">", "Geq": ">="}


@dataclass(frozen=True)
class ContextConstraint:
    operator: str
    operands: tuple

    def contexts(self) -> list[str]:
        return [o.name for o in self.operands if isinstance(o, ContextRef)]

    def __str__(self) -> str:
        def fmt(o):
            if isinstance(o, ContextRef):
                return o.name
            from .rules.printer import format_const

            return format_const(o)

        if self.operator in SYMBOLS and len(self.operands) == 2:
            return f"{fmt(self.operands[0])} {SYMBOLS[self.operator]} {fmt(self.operands[1])}"
        return f"{self.operator}({', '.join(fmt(o) for o in self.operands)})"


@dataclass(frozen=True)
class ContextTriggerSpec:
    name: str
    constraints: tuple[ContextConstraint, ...]
    actions: tuple  # rule-language ActionSpec values
    target: CAObjectPath


@dataclass(frozen=True)
class OntologyConcept:
    name: str
    datatype_properties: Mapping[str, ValueType] = field(default_factory=dict)
    object_properties: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelBundle:
    """Parsed root of every model section.

    Collections are tuples in declaration order; the ``*_by_name`` views are
    derived lazily.
    """

    contexts: tuple[ContextDefinition, ...] = ()
    charts: tuple = ()  # statechart.Statechart
    communities: tuple = ()  # community.CommunityConfig
    providers: tuple = ()  # community.ProviderRecord
    concepts: tuple[OntologyConcept, ...] = ()
    services: tuple[ServiceModel, ...] = ()
    endpoints: tuple = ()  # sim.EndpointSpec
    processes: tuple = ()  # process.BaseModel
    bindings: tuple[ContextBindingSpec, ...] = ()
    triggers: tuple[ContextTriggerSpec, ...] = ()
    rules: tuple = ()  # rules.RuleAst
    aspects: tuple = ()  # weave.Aspect
    simulations: tuple = ()  # sim.SimulatedProvider
    source: str | None = None

    @cached_property
    def contexts_by_name(self) -> dict[str, ContextDefinition]:
        return {c.name: c for c in self.contexts}

    @cached_property
    def charts_by_name(self) -> dict:
        return {c.name: c for c in self.charts}

    @cached_property
    def communities_by_id(self) -> dict:
        return {c.id: c for c in self.communities}

    @cached_property
    def providers_by_id(self) -> dict:
        return {p.id: p for p in self.providers}

    @cached_property
    def concepts_by_name(self) -> dict[str, OntologyConcept]:
        return {c.name: c for c in self.concepts}

    @cached_property
    def services_by_name(self) -> dict[str, ServiceModel]:
        return {s.name: s for s in self.services}

    @cached_property
    def endpoints_by_name(self) -> dict:
        return {e.name: e for e in self.endpoints}

    @cached_property
    def rules_by_id(self) -> dict:
        return {r.id: r for r in self.rules}

    def resolve_part(self, path: CAObjectPath) -> PartModel | None:
        svc = self.services_by_name.get(path.service)
        op = svc.operation(path.operation) if svc and path.operation else None
        msg = op.message(path.message) if op and path.message else None
        return msg.part(path.part) if msg and path.part else None

    def path_exists(self, path: CAObjectPath) -> bool:
        svc = self.services_by_name.get(path.service)
        if svc is None:
            return False
        if path.operation is None:
            return True
        op = svc.operation(path.operation)
        if op is None:
            return False
        if path.message is None:
            return True
        msg = op.message(path.message)
        if msg is None:
            return False
        return path.part is None or msg.part(path.part) is not None


# evaluation helpers
def _unwrap(v):
    return v.value if isinstance(v, ContextValue) else v


def _operand_value(o, env: Mapping):
    if isinstance(o, ContextRef):
        if o.name not in env:
            raise MissingContext(f"context {o.name!r} has no value")
        return _unwrap(env[o.name])
    return o


def _kind(v) -> str:
    if isinstance(v, bool):
        return "bool"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, str):
        return "text"
    if isinstance(v, (list, tuple)):
        return "list"
    return type(v).__name__


def evaluate_constraint(
    constraint: ContextConstraint, env: Mapping, functions: FunctionRegistry = DEFAULT_REGISTRY
) -> bool:
    """Evaluate one context constraint; comparisons are exact, no epsilon."""
    ops = constraint.operands
    if len(ops) < 2 or not isinstance(ops[0], ContextRef):
        raise TypeMismatch("a constraint needs a context as first operand and at least two operands")
    values = [_operand_value(o, env) for o in ops]
    if constraint.operator in RELATIONAL:
        if len(values) != 2:
            raise TypeMismatch(f"{constraint.operator} takes exactly two operands")
        left, right = values
        kl, kr = _kind(left), _kind(right)
        if kl != kr:
            raise TypeMismatch(f"cannot compare {kl} with {kr}")
        if kl in ("bool", "list") and constraint.operator not in ("Eq", "Neq"):
            raise TypeMismatch(f"{kl} values support only equality")
        return bool(RELATIONAL[constraint.operator](left, right))
    result = functions.call(constraint.operator, values)
    if not isinstance(result, bool):
        raise TypeMismatch(f"constraint function {constraint.operator} returned {result!r}, not a boolean")
    return result


def evaluate_constraints(constraints, env: Mapping, functions: FunctionRegistry = DEFAULT_REGISTRY) -> bool:
    """Conjunction of a trigger's constraints; the empty set is true."""
    return all(evaluate_constraint(c, env, functions) for c in constraints)


def resolve_binding(
    binding: ContextBindingSpec, env: Mapping, part_type: ValueType | None = None
) -> tuple[CAObjectPath, Any]:
    if binding.context not in env:
        raise MissingContext(f"context {binding.context!r} has no value")
    value = _unwrap(env[binding.context])
    if part_type is not None:
        value = coerce_value(part_type, value)
    return binding.target, value
