"""Rule AST node types.

Every node is a frozen dataclass so structurally identical trees compare
equal, which is what the printer round-trip relies on.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Union


class RuleType(enum.Enum):
    CONSTRAINT = "Constraint"
    COMPUTATION = "Computation"
    INFERENCE = "Inference"
    ACTION = "Action"


class RelOp(enum.Enum):
    LT = "less than"
    LEQ = "less than or equal to"
    EQ = "equal to"
    GEQ = "greater than or equal to"
    GT = "greater than"


class Control(enum.IntEnum):
    """Control directives ordered by strength."""

    CONTINUE = 0
    SKIP = 1
    REPLACE = 2
    ABORT = 3


@dataclass(frozen=True)
class PropertyPath:
    """``concept(_n)?(.hop)*.prop`` or a bare variable name.

    ``datatype_prop`` is None for a bare reference (the whole variable).
    """

    concept: str
    instance_index: int | None = None
    object_hops: tuple[str, ...] = ()
    datatype_prop: str | None = None

    @property
    def is_bare(self) -> bool:
        return self.datatype_prop is None

    def dotted(self) -> str:
        head = self.concept if self.instance_index is None else f"{self.concept}_{self.instance_index}"
        parts = [head, *self.object_hops]
        if self.datatype_prop is not None:
            parts.append(self.datatype_prop)
        return ".".join(parts)


# terms
@dataclass(frozen=True)
class PropertyRef:
    path: PropertyPath


@dataclass(frozen=True)
class Const:
    value: Any

    def __eq__(self, other: object) -> bool:
        # bool == int in Python; constants of different types must stay distinct
        if not isinstance(other, Const):
            return NotImplemented
        return type(self.value) is type(other.value) and self.value == other.value

    def __hash__(self) -> int:
        return hash((type(self.value).__name__, self.value))


@dataclass(frozen=True)
class Arith:
    left: "Term"
    op: str
    right: "Term"


@dataclass(frozen=True)
class FunCall:
    name: str
    args: tuple["Term", ...]


Term = Union[PropertyRef, Const, Arith, FunCall]


# conditions
@dataclass(frozen=True)
class Compare:
    left: Term
    op: RelOp
    right: Term


@dataclass(frozen=True)
class Not:
    operand: "CondExpr"


@dataclass(frozen=True)
class And:
    left: "CondExpr"
    right: "CondExpr"


@dataclass(frozen=True)
class Or:
    left: "CondExpr"
    right: "CondExpr"


CondExpr = Union[Compare, Not, And, Or]

TRUE_CONDITION = Compare(Const(True), RelOp.EQ, Const(True))


# actions
@dataclass(frozen=True)
class Assign:
    target: PropertyPath
    value: Term


@dataclass(frozen=True)
class InvokeActivity:
    name: str


@dataclass(frozen=True)
class Skip:
    activity: str


@dataclass(frozen=True)
class SkipThen:
    skipped: str
    replacement: str


@dataclass(frozen=True)
class Abort:
    pass


@dataclass(frozen=True)
class InvokeThenAbort:
    activity: str


@dataclass(frozen=True)
class CallAction:
    """A function call used as a statement, e.g. ``Filter("...", ActivityList)``."""

    call: FunCall


ActionSpec = Union[Assign, InvokeActivity, Skip, SkipThen, Abort, InvokeThenAbort, CallAction]


@dataclass(frozen=True)
class RuleAst:
    id: str
    rule_type: RuleType
    condition: CondExpr
    actions: tuple[ActionSpec, ...] = ()
    priority: int = 0
    meta: dict = field(default_factory=dict, compare=False, hash=False, repr=False)


def walk_terms(node) -> list:
    """All Term nodes reachable from a condition, term or action."""
    out = []
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, (PropertyRef, Const)):
            out.append(n)
        elif isinstance(n, Arith):
            out.append(n)
            stack.extend((n.right, n.left))
        elif isinstance(n, FunCall):
            out.append(n)
            stack.extend(reversed(n.args))
        elif isinstance(n, Compare):
            stack.extend((n.right, n.left))
        elif isinstance(n, Not):
            stack.append(n.operand)
        elif isinstance(n, (And, Or)):
            stack.extend((n.right, n.left))
        elif isinstance(n, Assign):
            stack.append(n.value)
        elif isinstance(n, CallAction):
            stack.append(n.call)
    return out


def referenced_paths(node) -> list[PropertyPath]:
    return [t.path for t in walk_terms(node) if isinstance(t, PropertyRef)]


def written_paths(actions) -> list[PropertyPath]:
    """Paths an action list may write.

    Any variable passed to a statement-level call counts, since in-place
    functions write their result back to an argument.
    """
    out = []
    for act in actions:
        if isinstance(act, Assign):
            out.append(act.target)
        elif isinstance(act, CallAction):
            for arg in act.call.args:
                if isinstance(arg, PropertyRef):
                    out.append(arg.path)
    return out
