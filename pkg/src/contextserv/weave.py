"""Weave model: aspects binding rule sets to activities, activation and rule hot-swap.

Aspects reference rules by id only.  Ids are resolved against a RuleStore
snapshot when an aspect activates, so rules can be added, removed or
replaced while process instances keep running.
"""

from __future__ import annotations

import copy
import enum
import threading
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Mapping, Sequence, Union

from .errors import (
    ContextServError,
    DuplicateAspect,
    DuplicateRule,
    RuleEvaluationError,
    UnknownActivity,
    UnknownRule,
    UnmappableAction,
)
from .model import ContextConstraint, ContextDefinition, ContextRef, ContextTriggerSpec
from .rules import ast as A
from .rules.evaluator import ActionError, evaluate_condition, execute_actions
from .rules.functions import DEFAULT_REGISTRY, FunctionRegistry


class AspectKind(enum.Enum):
    BEFORE = "Before"
    AROUND = "Around"
    AFTER = "After"

    @classmethod
    def parse(cls, name: str) -> "AspectKind":
        for k in cls:
            if k.value.lower() == name.lower():
                return k
        raise ValueError(f"unknown aspect kind {name!r}")


@dataclass(frozen=True)
class Aspect:
    kind: AspectKind
    target: str
    rules: tuple[str, ...]
    # user-selected variables exchanged in addition to the activity's IO parameters
    extras: tuple[str, ...] = ()

    @property
    def id(self) -> str:
        return f"{self.kind.value.lower()}:{self.target}"


# rule store
@dataclass(frozen=True)
class RuleSnapshot:
    version: int
    rules: Mapping[str, A.RuleAst]

    def get(self, rule_id: str) -> A.RuleAst | None:
        return self.rules.get(rule_id)


@dataclass(frozen=True)
class Add:
    rule: A.RuleAst


@dataclass(frozen=True)
class Remove:
    rule_id: str


@dataclass(frozen=True)
class Replace:
    rule_id: str
    rule: A.RuleAst


StoreOp = Union[Add, Remove, Replace]


class RuleStore:
    """Versioned rule map with copy-on-write commits.

    Readers grab the current immutable snapshot without locking; writers
    serialise on a lock and publish a new snapshot in one reference swap.
    """

    def __init__(self, rules: Sequence[A.RuleAst] = ()):
        table: dict[str, A.RuleAst] = {}
        for r in rules:
            if r.id in table:
                raise DuplicateRule(f"rule {r.id!r} declared twice")
            table[r.id] = r
        self._lock = threading.Lock()
        self._snap = RuleSnapshot(0, MappingProxyType(table))
        self.committed: list[int] = [0]

    @property
    def version(self) -> int:
        return self._snap.version

    def snapshot(self) -> RuleSnapshot:
        return self._snap

    def ids(self) -> list[str]:
        return list(self._snap.rules)

    def mutate(self, op: StoreOp) -> int:
        with self._lock:
            table = dict(self._snap.rules)
            if isinstance(op, Add):
                if op.rule.id in table:
                    raise DuplicateRule(f"rule {op.rule.id!r} already exists")
                table[op.rule.id] = op.rule
            elif isinstance(op, Remove):
                if op.rule_id not in table:
                    raise UnknownRule(f"no rule {op.rule_id!r}")
                del table[op.rule_id]
            elif isinstance(op, Replace):
                if op.rule_id not in table:
                    raise UnknownRule(f"no rule {op.rule_id!r}")
                rule = op.rule if op.rule.id == op.rule_id else _with_id(op.rule, op.rule_id)
                table[op.rule_id] = rule
            else:
                raise TypeError(f"not a store operation: {op!r}")
            self._snap = RuleSnapshot(self._snap.version + 1, MappingProxyType(table))
            self.committed.append(self._snap.version)
            return self._snap.version

    def add(self, rule: A.RuleAst) -> int:
        return self.mutate(Add(rule))

    def remove(self, rule_id: str) -> int:
        return self.mutate(Remove(rule_id))

    def replace(self, rule_id: str, rule: A.RuleAst) -> int:
        return self.mutate(Replace(rule_id, rule))


def _with_id(rule: A.RuleAst, rule_id: str) -> A.RuleAst:
    return A.RuleAst(rule_id, rule.rule_type, rule.condition, rule.actions, rule.priority, rule.meta)


def store_mutate(store: RuleStore, op: StoreOp) -> int:
    return store.mutate(op)


# weaving
class Position(enum.Enum):
    PRE = "pre"
    POST = "post"


@dataclass(frozen=True)
class JoinPoint:
    """One activation point; a pre point may merge a Before and an Around aspect."""

    target: str
    position: Position
    aspects: tuple[Aspect, ...]

    @property
    def around(self) -> bool:
        return any(a.kind is AspectKind.AROUND for a in self.aspects)

    @property
    def id(self) -> str:
        return f"{self.position.value}:{self.target}"

    @property
    def extras(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for a in self.aspects:
            seen.update(dict.fromkeys(a.extras))
        return tuple(seen)


@dataclass(frozen=True)
class WovenProcess:
    base: Any
    join_points: Mapping[tuple[str, Position], JoinPoint]

    def pre(self, activity: str) -> JoinPoint | None:
        return self.join_points.get((activity, Position.PRE))

    def post(self, activity: str) -> JoinPoint | None:
        return self.join_points.get((activity, Position.POST))


def weave(base, aspects: Sequence[Aspect]) -> WovenProcess:
    """Attach aspects to the activities of ``base`` (anything with ``activity_names()``)."""
    names = set(base.activity_names())
    seen: dict[tuple[AspectKind, str], Aspect] = {}
    for a in aspects:
        if a.target not in names:
            raise UnknownActivity(f"aspect {a.id} targets unknown activity {a.target!r}")
        if (a.kind, a.target) in seen:
            raise DuplicateAspect(f"two {a.kind.value} aspects on {a.target!r}")
        seen[(a.kind, a.target)] = a
    points: dict[tuple[str, Position], JoinPoint] = {}
    for a in aspects:
        if a.kind is AspectKind.AFTER:
            points[(a.target, Position.POST)] = JoinPoint(a.target, Position.POST, (a,))
        elif (a.target, Position.PRE) not in points:
            # Before rules run ahead of Around rules in a merged activation
            group = tuple(x for x in (seen.get((AspectKind.BEFORE, a.target)), seen.get((AspectKind.AROUND, a.target)))
                          if x is not None)
            points[(a.target, Position.PRE)] = JoinPoint(a.target, Position.PRE, group)
    return WovenProcess(base, MappingProxyType(points))


# activation
@dataclass(frozen=True)
class ActivationRecord:
    aspect: str
    store_version: int
    variables_in: Mapping[str, Any]
    variables_out: Mapping[str, Any]
    control: A.Control
    at: int
    fired: tuple[str, ...] = ()
    skips: frozenset = frozenset()
    replacements: Mapping[str, str] = field(default_factory=dict)

    def to_line(self, instance_id: str = "-") -> str:
        return (f"ACTIVATION {instance_id} {self.aspect} {self.store_version} {self.control.name} {self.at} "
                f"{','.join(self.fired) or '-'}")


def ordered_rules(aspect: Aspect, snap: RuleSnapshot) -> list[A.RuleAst]:
    """Rules present in the snapshot, by priority (high first) then declaration order."""
    found = [(i, snap.get(rid)) for i, rid in enumerate(aspect.rules)]
    found = [(i, r) for i, r in found if r is not None]
    found.sort(key=lambda ir: (-ir[1].priority, ir[0]))
    return [r for _, r in found]


def activate(
    point: Aspect | JoinPoint,
    env: Mapping[str, Any],
    store: RuleStore | RuleSnapshot,
    connector=None,
    functions: FunctionRegistry = DEFAULT_REGISTRY,
    now: int = 0,
) -> ActivationRecord:
    """Run the rules of an aspect (or merged join point) once, against a copy of ``env``.

    A rule's writes are visible to the rules after it.  Rule failures are
    raised as RuleEvaluationError carrying the rule id and action index.
    """
    snap = store.snapshot() if isinstance(store, RuleStore) else store
    aspects = point.aspects if isinstance(point, JoinPoint) else (point,)
    variables_in = copy.deepcopy(dict(env))
    work = copy.deepcopy(variables_in)
    control = A.Control.CONTINUE
    fired: list[str] = []
    skips: set[str] = set()
    replacements: dict[str, str] = {}
    for aspect in aspects:
        for rule in ordered_rules(aspect, snap):
            try:
                hit = evaluate_condition(rule.condition, work, functions)
            except ContextServError as exc:
                raise RuleEvaluationError(f"rule {rule.id}: condition failed: {exc}", rule.id, None) from exc
            if not hit:
                continue
            try:
                out = execute_actions(rule, work, connector, functions, copy_env=False)
            except ActionError as exc:
                raise RuleEvaluationError(
                    f"rule {rule.id}: action {exc.index} failed: {exc.cause}", rule.id, exc.index
                ) from exc.cause
            fired.append(rule.id)
            control = max(control, out.control)
            skips |= out.skips
            replacements.update(out.replacements)
            if out.control is A.Control.ABORT:
                break
        if control is A.Control.ABORT:
            break
    label = point.id if isinstance(point, (JoinPoint, Aspect)) else str(point)
    return ActivationRecord(label, snap.version, variables_in, work, control, now, tuple(fired),
                            frozenset(skips), MappingProxyType(replacements))


# context triggers as rules
_OPS = {"Eq": A.RelOp.EQ, "Lt": A.RelOp.LT, "Leq": A.RelOp.LEQ, "Gt": A.RelOp.GT, "Geq": A.RelOp.GEQ}
_ACTION_TYPES = (A.Assign, A.InvokeActivity, A.Skip, A.SkipThen, A.Abort, A.InvokeThenAbort, A.CallAction)


def _operand_term(o, contexts: Mapping[str, ContextDefinition]) -> A.Term:
    if isinstance(o, ContextRef):
        ctx = contexts.get(o.name)
        return A.PropertyRef(ctx.var_path if ctx is not None else A.PropertyPath(o.name))
    return A.Const(o)


def constraint_to_condition(c: ContextConstraint, contexts: Mapping[str, ContextDefinition]) -> A.CondExpr:
    terms = [_operand_term(o, contexts) for o in c.operands]
    if c.operator in _OPS:
        return A.Compare(terms[0], _OPS[c.operator], terms[1])
    if c.operator == "Neq":
        return A.Not(A.Compare(terms[0], A.RelOp.EQ, terms[1]))
    return A.Compare(A.FunCall(c.operator, tuple(terms)), A.RelOp.EQ, A.Const(True))


def trigger_to_rule(
    trigger: ContextTriggerSpec,
    activity: str,
    contexts: Mapping[str, ContextDefinition] | None = None,
    priority: int = 0,
) -> tuple[A.RuleAst, Aspect]:
    """Turn a context trigger into an Action rule plus an After aspect on ``activity``.

    ``activity`` is the activity owning the trigger's target object.
    """
    contexts = contexts or {}
    cond: A.CondExpr | None = None
    for c in trigger.constraints:
        part = constraint_to_condition(c, contexts)
        cond = part if cond is None else A.And(cond, part)
    for act in trigger.actions:
        if not isinstance(act, _ACTION_TYPES):
            raise UnmappableAction(f"trigger {trigger.name}: cannot map action {act!r}")
    rule = A.RuleAst(trigger.name, A.RuleType.ACTION, cond or A.TRUE_CONDITION, tuple(trigger.actions), priority)
    roots = [p.concept for p in A.referenced_paths(rule.condition)]
    for act in rule.actions:
        roots.extend(p.concept for p in A.referenced_paths(act))
    roots.extend(p.concept for p in A.written_paths(rule.actions))
    extras = tuple(dict.fromkeys(roots))
    return rule, Aspect(AspectKind.AFTER, activity, (rule.id,), extras)
