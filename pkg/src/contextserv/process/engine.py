"""Token-based interpreter for executable processes.

Parallel branches are interleaved by a seeded scheduler: at every step one
live token is picked at random and its node executed to completion, so env
writes are serialised per instance while the branch order varies with the
seed.
"""

from __future__ import annotations

import copy
import enum
import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from ..clock import FrozenClock
from ..errors import (
    ConnectorError,
    ContextServError,
    MissingContext,
    RetrievalFailed,
    RuleEvaluationError,
    UndeclaredVariable,
)
from ..model import ContextDefinition, ContextKind, ModelBundle, ValueType, coerce_value, evaluate_constraints
from ..rules import ast as A
from ..rules.evaluator import ActionError, execute_actions, store
from ..rules.functions import DEFAULT_REGISTRY, FunctionRegistry
from ..statechart import CompositeEvaluator
from ..weave import ActivationRecord, Aspect, JoinPoint, Position, RuleStore, activate
from .ir import (
    AspectPoint,
    AssignNode,
    EventNode,
    ExecutableProcess,
    GatewayNode,
    InvokeKind,
    InvokeNode,
    SwitchNode,
)


class Status(enum.Enum):
    RUNNING = "Running"
    COMPLETED = "Completed"
    ABORTED = "Aborted"
    FAULTED = "Faulted"


EXIT_CODES = {Status.COMPLETED: 0, Status.FAULTED: 2, Status.ABORTED: 3}


@dataclass(frozen=True)
class TraceRecord:
    instance: str
    seq: int
    node: str
    event: str  # enter | exit | fault
    at: int

    def to_line(self) -> str:
        return f"TRACE {self.instance} {self.seq} {self.node} {self.event} {self.at}"

    @classmethod
    def parse(cls, line: str) -> "TraceRecord":
        tag, instance, seq, node, event, at = line.split()
        if tag != "TRACE" or event not in ("enter", "exit", "fault"):
            raise ValueError(f"not a trace record: {line!r}")
        return cls(instance, int(seq), node, event, int(at))


@dataclass
class ProcessInstance:
    id: str
    process: ExecutableProcess
    env: dict
    tokens: list[str] = field(default_factory=list)
    status: Status = Status.RUNNING
    fault_reason: str | None = None
    fault_node: str | None = None
    error: Exception | None = None
    activation_log: list[ActivationRecord] = field(default_factory=list)
    invocation_counts: Counter = field(default_factory=Counter)
    trace: list[TraceRecord] = field(default_factory=list)
    contexts: dict[str, Any] = field(default_factory=dict)
    pending_skips: set[str] = field(default_factory=set)
    pending_replacements: dict[str, str] = field(default_factory=dict)
    arrivals: Counter = field(default_factory=Counter)
    charts: CompositeEvaluator | None = None
    max_tokens: int = 1

    @classmethod
    def create(cls, process: ExecutableProcess, instance_id: str = "i1", env: Mapping | None = None):
        start = [n.id for n in process.nodes if isinstance(n, EventNode) and n.kind == "Start"]
        if len(start) != 1:
            raise ContextServError("process has no unique Start event")
        initial = {v.name: copy.deepcopy(v.initial) for v in process.variables()}
        initial.update(copy.deepcopy(dict(env or {})))
        return cls(instance_id, process, initial, [start[0]])

    def trace_lines(self) -> list[str]:
        return [t.to_line() for t in self.trace]

    def activation_lines(self) -> list[str]:
        return [r.to_line(self.id) for r in self.activation_log]


def declared_variables(process: ExecutableProcess, point: AspectPoint | Aspect | JoinPoint) -> tuple[str, ...]:
    """IO parameters of the target activity plus the aspect's extra variables."""
    target = point.target
    act = process.activity_nodes().get(target)
    io = (*act.in_vars, *act.out_vars) if act is not None else ()
    aspects = point.aspects if isinstance(point, (AspectPoint, JoinPoint)) else (point,)
    extras = [v for a in aspects for v in a.extras]
    return tuple(dict.fromkeys((*io, *extras)))


def exchange_variables(instance: ProcessInstance, point) -> tuple[dict, Callable[[Mapping], None]]:
    """Deep-copied snapshot of the declared variables and an applier for the returned values."""
    declared = declared_variables(instance.process, point) if not isinstance(point, (tuple, list)) else tuple(point)
    missing = [v for v in declared if v not in instance.env]
    if missing:
        raise UndeclaredVariable(f"declared variable(s) {', '.join(missing)} not in the process environment")
    snapshot = {v: copy.deepcopy(instance.env[v]) for v in declared}
    allowed = frozenset(declared)

    def apply(variables_out: Mapping) -> None:
        extra = sorted(set(variables_out) - allowed)
        if extra:
            raise UndeclaredVariable(f"aspect returned undeclared variable(s) {', '.join(extra)}")
        instance.env.update({k: copy.deepcopy(v) for k, v in variables_out.items()})

    return snapshot, apply


class ContextResolver:
    """Retrieves context values: atomic ones through the broker, composite ones via statecharts."""

    def __init__(self, contexts: Mapping[str, ContextDefinition], broker=None, charts=None):
        self.contexts = dict(contexts)
        self.broker = broker
        self.charts = dict(charts or {})

    def evaluator(self) -> CompositeEvaluator:
        return CompositeEvaluator(self.contexts, self.charts)

    def atomic(self, name: str, now: int):
        ctx = self.contexts[name]
        if self.broker is None:
            raise RetrievalFailed(f"no broker available to retrieve {name!r}")
        src = ctx.source
        if src.kind.value == "Community":
            cv = self.broker.retrieve_context(src.target, now)
        else:
            cv = self.broker.retrieve_from(src.target, now)
        return coerce_value(ctx.value_type, cv.value)

    def resolve(self, name: str, store: dict, evaluator: CompositeEvaluator, now: int):
        """Refresh ``name`` and everything it depends on, children first; returns its value."""
        ctx = self.contexts.get(name)
        if ctx is None:
            raise MissingContext(f"context {name!r} is not defined")
        if ctx.kind is ContextKind.ATOMIC:
            store[name] = self.atomic(name, now)
        else:
            for child in ctx.children:
                self.resolve(child, store, evaluator, now)
            evaluator.evaluate(name, store, now, recurse=False)
        return store[name]


class _ActivityInvoker:
    """Connector seen by rules: ``InvokeActivity X`` runs activity X (or endpoint X)."""

    def __init__(self, engine: "Engine", instance: ProcessInstance):
        self.engine = engine
        self.instance = instance

    def invoke_activity(self, name: str, env: dict):
        node = self.engine.process.activity_nodes().get(name)
        if node is None:
            reply = self.engine.connector.invoke(name, None, {})
            self.instance.invocation_counts[name] += 1
            return reply
        payload = {v: copy.deepcopy(env[v]) for v in node.in_vars if v in env}
        reply = self.engine.connector.invoke(node.target, node.operation, payload)
        self.instance.invocation_counts[name] += 1
        scratch = {v: copy.deepcopy(env.get(v, self.instance.env.get(v))) for v in node.out_vars}
        _apply_reply(node, reply, scratch)
        return scratch


def _apply_reply(node: InvokeNode, reply: Mapping, env: dict) -> None:
    out_msg = node.out_vars[0] if node.operation and node.out_vars else None
    for key, value in reply.items():
        if key in node.out_vars and key != out_msg:
            env[key] = value
        elif key == out_msg and isinstance(value, dict):
            env[key] = value
        elif out_msg is not None:
            msg = env.get(out_msg)
            if not isinstance(msg, dict):
                msg = env[out_msg] = {}
            msg[key] = value


class Engine:
    def __init__(
        self,
        process: ExecutableProcess,
        connector=None,
        broker=None,
        store: RuleStore | None = None,
        bundle: ModelBundle | None = None,
        functions: FunctionRegistry = DEFAULT_REGISTRY,
        clock=None,
        seed: int = 0,
        hooks=(),
    ):
        self.process = process
        self.connector = connector
        self.store = store if store is not None else RuleStore(process.rules)
        self.functions = functions
        self.clock = clock or FrozenClock(0)
        self.seed = seed
        self.hooks = list(hooks)
        contexts = bundle.contexts_by_name if bundle is not None else {}
        charts = bundle.charts_by_name if bundle is not None else {}
        self.resolver = ContextResolver(contexts, broker, charts)

    def new_instance(self, instance_id: str = "i1", env: Mapping | None = None) -> ProcessInstance:
        return ProcessInstance.create(self.process, instance_id, env)

    def run(self, instance: ProcessInstance | None = None) -> ProcessInstance:
        instance = instance or self.new_instance()
        if instance.charts is None:
            instance.charts = self.resolver.evaluator()
        rng = random.Random(self.seed)
        while instance.status is Status.RUNNING:
            if not instance.tokens:
                instance.status = Status.COMPLETED
                break
            node_id = instance.tokens.pop(rng.randrange(len(instance.tokens)))
            for hook in self.hooks:
                hook(self, instance, node_id)
            self._step(instance, node_id)
            instance.max_tokens = max(instance.max_tokens, len(instance.tokens))
        return instance

    # tracing
    def _trace(self, inst: ProcessInstance, node_id: str, event: str) -> None:
        inst.trace.append(TraceRecord(inst.id, len(inst.trace) + 1, node_id, event, self.clock.now_ms()))

    def _step(self, inst: ProcessInstance, node_id: str) -> None:
        node = self.process.node(node_id)
        self._trace(inst, node_id, "enter")
        try:
            nxt = self._execute(inst, node)
        except ContextServError as exc:
            self._fault(inst, node, exc)
            return
        if inst.status is not Status.RUNNING:
            self._trace(inst, node_id, "exit")
            return
        if nxt is None:
            return  # token absorbed (join waiting, end reached)
        self._trace(inst, node_id, "exit")
        inst.tokens.extend(nxt)

    def _fault(self, inst: ProcessInstance, node, exc: Exception) -> None:
        self._trace(inst, node.id, "fault")
        activity = getattr(node, "activity", None) or getattr(node, "target", None)
        reason = f"{type(exc).__name__}: {exc}"
        handler = self._fault_handler(activity)
        inst.tokens.clear()
        inst.fault_reason, inst.fault_node, inst.error = reason, node.id, exc
        if handler is None:
            inst.status = Status.FAULTED
        else:
            inst.tokens.append(handler)

    def _fault_handler(self, activity: str | None) -> str | None:
        faults = [n for n in self.process.nodes if isinstance(n, EventNode) and n.kind == "Fault"]
        for f in faults:
            if activity is not None and activity in f.handles:
                return f.id
        return next((f.id for f in faults if not f.handles), None)

    def _execute(self, inst: ProcessInstance, node) -> list[str] | None:
        succ = self.process.successors(node.id)
        if isinstance(node, EventNode):
            if node.kind == "End":
                if not inst.tokens:
                    inst.status = Status.COMPLETED
                return []
            if node.kind == "Fault" and not succ:
                inst.status = Status.FAULTED
                return None
            return succ
        if isinstance(node, GatewayNode):
            if node.mode == "Fork":
                return succ
            inst.arrivals[node.id] += 1
            if inst.arrivals[node.id] < len(self.process.predecessors(node.id)):
                return None
            inst.arrivals[node.id] = 0
            return succ
        if isinstance(node, InvokeNode):
            self._invoke(inst, node)
            return succ
        if isinstance(node, AssignNode):
            self._assign(inst, node)
            return succ
        if isinstance(node, SwitchNode):
            for conj, entry in node.cases:
                if evaluate_constraints(conj, inst.contexts, self.functions):
                    return [entry]
            if node.default is not None:
                return [node.default]
            entries = {entry for _, entry in node.cases}
            return [s for s in succ if s not in entries]
        if isinstance(node, AspectPoint):
            self._activate(inst, node)
            return succ if inst.status is Status.RUNNING else None
        raise ContextServError(f"node {node.id!r} is not executable")

    def _invoke(self, inst: ProcessInstance, node: InvokeNode) -> None:
        now = self.clock.now_ms()
        if node.kind is InvokeKind.OPERATION:
            act = node.activity
            if act in inst.pending_replacements:
                repl = inst.pending_replacements.pop(act)
                inst.pending_skips.discard(act)
                self._call_activity(inst, repl, fallback=node)
            elif act in inst.pending_skips:
                inst.pending_skips.discard(act)
            else:
                self._call_activity(inst, act, fallback=node)
        elif node.kind is InvokeKind.CONTEXT:
            value = self.resolver.atomic(node.target, now)
            self._store_context(inst, node.target, value)
        elif node.kind is InvokeKind.COMPOSITE:
            ctx = self.resolver.contexts.get(node.target)
            if ctx is None:
                raise MissingContext(f"composite context {node.target!r} is not defined")
            cv = inst.charts.evaluate(node.target, inst.contexts, now, recurse=False)
            self._store_context(inst, node.target, cv.value)
        else:
            try:
                out = execute_actions(node.actions, inst.env, _ActivityInvoker(self, inst), self.functions,
                                      copy_env=False)
            except ActionError as exc:
                raise RuleEvaluationError(f"trigger {node.target}: action {exc.index} failed: {exc.cause}",
                                          node.target, exc.index) from exc.cause
            self._apply_control(inst, out.control, out.skips, out.replacements, None)

    def _call_activity(self, inst: ProcessInstance, name: str, fallback: InvokeNode) -> None:
        node = self.process.activity_nodes().get(name, fallback if name == fallback.activity else None)
        if self.connector is None:
            raise ContextServError(f"no connector to invoke {name!r}")
        if node is None:
            reply = self.connector.invoke(name, None, {})
            inst.invocation_counts[name] += 1
            return
        payload = {v: copy.deepcopy(inst.env[v]) for v in node.in_vars if v in inst.env}
        try:
            reply = self.connector.invoke(node.target, node.operation, payload)
        except ContextServError:
            raise
        except Exception as exc:
            raise ConnectorError(f"activity {name!r}: {exc}") from exc
        inst.invocation_counts[name] += 1
        if not isinstance(reply, Mapping):
            raise ContextServError(f"activity {name!r} returned a non-mapping reply")
        _apply_reply(node, reply, inst.env)

    def _store_context(self, inst: ProcessInstance, name: str, value) -> None:
        inst.contexts[name] = value
        ctx = self.resolver.contexts.get(name)
        if ctx is not None:
            store(ctx.var_path, inst.env, copy.deepcopy(value))

    def _assign(self, inst: ProcessInstance, node: AssignNode) -> None:
        if node.source not in inst.contexts:
            raise MissingContext(f"context {node.source!r} has not been retrieved")
        value = coerce_value(ValueType.parse(node.part_type), inst.contexts[node.source])
        msg = inst.env.get(node.target)
        if not isinstance(msg, dict):
            msg = inst.env[node.target] = {}
        msg[node.part] = value

    def _activate(self, inst: ProcessInstance, node: AspectPoint) -> None:
        vars_in, apply = exchange_variables(inst, node)
        point = JoinPoint(node.target, node.position, node.aspects)
        record = activate(point, vars_in, self.store, _ActivityInvoker(self, inst), self.functions,
                          self.clock.now_ms())
        inst.activation_log.append(record)
        apply(record.variables_out)
        around = node.position is Position.PRE and point.around
        self._apply_control(inst, record.control, record.skips, record.replacements, node.target if around else None)

    def _apply_control(self, inst, control, skips, replacements, around_target) -> None:
        if control is A.Control.ABORT:
            inst.status = Status.ABORTED
            inst.tokens.clear()
            return
        inst.pending_skips |= set(skips)
        inst.pending_replacements.update(replacements)
        if around_target is not None and around_target not in inst.pending_replacements:
            # an around aspect stands in for the activity itself
            inst.pending_skips.add(around_target)


def bind_contexts(instance: ProcessInstance, bindings, broker, charts=None, bundle: ModelBundle | None = None,
                  now: int = 0) -> dict:
    """Retrieve each bound context and write it into its target message part.

    ``bundle`` supplies context definitions and the service models used to
    find the message variable behind each target path.
    """
    if bundle is None:
        raise ContextServError("bind_contexts needs the bundle for context and service definitions")
    resolver = ContextResolver(bundle.contexts_by_name, broker, charts if charts is not None else bundle.charts_by_name)
    evaluator = instance.charts or resolver.evaluator()
    instance.charts = evaluator
    for b in bindings:
        value = resolver.resolve(b.context, instance.contexts, evaluator, now)
        part = bundle.resolve_part(b.target)
        svc = bundle.services_by_name[b.target.service]
        msg = svc.operation(b.target.operation).message(b.target.message)
        if part is not None:
            value = coerce_value(part.type, value)
        target = instance.env.get(msg.name)
        if not isinstance(target, dict):
            target = instance.env[msg.name] = {}
        target[b.target.part] = value
    return instance.env
