"""Lowering of a model bundle to the executable process IR.

Each activity expands to a chain::

    [context retrievals for its bindings] [AssignNode per binding]
    [pre AspectPoint] InvokeNode [post AspectPoint | context retrievals + SwitchNode per trigger]

In aspect mode a trigger becomes a rule attached to an After aspect on the
activity owning the trigger's target; in switch mode it becomes a SwitchNode
guarding an inline action node.
"""

from __future__ import annotations

from collections import deque

from ..errors import InvalidProcess, UntransformableElement
from ..model import ContextBindingSpec, ContextDefinition, ContextKind, ContextTriggerSpec, ModelBundle, default_value
from ..rules import ast as A
from ..statechart import dependency_order
from ..weave import Aspect, Position, trigger_to_rule, weave
from .base import BaseModel, BusinessActivity, Event, ParallelGateway, check_base
from .ir import (
    AspectPoint,
    AssignNode,
    EventNode,
    ExecutableProcess,
    GatewayNode,
    InvokeKind,
    InvokeNode,
    Mode,
    ProcessRoot,
    SwitchNode,
    VariableDecl,
)


def context_root(ctx: ContextDefinition) -> str:
    return ctx.var_path.concept


def owning_activities(base: BaseModel, path) -> list[BusinessActivity]:
    """Activities that own a context-aware object path."""
    if path.operation is None:
        acts = [a for a in base.activities if a.service == path.service]
        return acts[-1:]  # a service-level target attaches to the service's last activity
    op = f"{path.service}.{path.operation}"
    return [a for a in base.activities if a.operation == op]


class _Builder:
    def __init__(self, bundle: ModelBundle, base: BaseModel, mode: Mode, store_rules):
        self.bundle = bundle
        self.base = base
        self.mode = mode
        self.nodes: list = []
        self.edges: list[tuple[str, str]] = []
        self.mapping: dict[tuple[str, str], list[str]] = {}
        self.contexts = bundle.contexts_by_name
        self.rules_by_id = {r.id: r for r in store_rules}

    def add(self, node):
        self.nodes.append(node)
        return node

    def note(self, kind: str, name: str, node_id: str) -> None:
        ids = self.mapping.setdefault((kind, name), [])
        if node_id not in ids:
            ids.append(node_id)

    # IO of activities
    def io(self, act: BusinessActivity) -> tuple[tuple[str, ...], tuple[str, ...]]:
        ins, outs = [], []
        if act.operation:
            svc = self.bundle.services_by_name.get(act.service)
            op = svc.operation(act.operation_name) if svc and act.operation_name else None
            if op is None:
                raise UntransformableElement(
                    f"activity {act.name!r}: operation {act.operation!r} has no service model, so no InvokeNode can be built")
            if op.input is not None:
                ins.append(op.input.name)
            if op.output is not None:
                outs.append(op.output.name)
        ins.extend(act.inputs)
        outs.extend(act.outputs)
        return tuple(ins), tuple(outs)

    def context_nodes(self, names, suffix: str) -> list[InvokeNode]:
        needed: set[str] = set()

        def collect(n: str):
            if n in needed:
                return
            ctx = self.contexts.get(n)
            if ctx is None:
                raise UntransformableElement(f"context {n!r} is referenced but not defined")
            needed.add(n)
            for child in ctx.children:
                collect(child)

        for n in names:
            collect(n)
        out = []
        for name in dependency_order(self.contexts):
            if name in needed:
                out.append(self.context_node(self.contexts[name], f"ctx:{name}@{suffix}"))
        return out

    def context_node(self, ctx: ContextDefinition, node_id: str, detached: bool = False) -> InvokeNode:
        if ctx.kind is ContextKind.ATOMIC:
            if ctx.source is None:
                raise UntransformableElement(f"atomic context {ctx.name!r} has no source to invoke")
            node = InvokeNode(node_id, InvokeKind.CONTEXT, ctx.name, out_vars=(context_root(ctx),),
                              source=f"{ctx.source.kind.value}:{ctx.source.target}", detached=detached)
            self.note("atomicContext", ctx.name, node_id)
        else:
            if ctx.chart is None:
                raise UntransformableElement(f"composite context {ctx.name!r} has no statechart to invoke")
            ins = tuple(dict.fromkeys(context_root(self.contexts[c]) for c in ctx.children if c in self.contexts))
            node = InvokeNode(node_id, InvokeKind.COMPOSITE, ctx.name, in_vars=ins, out_vars=(context_root(ctx),),
                              source=f"Chart:{ctx.chart}", detached=detached)
            self.note("compositeContext", ctx.name, node_id)
        return node


def _bindings_for(bundle: ModelBundle, act: BusinessActivity) -> list[ContextBindingSpec]:
    return [b for b in bundle.bindings
            if act.operation and b.target.operation and f"{b.target.service}.{b.target.operation}" == act.operation]


def _merge_aspects(aspects: list[Aspect]) -> list[Aspect]:
    """Fold aspects sharing (kind, target) into one, concatenating rule lists."""
    merged: dict[tuple, Aspect] = {}
    for a in aspects:
        key = (a.kind, a.target)
        if key in merged:
            m = merged[key]
            merged[key] = Aspect(a.kind, a.target, tuple(dict.fromkeys((*m.rules, *a.rules))),
                                 tuple(dict.fromkeys((*m.extras, *a.extras))))
        else:
            merged[key] = a
    return list(merged.values())


def _select_process(bundle: ModelBundle, name: str | None) -> BaseModel:
    if not bundle.processes:
        raise UntransformableElement("bundle declares no process to transform")
    if name is None:
        if len(bundle.processes) > 1:
            raise UntransformableElement("bundle declares several processes; name one")
        return bundle.processes[0]
    for p in bundle.processes:
        if p.name == name:
            return p
    raise UntransformableElement(f"no process named {name!r}")


def _triggers_by_activity(bundle: ModelBundle, base: BaseModel) -> dict[str, list[ContextTriggerSpec]]:
    out: dict[str, list[ContextTriggerSpec]] = {}
    for trig in bundle.triggers:
        owners = owning_activities(base, trig.target)
        if not owners:
            raise UntransformableElement(
                f"trigger {trig.name!r}: no activity owns target {trig.target}, so it cannot be switched or woven")
        for act in owners:
            out.setdefault(act.name, []).append(trig)
    return out


def transform(bundle: ModelBundle, mode: Mode | str = Mode.ASPECT, process: str | None = None) -> ExecutableProcess:
    """Lower ``bundle`` to an ExecutableProcess; deterministic for a given bundle."""
    mode = Mode(mode) if isinstance(mode, str) else mode
    base = check_base(_select_process(bundle, process))
    triggers = _triggers_by_activity(bundle, base)

    # rules and aspects in effect for this mode
    rules = list(bundle.rules)
    aspects = list(bundle.aspects)
    trigger_rules: dict[str, A.RuleAst] = {}
    if mode is Mode.ASPECT:
        for act_name, trigs in triggers.items():
            for trig in trigs:
                rule, aspect = trigger_to_rule(trig, act_name, bundle.contexts_by_name)
                trigger_rules.setdefault(rule.id, rule)
                aspects.append(aspect)
        if set(trigger_rules) & {r.id for r in rules}:
            raise UntransformableElement(f"trigger rule ids clash with declared rules: "
                                         f"{sorted(set(trigger_rules) & {r.id for r in rules})}")
        rules.extend(trigger_rules.values())
        aspects = _merge_aspects(aspects)
    woven = weave(base, aspects)

    b = _Builder(bundle, base, mode, rules)
    root = b.add(ProcessRoot("root", base.name, base.name))
    for svc in bundle.services:
        b.note("service", svc.name, root.id)

    _declare_variables(b)

    # flow objects in breadth-first order from the start, then fault handlers
    order: list[str] = []
    queue = deque([base.start.name, *(e.name for e in base.fault_events())])
    while queue:
        n = queue.popleft()
        if n in order:
            continue
        order.append(n)
        queue.extend(base.successors(n))

    entry: dict[str, str] = {}
    exits: dict[str, list[str]] = {}
    for name in order:
        obj = base.objects[name]
        if isinstance(obj, Event):
            node = b.add(EventNode(name, obj.kind.value, obj.handles))
            entry[name], exits[name] = node.id, [node.id]
        elif isinstance(obj, ParallelGateway):
            node = b.add(GatewayNode(name, obj.mode.value))
            entry[name], exits[name] = node.id, [node.id]
        else:
            entry[name], exits[name] = _activity_chain(b, obj, woven, triggers.get(name, []))
    for src, dst in base.flows:
        for p in exits[src]:
            b.edges.append((p, entry[dst]))

    _detached(b)
    _check_parallel_writes(b, base)
    mapping = tuple((k, n, tuple(ids)) for (k, n), ids in b.mapping.items())
    return ExecutableProcess(base.name, mode, tuple(b.nodes), tuple(b.edges), tuple(rules), mapping)


def _declare_variables(b: _Builder) -> None:
    declared: dict[str, str] = {}

    def declare(name: str, vtype: str, initial, owner: str):
        if name in declared:
            if declared[name] != owner:
                raise UntransformableElement(f"variable {name!r} is declared by both {declared[name]} and {owner}")
            return None
        declared[name] = owner
        return b.add(VariableDecl(f"var:{name}", name, vtype, initial))

    for svc in b.bundle.services:
        for op in svc.operations:
            for msg in (op.input, op.output):
                if msg is None:
                    continue
                declare(msg.name, "Message", {p.name: default_value(p.type) for p in msg.parts},
                               f"message {svc.name}.{op.name}.{msg.name}")
                b.note("message", f"{svc.name}.{op.name}.{msg.name}", f"var:{msg.name}")
    for v in b.base.variables:
        declare(v.name, v.type, v.initial, f"process variable {v.name}")
    for ctx in b.bundle.contexts:
        root = context_root(ctx)
        if ctx.var_path.is_bare:
            declare(root, ctx.value_type.value, default_value(ctx.value_type), f"concept {root}")
        else:
            declare(root, "Concept", {}, f"concept {root}")
    names = set(declared)
    for act in b.base.activities:
        for v in (*act.inputs, *act.outputs):
            if v not in names:
                raise UntransformableElement(f"activity {act.name!r} exchanges undeclared variable {v!r}")


def _activity_chain(b: _Builder, act: BusinessActivity, woven, trigs) -> tuple[str, list[str]]:
    chain: list = []
    bindings = _bindings_for(b.bundle, act)
    if bindings:
        chain.extend(b.context_nodes([x.context for x in bindings], act.name))
        for bind in bindings:
            op = b.bundle.services_by_name[act.service].operation(act.operation_name)
            msg = op.message(bind.target.message) if bind.target.message else None
            part = msg.part(bind.target.part) if msg and bind.target.part else None
            if part is None:
                raise UntransformableElement(f"binding of {bind.context!r}: {bind.target} does not address a part")
            node = AssignNode(f"assign:{bind.context}@{act.name}", bind.context, msg.name, part.name, part.type.value)
            chain.append(node)
            b.note("contextBinding", f"{bind.context}->{bind.target}", node.id)
            b.note("part", str(bind.target), node.id)
    pre = woven.pre(act.name)
    if pre is not None:
        chain.append(AspectPoint(pre.id, act.name, Position.PRE, pre.aspects))
    ins, outs = b.io(act)
    inv = InvokeNode(act.name, InvokeKind.OPERATION, act.resolved_endpoint, act.name, act.operation, ins, outs)
    chain.append(inv)
    b.note("activity", act.name, inv.id)
    if act.operation:
        b.note("operation", act.operation, inv.id)
    post = woven.post(act.name)
    if trigs:
        # both modes read the trigger contexts once, right after the activity
        names = [n for t in trigs for c in t.constraints for n in c.contexts()]
        chain.extend(b.context_nodes(dict.fromkeys(names), f"{act.name}.post"))
    if b.mode is Mode.ASPECT:
        if post is not None:
            node = AspectPoint(post.id, act.name, Position.POST, post.aspects)
            chain.append(node)
            for t in trigs:
                b.note("contextTriggering", t.name, node.id)
    else:
        if post is not None:
            chain.append(AspectPoint(post.id, act.name, Position.POST, post.aspects))
        for t in trigs:
            action = InvokeNode(f"action:{t.name}@{act.name}", InvokeKind.ACTION, t.name, activity=act.name,
                                in_vars=tuple(dict.fromkeys(p.concept for a in t.actions for p in A.referenced_paths(a))),
                                out_vars=tuple(dict.fromkeys(p.concept for p in A.written_paths(t.actions))),
                                actions=tuple(t.actions))
            sw = SwitchNode(f"switch:{t.name}@{act.name}", ((tuple(t.constraints), action.id),))
            chain.append((sw, action))
            b.note("contextTriggering", t.name, sw.id)

    # link the chain; a switch falls through to whatever follows it
    pending: list[str] = []
    first = None
    for item in chain:
        if isinstance(item, tuple):
            sw, action = item
            b.add(sw)
            b.add(action)
            for p in pending:
                b.edges.append((p, sw.id))
            b.edges.append((sw.id, action.id))
            pending = [sw.id, action.id]
            first = first or sw.id
        else:
            b.add(item)
            for p in pending:
                b.edges.append((p, item.id))
            pending = [item.id]
            first = first or item.id
    return first, pending


def _detached(b: _Builder) -> None:
    """Give model elements that no control path uses their mapped node anyway."""
    for ctx in b.bundle.contexts:
        kind = "atomicContext" if ctx.kind is ContextKind.ATOMIC else "compositeContext"
        if (kind, ctx.name) not in b.mapping:
            b.add(b.context_node(ctx, f"ctx:{ctx.name}", detached=True))
    for svc in b.bundle.services:
        for op in svc.operations:
            key = f"{svc.name}.{op.name}"
            if ("operation", key) not in b.mapping:
                node = b.add(InvokeNode(f"op:{key}", InvokeKind.OPERATION, svc.name, operation=key,
                                        in_vars=(op.input.name,) if op.input else (),
                                        out_vars=(op.output.name,) if op.output else (), detached=True))
                b.note("operation", key, node.id)
    used = {(k, n) for k, n in b.mapping}
    for bind in b.bundle.bindings:
        if ("contextBinding", f"{bind.context}->{bind.target}") not in used:
            raise UntransformableElement(f"binding of {bind.context!r} to {bind.target}: no activity invokes that operation")


def _node_writes(b: _Builder, node) -> set[str]:
    if isinstance(node, InvokeNode) and node.kind in (InvokeKind.OPERATION, InvokeKind.ACTION):
        return set(node.out_vars)
    if isinstance(node, AssignNode):
        return {node.target}
    if isinstance(node, AspectPoint):
        out: set[str] = set()
        for a in node.aspects:
            for rid in a.rules:
                rule = b.rules_by_id.get(rid)
                if rule is not None:
                    out.update(p.concept for p in A.written_paths(rule.actions))
        return out
    return set()  # context retrievals refresh shared context state and are not counted


def _check_parallel_writes(b: _Builder, base: BaseModel) -> None:
    by_activity: dict[str, list] = {}
    for n in b.nodes:
        if isinstance(n, InvokeNode):
            owner = n.activity
        elif isinstance(n, AspectPoint):
            owner = n.target
        elif isinstance(n, AssignNode):
            owner = n.id.rsplit("@", 1)[-1]
        else:
            owner = None
        if owner is not None:
            by_activity.setdefault(owner, []).append(n)
    for fork, (_, branches) in base.fork_regions().items():
        writes = []
        for branch in branches:
            w: set[str] = set()
            for obj in branch:
                for n in by_activity.get(obj, ()):
                    w |= _node_writes(b, n)
            writes.append(w)
        for i in range(len(writes)):
            for j in range(i + 1, len(writes)):
                clash = writes[i] & writes[j]
                if clash:
                    raise InvalidProcess(f"parallel branches of {fork!r} both write {', '.join(sorted(clash))}")
