"""Whole-bundle well-formedness checks.

Violations make a bundle unusable; warnings flag things that are legal but
probably unintended.  Both are sorted, so the report does not depend on the
order in which sections were declared.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .model import ContextKind, ContextRef, ModelBundle, SourceKind, ValueType
from .process.base import base_problems
from .rules.functions import DEFAULT_REGISTRY, FunctionRegistry


@dataclass(frozen=True, order=True)
class Issue:
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.path}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Issue, ...] = ()
    warnings: tuple[Issue, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def lines(self) -> list[str]:
        return [f"ERROR {i}" for i in self.violations] + [f"WARNING {i}" for i in self.warnings]


class _Collector:
    def __init__(self):
        self.errors: set[Issue] = set()
        self.warnings: set[Issue] = set()

    def error(self, path: str, message: str) -> None:
        self.errors.add(Issue(path, message))

    def warn(self, path: str, message: str) -> None:
        self.warnings.add(Issue(path, message))


def _dupes(names) -> list[str]:
    return sorted(n for n, c in Counter(names).items() if c > 1)


def _check_contexts(b: ModelBundle, out: _Collector) -> None:
    for n in _dupes(c.name for c in b.contexts):
        out.error(f"context/{n}", "name declared more than once")
    ctxs = b.contexts_by_name
    for c in b.contexts:
        p = f"context/{c.name}"
        if c.kind is ContextKind.ATOMIC:
            if c.source is None:
                out.error(p, "atomic context has no source")
            if c.chart is not None:
                out.error(p, "atomic context must not name a statechart")
            if c.children:
                out.error(p, "atomic context must not have children")
        else:
            if c.source is not None:
                out.error(p, "composite context must not have a source")
            if c.chart is None:
                out.error(p, "composite context has no statechart")
            elif c.chart not in b.charts_by_name:
                out.error(p, f"statechart {c.chart!r} is not defined")
            if not c.children:
                out.error(p, "composite context has no children")
            for child in c.children:
                if child not in ctxs:
                    out.error(p, f"child context {child!r} is not defined")
        if c.source is not None:
            if c.source.kind is SourceKind.COMMUNITY and c.source.target not in b.communities_by_id:
                out.error(p, f"community {c.source.target!r} is not defined")
            if c.source.kind is SourceKind.SERVICE and c.source.target not in b.providers_by_id:
                out.error(p, f"provider {c.source.target!r} is not defined")
        if c.property_path:
            _check_property(b, p, c.property_path, c.value_type, out)

    # composite dependency cycles
    state: dict[str, int] = {}

    def visit(name: str, stack: list[str]) -> None:
        state[name] = 1
        for child in ctxs[name].children:
            if child not in ctxs:
                continue
            if state.get(child) == 1:
                cycle = stack[stack.index(child):] + [child] if child in stack else [name, child]
                out.error(f"context/{child}", f"composite dependency cycle {' -> '.join(cycle)}")
            elif child not in state:
                visit(child, stack + [child])
        state[name] = 2

    for name in sorted(ctxs):
        if name not in state:
            visit(name, [name])


def _check_property(b: ModelBundle, where: str, path: str, vtype: ValueType, out: _Collector) -> None:
    segs = path.split(".")
    if len(segs) < 2 or not b.concepts:
        return  # bare variable, or no ontology to check against
    concept = b.concepts_by_name.get(segs[0])
    if concept is None:
        out.error(where, f"concept {segs[0]!r} is not defined")
        return
    for seg in segs[1:-1]:
        target = concept.object_properties.get(seg)
        if target is None or target not in b.concepts_by_name:
            out.error(where, f"{concept.name} has no object property {seg!r}")
            return
        concept = b.concepts_by_name[target]
    dtype = concept.datatype_properties.get(segs[-1])
    if dtype is None:
        out.error(where, f"{concept.name} has no datatype property {segs[-1]!r}")
    elif dtype is not vtype and {dtype, vtype} != {ValueType.INTEGER, ValueType.DECIMAL}:
        out.error(where, f"{path} holds {dtype.value} but the context is {vtype.value}")


def _check_charts(b: ModelBundle, out: _Collector, functions: FunctionRegistry) -> None:
    for n in _dupes(c.name for c in b.charts):
        out.error(f"chart/{n}", "name declared more than once")
    users = {c.chart for c in b.contexts if c.chart}
    for chart in b.charts:
        p = f"chart/{chart.name}"
        for ctx in sorted(chart.referenced_contexts()):
            if ctx not in b.contexts_by_name:
                out.error(p, f"guard references undefined context {ctx!r}")
        for t in chart.transitions:
            for c in t.guard:
                if c.operator not in ("Eq", "Neq", "Lt", "Leq", "Gt", "Geq") and c.operator not in functions:
                    out.error(p, f"guard uses unknown function {c.operator!r}")
        if chart.name not in users:
            out.warn(p, "statechart is not used by any composite context")
    for c in b.contexts:
        chart = b.charts_by_name.get(c.chart) if c.chart else None
        if chart is not None:
            missing = sorted(chart.referenced_contexts() - set(c.children))
            for m in missing:
                out.warn(f"context/{c.name}", f"statechart guard reads {m!r}, which is not a child")


def _check_community(b: ModelBundle, out: _Collector) -> None:
    for n in _dupes(c.id for c in b.communities):
        out.error(f"community/{n}", "id declared more than once")
    for n in _dupes(p.id for p in b.providers):
        out.error(f"provider/{n}", "id declared more than once")
    sims = {s.id for s in b.simulations}
    for n in _dupes(s.id for s in b.simulations):
        out.error(f"simulate/{n}", "declared more than once")
    members = Counter(p.community for p in b.providers)
    for com in b.communities:
        if not members[com.id]:
            out.warn(f"community/{com.id}", "community has no providers")
    for p in b.providers:
        where = f"provider/{p.id}"
        if p.community not in b.communities_by_id:
            out.error(where, f"community {p.community!r} is not defined")
        ep = p.endpoint or p.id
        if ep not in sims:
            if p.endpoint:
                out.error(where, f"endpoint {p.endpoint!r} has no simulate block")
            else:
                out.warn(where, "provider has no simulated endpoint and will always fail")


def _check_services(b: ModelBundle, out: _Collector) -> None:
    for n in _dupes(s.name for s in b.services):
        out.error(f"service/{n}", "name declared more than once")
    for n in _dupes(e.name for e in b.endpoints):
        out.error(f"endpoint/{n}", "name declared more than once")
    for svc in b.services:
        for n in _dupes(op.name for op in svc.operations):
            out.error(f"service/{svc.name}/{n}", "operation declared more than once")
        for op in svc.operations:
            for msg in (op.input, op.output):
                if msg is not None:
                    for n in _dupes(p.name for p in msg.parts):
                        out.error(f"service/{svc.name}/{op.name}/{msg.name}", f"part {n!r} declared more than once")
    for c in b.concepts:
        p = f"concept/{c.name}"
        for name in sorted(set(c.datatype_properties) & set(c.object_properties)):
            out.error(p, f"{name!r} is both a datatype and an object property")
        for name, target in sorted(c.object_properties.items()):
            if target not in b.concepts_by_name:
                out.error(p, f"object property {name!r} targets undefined concept {target!r}")


def _check_bindings(b: ModelBundle, out: _Collector) -> None:
    for n in _dupes(str(x.target) for x in b.bindings):
        out.error(f"binding/{n}", "more than one context is bound to this part")
    for n in _dupes(x.context for x in b.bindings):
        out.error(f"binding/{n}", "context is bound to more than one part")
    for x in b.bindings:
        p = f"binding/{x.context}->{x.target}"
        ctx = b.contexts_by_name.get(x.context)
        if ctx is None:
            out.error(p, f"context {x.context!r} is not defined")
        if x.target.part is None:
            out.error(p, "binding target must address a message part")
            continue
        part = b.resolve_part(x.target)
        if part is None:
            out.error(p, f"{x.target} does not resolve to a declared part")
        elif ctx is not None and part.type is not ctx.value_type:
            out.error(p, f"type mismatch: context is {ctx.value_type.value}, part is {part.type.value}")


def _check_triggers(b: ModelBundle, out: _Collector, functions: FunctionRegistry) -> None:
    for n in _dupes(t.name for t in b.triggers):
        out.error(f"trigger/{n}", "name declared more than once")
    rule_ids = set(b.rules_by_id)
    for t in b.triggers:
        p = f"trigger/{t.name}"
        if t.name in rule_ids:
            out.error(p, "trigger name clashes with a rule id")
        if not b.path_exists(t.target):
            out.error(p, f"target {t.target} does not resolve")
        for c in t.constraints:
            if len(c.operands) < 2 or not isinstance(c.operands[0], ContextRef):
                out.error(p, f"constraint {c} must start with a context and have two or more operands")
            if c.operator not in ("Eq", "Neq", "Lt", "Leq", "Gt", "Geq") and c.operator not in functions:
                out.error(p, f"unknown constraint function {c.operator!r}")
            for name in c.contexts():
                if name not in b.contexts_by_name:
                    out.error(p, f"constraint references undefined context {name!r}")


def _check_processes(b: ModelBundle, out: _Collector) -> None:
    for n in _dupes(p.name for p in b.processes):
        out.error(f"process/{n}", "name declared more than once")
    endpoints = set(b.endpoints_by_name)
    for proc in b.processes:
        pp = f"process/{proc.name}"
        for msg in base_problems(proc):
            out.error(pp, msg)
        for n in _dupes(v.name for v in proc.variables):
            out.error(pp, f"variable {n!r} declared more than once")
        for act in proc.activities:
            ap = f"{pp}/{act.name}"
            if act.operation:
                svc = b.services_by_name.get(act.service)
                if svc is None or act.operation_name is None or svc.operation(act.operation_name) is None:
                    out.error(ap, f"operation {act.operation!r} is not declared by any service")
            if act.resolved_endpoint not in endpoints:
                out.error(ap, f"endpoint {act.resolved_endpoint!r} cannot be resolved")
        for ev in proc.events:
            for h in ev.handles:
                if h not in {a.name for a in proc.activities}:
                    out.error(f"{pp}/{ev.name}", f"fault handler names unknown activity {h!r}")


def _check_rules_and_aspects(b: ModelBundle, out: _Collector) -> None:
    for n in _dupes(r.id for r in b.rules):
        out.error(f"rule/{n}", "id declared more than once")
    rule_ids = set(b.rules_by_id) | {t.name for t in b.triggers}
    activities = {a.name: a for p in b.processes for a in p.activities}
    for n in _dupes(f"{a.kind.value}:{a.target}" for a in b.aspects):
        out.error(f"aspect/{n}", "more than one aspect for this kind and target")
    for a in b.aspects:
        p = f"aspect/{a.id}"
        act = activities.get(a.target)
        if act is None:
            out.error(p, f"target activity {a.target!r} does not exist")
        elif not act.variable:
            out.warn(p, f"activity {a.target!r} is not marked variable")
        for rid in a.rules:
            if rid not in rule_ids:
                # rules resolve at activation time, so a missing one may be hot-added later
                out.warn(p, f"rule {rid!r} is not in the initial rule set")


def validate_bundle(bundle: ModelBundle, functions: FunctionRegistry = DEFAULT_REGISTRY) -> ValidationReport:
    out = _Collector()
    _check_contexts(bundle, out)
    _check_charts(bundle, out, functions)
    _check_community(bundle, out)
    _check_services(bundle, out)
    _check_bindings(bundle, out)
    _check_triggers(bundle, out, functions)
    _check_processes(bundle, out)
    _check_rules_and_aspects(bundle, out)
    return ValidationReport(tuple(sorted(out.errors)), tuple(sorted(out.warnings)))
