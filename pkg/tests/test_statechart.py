from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from contextserv.errors import InvalidChart, MissingContext
from contextserv.model import ContextConstraint, ContextDefinition, ContextKind, ContextRef, ValueType
from contextserv.statechart import (
    ChartInstance,
    CompositeEvaluator,
    Transition,
    current_composite_value,
    dependency_order,
    load_statechart,
    step,
)

T, W = ContextRef("temperature"), ContextRef("windSpeed")


def harsh_chart():
    return load_statechart(
        "harshChart",
        ["mild", "harsh"],
        "mild",
        [
            Transition("mild", (ContextConstraint("Gt", (T, 30)), ContextConstraint("Gt", (W, 25))), "harsh"),
            Transition("harsh", (ContextConstraint("Leq", (T, 30)),), "mild"),
        ],
        {"mild": False, "harsh": True},
    )


def test_harsh_chart_loads():
    chart = harsh_chart()
    assert chart.initial == "mild"
    assert chart.referenced_contexts() == {"temperature", "windSpeed"}


def test_mild_to_harsh():
    inst = ChartInstance.start(harsh_chart())
    nxt = step(inst, {"temperature": 35, "windSpeed": 30}, now=100)
    assert nxt.current == "harsh"
    assert current_composite_value(nxt, "harshWeather").value is True
    assert current_composite_value(nxt).measured_at == 100


def test_no_guard_true_keeps_state():
    inst = ChartInstance(harsh_chart(), "harsh")
    assert step(inst, {"temperature": 35, "windSpeed": 0}, 1).current == "harsh"


def test_mild_emits_false():
    assert current_composite_value(ChartInstance.start(harsh_chart())).value is False


def test_missing_guard_context():
    with pytest.raises(MissingContext):
        step(ChartInstance.start(harsh_chart()), {"temperature": 35}, 0)


def test_first_declared_guard_wins():
    g1 = (ContextConstraint("Gt", (T, 0)),)
    g2 = (ContextConstraint("Gt", (T, 1)),)
    for order, expect in (([("a", g1, "b"), ("a", g2, "c")], "b"), ([("a", g2, "c"), ("a", g1, "b")], "c")):
        chart = load_statechart("c", ["a", "b", "c"], "a", [Transition(*t) for t in order],
                                {"a": 0, "b": 1, "c": 2})
        assert step(ChartInstance.start(chart), {"temperature": 5}, 0).current == expect


def test_undeclared_target_rejected():
    with pytest.raises(InvalidChart):
        load_statechart("c", ["a"], "a", [Transition("a", (), "z")], {"a": True})


@pytest.mark.parametrize("kw", [
    dict(states=["a"], initial="b", emission={"a": 1}),
    dict(states=["a", "b"], initial="a", emission={"a": 1}),
    dict(states=["a", "b"], initial="a", emission={"a": 1, "b": "x"}),
    dict(states=["a", "a"], initial="a", emission={"a": 1}),
    dict(states=[], initial="a", emission={}),
])
def test_invariant_violations(kw):
    with pytest.raises(InvalidChart):
        load_statechart("c", kw["states"], kw["initial"], [], kw["emission"])


def test_duplicate_transition_rejected():
    g = (ContextConstraint("Gt", (T, 0)),)
    with pytest.raises(InvalidChart):
        load_statechart("c", ["a", "b"], "a", [Transition("a", g, "b"), Transition("a", g, "a")], {"a": 0, "b": 1})


def test_single_state_constant():
    chart = load_statechart("one", ["only"], "only", [], {"only": True})
    inst = ChartInstance.start(chart)
    for now in (0, 10, 10_000):
        inst = step(inst, {}, now)
        assert current_composite_value(inst).value is True


def test_one_transition_per_step():
    # a -> b -> c are both enabled, but one step moves only one hop
    g = (ContextConstraint("Gt", (T, 0)),)
    chart = load_statechart("c", ["a", "b", "c"], "a", [Transition("a", g, "b"), Transition("b", g, "c")],
                            {"a": 0, "b": 1, "c": 2})
    inst = step(ChartInstance.start(chart), {"temperature": 1}, 0)
    assert inst.current == "b"


# random charts
@st.composite
def charts(draw, forward_only=False):
    n = draw(st.integers(1, 10))
    states = [f"s{i}" for i in range(n)]
    transitions = []
    seen = set()
    for _ in range(draw(st.integers(0, 15))):
        src = draw(st.integers(0, n - 1))
        dst = draw(st.integers(src + 1 if forward_only else 0, n - 1)) if (not forward_only or src < n - 1) else None
        if dst is None:
            continue
        k = draw(st.integers(-3, 3))
        guard = (ContextConstraint(draw(st.sampled_from(["Gt", "Lt", "Eq"])), (T, k)),)
        if (src, guard) in seen:
            continue
        seen.add((src, guard))
        transitions.append(Transition(states[src], guard, states[dst]))
    return load_statechart("r", states, "s0", transitions, {s: i for i, s in enumerate(states)})


@settings(max_examples=1000, deadline=None)
@given(charts(), st.integers(-4, 4), st.integers(0, 9))
def test_step_is_deterministic_and_safe(chart, temp, start):
    state = chart.states[start % len(chart.states)]
    inst = ChartInstance(chart, state, 0)
    a = step(inst, {"temperature": temp}, 5)
    b = step(inst, {"temperature": temp}, 5)
    assert a == b
    assert a.current in chart.states


@settings(max_examples=300, deadline=None)
@given(charts(forward_only=True), st.integers(-4, 4))
def test_fixpoint_without_guard_cycles(chart, temp):
    # with forward-only transitions there are no guard cycles; the state
    # after two identical-env steps equals the state after three once the
    # chart has settled (it can move at most len(states) - 1 hops)
    inst = ChartInstance.start(chart)
    env = {"temperature": temp}
    for _ in range(len(chart.states)):
        inst = step(inst, env, 0)
    two = step(step(inst, env, 0), env, 0)
    three = step(two, env, 0)
    assert two.current == three.current


def _ctx(name, children=(), chart=None):
    kind = ContextKind.COMPOSITE if children else ContextKind.ATOMIC
    return ContextDefinition(name, kind, ValueType.BOOLEAN, None, chart, tuple(children))


def test_dependency_order_children_first():
    ctxs = {c.name: c for c in (_ctx("top", ["mid", "a"], "c"), _ctx("mid", ["a", "b"], "c"), _ctx("a"), _ctx("b"))}
    order = dependency_order(ctxs)
    for c in ctxs.values():
        for child in c.children:
            assert order.index(child) < order.index(c.name)


def test_dependency_cycle_rejected():
    ctxs = {"x": _ctx("x", ["y"], "c"), "y": _ctx("y", ["x"], "c")}
    with pytest.raises(InvalidChart):
        dependency_order(ctxs)


def test_composite_evaluator_nested():
    inner = load_statechart("inner", ["off", "on"], "off",
                            [Transition("off", (ContextConstraint("Eq", (ContextRef("a"), True)),), "on")],
                            {"off": False, "on": True})
    outer = load_statechart("outer", ["calm", "alert"], "calm",
                            [Transition("calm", (ContextConstraint("Eq", (ContextRef("mid"), True)),), "alert")],
                            {"calm": "calm", "alert": "alert"})
    ctxs = {c.name: c for c in (_ctx("a"), _ctx("mid", ["a"], "inner"), _ctx("top", ["mid"], "outer"))}
    ev = CompositeEvaluator(ctxs, {"inner": inner, "outer": outer})
    env = {"a": True}
    assert ev.evaluate("top", env, 1).value == "alert"
    assert env["mid"] is True
