from __future__ import annotations

import threading

import pytest
from hypothesis import given, strategies as st

from contextserv.errors import (
    DuplicateAspect,
    DuplicateRule,
    RuleEvaluationError,
    UnknownActivity,
    UnknownRule,
    UnmappableAction,
)
from contextserv.model import (
    CAObjectPath,
    ContextConstraint,
    ContextDefinition,
    ContextKind,
    ContextRef,
    ContextTriggerSpec,
    ValueType,
    evaluate_constraints,
)
from contextserv.rules import ast as A
from contextserv.rules import evaluate_condition, parse_rule
from contextserv.weave import (
    Add,
    Aspect,
    AspectKind,
    Position,
    Remove,
    Replace,
    RuleStore,
    activate,
    store_mutate,
    trigger_to_rule,
    weave,
)

R1 = ('rule R1 { [Cond] Weather.temperature greater than {t} and Weather.windspeed greater than 25 '
      '[Action] Filter("Filter out outdoor activities", ActivityList) }')
ITEMS = ["outdoor:beach", "indoor:museum", "outdoor:zoo", "indoor:aquarium"]


def r1(threshold=30):
    return parse_rule(R1.replace("{t}", str(threshold)))


def harsh_env(temp=35, wind=30):
    return {"Weather": {"temperature": temp, "windspeed": wind}, "ActivityList": list(ITEMS)}


class Base:
    def __init__(self, *names):
        self.names = names

    def activity_names(self):
        return self.names


AFTER_FIND = Aspect(AspectKind.AFTER, "find", ("R1",), ("Weather", "ActivityList"))


# weave
def test_after_aspect_gives_one_post_point():
    woven = weave(Base("find", "book"), [AFTER_FIND])
    assert list(woven.join_points) == [("find", Position.POST)]
    assert woven.post("find").aspects == (AFTER_FIND,) and woven.pre("find") is None


def test_before_and_around_merge():
    before = Aspect(AspectKind.BEFORE, "find", ("A",))
    around = Aspect(AspectKind.AROUND, "find", ("B",))
    for order in ([before, around], [around, before]):
        woven = weave(Base("find"), order)
        assert len(woven.join_points) == 1
        pre = woven.pre("find")
        assert pre.aspects == (before, around) and pre.around


def test_weave_errors():
    with pytest.raises(UnknownActivity):
        weave(Base("find"), [Aspect(AspectKind.AFTER, "missing", ())])
    with pytest.raises(DuplicateAspect):
        weave(Base("find"), [AFTER_FIND, Aspect(AspectKind.AFTER, "find", ("R2",))])


# activation
def test_r1_filters_outdoor_activities():
    rec = activate(AFTER_FIND, harsh_env(), RuleStore([r1()]))
    assert rec.variables_out["ActivityList"] == ["indoor:museum", "indoor:aquarium"]
    assert rec.control is A.Control.CONTINUE and rec.fired == ("R1",)


def test_no_matching_rule_is_identity():
    env = harsh_env(wind=10)
    rec = activate(AFTER_FIND, env, RuleStore([r1()]))
    assert rec.variables_out == rec.variables_in == env and rec.fired == ()


def test_activation_does_not_touch_caller_env():
    env = harsh_env()
    activate(AFTER_FIND, env, RuleStore([r1()]))
    assert env["ActivityList"] == ITEMS


def test_priority_then_declaration_order():
    rules = [parse_rule("rule A { [Cond] true equal to true [Action] y = y + \"a\" }"),
             parse_rule("rule B { [Priority] 5 [Cond] true equal to true [Action] y = y + \"b\" }"),
             parse_rule("rule C { [Cond] true equal to true [Action] y = y + \"c\" }")]
    rec = activate(Aspect(AspectKind.AFTER, "t", ("A", "B", "C")), {"y": ""}, RuleStore(rules))
    assert rec.variables_out["y"] == "bac" and rec.fired == ("B", "A", "C")


def test_earlier_writes_visible_to_later_rules():
    rules = [parse_rule("rule A { [Cond] x equal to 0 [Action] x = 1 }"),
             parse_rule("rule B { [Cond] x equal to 1 [Action] y = 2 }")]
    rec = activate(Aspect(AspectKind.AFTER, "t", ("A", "B")), {"x": 0, "y": 0}, RuleStore(rules))
    assert rec.variables_out == {"x": 1, "y": 2}


def test_strongest_control_and_abort_stops():
    rules = [parse_rule("rule A { [Cond] true equal to true [Action] Skip t }"),
             parse_rule("rule B { [Cond] true equal to true [Action] Abort }"),
             parse_rule("rule C { [Cond] true equal to true [Action] x = 1 }")]
    rec = activate(Aspect(AspectKind.BEFORE, "t", ("A", "B", "C")), {}, RuleStore(rules))
    assert rec.control is A.Control.ABORT and rec.fired == ("A", "B") and "x" not in rec.variables_out


def test_rule_error_carries_rule_and_action():
    rules = [parse_rule("rule Bad { [Cond] true equal to true [Action] x = 1; y = 1 / 0 }")]
    with pytest.raises(RuleEvaluationError) as info:
        activate(Aspect(AspectKind.AFTER, "t", ("Bad",)), {}, RuleStore(rules))
    assert info.value.rule_id == "Bad" and info.value.action_index == 1


def test_missing_rule_ids_are_skipped():
    rec = activate(Aspect(AspectKind.AFTER, "t", ("gone",)), {"x": 1}, RuleStore())
    assert rec.variables_out == {"x": 1}


def test_activation_line_format():
    rec = activate(AFTER_FIND, harsh_env(), RuleStore([r1()]), now=42)
    assert rec.to_line("i1") == "ACTIVATION i1 after:find 0 CONTINUE 42 R1"


# rule store
def test_store_versions():
    store = RuleStore([r1()])
    assert store.version == 0
    assert store_mutate(store, Replace("R1", r1(25))) == 1
    assert store.snapshot().get("R1") == r1(25)
    assert store_mutate(store, Add(parse_rule("rule R2 { [Cond] 1 equal to 1 [Action] }"))) == 2
    assert store_mutate(store, Remove("R2")) == 3
    assert store.committed == [0, 1, 2, 3]


def test_store_errors_leave_version_alone():
    store = RuleStore([r1()])
    with pytest.raises(DuplicateRule):
        store.add(r1())
    with pytest.raises(UnknownRule):
        store.remove("nope")
    with pytest.raises(UnknownRule):
        store.replace("nope", r1())
    assert store.version == 0
    with pytest.raises(DuplicateRule):
        RuleStore([r1(), r1()])


def test_replace_renames_to_target_id():
    store = RuleStore([r1()])
    other = parse_rule("rule Other { [Cond] 1 equal to 1 [Action] }")
    store.replace("R1", other)
    assert store.ids() == ["R1"] and store.snapshot().get("R1").id == "R1"


def test_removing_last_rule_makes_aspect_a_no_op():
    store = RuleStore([r1()])
    store.remove("R1")
    rec = activate(AFTER_FIND, harsh_env(), store)
    assert rec.variables_out["ActivityList"] == ITEMS and rec.store_version == 1


def test_snapshot_taken_before_swap_keeps_old_rule():
    store = RuleStore([r1(30)])
    snap = store.snapshot()
    store.replace("R1", r1(25))
    env = harsh_env(temp=28)
    assert activate(AFTER_FIND, env, snap).fired == ()
    assert activate(AFTER_FIND, env, store).fired == ("R1",)


def test_hot_swap_stress_is_atomic():
    # rule V at version k writes k, so every record must match its version
    store = RuleStore([parse_rule("rule V { [Cond] true equal to true [Action] seen = 0 }")])
    aspect = Aspect(AspectKind.AFTER, "t", ("V",))
    records, errors = [], []

    def writer():
        for k in range(1, 501):
            store.replace("V", parse_rule(f"rule V {{ [Cond] true equal to true [Action] seen = {k} }}"))

    def reader():
        try:
            for _ in range(500):
                records.append(activate(aspect, {"seen": -1}, store))
        except Exception as exc:  # pragma: no cover - reported below
            errors.append(exc)

    threads = [threading.Thread(target=writer), threading.Thread(target=reader), threading.Thread(target=reader)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors and len(records) == 1000
    committed = set(store.committed)
    for rec in records:
        assert rec.store_version in committed
        assert rec.variables_out["seen"] == rec.store_version


# triggers
CONTEXTS = {
    "temperature": ContextDefinition("temperature", ContextKind.ATOMIC, ValueType.DECIMAL,
                                     property_path="Weather.temperature"),
    "harshWeather": ContextDefinition("harshWeather", ContextKind.ATOMIC, ValueType.BOOLEAN),
}
TARGET = CAObjectPath.parse("attractionFinder.find.output.ActivityList")


def _trigger(constraints, actions=()):
    return ContextTriggerSpec("T", tuple(constraints), tuple(actions), TARGET)


def test_weather_trigger_to_rule():
    filt = parse_rule(R1.replace("{t}", "30")).actions
    trig = _trigger([ContextConstraint("Gt", (ContextRef("temperature"), 30))], filt)
    rule, aspect = trigger_to_rule(trig, "find", CONTEXTS)
    assert rule.rule_type is A.RuleType.ACTION and rule.actions == filt
    assert rule.condition == A.Compare(A.PropertyRef(A.PropertyPath("Weather", None, (), "temperature")),
                                       A.RelOp.GT, A.Const(30))
    assert aspect.kind is AspectKind.AFTER and aspect.target == "find" and aspect.rules == ("T",)
    assert set(aspect.extras) == {"Weather", "ActivityList"}


def test_empty_constraints_always_fire():
    rule, _ = trigger_to_rule(_trigger([]), "find")
    assert rule.condition == A.TRUE_CONDITION and evaluate_condition(rule.condition, {})


def test_boolean_trigger_equivalence():
    trig = _trigger([ContextConstraint("Eq", (ContextRef("harshWeather"), True))])
    rule, _ = trigger_to_rule(trig, "find", CONTEXTS)
    assert rule.condition == A.Compare(A.PropertyRef(A.PropertyPath("harshWeather")), A.RelOp.EQ, A.Const(True))
    for v in (True, False):
        assert evaluate_condition(rule.condition, {"harshWeather": v}) == evaluate_constraints(
            trig.constraints, {"harshWeather": v})


def test_unmappable_action():
    with pytest.raises(UnmappableAction):
        trigger_to_rule(_trigger([], ["not an action"]), "find")


constraint_st = st.builds(
    lambda op, name, k: ContextConstraint(op, (ContextRef(name), k)),
    st.sampled_from(["Eq", "Neq", "Lt", "Leq", "Gt", "Geq"]), st.sampled_from(["a", "b"]), st.integers(-3, 3))


@given(st.lists(constraint_st, max_size=5), st.integers(-4, 4), st.integers(-4, 4))
def test_trigger_rule_agrees_with_constraints(cs, a, b):
    rule, _ = trigger_to_rule(_trigger(cs), "find")
    env = {"a": a, "b": b}
    assert evaluate_condition(rule.condition, env) == evaluate_constraints(cs, env)
