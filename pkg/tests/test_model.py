from __future__ import annotations

import operator

import pytest
from hypothesis import given, strategies as st

from contextserv.errors import InvalidPath, MissingContext, TypeMismatch
from contextserv.model import (
    CAObjectPath,
    ContextBindingSpec,
    ContextConstraint,
    ContextRef,
    MessageDir,
    ValueType,
    coerce_value,
    evaluate_constraint,
    evaluate_constraints,
    resolve_binding,
    value_matches,
)

T, W, H = ContextRef("temperature"), ContextRef("windSpeed"), ContextRef("harshWeather")


def test_eq_on_boolean_context():
    assert evaluate_constraint(ContextConstraint("Eq", (H, True)), {"harshWeather": True})


def test_leq_boundary_is_inclusive():
    assert evaluate_constraint(ContextConstraint("Leq", (W, 25)), {"windSpeed": 25})


@given(st.floats(allow_nan=False) | st.integers())
def test_strict_order_is_irreflexive(v):
    assert not evaluate_constraint(ContextConstraint("Lt", (T, T)), {"temperature": v})


def test_decimal_equality_is_exact():
    env = {"x": 0.1 + 0.2}
    assert not evaluate_constraint(ContextConstraint("Eq", (ContextRef("x"), 0.3)), env)


def test_missing_context_raises():
    with pytest.raises(MissingContext):
        evaluate_constraint(ContextConstraint("Gt", (T, 30)), {})


def test_type_mismatch_raises():
    with pytest.raises(TypeMismatch):
        evaluate_constraint(ContextConstraint("Gt", (T, "hot")), {"temperature": 31})
    with pytest.raises(TypeMismatch):
        evaluate_constraint(ContextConstraint("Lt", (H, False)), {"harshWeather": True})


def test_first_operand_must_be_context():
    with pytest.raises(TypeMismatch):
        evaluate_constraint(ContextConstraint("Eq", (1, T)), {"temperature": 1})


def test_prefix_function_constraint():
    c = ContextConstraint("max", (T, W))
    with pytest.raises(TypeMismatch):  # max returns a number, not a boolean
        evaluate_constraint(c, {"temperature": 1, "windSpeed": 2})


_OPS = {"Eq": operator.eq, "Neq": operator.ne, "Lt": operator.lt, "Leq": operator.le, "Gt": operator.gt,
        "Geq": operator.ge}
constraint_st = st.builds(
    lambda op, name, k: ContextConstraint(op, (ContextRef(name), k)),
    st.sampled_from(sorted(_OPS)), st.sampled_from(["a", "b", "c"]), st.integers(-5, 5),
)


@given(st.lists(constraint_st, max_size=8), st.fixed_dictionaries({n: st.integers(-5, 5) for n in "abc"}))
def test_conjunction_equals_and_of_parts(cs, env):
    expected = True
    for c in cs:
        expected = expected and _OPS[c.operator](env[c.operands[0].name], c.operands[1])
    assert evaluate_constraints(cs, env) == expected


def test_empty_conjunction_is_true():
    assert evaluate_constraints((), {})


def test_resolve_binding_city():
    b = ContextBindingSpec("userLocation", CAObjectPath.parse("attractionFinder.find.input.city"))
    env = {"userLocation": "Sydney"}
    path, value = resolve_binding(b, env)
    assert (path.service, path.operation, path.message, path.part) == ("attractionFinder", "find", MessageDir.INPUT,
                                                                       "city")
    assert value == "Sydney"
    assert env == {"userLocation": "Sydney"}


def test_resolve_binding_missing():
    b = ContextBindingSpec("userLocation", CAObjectPath.parse("attractionFinder.find.input.city"))
    with pytest.raises(MissingContext):
        resolve_binding(b, {})


def test_resolve_binding_zero_passes_through():
    b = ContextBindingSpec("x", CAObjectPath.parse("s.o.input.p"))
    assert resolve_binding(b, {"x": 0})[1] == 0


@given(st.sampled_from([ValueType.INTEGER, ValueType.DECIMAL, ValueType.TEXT, ValueType.BOOLEAN]),
       st.one_of(st.integers(-100, 100), st.booleans(), st.text(max_size=5),
                 st.floats(-100, 100, allow_nan=False)))
def test_resolved_value_matches_part_type(vt, value):
    b = ContextBindingSpec("x", CAObjectPath.parse("s.o.input.p"))
    try:
        _, out = resolve_binding(b, {"x": value}, vt)
    except TypeMismatch:
        return
    assert value_matches(vt, out)


def test_coerce_int_to_decimal():
    assert coerce_value(ValueType.DECIMAL, 3) == 3.0
    assert isinstance(coerce_value(ValueType.DECIMAL, 3), float)


@pytest.mark.parametrize("text", ["s", "s.o", "s.o.input", "s.o.output.p"])
def test_path_round_trip(text):
    assert str(CAObjectPath.parse(text)) == text


def test_path_hierarchy_invariants():
    with pytest.raises(InvalidPath):
        CAObjectPath("s", None, MessageDir.INPUT)
    with pytest.raises(InvalidPath):
        CAObjectPath("s", "o", None, "p")
    with pytest.raises(InvalidPath):
        CAObjectPath.parse("s.o.sideways.p")
