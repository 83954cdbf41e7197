"""Condition evaluation and action execution over a variable environment.

The environment is a plain dict.  Concept instances are dicts keyed by
property name (object properties nest), a concept with several instances is
a list of such dicts, and ordinary process variables are bare names.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Protocol

from ..errors import ConnectorError, FunctionError, RuleTypeError, UnboundProperty
from . import ast as A
from .functions import DEFAULT_REGISTRY, FunctionRegistry

_MISSING = object()


class ActivityConnector(Protocol):
    def invoke_activity(self, name: str, env: dict) -> Any: ...


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _as_number(s: str):
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return None


def _base(path: A.PropertyPath, env: dict):
    if path.concept not in env:
        raise UnboundProperty(f"unbound variable {path.concept!r}")
    var = env[path.concept]
    if path.instance_index is not None:
        if not isinstance(var, (list, tuple)) or not 1 <= path.instance_index <= len(var):
            raise UnboundProperty(f"no instance {path.instance_index} of {path.concept!r}")
        return var[path.instance_index - 1]
    if not path.is_bare and isinstance(var, (list, tuple)) and var and isinstance(var[0], dict):
        return var[0]
    return var


def lookup(path: A.PropertyPath, env: dict):
    obj = _base(path, env)
    if path.is_bare:
        return obj
    for name in (*path.object_hops, path.datatype_prop):
        if not isinstance(obj, dict) or name not in obj:
            raise UnboundProperty(f"unbound property {path.dotted()!r}")
        obj = obj[name]
    return obj


def store(path: A.PropertyPath, env: dict, value) -> None:
    """Write ``value`` at ``path``, creating intermediate instance dicts."""
    if path.is_bare:
        if path.instance_index is None:
            env[path.concept] = value
            return
        var = env.get(path.concept)
        if not isinstance(var, list) or not 1 <= path.instance_index <= len(var):
            raise UnboundProperty(f"no instance {path.instance_index} of {path.concept!r}")
        var[path.instance_index - 1] = value
        return
    if path.instance_index is None and not isinstance(env.get(path.concept, _MISSING), (dict, list)):
        env[path.concept] = {}
    obj = _base(path, env)
    for name in path.object_hops:
        if not isinstance(obj, dict):
            raise UnboundProperty(f"cannot write through {path.dotted()!r}")
        obj = obj.setdefault(name, {})
    if not isinstance(obj, dict):
        raise UnboundProperty(f"cannot write through {path.dotted()!r}")
    obj[path.datatype_prop] = value


def compare_values(left, op: A.RelOp, right) -> bool:
    if isinstance(left, bool) or isinstance(right, bool):
        if not (isinstance(left, bool) and isinstance(right, bool)):
            raise RuleTypeError(f"cannot compare {left!r} with {right!r}")
        if op is not A.RelOp.EQ:
            raise RuleTypeError("booleans support only 'equal to'")
        return left == right
    if _is_number(left) and isinstance(right, str):
        coerced = _as_number(right)
        left, right = (left, coerced) if coerced is not None else (str(left), right)
    elif isinstance(left, str) and _is_number(right):
        coerced = _as_number(left)
        left, right = (coerced, right) if coerced is not None else (left, str(right))
    if _is_number(left) and _is_number(right) or isinstance(left, str) and isinstance(right, str):
        pass
    elif op is A.RelOp.EQ and type(left) is type(right):
        return left == right
    else:
        raise RuleTypeError(f"cannot compare {left!r} with {right!r}")
    if op is A.RelOp.LT:
        return left < right
    if op is A.RelOp.LEQ:
        return left <= right
    if op is A.RelOp.EQ:
        return left == right
    if op is A.RelOp.GEQ:
        return left >= right
    return left > right


def _arith(left, op: str, right):
    if isinstance(left, str) and isinstance(right, str) and op == "+":
        return left + right
    if isinstance(left, str) and _is_number(right):
        left = _as_number(left)
    elif isinstance(right, str) and _is_number(left):
        right = _as_number(right)
    if not (_is_number(left) and _is_number(right)):
        raise RuleTypeError(f"cannot apply {op!r} to {left!r} and {right!r}")
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if right == 0:
        raise FunctionError("division by zero")
    return left / right


def evaluate_term(t, env: dict, functions: FunctionRegistry = DEFAULT_REGISTRY):
    if isinstance(t, A.Const):
        return t.value
    if isinstance(t, A.PropertyRef):
        return lookup(t.path, env)
    if isinstance(t, A.Arith):
        return _arith(evaluate_term(t.left, env, functions), t.op, evaluate_term(t.right, env, functions))
    if isinstance(t, A.FunCall):
        # arguments are copied so a function can never reach back into env
        args = [copy.deepcopy(evaluate_term(a, env, functions)) for a in t.args]
        return functions.call(t.name, args)
    raise TypeError(f"not a term: {t!r}")


def evaluate_condition(c, env: dict, functions: FunctionRegistry = DEFAULT_REGISTRY) -> bool:
    if isinstance(c, A.Compare):
        return compare_values(evaluate_term(c.left, env, functions), c.op, evaluate_term(c.right, env, functions))
    if isinstance(c, A.Not):
        return not evaluate_condition(c.operand, env, functions)
    if isinstance(c, A.And):
        return evaluate_condition(c.left, env, functions) and evaluate_condition(c.right, env, functions)
    if isinstance(c, A.Or):
        return evaluate_condition(c.left, env, functions) or evaluate_condition(c.right, env, functions)
    raise TypeError(f"not a condition: {c!r}")


@dataclass
class ActionOutcome:
    env: dict
    control: A.Control = A.Control.CONTINUE
    skips: set = field(default_factory=set)
    replacements: dict = field(default_factory=dict)
    invoked: list = field(default_factory=list)

    def raise_control(self, level: A.Control) -> None:
        if level > self.control:
            self.control = level


class ActionError(Exception):
    """Internal carrier attaching the failing action index to the cause."""

    def __init__(self, index: int, cause: Exception):
        super().__init__(str(cause))
        self.index = index
        self.cause = cause


def execute_actions(
    rule: A.RuleAst | tuple,
    env: dict,
    connector: ActivityConnector | None = None,
    functions: FunctionRegistry = DEFAULT_REGISTRY,
    copy_env: bool = True,
) -> ActionOutcome:
    """Run a rule's actions in order; the caller has already checked the condition.

    Raises ``ActionError`` wrapping the original exception (ConnectorError,
    FunctionError, ...) together with the index of the action that failed.
    """
    actions = rule.actions if isinstance(rule, A.RuleAst) else tuple(rule)
    out = ActionOutcome(copy.deepcopy(env) if copy_env else env)
    for index, act in enumerate(actions):
        try:
            stop = _run_action(act, out, connector, functions)
        except Exception as exc:
            raise ActionError(index, exc) from exc
        if stop:
            break
    return out


def _invoke(name: str, out: ActionOutcome, connector) -> None:
    if connector is None:
        raise ConnectorError(f"no connector available to invoke {name!r}")
    try:
        result = connector.invoke_activity(name, copy.deepcopy(out.env))
    except ConnectorError:
        raise
    except Exception as exc:
        raise ConnectorError(f"invocation of {name!r} failed: {exc}") from exc
    out.invoked.append(name)
    if isinstance(result, dict):
        out.env.update(copy.deepcopy(result))


def _run_action(act, out: ActionOutcome, connector, functions: FunctionRegistry) -> bool:
    env = out.env
    if isinstance(act, A.Assign):
        store(act.target, env, copy.deepcopy(evaluate_term(act.value, env, functions)))
    elif isinstance(act, A.CallAction):
        result = evaluate_term(act.call, env, functions)
        fdef = functions.get(act.call.name)
        if fdef.target_arg is not None and fdef.target_arg < len(act.call.args):
            target = act.call.args[fdef.target_arg]
            if isinstance(target, A.PropertyRef):
                store(target.path, env, result)
    elif isinstance(act, A.InvokeActivity):
        _invoke(act.name, out, connector)
    elif isinstance(act, A.Skip):
        out.skips.add(act.activity)
        out.raise_control(A.Control.SKIP)
    elif isinstance(act, A.SkipThen):
        out.replacements[act.skipped] = act.replacement
        out.raise_control(A.Control.REPLACE)
    elif isinstance(act, A.Abort):
        out.raise_control(A.Control.ABORT)
        return True
    elif isinstance(act, A.InvokeThenAbort):
        _invoke(act.activity, out, connector)
        out.raise_control(A.Control.ABORT)
        return True
    else:
        raise TypeError(f"not an action: {act!r}")
    return False
