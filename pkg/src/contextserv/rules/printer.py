"""Canonical printer for rule ASTs.

Parentheses are emitted only where precedence or left associativity would
otherwise change the tree, so ``parse(pretty_print(ast)) == ast``.
"""

from __future__ import annotations

from . import ast as A

_COND_PREC = {A.Or: 1, A.And: 2, A.Not: 3, A.Compare: 4}
_AR_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_const(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        out = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
        return f'"{out}"'
    raise TypeError(f"cannot print constant {value!r}")


def print_path(path: A.PropertyPath) -> str:
    return path.dotted()


def _term_prec(t) -> int:
    return _AR_PREC[t.op] if isinstance(t, A.Arith) else 3


def print_term(t, min_prec: int = 0) -> str:
    if isinstance(t, A.Const):
        return format_const(t.value)
    if isinstance(t, A.PropertyRef):
        return print_path(t.path)
    if isinstance(t, A.FunCall):
        return f"{t.name}({', '.join(print_term(a) for a in t.args)})"
    if isinstance(t, A.Arith):
        p = _AR_PREC[t.op]
        text = f"{print_term(t.left, p)} {t.op} {print_term(t.right, p + 1)}"
        return f"({text})" if p < min_prec else text
    raise TypeError(f"not a term: {t!r}")


def print_condition(c, min_prec: int = 0) -> str:
    if isinstance(c, A.Compare):
        return f"{print_term(c.left)} {c.op.value} {print_term(c.right)}"
    p = _COND_PREC[type(c)]
    if isinstance(c, A.Not):
        text = f"not {print_condition(c.operand, p)}"
    elif isinstance(c, A.And):
        text = f"{print_condition(c.left, p)} and {print_condition(c.right, p + 1)}"
    elif isinstance(c, A.Or):
        text = f"{print_condition(c.left, p)} or {print_condition(c.right, p + 1)}"
    else:
        raise TypeError(f"not a condition: {c!r}")
    return f"({text})" if p < min_prec else text


def print_action(a) -> str:
    if isinstance(a, A.Assign):
        return f"{print_path(a.target)} = {print_term(a.value)}"
    if isinstance(a, A.CallAction):
        return print_term(a.call)
    if isinstance(a, A.InvokeActivity):
        return a.name
    if isinstance(a, A.Skip):
        return f"Skip {a.activity}"
    if isinstance(a, A.SkipThen):
        return f"Skip {a.skipped} Then {a.replacement}"
    if isinstance(a, A.Abort):
        return "Abort"
    if isinstance(a, A.InvokeThenAbort):
        return f"{a.activity} Then Abort"
    raise TypeError(f"not an action: {a!r}")


def print_actions(actions) -> str:
    return "; ".join(print_action(a) for a in actions)


def print_body(ast: A.RuleAst) -> str:
    lines = [f"[Type] {ast.rule_type.value}"]
    if ast.priority:
        lines.append(f"[Priority] {ast.priority}")
    lines.append(f"[Cond] {print_condition(ast.condition)}")
    lines.append(f"[Action] {print_actions(ast.actions)}".rstrip())
    return "\n".join(lines)


def pretty_print(ast: A.RuleAst) -> str:
    body = "\n".join("  " + ln for ln in print_body(ast).splitlines())
    return f"rule {ast.id} {{\n{body}\n}}\n"
