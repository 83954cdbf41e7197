"""The rule language: AST, parser, printer, evaluator and function registry."""

from .ast import (
    Abort,
    And,
    Arith,
    Assign,
    CallAction,
    Compare,
    Const,
    Control,
    FunCall,
    InvokeActivity,
    InvokeThenAbort,
    Not,
    Or,
    PropertyPath,
    PropertyRef,
    RelOp,
    RuleAst,
    RuleType,
    Skip,
    SkipThen,
    TRUE_CONDITION,
)
from .evaluator import ActionError, ActionOutcome, evaluate_condition, evaluate_term, execute_actions, lookup, store
from .functions import DEFAULT_REGISTRY, VARIADIC, FunctionDef, FunctionRegistry, Origin
from .parser import parse_actions, parse_condition, parse_rule, parse_term, tokenize
from .printer import pretty_print, print_actions, print_condition, print_term


def register_function(fdef: FunctionDef, registry: FunctionRegistry = DEFAULT_REGISTRY, override: bool = False) -> None:
    registry.register(fdef, override=override)


__all__ = [
    "Abort",
    "ActionError",
    "ActionOutcome",
    "And",
    "Arith",
    "Assign",
    "CallAction",
    "Compare",
    "Const",
    "Control",
    "DEFAULT_REGISTRY",
    "FunCall",
    "FunctionDef",
    "FunctionRegistry",
    "InvokeActivity",
    "InvokeThenAbort",
    "Not",
    "Or",
    "Origin",
    "PropertyPath",
    "PropertyRef",
    "RelOp",
    "RuleAst",
    "RuleType",
    "Skip",
    "SkipThen",
    "TRUE_CONDITION",
    "VARIADIC",
    "evaluate_condition",
    "evaluate_term",
    "execute_actions",
    "lookup",
    "parse_actions",
    "parse_condition",
    "parse_rule",
    "parse_term",
    "pretty_print",
    "print_actions",
    "print_condition",
    "print_term",
    "store",
    "tokenize",
]
