"""Predefined and user-defined functions callable from rules and constraints."""

from __future__ import annotations

import enum
import math
import re
import threading
from dataclasses import dataclass
from typing import Any, Callable

from ..errors import DuplicateFunction, FunctionError, UnknownFunction

VARIADIC = -1


class Origin(enum.Enum):
    PREDEFINED = "Predefined"
    USER_DEFINED = "UserDefined"


@dataclass(frozen=True)
class FunctionDef:
    name: str
    arity: int  # VARIADIC for any count >= 1
    implementation: Callable[..., Any]
    origin: Origin = Origin.USER_DEFINED
    # when called as a statement, the result is written back to this argument
    target_arg: int | None = None

    def check_arity(self, n: int) -> None:
        if n < 1:
            raise FunctionError(f"{self.name} needs at least one argument")
        if self.arity != VARIADIC and n != self.arity:
            raise FunctionError(f"{self.name} takes {self.arity} argument(s), got {n}")


def _numbers(args) -> list:
    # a single list argument is spread, so sum(xs) and sum(a, b, c) both work
    if len(args) == 1 and isinstance(args[0], (list, tuple)):
        args = args[0]
    vals = []
    for a in args:
        if isinstance(a, bool) or not isinstance(a, (int, float)):
            raise FunctionError(f"expected a number, got {a!r}")
        vals.append(a)
    if not vals:
        raise FunctionError("empty argument list")
    return vals


def _abs(x):
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise FunctionError(f"abs expects a number, got {x!r}")
    return abs(x)


def _replace(s, old, new):
    if not all(isinstance(v, str) for v in (s, old, new)):
        raise FunctionError("replace expects three strings")
    return s.replace(old, new)


def _substring(*args):
    if len(args) not in (2, 3):
        raise FunctionError("substring takes 2 or 3 arguments")
    s, start = args[0], args[1]
    end = args[2] if len(args) == 3 else None
    if not isinstance(s, str):
        raise FunctionError("substring expects a string")
    stop = len(s) if end is None else end
    for v in (start, stop):
        if isinstance(v, bool) or not isinstance(v, int):
            raise FunctionError("substring bounds must be integers")
    if not 0 <= start <= stop <= len(s):
        raise FunctionError(f"substring range [{start}, {stop}) out of bounds for length {len(s)}")
    return s[start:stop]


def _sum(*args):
    vals = _numbers(args)
    return math.fsum(vals) if any(isinstance(v, float) for v in vals) else sum(vals)


def _avg(*args):
    vals = _numbers(args)
    return sum(vals) / len(vals)


def _min(*args):
    return min(_numbers(args))


def _max(*args):
    return max(_numbers(args))


def filter_items(label, items):
    """Drop every item whose tag appears as a word of ``label``.

    Items are ``"tag:name"`` strings; untagged items are kept.  With the label
    ``"Filter out outdoor activities"`` every ``"outdoor:..."`` item goes.
    """
    if not isinstance(label, str):
        raise FunctionError("Filter expects a text label")
    if not isinstance(items, (list, tuple)):
        raise FunctionError("Filter expects a list of items")
    words = set(re.findall(r"[A-Za-z0-9_-]+", label.lower()))
    kept = []
    for item in items:
        tag, sep, _ = str(item).partition(":")
        if sep and tag.lower() in words:
            continue
        kept.append(item)
    return kept


PREDEFINED = (
    FunctionDef("abs", 1, _abs, Origin.PREDEFINED),
    FunctionDef("replace", 3, _replace, Origin.PREDEFINED),
    FunctionDef("substring", VARIADIC, _substring, Origin.PREDEFINED),
    FunctionDef("sum", VARIADIC, _sum, Origin.PREDEFINED),
    FunctionDef("avg", VARIADIC, _avg, Origin.PREDEFINED),
    FunctionDef("min", VARIADIC, _min, Origin.PREDEFINED),
    FunctionDef("max", VARIADIC, _max, Origin.PREDEFINED),
    FunctionDef("Filter", 2, filter_items, Origin.PREDEFINED, target_arg=1),
    FunctionDef("filter", 2, filter_items, Origin.PREDEFINED, target_arg=1),
)


class FunctionRegistry:
    """Read-mostly name -> FunctionDef table; registration is exclusive."""

    def __init__(self, defs=PREDEFINED):
        self._lock = threading.Lock()
        self._defs: dict[str, FunctionDef] = {d.name: d for d in defs}

    def register(self, fdef: FunctionDef, override: bool = False) -> None:
        with self._lock:
            if fdef.name in self._defs and not override:
                raise DuplicateFunction(f"function {fdef.name!r} is already registered")
            defs = dict(self._defs)
            defs[fdef.name] = fdef
            self._defs = defs

    def get(self, name: str) -> FunctionDef:
        try:
            return self._defs[name]
        except KeyError:
            raise UnknownFunction(f"unknown function {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._defs

    def names(self) -> list[str]:
        return sorted(self._defs)

    def copy(self) -> "FunctionRegistry":
        return FunctionRegistry(self._defs.values())

    def call(self, name: str, args: list) -> Any:
        fdef = self.get(name)
        fdef.check_arity(len(args))
        try:
            return fdef.implementation(*args)
        except FunctionError:
            raise
        except Exception as exc:  # user functions may raise anything
            raise FunctionError(f"{name} failed: {exc}") from exc


DEFAULT_REGISTRY = FunctionRegistry()
