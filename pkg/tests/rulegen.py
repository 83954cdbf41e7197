"""Grammar-driven random rule generator shared by the rule tests."""

from __future__ import annotations

import random
import string

from contextserv.rules import ast as A
from contextserv.rules.functions import DEFAULT_REGISTRY, VARIADIC

RESERVED = {"and", "or", "not", "true", "false", "less", "greater", "equal", "rule", "Skip", "Then", "Abort"}
NAMES = ["Weather", "User", "Trip", "x", "y", "ActivityList", "temperature", "price", "city", "Loc"]
PROPS = ["temperature", "windspeed", "name", "lat", "lon", "price"]
FUNCS = [(n, DEFAULT_REGISTRY.get(n).arity) for n in DEFAULT_REGISTRY.names()]
STRING_CHARS = string.ascii_letters + string.digits + ' _-:.,"\\\n\t'


def ident(rng: random.Random) -> str:
    if rng.random() < 0.7:
        return rng.choice(NAMES)
    while True:
        s = rng.choice(string.ascii_letters) + "".join(rng.choices(string.ascii_letters + string.digits,
                                                                  k=rng.randint(0, 6)))
        if s.lower() not in {w.lower() for w in RESERVED}:
            return s


def path(rng: random.Random) -> A.PropertyPath:
    concept = ident(rng)
    index = rng.randint(1, 3) if rng.random() < 0.15 else None
    if rng.random() < 0.3:
        return A.PropertyPath(concept, index)
    hops = tuple(rng.choice(["location", "owner", "next"]) for _ in range(rng.choice([0, 0, 0, 1, 2])))
    return A.PropertyPath(concept, index, hops, rng.choice(PROPS))


def const(rng: random.Random) -> A.Const:
    k = rng.randrange(5)
    if k == 0:
        return A.Const(rng.randint(-1000, 1000))
    if k == 1:
        return A.Const(rng.choice([0.5, 2.25, -3.75, 1e-5, 1.5e20, rng.uniform(-100, 100)]))
    if k == 2:
        return A.Const(rng.random() < 0.5)
    return A.Const("".join(rng.choices(STRING_CHARS, k=rng.randint(0, 8))))


def term(rng: random.Random, depth: int) -> A.Term:
    k = rng.randrange(4) if depth > 0 else rng.randrange(2)
    if k == 0:
        return A.PropertyRef(path(rng))
    if k == 1:
        return const(rng)
    if k == 2:
        return A.Arith(term(rng, depth - 1), rng.choice("+-*/"), term(rng, depth - 1))
    name, arity = rng.choice(FUNCS)
    n = rng.randint(1, 3) if arity == VARIADIC else arity
    return A.FunCall(name, tuple(term(rng, depth - 1) for _ in range(n)))


def condition(rng: random.Random, depth: int) -> A.CondExpr:
    k = rng.randrange(4) if depth > 0 else 0
    if k == 0:
        return A.Compare(term(rng, min(depth, 2)), rng.choice(list(A.RelOp)), term(rng, min(depth, 2)))
    if k == 1:
        return A.Not(condition(rng, depth - 1))
    cls = A.And if k == 2 else A.Or
    return cls(condition(rng, depth - 1), condition(rng, depth - 1))


def action(rng: random.Random) -> A.ActionSpec:
    k = rng.randrange(7)
    if k == 0:
        return A.Assign(path(rng), term(rng, 2))
    if k == 1:
        return A.InvokeActivity(ident(rng))
    if k == 2:
        return A.Skip(ident(rng))
    if k == 3:
        return A.SkipThen(ident(rng), ident(rng))
    if k == 4:
        return A.Abort()
    if k == 5:
        return A.InvokeThenAbort(ident(rng))
    name, arity = rng.choice(FUNCS)
    n = rng.randint(1, 3) if arity == VARIADIC else arity
    return A.CallAction(A.FunCall(name, tuple(term(rng, 1) for _ in range(n))))


def rule(rng: random.Random, depth: int = 6) -> A.RuleAst:
    rid = rng.choice(["R", "Rule", "r"]) + str(rng.randint(0, 999))
    return A.RuleAst(
        rid,
        rng.choice(list(A.RuleType)),
        condition(rng, rng.randint(0, depth)),
        tuple(action(rng) for _ in range(rng.randint(0, 4))),
        rng.choice([0, 0, 1, 5, 42]),
    )
