"""Lexer and recursive-descent parser for the rule language.

Concrete syntax accepted (``[...]`` labels are literal tokens)::

    rule     := 'rule' ID '{' body '}' | body
    body     := ['[Type]' TYPE] ['[Priority]' INT] '[Cond]' cond '[Action]' actions
    cond     := conj ('or' conj)*
    conj     := unary ('and' unary)*
    unary    := 'not' unary | compare | '(' cond ')'
    compare  := term RELOP term
    term     := factor (('+' | '-') factor)*
    factor   := atom (('*' | '/') atom)*
    atom     := NUMBER | STRING | 'true' | 'false' | ID '(' term (','? term)* ')'
              | path | '(' term ')'
    path     := ID ('.' ID)*              # first ID may carry an _<n> suffix
    actions  := [action (';' action)*] ['.']
    action   := 'Abort' | 'Skip' ID ['Then' ID] | ID 'Then' 'Abort'
              | ID '(' args ')' | path '=' term | ID

Relational operators are the word phrases ``less than``, ``less than or
equal to``, ``equal to``, ``greater than or equal to`` and ``greater than``
matched case-insensitively, as are ``and``/``or``/``not``/``true``/``false``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from ..errors import ParseError, UnknownFunction, UnresolvedConcept
from . import ast as A
from .functions import DEFAULT_REGISTRY, VARIADIC, FunctionRegistry

_RELOP_PHRASES = [
    (("less", "than", "or", "equal", "to"), A.RelOp.LEQ),
    (("less", "than"), A.RelOp.LT),
    (("greater", "than", "or", "equal", "to"), A.RelOp.GEQ),
    (("greater", "than"), A.RelOp.GT),
    (("equal", "to"), A.RelOp.EQ),
]
_WORD_KEYWORDS = {"and", "or", "not", "true", "false"}
_ACTION_KEYWORDS = {"Skip", "Then", "Abort"}
_LABELS = {"cond": "COND", "action": "ACTION", "type": "TYPE", "priority": "PRIORITY"}

_NUMBER = re.compile(r"\d+(\.\d+)?([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_LABEL = re.compile(r"\[\s*([A-Za-z]+)\s*\]")
_INDEXED = re.compile(r"^(.+)_([1-9][0-9]*)$")
_ESCAPES = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}

IDENT_PATTERN = _IDENT


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT NUMBER STRING RELOP KW LABEL PUNCT EOF
    value: object
    line: int
    col: int
    text: str = ""


def _value_ending(tok: Token | None) -> bool:
    if tok is None:
        return False
    if tok.kind in ("IDENT", "NUMBER", "STRING"):
        return True
    if tok.kind == "KW" and tok.value in ("true", "false"):
        return True
    return tok.kind == "PUNCT" and tok.value == ")"


def tokenize(text: str, line: int = 1, col: int = 1) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(text)
    base_line, base_col = line, col

    def pos(k: int) -> tuple[int, int]:
        ln = base_line + text.count("\n", 0, k)
        start = text.rfind("\n", 0, k)
        c = k - start if start >= 0 else base_col + k
        return ln, c

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == "#":
            j = text.find("\n", i)
            i = n if j < 0 else j
            continue
        ln, c = pos(i)
        if ch == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n:
                    raise ParseError("unterminated string literal", ln, c)
                cj = text[j]
                if cj == "\\":
                    if j + 1 >= n or text[j + 1] not in _ESCAPES:
                        raise ParseError("bad escape in string literal", *pos(j))
                    buf.append(_ESCAPES[text[j + 1]])
                    j += 2
                    continue
                if cj == '"':
                    break
                buf.append(cj)
                j += 1
            tokens.append(Token("STRING", "".join(buf), ln, c, text[i : j + 1]))
            i = j + 1
            continue
        negative = ch == "-" and i + 1 < n and text[i + 1].isdigit() and not _value_ending(tokens[-1] if tokens else None)
        if ch.isdigit() or negative:
            m = _NUMBER.match(text, i + 1 if negative else i)
            raw = text[i : m.end()]
            value = float(raw) if (m.group(1) or m.group(2)) else int(raw)
            tokens.append(Token("NUMBER", value, ln, c, raw))
            i = m.end()
            continue
        if ch == "[":
            m = _LABEL.match(text, i)
            if m and m.group(1).lower() in _LABELS:
                tokens.append(Token("LABEL", _LABELS[m.group(1).lower()], ln, c, m.group(0)))
                i = m.end()
                continue
            raise ParseError("unexpected '['", ln, c)
        m = _IDENT.match(text, i)
        if m:
            word = m.group(0)
            low = word.lower()
            if low in ("less", "greater", "equal"):
                matched = _match_relop(text, i)
                if matched is not None:
                    op, end = matched
                    tokens.append(Token("RELOP", op, ln, c, text[i:end]))
                    i = end
                    continue
            if low in _WORD_KEYWORDS:
                tokens.append(Token("KW", low, ln, c, word))
            else:
                tokens.append(Token("IDENT", word, ln, c, word))
            i = m.end()
            continue
        if ch in "(),;.=+-*/{}":
            tokens.append(Token("PUNCT", ch, ln, c, ch))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", ln, c)
    ln, c = pos(n)
    tokens.append(Token("EOF", None, ln, c))
    return tokens


def _match_relop(text: str, i: int):
    for words, op in _RELOP_PHRASES:
        j = i
        ok = True
        for k, w in enumerate(words):
            if k:
                ws = re.compile(r"[ \t\r\n]+").match(text, j)
                if not ws:
                    ok = False
                    break
                j = ws.end()
            m = _IDENT.match(text, j)
            if not m or m.group(0).lower() != w:
                ok = False
                break
            j = m.end()
        if ok:
            return op, j
    return None


class _Parser:
    def __init__(self, tokens: list[Token], functions: FunctionRegistry, ontology):
        self.toks = tokens
        self.i = 0
        self.functions = functions
        self.ontology = ontology

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        found = "end of input" if tok.kind == "EOF" else repr(tok.text or tok.value)
        return ParseError(f"{msg}, found {found}", tok.line, tok.col)

    def is_punct(self, ch: str, tok: Token | None = None) -> bool:
        tok = tok or self.tok
        return tok.kind == "PUNCT" and tok.value == ch

    def is_kw(self, word: str) -> bool:
        return self.tok.kind == "KW" and self.tok.value == word

    def is_ident(self, value: str | None = None, tok: Token | None = None) -> bool:
        tok = tok or self.tok
        return tok.kind == "IDENT" and (value is None or tok.value == value)

    def expect_punct(self, ch: str) -> Token:
        if not self.is_punct(ch):
            raise self.error(f"expected {ch!r}")
        t = self.tok
        self.i += 1
        return t

    def expect_ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "IDENT" or self.tok.value in _ACTION_KEYWORDS:
            raise self.error(f"expected {what}")
        t = self.tok
        self.i += 1
        return t

    # rule structure
    def rule(self, rule_id: str | None) -> A.RuleAst:
        if self.is_ident("rule") and self.peek().kind == "IDENT" and self.is_punct("{", self.peek(2)):
            self.i += 1
            rule_id = self.expect_ident("rule id").value
            self.expect_punct("{")
            ast = self.body(rule_id)
            self.expect_punct("}")
        else:
            ast = self.body(rule_id or "rule")
        if self.tok.kind != "EOF":
            raise self.error("unexpected trailing input")
        return ast

    def body(self, rule_id: str) -> A.RuleAst:
        rule_type = A.RuleType.ACTION
        priority = 0
        if self.tok.kind == "LABEL" and self.tok.value == "TYPE":
            self.i += 1
            t = self.expect_ident("rule type")
            by_name = {rt.value.lower(): rt for rt in A.RuleType}
            if t.value.lower() not in by_name:
                raise ParseError(f"unknown rule type {t.value!r}", t.line, t.col)
            rule_type = by_name[t.value.lower()]
        if self.tok.kind == "LABEL" and self.tok.value == "PRIORITY":
            self.i += 1
            if self.tok.kind != "NUMBER" or not isinstance(self.tok.value, int):
                raise self.error("expected integer priority")
            priority = self.tok.value
            self.i += 1
        if not (self.tok.kind == "LABEL" and self.tok.value == "COND"):
            raise self.error("expected [Cond]")
        self.i += 1
        cond = self.cond()
        if not (self.tok.kind == "LABEL" and self.tok.value == "ACTION"):
            raise self.error("expected [Action]")
        self.i += 1
        actions = self.actions()
        return A.RuleAst(rule_id, rule_type, cond, actions, priority)

    # conditions
    def cond(self) -> A.CondExpr:
        left = self.conj()
        while self.is_kw("or"):
            self.i += 1
            left = A.Or(left, self.conj())
        return left

    def conj(self) -> A.CondExpr:
        left = self.unary()
        while self.is_kw("and"):
            self.i += 1
            left = A.And(left, self.unary())
        return left

    def unary(self) -> A.CondExpr:
        if self.is_kw("not"):
            self.i += 1
            return A.Not(self.unary())
        start = self.i
        try:
            return self.compare()
        except ParseError as first:
            if not self.is_punct("(", self.toks[start]):
                raise
            self.i = start + 1
            try:
                inner = self.cond()
                self.expect_punct(")")
            except ParseError as second:
                raise max((first, second), key=lambda e: (e.line or 0, e.column or 0)) from None
            return inner

    def compare(self) -> A.Compare:
        left = self.term()
        if self.tok.kind != "RELOP":
            raise self.error("expected a relational operator")
        op = self.tok.value
        self.i += 1
        right = self.term()
        if self.tok.kind == "RELOP":
            raise self.error("relational operators are non-associative")
        return A.Compare(left, op, right)

    # terms
    def term(self) -> A.Term:
        left = self.factor()
        while self.is_punct("+") or self.is_punct("-"):
            op = self.tok.value
            self.i += 1
            left = A.Arith(left, op, self.factor())
        return left

    def factor(self) -> A.Term:
        left = self.atom()
        while self.is_punct("*") or self.is_punct("/"):
            op = self.tok.value
            self.i += 1
            left = A.Arith(left, op, self.atom())
        return left

    def atom(self) -> A.Term:
        t = self.tok
        if t.kind in ("NUMBER", "STRING"):
            self.i += 1
            return A.Const(t.value)
        if t.kind == "KW" and t.value in ("true", "false"):
            self.i += 1
            return A.Const(t.value == "true")
        if self.is_punct("("):
            self.i += 1
            inner = self.term()
            self.expect_punct(")")
            return inner
        if t.kind == "IDENT" and t.value not in _ACTION_KEYWORDS:
            if self.is_punct("(", self.peek()):
                return self.funcall()
            return A.PropertyRef(self.path())
        raise self.error("expected a term")

    def funcall(self) -> A.FunCall:
        name_tok = self.expect_ident("function name")
        self.expect_punct("(")
        args = [self.term()]
        while not self.is_punct(")"):
            if self.is_punct(","):
                self.i += 1
            args.append(self.term())
        self.expect_punct(")")
        name = name_tok.value
        if name not in self.functions:
            raise UnknownFunction(f"unknown function {name!r} (line {name_tok.line}, column {name_tok.col})")
        fdef = self.functions.get(name)
        if fdef.arity != VARIADIC and fdef.arity != len(args):
            raise ParseError(f"{name} takes {fdef.arity} argument(s), got {len(args)}", name_tok.line, name_tok.col)
        return A.FunCall(name, tuple(args))

    def path(self) -> A.PropertyPath:
        first = self.expect_ident()
        segs = [first.value]
        while self.is_punct(".") and self.peek().kind == "IDENT":
            self.i += 1
            segs.append(self.expect_ident("property name").value)
        concept, index = segs[0], None
        m = _INDEXED.match(concept)
        if m:
            concept, index = m.group(1), int(m.group(2))
        if len(segs) == 1:
            path = A.PropertyPath(concept, index)
        else:
            path = A.PropertyPath(concept, index, tuple(segs[1:-1]), segs[-1])
        self.resolve(path, first)
        return path

    def resolve(self, path: A.PropertyPath, tok: Token) -> None:
        if self.ontology is None or path.is_bare:
            return
        where = f" (line {tok.line}, column {tok.col})"
        concept = self.ontology.get(path.concept)
        if concept is None:
            raise UnresolvedConcept(f"unknown concept {path.concept!r}{where}")
        for hop in path.object_hops:
            target = concept.object_properties.get(hop)
            if target is None:
                raise UnresolvedConcept(f"{concept.name} has no object property {hop!r}{where}")
            concept = self.ontology.get(target)
            if concept is None:
                raise UnresolvedConcept(f"unknown concept {target!r}{where}")
        if path.datatype_prop not in concept.datatype_properties:
            raise UnresolvedConcept(f"{concept.name} has no datatype property {path.datatype_prop!r}{where}")

    # actions
    def actions(self) -> tuple[A.ActionSpec, ...]:
        acts: list[A.ActionSpec] = []
        if self._at_actions_end():
            return ()
        acts.append(self.action())
        while self.is_punct(";"):
            self.i += 1
            if self._at_actions_end():
                break
            acts.append(self.action())
        if self.is_punct("."):
            self.i += 1
        return tuple(acts)

    def _at_actions_end(self) -> bool:
        return self.tok.kind == "EOF" or self.is_punct("}") or self.is_punct(".")

    def action(self) -> A.ActionSpec:
        t = self.tok
        if self.is_ident("Abort"):
            self.i += 1
            return A.Abort()
        if self.is_ident("Skip"):
            self.i += 1
            skipped = self.expect_ident("activity name").value
            if self.is_ident("Then"):
                self.i += 1
                return A.SkipThen(skipped, self.expect_ident("activity name").value)
            return A.Skip(skipped)
        if t.kind != "IDENT" or t.value in _ACTION_KEYWORDS:
            raise self.error("expected an action")
        nxt = self.peek()
        if self.is_punct("(", nxt):
            return A.CallAction(self.funcall())
        if self.is_ident("Then", nxt):
            self.i += 2
            if not self.is_ident("Abort"):
                raise self.error("expected 'Abort' after 'Then'")
            self.i += 1
            return A.InvokeThenAbort(t.value)
        start = self.i
        target = self.path()
        if self.is_punct("="):
            self.i += 1
            return A.Assign(target, self.term())
        if self.i == start + 1:
            return A.InvokeActivity(t.value)
        raise self.error("expected '=' after property path")


def parse_rule(
    text: str,
    rule_id: str | None = None,
    functions: FunctionRegistry = DEFAULT_REGISTRY,
    ontology: Mapping | None = None,
    line: int = 1,
    col: int = 1,
) -> A.RuleAst:
    """Parse a ``rule ID { ... }`` block or a bare ``[Cond] ... [Action] ...`` body."""
    if not text.strip():
        raise ParseError("empty rule text", line, col)
    return _Parser(tokenize(text, line, col), functions, ontology).rule(rule_id)


def parse_condition(text: str, functions: FunctionRegistry = DEFAULT_REGISTRY, ontology=None) -> A.CondExpr:
    p = _Parser(tokenize(text), functions, ontology)
    cond = p.cond()
    if p.tok.kind != "EOF":
        raise p.error("unexpected trailing input")
    return cond


def parse_term(text: str, functions: FunctionRegistry = DEFAULT_REGISTRY) -> A.Term:
    p = _Parser(tokenize(text), functions, None)
    term = p.term()
    if p.tok.kind != "EOF":
        raise p.error("unexpected trailing input")
    return term


def parse_actions(
    text: str, functions: FunctionRegistry = DEFAULT_REGISTRY, ontology=None, line: int = 1, col: int = 1
) -> tuple[A.ActionSpec, ...]:
    p = _Parser(tokenize(text, line, col), functions, ontology)
    acts = p.actions()
    if p.tok.kind != "EOF":
        raise p.error("unexpected trailing input")
    return acts
