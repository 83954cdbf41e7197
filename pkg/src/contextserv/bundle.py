"""The textual bundle format.

A bundle is a sequence of sections.  Most are blocks::

    <keyword> <name> {
      <statement>
      ...
    }

``binding`` and ``aspect`` are single lines, and ``rule`` blocks hold
rule-language text verbatim.  ``#`` starts a comment outside string
literals.  The full grammar is in docs/bundle-format.md.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .community.broker import BoundKind, CommunityConfig, ProviderRecord, SelectionConstraint
from .community.scoring import AttributeSpec, Polarity
from .errors import ContextServError, IoError, ParseError
from .model import (
    SYMBOLS,
    CAObjectPath,
    ContextBindingSpec,
    ContextConstraint,
    ContextDefinition,
    ContextKind,
    ContextRef,
    ContextSourceRef,
    ContextTriggerSpec,
    MessageModel,
    ModelBundle,
    OntologyConcept,
    OperationModel,
    PartModel,
    ServiceModel,
    SourceKind,
    ValueType,
)
from .process.base import (
    BaseModel,
    BusinessActivity,
    Event,
    EventKind,
    GatewayMode,
    ParallelGateway,
    VariableSpec,
)
from .process.connectors import EndpointSpec
from .rules.functions import DEFAULT_REGISTRY, FunctionRegistry
from .rules.parser import parse_actions, parse_rule
from .sim import SimulatedProvider
from .statechart import Transition, load_statechart
from .weave import Aspect, AspectKind

SECTIONS = ("concept", "community", "provider", "simulate", "context", "chart", "service", "endpoint",
            "process", "binding", "trigger", "rule", "aspect")
_OPS_BY_SYMBOL = {v: k for k, v in SYMBOLS.items()}
_OPS_BY_SYMBOL["=="] = "Eq"

_TOKEN = re.compile(
    r"""(?P<ws>\s+)
      |(?P<str>"(?:[^"\\]|\\.)*")
      |(?P<op>->|<=|>=|!=|==|[{}:,=<>()\[\]])
      |(?P<num>-?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?(?![\w.]))
      |(?P<word>[A-Za-z_][\w.]*)
      |(?P<punct>[-+*/;!])
    """,
    re.VERBOSE,
)
_RULE_HEAD = re.compile(r"\s*rule\s+[A-Za-z_]\w*\s*\{")


@dataclass(frozen=True)
class Tok:
    kind: str  # str | op | num | word
    text: str
    line: int
    col: int

    @property
    def value(self):
        if self.kind == "str":
            return json.loads(self.text)
        if self.kind == "num":
            return float(self.text) if any(c in self.text for c in ".eE") else int(self.text)
        return self.text


def _strip_comment(line: str) -> str:
    in_str = esc = False
    for i, ch in enumerate(line):
        if esc:
            esc = False
        elif ch == "\\" and in_str:
            esc = True
        elif ch == '"':
            in_str = not in_str
        elif ch == "#" and not in_str:
            return line[:i]
    return line


def _tokenize(text: str, line: int, col0: int = 1) -> list[Tok]:
    toks, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        if m.lastgroup != "ws":
            toks.append(Tok(m.lastgroup, m.group(), line, col0 + pos))
        pos = m.end()
    return toks


@dataclass
class _Line:
    no: int
    text: str  # comment stripped
    toks: list[Tok]

    def err(self, msg: str, tok: Tok | None = None) -> ParseError:
        if tok is not None:
            return ParseError(msg, tok.line, tok.col)
        indent = len(self.text) - len(self.text.lstrip())
        return ParseError(msg, self.no, indent + 1)

    def rest_after(self, tok: Tok) -> tuple[str, int]:
        """Raw text after ``tok`` and its column."""
        start = tok.col - 1 + len(tok.text)
        raw = self.text[start:]
        lead = len(raw) - len(raw.lstrip())
        return raw.strip(), start + lead + 1


@dataclass
class _Section:
    keyword: str
    name: str
    header: _Line
    body: list[_Line]
    raw: str = ""  # rule blocks only: text from the keyword to the closing brace


class _Reader:
    def __init__(self, text: str):
        self.raw_lines = text.splitlines()
        self.lines = [_Line(i + 1, _strip_comment(t), []) for i, t in enumerate(self.raw_lines)]

    def sections(self) -> list[_Section]:
        out: list[_Section] = []
        i = 0
        n = len(self.lines)
        while i < n:
            ln = self.lines[i]
            if not ln.text.strip():
                i += 1
                continue
            m = _RULE_HEAD.match(ln.text)
            # rule bodies use their own lexer, so only the header is tokenized here
            ln.toks = _tokenize(m.group(), ln.no) if m else _tokenize(ln.text, ln.no)
            head = ln.toks[0]
            if head.kind != "word" or head.text not in SECTIONS:
                raise ln.err(f"expected a section keyword ({', '.join(SECTIONS)}), found {head.text!r}", head)
            if head.text in ("binding", "aspect"):
                out.append(_Section(head.text, "", ln, []))
                i += 1
                continue
            if m:
                sec, i = self._rule_block(i)
                out.append(sec)
                continue
            if len(ln.toks) < 3 or ln.toks[1].kind != "word" or ln.toks[-1].text != "{":
                raise ln.err(f"expected '{head.text} <name> {{'", head)
            if len(ln.toks) != 3:
                raise ln.err("unexpected text after the section name", ln.toks[2])
            body, depth, j = [], 1, i + 1
            while j < n:
                b = self.lines[j]
                if b.text.strip():
                    b.toks = _tokenize(b.text, b.no)
                    depth += sum(1 for t in b.toks if t.text == "{") - sum(1 for t in b.toks if t.text == "}")
                    if depth == 0:
                        if len(b.toks) != 1:
                            raise b.err("the closing '}' must stand on its own line", b.toks[0])
                        break
                    body.append(b)
                j += 1
            else:
                raise ln.err(f"unterminated {head.text} section {ln.toks[1].text!r}", head)
            out.append(_Section(head.text, ln.toks[1].text, ln, body))
            i = j + 1
        return out

    def _rule_block(self, i: int) -> tuple[_Section, int]:
        """Find the brace closing a rule block, skipping braces inside strings."""
        ln = self.lines[i]
        start_col = ln.toks[0].col - 1
        depth, in_str, esc = 0, False, False
        for j in range(i, len(self.lines)):
            text = self.lines[j].text
            for k in range(start_col if j == i else 0, len(text)):
                ch = text[k]
                if esc:
                    esc = False
                elif in_str:
                    if ch == "\\":
                        esc = True
                    elif ch == '"':
                        in_str = False
                elif ch == '"':
                    in_str = True
                elif ch == "{":
                    depth += 1
                elif ch == "}":
                    depth -= 1
                    if depth == 0:
                        if text[k + 1:].strip():
                            raise ParseError("unexpected text after a rule block", j + 1, k + 2)
                        parts = [self.lines[i].text[start_col:]] + [self.lines[x].text for x in range(i + 1, j)]
                        if j > i:
                            parts.append(text[: k + 1])
                        else:
                            parts = [text[start_col: k + 1]]
                        return _Section("rule", ln.toks[1].text, ln, [], "\n".join(parts)), j + 1
        raise ln.err(f"unterminated rule {ln.toks[1].text!r}", ln.toks[0])


# statement helpers
def _words(line: _Line, start: int = 1) -> list[str]:
    return [t.text for t in line.toks[start:] if t.text != ","]


def _expect_len(line: _Line, n: int, usage: str) -> None:
    if len(line.toks) != n:
        raise line.err(f"expected: {usage}", line.toks[0])


def _number(line: _Line, tok: Tok, what: str):
    if tok.kind != "num":
        raise line.err(f"{what} must be a number", tok)
    return tok.value


def _vtype(line: _Line, tok: Tok) -> ValueType:
    try:
        return ValueType.parse(tok.text)
    except ValueError:
        raise line.err(f"unknown type {tok.text!r}", tok) from None


def _operand(tok: Tok):
    if tok.kind in ("str", "num"):
        return tok.value
    if tok.kind == "word" and tok.text in ("true", "false"):
        return tok.text == "true"
    if tok.kind == "word":
        return ContextRef(tok.text)
    raise ParseError(f"bad operand {tok.text!r}", tok.line, tok.col)


def parse_constraint(toks: list[Tok], line: _Line) -> ContextConstraint:
    """``ctx <op> operand`` or ``fn(ctx, operand, ...)``."""
    if not toks:
        raise line.err("empty constraint")
    if len(toks) >= 3 and toks[0].kind == "word" and toks[1].text == "(":
        if toks[-1].text != ")":
            raise line.err("unclosed '(' in constraint", toks[1])
        args = [t for t in toks[2:-1] if t.text != ","]
        if len(args) < 2:
            raise line.err("a constraint function takes at least two operands", toks[0])
        operands = tuple(_operand(t) for t in args)
        if not isinstance(operands[0], ContextRef):
            raise line.err("the first operand of a constraint must be a context", args[0])
        return ContextConstraint(toks[0].text, operands)
    if len(toks) != 3 or toks[1].text not in _OPS_BY_SYMBOL:
        raise line.err("expected '<context> <op> <operand>' with op one of = != < <= > >=", toks[0])
    left = _operand(toks[0])
    if not isinstance(left, ContextRef):
        raise line.err("the first operand of a constraint must be a context", toks[0])
    return ContextConstraint(_OPS_BY_SYMBOL[toks[1].text], (left, _operand(toks[2])))


def _split_and(toks: list[Tok]) -> list[list[Tok]]:
    groups, cur, depth = [], [], 0
    for t in toks:
        if t.text == "(":
            depth += 1
        elif t.text == ")":
            depth -= 1
        if t.kind == "word" and t.text == "and" and depth == 0:
            groups.append(cur)
            cur = []
        else:
            cur.append(t)
    groups.append(cur)
    return groups


def _json_rest(line: _Line, after: Tok, what: str):
    raw, col = line.rest_after(after)
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what}: invalid JSON value ({exc.msg})", line.no, col + exc.pos) from None


# section parsers
def _concept(sec: _Section) -> OntologyConcept:
    data: dict[str, ValueType] = {}
    objs: dict[str, str] = {}
    for ln in sec.body:
        t = ln.toks
        if len(t) == 3 and t[1].text == ":":
            data[t[0].text] = _vtype(ln, t[2])
        elif len(t) == 3 and t[1].text == "->":
            objs[t[0].text] = t[2].text
        else:
            raise ln.err("expected '<prop>: <Type>' or '<prop> -> <Concept>'", t[0])
    return OntologyConcept(sec.name, data, objs)


def _community(sec: _Section, serves: dict[str, str]) -> CommunityConfig:
    attrs, constraints = [], []
    opts: dict[str, Any] = {}
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        if key == "attribute":
            _expect_len(ln, 4, "attribute <name> <positive|negative> <weight>")
            pol = t[2].text.lower()
            if pol not in ("positive", "negative"):
                raise ln.err("polarity must be positive or negative", t[2])
            attrs.append(AttributeSpec(t[1].text, Polarity(pol), float(_number(ln, t[3], "weight"))))
        elif key == "constraint":
            _expect_len(ln, 4, "constraint <attribute> <max|min> <bound>")
            if t[2].text.lower() not in ("max", "min"):
                raise ln.err("bound kind must be max or min", t[2])
            try:
                constraints.append(SelectionConstraint(t[1].text, BoundKind(t[2].text.capitalize()),
                                                       float(_number(ln, t[3], "bound"))))
            except ValueError as exc:
                raise ln.err(str(exc), t[1]) from None
        elif key in ("t_theta", "theta", "max_expected", "timeout"):
            _expect_len(ln, 2, f"{key} <milliseconds>")
            opts[{"max_expected": "max_expected_ms", "timeout": "timeout_ms"}.get(key, key)] = int(_number(ln, t[1], key))
        elif key == "history":
            _expect_len(ln, 2, "history <count|unbounded>")
            opts["history_window"] = None if t[1].text == "unbounded" else int(_number(ln, t[1], "history"))
        elif key == "serves":
            _expect_len(ln, 2, "serves <context>")
            opts["context_name"] = t[1].text
        else:
            raise ln.err(f"unknown community statement {key!r}", t[0])
    opts.setdefault("context_name", serves.get(sec.name, sec.name))
    try:
        return CommunityConfig(sec.name, attributes=tuple(attrs), constraints=tuple(constraints), **opts)
    except (ValueError, ContextServError) as exc:
        raise sec.header.err(f"community {sec.name}: {exc}", sec.header.toks[1]) from None


_PROVIDER_KEYS = {
    "precision": "precision",
    "correctnessProbability": "correctness_probability",
    "refreshRate": "refresh_rate",
    "executionPrice": "execution_price",
}


def _provider(sec: _Section) -> ProviderRecord:
    vals: dict[str, Any] = {}
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        _expect_len(ln, 2, f"{key} <value>")
        if key in _PROVIDER_KEYS:
            vals[_PROVIDER_KEYS[key]] = float(_number(ln, t[1], key))
        elif key in ("community", "endpoint"):
            vals[key] = t[1].text
        else:
            raise ln.err(f"unknown provider statement {key!r}", t[0])
    missing = [k for k, f in (("community", "community"), *_PROVIDER_KEYS.items()) if f not in vals]
    if missing:
        raise sec.header.err(f"provider {sec.name} lacks {', '.join(missing)}", sec.header.toks[1])
    try:
        return ProviderRecord(sec.name, **vals)
    except ContextServError as exc:
        raise sec.header.err(str(exc), sec.header.toks[1]) from None


def _simulate(sec: _Section) -> SimulatedProvider:
    kw: dict[str, Any] = {}
    schedule = []
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        if key in ("response", "jitter", "staleness"):
            _expect_len(ln, 2, f"{key} <milliseconds>")
            kw[{"response": "base_response_ms", "jitter": "jitter_ms", "staleness": "staleness_ms"}[key]] = int(
                _number(ln, t[1], key))
        elif key == "fail_rate":
            _expect_len(ln, 2, "fail_rate <0..1>")
            kw["fail_rate"] = float(_number(ln, t[1], key))
        elif key == "value":
            kw["value"] = _json_rest(ln, t[0], "value")
        elif key == "range":
            _expect_len(ln, 3, "range <low> <high>")
            kw["value_range"] = (float(_number(ln, t[1], "low")), float(_number(ln, t[2], "high")))
        elif key == "schedule":
            _expect_len(ln, 4, "schedule <from-ms> <to-ms> <available|unavailable>")
            if t[3].text not in ("available", "unavailable"):
                raise ln.err("state must be available or unavailable", t[3])
            schedule.append((int(_number(ln, t[1], "from")), int(_number(ln, t[2], "to")), t[3].text == "available"))
        else:
            raise ln.err(f"unknown simulate statement {key!r}", t[0])
    try:
        return SimulatedProvider(sec.name, availability_schedule=tuple(schedule), **kw)
    except ValueError as exc:
        raise sec.header.err(str(exc), sec.header.toks[1]) from None


def _context(sec: _Section) -> ContextDefinition:
    vtype = source = chart = prop = None
    children: list[str] = []
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        if key == "type":
            _expect_len(ln, 2, "type <Type>")
            vtype = _vtype(ln, t[1])
        elif key == "source":
            _expect_len(ln, 3, "source <community|service> <id>")
            kind = t[1].text.lower()
            if kind not in ("community", "service"):
                raise ln.err("source kind must be community or service", t[1])
            source = ContextSourceRef(SourceKind(kind.capitalize()), t[2].text)
        elif key == "chart":
            _expect_len(ln, 2, "chart <name>")
            chart = t[1].text
        elif key == "children":
            children = _words(ln)
        elif key == "property":
            _expect_len(ln, 2, "property <Concept.prop>")
            prop = t[1].text
        else:
            raise ln.err(f"unknown context statement {key!r}", t[0])
    if vtype is None:
        raise sec.header.err(f"context {sec.name} has no type", sec.header.toks[1])
    kind = ContextKind.COMPOSITE if chart is not None or children else ContextKind.ATOMIC
    return ContextDefinition(sec.name, kind, vtype, source, chart, tuple(children), prop)


def _chart(sec: _Section):
    states: list[str] = []
    initial = None
    transitions = []
    emission: dict[str, Any] = {}
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        if key == "states":
            states.extend(_words(ln))
        elif key == "initial":
            _expect_len(ln, 2, "initial <state>")
            initial = t[1].text
        elif key == "transition":
            if len(t) < 4 or t[2].text != "->":
                raise ln.err("expected 'transition <from> -> <to> [when <constraint> and ...]'", t[0])
            guard: tuple = ()
            if len(t) > 4:
                if t[4].text != "when":
                    raise ln.err("expected 'when'", t[4])
                guard = tuple(parse_constraint(g, ln) for g in _split_and(t[5:]))
            transitions.append(Transition(t[1].text, guard, t[3].text))
        elif key == "emit":
            if len(t) < 3:
                raise ln.err("expected 'emit <state> <value>'", t[0])
            emission[t[1].text] = _json_rest(ln, t[1], "emission")
        else:
            raise ln.err(f"unknown chart statement {key!r}", t[0])
    if initial is None:
        raise sec.header.err(f"chart {sec.name} has no initial state", sec.header.toks[1])
    return load_statechart(sec.name, states, initial, transitions, emission)


def _message(ln: _Line, t: list[Tok]) -> MessageModel:
    # input|output <name> { part: Type, ... }
    if len(t) < 4 or t[2].text != "{" or t[-1].text != "}":
        raise ln.err(f"expected '{t[0].text} <message> {{ <part>: <Type>, ... }}'", t[0])
    parts, inner = [], [x for x in t[3:-1] if x.text != ","]
    if len(inner) % 3:
        raise ln.err("parts are written '<name>: <Type>'", t[3] if len(t) > 4 else t[0])
    for k in range(0, len(inner), 3):
        name, colon, typ = inner[k:k + 3]
        if colon.text != ":":
            raise ln.err("parts are written '<name>: <Type>'", colon)
        parts.append(PartModel(name.text, _vtype(ln, typ)))
    names = [p.name for p in parts]
    if len(set(names)) != len(names):
        raise ln.err(f"duplicate part name in message {t[1].text}", t[1])
    return MessageModel(t[1].text, tuple(parts))


def _service(sec: _Section) -> ServiceModel:
    ops: list[OperationModel] = []
    current: dict[str, Any] | None = None
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        if key == "operation":
            if current is not None:
                raise ln.err("operations cannot nest", t[0])
            if len(t) != 3 or t[2].text != "{":
                raise ln.err("expected 'operation <name> {'", t[0])
            current = {"name": t[1].text, "input": None, "output": None}
        elif key == "}" and len(t) == 1:
            if current is None:
                raise ln.err("unbalanced '}'", t[0])
            ops.append(OperationModel(current["name"], current["input"], current["output"]))
            current = None
        elif key in ("input", "output"):
            if current is None:
                raise ln.err(f"{key} outside an operation", t[0])
            if current[key] is not None:
                raise ln.err(f"operation {current['name']} has two {key} messages", t[0])
            current[key] = _message(ln, t)
        else:
            raise ln.err(f"unknown service statement {key!r}", t[0])
    if current is not None:
        raise sec.header.err(f"operation {current['name']} is not closed", sec.header.toks[1])
    return ServiceModel(sec.name, tuple(ops))


def _endpoint(sec: _Section) -> EndpointSpec:
    kw: dict[str, Any] = {}
    returns: dict[str, Any] = {}
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        if key in ("latency", "jitter"):
            _expect_len(ln, 2, f"{key} <milliseconds>")
            kw[f"{key}_ms"] = int(_number(ln, t[1], key))
        elif key == "fail_rate":
            _expect_len(ln, 2, "fail_rate <0..1>")
            kw["fail_rate"] = float(_number(ln, t[1], key))
        elif key == "url":
            url = _json_rest(ln, t[0], "url")
            if not isinstance(url, str) or not url.startswith(("http://", "https://")):
                raise ln.err("expected 'url \"http://...\"'", t[0])
            kw["url"] = url
        elif key == "return":
            if len(t) < 4 or t[2].text != "=":
                raise ln.err("expected 'return <name> = <json>'", t[0])
            returns[t[1].text] = _json_rest(ln, t[2], "return value")
        else:
            raise ln.err(f"unknown endpoint statement {key!r}", t[0])
    try:
        return EndpointSpec(sec.name, returns=returns, **kw)
    except ValueError as exc:
        raise sec.header.err(str(exc), sec.header.toks[1]) from None


def _process(sec: _Section) -> BaseModel:
    acts, events, gws, flows, variables = [], [], [], [], []
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        if key in ("start", "end"):
            _expect_len(ln, 2, f"{key} <name>")
            events.append(Event(t[1].text, EventKind.START if key == "start" else EventKind.END))
        elif key == "fault":
            if len(t) < 2:
                raise ln.err("expected 'fault <name> [handles <activity>, ...]'", t[0])
            handles: list[str] = []
            if len(t) > 2:
                if t[2].text != "handles":
                    raise ln.err("expected 'handles'", t[2])
                handles = _words(ln, 3)
            events.append(Event(t[1].text, EventKind.FAULT, tuple(handles)))
        elif key in ("fork", "join"):
            _expect_len(ln, 2, f"{key} <name>")
            gws.append(ParallelGateway(t[1].text, GatewayMode.FORK if key == "fork" else GatewayMode.JOIN))
        elif key == "activity":
            acts.append(_activity(ln))
        elif key == "var":
            if len(t) < 4 or t[2].text != ":":
                raise ln.err("expected 'var <name>: <Type> [= <json>]'", t[0])
            initial = None
            if len(t) > 4:
                if t[4].text != "=":
                    raise ln.err("expected '='", t[4])
                initial = _json_rest(ln, t[4], "initial value")
            variables.append(VariableSpec(t[1].text, t[3].text, initial))
        elif key == "flow":
            names = [x for x in t[1:]]
            if len(names) < 3 or any(x.text != "->" for x in names[1::2]) or len(names) % 2 == 0:
                raise ln.err("expected 'flow <a> -> <b> [-> <c> ...]'", t[0])
            objs = [x.text for x in names[::2]]
            flows.extend(zip(objs, objs[1:]))
        else:
            raise ln.err(f"unknown process statement {key!r}", t[0])
    return BaseModel(sec.name, tuple(acts), tuple(events), tuple(gws), tuple(flows), tuple(variables))


def _activity(ln: _Line) -> BusinessActivity:
    t = ln.toks
    if len(t) < 2:
        raise ln.err("expected 'activity <name> [operation s.o] [endpoint e] [variable] [in a, b] [out c]'", t[0])
    kw: dict[str, Any] = {}
    i = 2
    while i < len(t):
        key = t[i].text
        if key in ("operation", "endpoint"):
            if i + 1 >= len(t):
                raise ln.err(f"{key} needs a value", t[i])
            kw[key] = t[i + 1].text
            i += 2
        elif key == "variable":
            kw["variable"] = True
            i += 1
        elif key in ("in", "out"):
            names = []
            i += 1
            while i < len(t) and (t[i].text == "," or t[i].text not in ("operation", "endpoint", "variable", "in", "out")):
                if t[i].text != ",":
                    names.append(t[i].text)
                i += 1
            kw["inputs" if key == "in" else "outputs"] = tuple(names)
        else:
            raise ln.err(f"unknown activity option {key!r}", t[i])
    return BusinessActivity(t[1].text, **kw)


def _path(ln: _Line, tok: Tok) -> CAObjectPath:
    try:
        return CAObjectPath.parse(tok.text)
    except ContextServError as exc:
        raise ln.err(str(exc), tok) from None


def _binding(sec: _Section) -> ContextBindingSpec:
    ln = sec.header
    t = ln.toks
    if len(t) != 4 or t[2].text != "->":
        raise ln.err("expected 'binding <context> -> <service.operation.message.part>'", t[0])
    return ContextBindingSpec(t[1].text, _path(ln, t[3]))


def _trigger(sec: _Section, functions: FunctionRegistry) -> ContextTriggerSpec:
    target = None
    constraints: list[ContextConstraint] = []
    actions: list = []
    for ln in sec.body:
        t = ln.toks
        key = t[0].text
        if key == "target":
            _expect_len(ln, 2, "target <service[.operation[.message[.part]]]>")
            target = _path(ln, t[1])
        elif key == "when":
            constraints.extend(parse_constraint(g, ln) for g in _split_and(t[1:]))
        elif key == "action":
            raw, col = ln.rest_after(t[0])
            actions.extend(parse_actions(raw, functions, line=ln.no, col=col))
        else:
            raise ln.err(f"unknown trigger statement {key!r}", t[0])
    if target is None:
        raise sec.header.err(f"trigger {sec.name} has no target", sec.header.toks[1])
    return ContextTriggerSpec(sec.name, tuple(constraints), tuple(actions), target)


def _aspect(sec: _Section) -> Aspect:
    ln = sec.header
    t = ln.toks
    if len(t) < 4 or t[3].text != "rules":
        raise ln.err("expected 'aspect <before|around|after> <activity> rules <id>, ... [extras <var>, ...]'", t[0])
    try:
        kind = AspectKind.parse(t[1].text)
    except ValueError as exc:
        raise ln.err(str(exc), t[1]) from None
    words = _words(ln, 4)
    if "extras" in words:
        k = words.index("extras")
        rules, extras = words[:k], words[k + 1:]
    else:
        rules, extras = words, []
    return Aspect(kind, t[2].text, tuple(rules), tuple(extras))


def parse_bundle_text(text: str, source: str | None = None, functions: FunctionRegistry = DEFAULT_REGISTRY,
                      ontology=None) -> ModelBundle:
    if not text.strip() or all(not _strip_comment(x).strip() for x in text.splitlines()):
        raise ParseError("empty bundle", 1, 1)
    sections = _Reader(text).sections()
    by_kind: dict[str, list[_Section]] = {k: [] for k in SECTIONS}
    for s in sections:
        by_kind[s.keyword].append(s)

    seen_ctx: dict[str, int] = {}
    for s in by_kind["context"]:
        if s.name in seen_ctx:
            raise ParseError(f"context {s.name!r} declared twice (lines {seen_ctx[s.name]} and {s.header.no})",
                             s.header.no, s.header.toks[1].col)
        seen_ctx[s.name] = s.header.no

    concepts = tuple(_concept(s) for s in by_kind["concept"])
    contexts = tuple(_context(s) for s in by_kind["context"])
    serves: dict[str, str] = {}
    for c in contexts:
        if c.source is not None and c.source.kind is SourceKind.COMMUNITY:
            serves.setdefault(c.source.target, c.name)
    onto = ontology
    if onto is None and concepts:
        onto = {c.name: c for c in concepts}
    rules = []
    for s in by_kind["rule"]:
        col = s.header.toks[0].col
        rules.append(parse_rule(s.raw, None, functions, onto, line=s.header.no, col=col))
    return ModelBundle(
        contexts=contexts,
        charts=tuple(_chart(s) for s in by_kind["chart"]),
        communities=tuple(_community(s, serves) for s in by_kind["community"]),
        providers=tuple(_provider(s) for s in by_kind["provider"]),
        concepts=concepts,
        services=tuple(_service(s) for s in by_kind["service"]),
        endpoints=tuple(_endpoint(s) for s in by_kind["endpoint"]),
        processes=tuple(_process(s) for s in by_kind["process"]),
        bindings=tuple(_binding(s) for s in by_kind["binding"]),
        triggers=tuple(_trigger(s, functions) for s in by_kind["trigger"]),
        rules=tuple(rules),
        aspects=tuple(_aspect(s) for s in by_kind["aspect"]),
        simulations=tuple(_simulate(s) for s in by_kind["simulate"]),
        source=source,
    )


def parse_bundle(path: str | Path, functions: FunctionRegistry = DEFAULT_REGISTRY) -> ModelBundle:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read bundle {path}: {exc.strerror or exc}") from exc
    return parse_bundle_text(text, str(path), functions)
