"""The runtime control channel: rule hot-swap and provider state injection.

One command per line::

    rule-add FILE
    rule-remove ID
    rule-replace ID FILE
    rule-list
    provider-state ID available|unavailable

A leading ``@NODE`` defers the command until the engine is about to step
that node, which makes scripted hot-swaps reproducible.  Blank lines and
``#`` comments are ignored.  Every command answers with one ``OK ...`` or
``ERR ...`` line.
"""

from __future__ import annotations

import os
import socket
import sys
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, TextIO

from .community.monitor import StateEvent
from .errors import ContextServError, IoError, ParseError
from .rules.functions import DEFAULT_REGISTRY, FunctionRegistry
from .rules.parser import parse_rule
from .weave import RuleStore

COMMANDS = {"rule-add": 1, "rule-remove": 1, "rule-replace": 2, "rule-list": 0, "provider-state": 2}


@dataclass(frozen=True)
class Command:
    name: str
    args: tuple[str, ...]
    at_node: str | None = None
    line: int = 0

    def __str__(self) -> str:
        head = f"@{self.at_node} " if self.at_node else ""
        return head + " ".join((self.name, *self.args))


def parse_command(text: str, line: int = 0) -> Command | None:
    text = text.split("#", 1)[0].strip()
    if not text:
        return None
    words = text.split()
    at = None
    if words[0].startswith("@"):
        at = words.pop(0)[1:]
        if not at or not words:
            raise ParseError("'@' must be followed by a node id and a command", line, 1)
    name, args = words[0], tuple(words[1:])
    if name not in COMMANDS:
        raise ParseError(f"unknown control command {name!r}", line, 1)
    if len(args) != COMMANDS[name]:
        raise ParseError(f"{name} takes {COMMANDS[name]} argument(s), got {len(args)}", line, 1)
    if name == "provider-state" and args[1] not in ("available", "unavailable"):
        raise ParseError("provider-state expects available or unavailable", line, 1)
    return Command(name, args, at, line)


class ControlChannel:
    """Applies commands to a rule store and (optionally) a broker's monitor log."""

    def __init__(self, store: RuleStore, broker=None, functions: FunctionRegistry = DEFAULT_REGISTRY,
                 base_dir: str | Path = ".", clock=None, out: Callable[[str], None] | None = None):
        self.store = store
        self.broker = broker
        self.functions = functions
        self.base_dir = Path(base_dir)
        self.clock = clock
        self.out = out or (lambda s: None)
        self._lock = threading.Lock()
        self._deferred: dict[str, list[Command]] = {}
        self.responses: list[str] = []

    # loading
    def _rule_from(self, path: str):
        p = Path(path)
        if not p.is_absolute():
            p = self.base_dir / p
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(f"cannot read rule file {p}: {exc.strerror or exc}") from exc
        return parse_rule(text, None, self.functions)

    def _now(self) -> int:
        return self.clock.now_ms() if self.clock is not None else 0

    def execute(self, cmd: Command) -> str:
        try:
            reply = self._run(cmd)
        except (ContextServError, OSError) as exc:
            reply = f"ERR {cmd.name}: {exc}"
        with self._lock:
            self.responses.append(reply)
        self.out(reply)
        return reply

    def _run(self, cmd: Command) -> str:
        n, a = cmd.name, cmd.args
        if n == "rule-add":
            rule = self._rule_from(a[0])
            v = self.store.add(rule)
            return f"OK rule-add {rule.id} version {v}"
        if n == "rule-remove":
            v = self.store.remove(a[0])
            return f"OK rule-remove {a[0]} version {v}"
        if n == "rule-replace":
            v = self.store.replace(a[0], self._rule_from(a[1]))
            return f"OK rule-replace {a[0]} version {v}"
        if n == "rule-list":
            snap = self.store.snapshot()
            return f"OK rule-list version {snap.version} {' '.join(snap.rules) or '-'}"
        if self.broker is None:
            raise ContextServError("provider-state needs a broker")
        self.broker.record_event(StateEvent(a[0], self._now(), a[1] == "available"))
        return f"OK provider-state {a[0]} {a[1]} at {self._now()}"

    def submit(self, cmd: Command) -> str | None:
        """Run now, or park until its node comes up."""
        if cmd.at_node is None:
            return self.execute(cmd)
        with self._lock:
            self._deferred.setdefault(cmd.at_node, []).append(cmd)
        return None

    def submit_line(self, text: str, line: int = 0) -> str | None:
        try:
            cmd = parse_command(text, line)
        except ParseError as exc:
            reply = f"ERR {exc}"
            self.responses.append(reply)
            self.out(reply)
            return reply
        return None if cmd is None else self.submit(cmd)

    def load(self, lines) -> None:
        for i, text in enumerate(lines, 1):
            self.submit_line(text, i)

    @property
    def pending(self) -> list[Command]:
        with self._lock:
            return [c for cmds in self._deferred.values() for c in cmds]

    def hook(self, engine, instance, node_id: str) -> None:
        """Engine hook: fire commands deferred to ``node_id`` before it runs."""
        with self._lock:
            due = self._deferred.pop(node_id, [])
        for cmd in due:
            self.execute(cmd)

    # concurrent readers
    def read_stream(self, stream: TextIO) -> threading.Thread:
        def loop():
            for i, text in enumerate(stream, 1):
                self.submit_line(text, i)

        t = threading.Thread(target=loop, name="control-reader", daemon=True)
        t.start()
        return t

    def serve_socket(self, path: str) -> "SocketServer":
        return SocketServer(self, path)


class SocketServer:
    """A Unix-domain socket accepting command lines; each reply goes back on the same connection."""

    def __init__(self, channel: ControlChannel, path: str):
        self.channel = channel
        self.path = path
        if os.path.exists(path):
            os.unlink(path)
        self._sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        self._sock.bind(path)
        self._sock.listen()
        self._stop = threading.Event()
        self.thread = threading.Thread(target=self._accept, name="control-socket", daemon=True)
        self.thread.start()

    def _accept(self):
        self._sock.settimeout(0.1)
        while not self._stop.is_set():
            try:
                conn, _ = self._sock.accept()
            except (socket.timeout, OSError):
                continue
            threading.Thread(target=self._handle, args=(conn,), daemon=True).start()

    def _handle(self, conn):
        # separate reader and writer: a write on a shared text wrapper drops its read-ahead
        with conn, conn.makefile("r", encoding="utf-8") as rd, conn.makefile("w", encoding="utf-8") as wr:
            for i, text in enumerate(rd, 1):
                reply = self.channel.submit_line(text, i)
                wr.write((reply or f"OK deferred {text.strip()}") + "\n")
                wr.flush()

    def close(self):
        self._stop.set()
        self._sock.close()
        self.thread.join(timeout=1)
        if os.path.exists(self.path):
            os.unlink(self.path)


def open_control(spec: str, channel: ControlChannel):
    """Attach ``channel`` to a source named on the command line.

    Scripted sources (a file, or standard input when it is not a terminal)
    are read completely before the run so that a given command script
    always produces the same trace.  An interactive terminal or a socket is
    read concurrently with execution.  Returns a closer.
    """
    if spec.startswith("socket:"):
        server = channel.serve_socket(spec[len("socket:"):])
        return server.close
    if spec == "stdin":
        if sys.stdin.isatty():
            channel.read_stream(sys.stdin)
        else:
            channel.load(sys.stdin.read().splitlines())
        return lambda: None
    try:
        lines = Path(spec).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read control script {spec}: {exc.strerror or exc}") from exc
    channel.base_dir = Path(spec).parent
    channel.load(lines)
    return lambda: None
