from __future__ import annotations

import io
import socket
from pathlib import Path

import pytest

from contextserv.bundle import parse_bundle
from contextserv.control import ControlChannel, open_control, parse_command
from contextserv.errors import IoError, ParseError
from contextserv.process.engine import Status
from contextserv.rules import parse_rule
from contextserv.runtime import prepare_run
from contextserv.weave import RuleStore

FIXTURES = Path(__file__).parent / "fixtures"
R1 = ('rule R1 { [Cond] Weather.temperature greater than 30 and Weather.windspeed greater than 25 '
      '[Action] Filter("Filter out outdoor activities", findResponse.ActivityList) }')


def channel(**kw):
    return ControlChannel(RuleStore([parse_rule(R1)]), base_dir=FIXTURES, **kw)


def test_parse_commands():
    assert parse_command("  # nothing") is None
    cmd = parse_command("@findAfternoon rule-replace R1 r1_25.rule # why")
    assert (cmd.at_node, cmd.name, cmd.args) == ("findAfternoon", "rule-replace", ("R1", "r1_25.rule"))
    assert str(cmd) == "@findAfternoon rule-replace R1 r1_25.rule"


@pytest.mark.parametrize("text", ["rule-jump R1", "rule-remove", "rule-list extra", "@ rule-list", "@node",
                                  "provider-state p maybe"])
def test_bad_commands(text):
    with pytest.raises(ParseError):
        parse_command(text, 4)


def test_replace_and_list():
    ch = channel()
    assert ch.submit_line("rule-replace R1 r1_25.rule") == "OK rule-replace R1 version 1"
    assert ch.submit_line("rule-list") == "OK rule-list version 1 R1"
    assert ch.submit_line("rule-remove R1") == "OK rule-remove R1 version 2"
    assert ch.submit_line("rule-list") == "OK rule-list version 2 -"


def test_errors_are_replies_not_exceptions():
    ch = channel()
    assert ch.submit_line("rule-remove nope").startswith("ERR rule-remove")
    assert ch.submit_line("rule-add missing.rule").startswith("ERR rule-add")
    assert ch.submit_line("bogus").startswith("ERR")
    assert ch.submit_line("provider-state p available").startswith("ERR provider-state")
    assert ch.store.version == 0 and len(ch.responses) == 4


def test_deferred_commands_fire_at_their_node():
    ch = channel()
    ch.load(["@B rule-remove R1", "rule-list"])
    assert [str(c) for c in ch.pending] == ["@B rule-remove R1"] and ch.store.version == 0
    ch.hook(None, None, "A")
    assert ch.store.version == 0
    ch.hook(None, None, "B")
    assert ch.store.version == 1 and not ch.pending


def test_script_hot_swap_during_tour():
    bundle = parse_bundle(FIXTURES / "tour.bundle")
    engine, inst, _ = prepare_run(bundle)
    ch = ControlChannel(engine.store)
    open_control(str(FIXTURES / "hotswap.ctl"), ch)
    engine.hooks.append(ch.hook)
    engine.run(inst)
    assert inst.status is Status.COMPLETED
    assert [r.store_version for r in inst.activation_log] == [0, 1]
    assert engine.store.version == 1
    assert ch.responses == ["OK rule-replace R1 version 1", "OK rule-list version 1 R1"]


def test_missing_script():
    with pytest.raises(IoError):
        open_control(str(FIXTURES / "nope.ctl"), channel())


def test_stream_reader_runs_concurrently():
    ch = channel()
    ch.read_stream(io.StringIO("rule-remove R1\nrule-list\n")).join(timeout=5)
    assert ch.responses == ["OK rule-remove R1 version 1", "OK rule-list version 1 -"]


def test_socket_round_trip(tmp_path):
    ch = channel()
    path = str(tmp_path / "ctl.sock")
    close = open_control(f"socket:{path}", ch)
    try:
        with socket.socket(socket.AF_UNIX, socket.SOCK_STREAM) as s:
            s.connect(path)
            with s.makefile("rw", encoding="utf-8") as fh:
                fh.write("rule-remove R1\n@X rule-list\n")
                fh.flush()
                assert fh.readline().strip() == "OK rule-remove R1 version 1"
                assert fh.readline().strip() == "OK deferred @X rule-list"
    finally:
        close()
    assert ch.store.version == 1


def test_provider_state_injection():
    from contextserv.runtime import build_runtime

    rt = build_runtime(parse_bundle(FIXTURES / "tour.bundle"))
    rt.clock.set(5000)
    ch = ControlChannel(RuleStore(), rt.broker, clock=rt.clock)
    assert ch.submit_line("provider-state bom unavailable") == "OK provider-state bom unavailable at 5000"
    rt.clock.set(5001)
    assert rt.broker.select_context_source("weather", now=5001).chosen != "bom"
