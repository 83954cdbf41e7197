from __future__ import annotations

import random
from pathlib import Path

from hypothesis import given, settings, strategies as st

from contextserv.bundle import parse_bundle_text
from contextserv.validation import validate_bundle

FIXTURES = Path(__file__).parent / "fixtures"


def text(name: str) -> str:
    return (FIXTURES / name).read_text()


def messages(report) -> list[str]:
    return [str(i) for i in report.violations]


def test_fixtures_are_valid():
    for name in ("tour.bundle", "binding.bundle"):
        report = validate_bundle(parse_bundle_text(text(name)))
        assert report.ok and report.violations == (), report.lines()


def test_composite_without_children():
    t = text("tour.bundle").replace("  children temperature, windSpeed\n", "")
    assert "context/harshWeather: composite context has no children" in messages(
        validate_bundle(parse_bundle_text(t)))


def test_binding_type_mismatch():
    t = text("binding.bundle").replace("type Text", "type Boolean").replace('value "Sydney"', "value true")
    msgs = messages(validate_bundle(parse_bundle_text(t)))
    assert any("type mismatch: context is Boolean, part is Text" in m for m in msgs)


def test_undefined_references():
    t = text("tour.bundle").replace("source community weather", "source community nowhere").replace(
        "chart harshChart\n", "chart ghostChart\n")
    msgs = messages(validate_bundle(parse_bundle_text(t)))
    assert "context/temperature: community 'nowhere' is not defined" in msgs
    assert "context/harshWeather: statechart 'ghostChart' is not defined" in msgs


def test_composite_cycle():
    t = text("tour.bundle").replace("children temperature, windSpeed", "children temperature, loopy") + """
context loopy {
  type Boolean
  chart harshChart
  children harshWeather
}
"""
    assert any("composite dependency cycle" in m for m in messages(validate_bundle(parse_bundle_text(t))))


def test_unresolvable_endpoint():
    t = text("tour.bundle").replace("endpoint finder\n  activity findAfternoon", "endpoint nowhere\n  activity findAfternoon")
    assert "process/tour/findMorning: endpoint 'nowhere' cannot be resolved" in messages(
        validate_bundle(parse_bundle_text(t)))


def test_aspect_warnings_are_not_violations():
    t = text("tour.bundle") + "\naspect before findMorning rules Later\n"
    report = validate_bundle(parse_bundle_text(t))
    assert report.ok and any("'Later'" in str(w) for w in report.warnings)


def _sections(t: str) -> list[str]:
    return [s for s in t.split("\n\n") if s.strip()]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_report_ignores_section_order(seed):
    broken = text("tour.bundle").replace("source community weather", "source community nowhere").replace(
        "  children temperature, windSpeed\n", "")
    parts = _sections(broken)
    shuffled = parts[:]
    random.Random(seed).shuffle(shuffled)
    a = validate_bundle(parse_bundle_text("\n\n".join(parts)))
    b = validate_bundle(parse_bundle_text("\n\n".join(shuffled)))
    assert a == b and not a.ok
