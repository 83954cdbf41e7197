"""Acceptance suite: one test per criterion, each printing a PASS/FAIL verdict line.

Run alone with ``pytest tests/test_acceptance.py -v`` (verdicts print even
under output capture), or as a script.
"""

from __future__ import annotations

import contextlib
import random
import sys
import time
from fractions import Fraction
from pathlib import Path

import pytest

import bundlegen
import rulegen
from contextserv.bench import MIN_REPS, bench_aspect_vs_inline, bench_empty_activation, bench_selection, monotone_within
from contextserv.bundle import parse_bundle, parse_bundle_text
from contextserv.clock import FrozenClock
from contextserv.community.broker import CommunityBroker, CommunityConfig, ProviderRecord
from contextserv.community.monitor import MonitorLog, StateEvent
from contextserv.community.quality import up_to_dateness
from contextserv.community.scoring import AttributeSpec, Polarity, ValueMatrix, build_score_matrix, utility
from contextserv.control import ControlChannel, open_control
from contextserv.errors import UntransformableElement
from contextserv.process.engine import Status
from contextserv.process.ir import Mode
from contextserv.process.transform import transform
from contextserv.rules import ast as A
from contextserv.rules import parse_rule, pretty_print
from contextserv.runtime import prepare_run, run_bundle

FIXTURES = Path(__file__).parent / "fixtures"
NEG, POS = Polarity.NEGATIVE, Polarity.POSITIVE


@pytest.fixture
def verdict(capsys):
    """``with verdict(n, title):`` prints PASS or FAIL for criterion ``n`` and re-raises failures."""

    @contextlib.contextmanager
    def check(n: int, title: str):
        try:
            yield
        except BaseException as exc:
            with capsys.disabled():
                print(f"\nFAIL criterion {n}: {title} -- {type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
            raise
        with capsys.disabled():
            print(f"\nPASS criterion {n}: {title}")

    return check


# 1. selection oracle equivalence
STATIC = {
    "precision": ("precision", [0, 0.25, 0.5, 0.75, 1]),
    "correctnessProbability": ("correctness_probability", [0, 0.3, 0.6, 0.9, 1]),
    "refreshRate": ("refresh_rate", [0.5, 1, 2, 3]),
    "executionPrice": ("execution_price", [0, 1, 2, 3, 10]),
}


def brute_force_choice(rows, specs):
    """Exact rational weighted sum of min-max scores; first maximum in registration order wins."""
    bounds = {}
    for name, _, _ in specs:
        vals = [Fraction(str(r[name])) for _, r in rows]
        bounds[name] = (max(vals), min(vals))
    best, best_u = None, None
    for pid, r in rows:
        u = Fraction(0)
        for name, polarity, w in specs:
            hi, lo = bounds[name]
            v = Fraction(str(r[name]))
            if hi == lo:
                s = Fraction(1)
            elif polarity is NEG:
                s = (hi - v) / (hi - lo)
            else:
                s = (v - lo) / (hi - lo)
            u += w * s
        if best_u is None or u > best_u:
            best, best_u = pid, u
    return best


def random_community(rng: random.Random):
    names = rng.sample(list(STATIC), rng.randint(1, 4))
    ks = [rng.randint(1, 10) for _ in names]
    specs = [(nm, rng.choice([NEG, POS]), Fraction(k, sum(ks))) for nm, k in zip(names, ks)]
    rows = [(f"p{i}", {a: rng.choice(vals) for a, (_, vals) in STATIC.items()}) for i in range(rng.randint(1, 8))]
    return specs, rows


def broker_choice(specs, rows) -> str:
    b = CommunityBroker(clock=FrozenClock(0), log=MonitorLog())
    b.add_community(CommunityConfig("c", "ctx", tuple(AttributeSpec(n, p, float(w)) for n, p, w in specs)))
    for pid, r in rows:
        b.add_context_source("c", ProviderRecord(pid, "c", r["precision"], r["correctnessProbability"],
                                                 r["refreshRate"], r["executionPrice"]))
    return b.select_context_source("c").chosen


def test_criterion_1_selection_matches_brute_force(verdict):
    with verdict(1, "broker choice equals brute-force argmax on 1000 random communities in < 10 s"):
        t0 = time.perf_counter()
        mismatches = []
        for case in range(1000):
            specs, rows = random_community(random.Random(case))
            if broker_choice(specs, rows) != brute_force_choice(rows, specs):
                mismatches.append(case)
        elapsed = time.perf_counter() - t0
        assert not mismatches, f"mismatching cases {mismatches[:10]}"
        assert elapsed < 10.0, f"took {elapsed:.2f} s"


# 2. worked example
def test_criterion_2_worked_example(verdict):
    with verdict(2, "U = [0.9082, 0, 0.75] (4 dp of the exact values, each within 1e-9); p1 chosen, p3 on fallback"):
        specs = (AttributeSpec("executionPrice", NEG, 0.5), AttributeSpec("correctnessProbability", POS, 0.5))
        m = ValueMatrix.from_rows(["p1", "p2", "p3"], [s.name for s in specs], [[100, 0.9], [200, 0.5], [150, 0.99]])
        u = [x for _, x in utility(build_score_matrix(m, specs), [0.5, 0.5])]
        half = Fraction(1, 2)
        exact = [half * 1 + half * Fraction(40, 49), Fraction(0), half * Fraction(1, 2) + half * 1]
        assert all(abs(a - float(e)) <= 1e-9 for a, e in zip(u, exact))
        assert [round(x, 4) for x in u] == [0.9082, 0.0, 0.75]

        b = CommunityBroker(clock=FrozenClock(0), log=MonitorLog())
        b.add_community(CommunityConfig("c", "ctx", specs))
        for pid, price, correct in (("p1", 100, 0.9), ("p2", 200, 0.5), ("p3", 150, 0.99)):
            b.add_context_source("c", ProviderRecord(pid, "c", 1.0, correct, 1.0, price))
        assert b.select_context_source("c").chosen == "p1"
        b.record_event(StateEvent("p1", 0, False))
        assert b.select_context_source("c").chosen == "p3"


# 3. degenerate column
def test_criterion_3_degenerate_column(verdict):
    with verdict(3, "a column with one shared value scores exactly 1.0 for every provider"):
        rng = random.Random(3)
        for _ in range(200):
            n = rng.randint(1, 8)
            shared = rng.choice([0.0, 1.0, 2.5, 1e6])
            other = [rng.uniform(0, 10) for _ in range(n)]
            for polarity in (NEG, POS):
                specs = (AttributeSpec("executionPrice", polarity, 0.5), AttributeSpec("precision", POS, 0.5))
                m = ValueMatrix.from_rows([f"p{i}" for i in range(n)], [s.name for s in specs],
                                          [[shared, o] for o in other])
                assert build_score_matrix(m, specs).cells[:, 0].tolist() == [1.0] * n


# 4. up-to-dateness boundaries
def test_criterion_4_up_to_dateness_boundaries(verdict):
    with verdict(4, "Q_utd is exactly 0 at age t_theta and 0.75 (1e-12) at age t_theta/4"):
        for t_theta in (4, 1000, 60_000, 3_600_000):
            for t_med in (0, 12_345):
                assert up_to_dateness(t_med + t_theta, t_med, t_theta) == 0.0
                assert abs(up_to_dateness(t_med + t_theta // 4, t_med, t_theta) - 0.75) <= 1e-12


# 5. selection performance shape
def test_criterion_5_selection_performance(verdict):
    with verdict(5, "1000-provider selection mean <= 50 ms and mean non-decreasing over n = 100..1000"):
        rep = bench_selection((100, 250, 500, 1000), reps=20)
        means = [s.mean_ms for s in rep.samples]
        assert means[-1] <= 50.0, f"n=1000 mean {means[-1]:.3f} ms"
        assert all(a <= b for a, b in zip(means, means[1:])), f"means {means}"


# 6. grammar round trip
R1_TEXT = ('[Cond] Weather.temperature greater than "30" and Weather.windspeed greater than "25" '
           '[Action] Filter("Filter out outdoor activities", ActivityList)')
R1_AST = A.RuleAst(
    "R1",
    A.RuleType.ACTION,
    A.And(A.Compare(A.PropertyRef(A.PropertyPath("Weather", None, (), "temperature")), A.RelOp.GT, A.Const("30")),
          A.Compare(A.PropertyRef(A.PropertyPath("Weather", None, (), "windspeed")), A.RelOp.GT, A.Const("25"))),
    (A.CallAction(A.FunCall("Filter", (A.Const("Filter out outdoor activities"),
                                       A.PropertyRef(A.PropertyPath("ActivityList"))))),),
)


def test_criterion_6_grammar_round_trip(verdict):
    with verdict(6, "10,000 generated rules satisfy parse(print(r)) == r; R1 parses to the documented AST"):
        rng = random.Random(6)
        for i in range(10_000):
            ast = rulegen.rule(rng)
            assert parse_rule(pretty_print(ast)) == ast, f"case {i}"
        r1 = parse_rule(R1_TEXT, "R1")
        assert r1 == R1_AST
        assert parse_rule(pretty_print(r1)) == R1_AST


# 7. aspect / switch equivalence
def test_criterion_7_modes_agree(verdict):
    with verdict(7, "200 random bundles: aspect and switch modes give identical env and invocation counts"):
        for case in range(200):
            text = bundlegen.random_bundle(random.Random(case))
            a = run_bundle(parse_bundle_text(text), Mode.ASPECT, seed=case)
            s = run_bundle(parse_bundle_text(text), Mode.SWITCH, seed=case)
            assert a.status is Status.COMPLETED and s.status is Status.COMPLETED, f"case {case}"
            assert a.env == s.env, f"case {case}"
            assert dict(a.invocation_counts) == dict(s.invocation_counts), f"case {case}"


# 8. around exclusion
def test_criterion_8_around_excludes_target(verdict):
    with verdict(8, "an around-targeted activity without Replace is never invoked"):
        for case in range(200):
            rng = random.Random(case)
            target = f"A{rng.randint(0, 3)}"
            bundle = parse_bundle_text(bundlegen.random_bundle(rng, around=target))
            around = next(a for a in bundle.aspects)
            for mode in Mode:
                inst = run_bundle(bundle, mode, seed=case)
                assert inst.status is Status.COMPLETED, f"case {case}: {inst.fault_reason}"
                assert inst.invocation_counts[around.target] == 0, f"case {case}"


# 9. hot swap
def test_criterion_9_hot_swap(verdict):
    with verdict(9, "mid-run R1 30 -> 25 swap: old threshold before, new after, version +1 exactly once"):
        text = (FIXTURES / "tour.bundle").read_text().replace("value 34.5", "value 28.0").replace(
            "value 33.0", "value 28.0")
        engine, inst, _ = prepare_run(parse_bundle_text(text))
        channel = ControlChannel(engine.store)
        open_control(str(FIXTURES / "hotswap.ctl"), channel)
        engine.hooks.append(channel.hook)
        engine.run(inst)
        assert inst.status is Status.COMPLETED
        before, after = inst.activation_log
        assert before.fired == () and "outdoor:Harbour kayak" in before.variables_out["findResponse"]["ActivityList"]
        assert after.fired == ("R1",)
        assert after.variables_out["findResponse"]["ActivityList"] == ["indoor:Art gallery", "indoor:Aquarium"]
        assert (before.store_version, after.store_version) == (0, 1) and engine.store.version == 1


# 10. benchmark shape
def test_criterion_10_benchmark_shape(verdict):
    with verdict(10, "empty activation monotone within 5%; aspect >= inline at every level; >= 5 reps"):
        empty = bench_empty_activation((0, 25, 50, 75, 100), reps=10)
        means = [s.mean_ms for s in empty.samples]
        assert monotone_within(means, 0.05), f"empty-activation means {means}"
        mixed = bench_aspect_vs_inline((10, 100), (1, 10, 30), reps=10)
        for level in (1, 10, 30):
            for count in (10, 100):
                a, i = mixed.mean(f"aspect:L{level}:R{count}"), mixed.mean(f"inline:L{level}:R{count}")
                assert a >= i, f"L{level} R{count}: aspect {a:.4f} < inline {i:.4f}"
        assert all(s.repetitions >= MIN_REPS for s in empty.samples + mixed.samples)


# 11. transformation totality
KINDS = ("service", "message", "operation", "activity", "atomicContext", "compositeContext", "contextBinding",
         "part", "contextTriggering")


def test_criterion_11_transformation_totality(verdict):
    with verdict(11, "all-kinds bundle transforms in both modes; audit finds every mapped element kind"):
        bundle = parse_bundle(FIXTURES / "allkinds.bundle")
        for mode in Mode:
            try:
                exe = transform(bundle, mode)
            except UntransformableElement as exc:  # pragma: no cover - reported as the failure
                raise AssertionError(f"{mode.value}: {exc}") from exc
            found = {kind for kind, _, _ in exe.mapping}
            assert set(KINDS) <= found, f"{mode.value}: missing {sorted(set(KINDS) - found)}"
            for kind, name, ids in exe.mapping:
                assert ids and all(i in exe.by_id for i in ids), f"{kind} {name} maps to missing nodes"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
