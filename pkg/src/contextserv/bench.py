"""Timing experiments for provider selection and aspect activation.

Reports are emitted as ``BENCH`` lines plus an ``ENV`` fingerprint, and as
CSV for plotting.  Every setting runs at least ``MIN_REPS`` times.
"""

from __future__ import annotations

import csv
import gc
import io
import os
import platform
import random
import statistics
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .clock import FrozenClock
from .community.broker import CommunityBroker, rank_qualities
from .community.monitor import InvokeEvent, MonitorLog, RateEvent
from .process.engine import ProcessInstance, exchange_variables
from .process.ir import AspectPoint, EventNode, ExecutableProcess, InvokeKind, InvokeNode, Mode, ProcessRoot
from .rules.evaluator import evaluate_condition, execute_actions
from .rules.parser import parse_rule
from .sim import build_fleet
from .weave import Aspect, AspectKind, Position, RuleStore, activate

MIN_REPS = 5
CSV_HEADER = ("scenario", "parameter", "repetitions", "mean_ms", "min_ms", "max_ms")


@dataclass(frozen=True)
class Sample:
    parameter: str
    repetitions: int
    mean_ms: float
    min_ms: float
    max_ms: float

    @classmethod
    def of(cls, parameter, times_ms: list[float]) -> "Sample":
        return cls(str(parameter), len(times_ms), statistics.fmean(times_ms), min(times_ms), max(times_ms))


@dataclass
class BenchmarkReport:
    scenario: str
    samples: list[Sample] = field(default_factory=list)
    environment: dict[str, str] = field(default_factory=dict)

    def to_lines(self) -> list[str]:
        env = " ".join(f"{k}={v}" for k, v in sorted(self.environment.items()))
        out = [f"ENV {self.scenario} {env}".rstrip()]
        for s in self.samples:
            out.append(f"BENCH {self.scenario} {s.parameter} {s.repetitions} "
                       f"{s.mean_ms:.6f} {s.min_ms:.6f} {s.max_ms:.6f}")
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in self.samples:
            w.writerow((self.scenario, s.parameter, s.repetitions, f"{s.mean_ms:.6f}", f"{s.min_ms:.6f}",
                        f"{s.max_ms:.6f}"))
        return buf.getvalue()

    def mean(self, parameter) -> float:
        return next(s.mean_ms for s in self.samples if s.parameter == str(parameter))


def parse_report_lines(lines) -> list[BenchmarkReport]:
    """Inverse of ``to_lines`` (floats as printed)."""
    reports: dict[str, BenchmarkReport] = {}
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "ENV":
            rep = reports.setdefault(parts[1], BenchmarkReport(parts[1]))
            rep.environment.update(p.split("=", 1) for p in parts[2:])
        elif parts[0] == "BENCH":
            if len(parts) != 7:
                raise ValueError(f"malformed BENCH line {line!r}")
            rep = reports.setdefault(parts[1], BenchmarkReport(parts[1]))
            rep.samples.append(Sample(parts[2], int(parts[3]), float(parts[4]), float(parts[5]), float(parts[6])))
    return list(reports.values())


def fingerprint() -> dict[str, str]:
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "machine": platform.machine() or "unknown",
        "system": platform.system() or "unknown",
        "cpus": str(os.cpu_count() or 0),
        "impl": sys.implementation.name,
    }


def _time_ms(fn, reps: int, inner: int = 1, warmup: int = 1) -> list[float]:
    """Per-call milliseconds for ``reps`` repetitions, each averaging ``inner`` calls."""
    for _ in range(warmup):
        fn()
    was = gc.isenabled()
    gc.disable()
    try:
        out = []
        for _ in range(reps):
            t0 = time.perf_counter_ns()
            for _ in range(inner):
                fn()
            out.append((time.perf_counter_ns() - t0) / 1e6 / inner)
        return out
    finally:
        if was:
            gc.enable()


# selection
def bench_selection(ns=(100, 250, 500, 1000), reps: int = 20, seed: int = 0, full: bool = False,
                    history: int = 5) -> BenchmarkReport:
    """Algorithm-only ranking over precomputed quality, or (``full``) the whole retrieve path."""
    reps = max(reps, MIN_REPS)
    rep = BenchmarkReport("selection-full" if full else "selection", environment=fingerprint())
    rep.environment["seed"] = str(seed)
    for n in ns:
        fleet = build_fleet(n, seed)
        if not full:
            times = _time_ms(lambda: rank_qualities(fleet.config, fleet.qualities), reps)
        else:
            broker = _fleet_broker(fleet, seed, history)
            times = _time_ms(lambda: broker.retrieve_context(fleet.config.id, 10_000), reps)
        rep.samples.append(Sample.of(n, times))
    return rep


def _fleet_broker(fleet, seed: int, history: int) -> CommunityBroker:
    broker = CommunityBroker(clock=FrozenClock(10_000), log=MonitorLog())
    broker.add_community(fleet.config)
    rng = random.Random(seed)
    for rec, sim in zip(fleet.records, fleet.providers):
        broker.add_context_source(fleet.config.id, rec, sim)
        for k in range(history):
            at = 1000 * (k + 1)
            broker.record_event(InvokeEvent(rec.id, at, sim.base_response_ms, rng.random() > 0.1, at - 50))
        broker.record_event(RateEvent(rec.id, 5000, round(rng.uniform(0, 5), 1)))
    return broker


# aspect activation
def _activation_fixture(n_vars: int, rules=()):
    names = tuple(f"x{i}" for i in range(n_vars))
    aspect = Aspect(AspectKind.AFTER, "a", tuple(r.id for r in rules), names)
    nodes = (ProcessRoot("root", "bench", "bench"), EventNode("S", "Start"),
             InvokeNode("a", InvokeKind.OPERATION, "a", "a"), AspectPoint("post:a", "a", Position.POST, (aspect,)),
             EventNode("E", "End"))
    exe = ExecutableProcess("bench", Mode.ASPECT, nodes, (("S", "a"), ("a", "post:a"), ("post:a", "E")), tuple(rules))
    inst = ProcessInstance.create(exe, "b", {n: float(i) for i, n in enumerate(names)} | {"y": 0.0})
    return inst, aspect


def _aspect_call(inst, aspect, store):
    def run():
        vars_in, apply = exchange_variables(inst, aspect)
        record = activate(aspect, vars_in, store)
        apply(record.variables_out)
    return run


def bench_empty_activation(var_counts=(0, 25, 50, 75, 100), reps: int = 10, inner: int = 200) -> BenchmarkReport:
    """Cost of activating an aspect with no rules against ``v`` exchanged variables."""
    reps = max(reps, MIN_REPS)
    rep = BenchmarkReport("aspect-empty", environment=fingerprint())
    store = RuleStore()
    for v in var_counts:
        inst, aspect = _activation_fixture(v)
        rep.samples.append(Sample.of(v, _time_ms(_aspect_call(inst, aspect, store), reps, inner)))
    return rep


def make_rules(count: int, level: int, seed: int = 0) -> list:
    """``count`` rules whose conditions each compare ``level`` variables."""
    rng = random.Random(seed)
    out = []
    for j in range(count):
        conds = " and ".join(f"x{i} greater than {rng.randint(0, level)}" for i in range(level))
        out.append(parse_rule(f"rule B{j} {{ [Cond] {conds} [Action] y = y + 1 }}"))
    return out


def bench_aspect_vs_inline(rule_counts=(10, 100), levels=(1, 10, 30), reps: int = 10, inner: int = 20,
                           seed: int = 0) -> BenchmarkReport:
    """Same rules evaluated behind an aspect boundary and as inline conditionals."""
    reps = max(reps, MIN_REPS)
    rep = BenchmarkReport("aspect-vs-inline", environment=fingerprint())
    for level in levels:
        for count in rule_counts:
            rules = make_rules(count, level, seed)
            inst, aspect = _activation_fixture(max(level, 1), rules)
            aspect = Aspect(aspect.kind, aspect.target, aspect.rules, (*aspect.extras, "y"))
            store = RuleStore(rules)
            rep.samples.append(Sample.of(f"aspect:L{level}:R{count}",
                                         _time_ms(_aspect_call(inst, aspect, store), reps, inner)))
            env = dict(inst.env)

            def inline(env=env, rules=rules):
                for r in rules:
                    if evaluate_condition(r.condition, env):
                        execute_actions(r, env, None, copy_env=False)

            rep.samples.append(Sample.of(f"inline:L{level}:R{count}", _time_ms(inline, reps, inner)))
    return rep


def monotone_within(values, band: float = 0.05) -> bool:
    """Each value is at least the running maximum shrunk by ``band``."""
    peak = -float("inf")
    for v in values:
        if v < peak * (1 - band):
            return False
        peak = max(peak, v)
    return True
