"""Wire a parsed bundle into a broker, a connector and an engine."""

from __future__ import annotations

from dataclasses import dataclass

from .clock import FrozenClock
from .community.broker import CommunityBroker
from .community.monitor import MonitorLog
from .model import ModelBundle
from .process.connectors import SimulatedConnector
from .process.engine import Engine, ProcessInstance
from .process.ir import ExecutableProcess, Mode
from .process.transform import transform
from .rules.functions import DEFAULT_REGISTRY, FunctionRegistry
from .weave import RuleStore


@dataclass
class Runtime:
    bundle: ModelBundle
    clock: FrozenClock
    broker: CommunityBroker
    connector: SimulatedConnector


def build_runtime(bundle: ModelBundle, seed: int = 0, clock=None, log: MonitorLog | None = None,
                  log_dir=None) -> Runtime:
    """Register every community and provider, attaching simulated endpoints.

    A provider uses the ``simulate`` block named by its ``endpoint`` field,
    else the one carrying its own id.  Scheduled outages are written to the
    monitor log as State events so selection sees them at the right time.
    """
    clock = clock if clock is not None else FrozenClock(0)
    broker = CommunityBroker(clock=clock, log=log, log_dir=log_dir)
    sims = {s.id: s for s in bundle.simulations}
    for com in bundle.communities:
        broker.add_community(com)
    for rec in bundle.providers:
        sim = sims.get(rec.endpoint or rec.id)
        if sim is not None and sim.seed != seed:
            sim = type(sim)(**{**sim.__dict__, "seed": seed})
        broker.add_context_source(rec.community, rec, sim)
        if sim is not None:
            for ev in sim.state_events():
                broker.record_event(type(ev)(rec.id, ev.at, ev.available))
    connector = SimulatedConnector(bundle.endpoints, seed=seed, clock=clock)
    return Runtime(bundle, clock, broker, connector)


def prepare_run(bundle: ModelBundle, mode: Mode = Mode.ASPECT, seed: int = 0, process: str | None = None,
                functions: FunctionRegistry = DEFAULT_REGISTRY, runtime: Runtime | None = None,
                hooks=(), instance_id: str = "i1") -> tuple[Engine, ProcessInstance, ExecutableProcess]:
    """Transform, build an engine and an instance with bindings already applied."""
    exe = transform(bundle, mode, process)
    rt = runtime or build_runtime(bundle, seed)
    engine = Engine(exe, rt.connector, rt.broker, RuleStore(exe.rules), bundle, functions, rt.clock, seed, hooks)
    inst = engine.new_instance(instance_id)
    return engine, inst, exe


def run_bundle(bundle: ModelBundle, mode: Mode = Mode.ASPECT, seed: int = 0, **kw) -> ProcessInstance:
    engine, inst, _ = prepare_run(bundle, mode, seed, **kw)
    return engine.run(inst)


