"""Base process models, the IR transformer and the process interpreter."""

from .base import BaseModel, BusinessActivity, Event, EventKind, GatewayMode, ParallelGateway, VariableSpec, check_base
from .connectors import Connector, EndpointSpec, HttpConnector, SimulatedConnector
from .engine import (
    EXIT_CODES,
    ContextResolver,
    Engine,
    ProcessInstance,
    Status,
    TraceRecord,
    bind_contexts,
    declared_variables,
    exchange_variables,
)
from .ir import (
    AspectPoint,
    AssignNode,
    EventNode,
    ExecutableProcess,
    GatewayNode,
    InvokeKind,
    InvokeNode,
    Mode,
    ProcessRoot,
    SwitchNode,
    VariableDecl,
    dump_ir,
    load_ir,
)
from .transform import transform

__all__ = [
    "AspectPoint",
    "AssignNode",
    "BaseModel",
    "BusinessActivity",
    "Connector",
    "ContextResolver",
    "EXIT_CODES",
    "EndpointSpec",
    "Engine",
    "Event",
    "EventKind",
    "EventNode",
    "ExecutableProcess",
    "GatewayMode",
    "GatewayNode",
    "HttpConnector",
    "InvokeKind",
    "InvokeNode",
    "Mode",
    "ParallelGateway",
    "ProcessInstance",
    "ProcessRoot",
    "SimulatedConnector",
    "Status",
    "SwitchNode",
    "TraceRecord",
    "VariableDecl",
    "VariableSpec",
    "bind_contexts",
    "check_base",
    "declared_variables",
    "dump_ir",
    "exchange_variables",
    "load_ir",
    "transform",
]
