"""Threaded IRC client/server toolkit.

Layers, bottom up:

- :mod:`irckit.wire` — bit-exact message codec and CRLF framing
- :mod:`irckit.events` — reusable full-duplex dual-loop event endpoint
- :mod:`irckit.dispatch` — validated command-tag branch tables
- :mod:`irckit.server` / :mod:`irckit.client` — the two protocol roles
- :mod:`irckit.bridge` — WebSocket JSON gateway for browser frontends
- :mod:`irckit.harness` — CLI, conformance scenarios, load generator
"""

from irckit.wire import (
    Command,
    CommandTag,
    FrameBuffer,
    RawMessage,
    TypedMessage,
    UnknownCommand,
    classify,
    decode_line,
    parse_line,
    serialize,
)
from irckit.events import (
    EndpointEvents,
    EventQueue,
    Fault,
    FaultKind,
    LocalHooks,
    StopDecision,
    TerminationReport,
    pipe_pair,
    split,
)
from irckit.dispatch import BranchTable, DuplicateBranch, ValidationReport
from irckit.server import IrcServer, ServerConfig
from irckit.client import ClientEvent, ConnectFailure, IrcClient

__all__ = [
    "BranchTable",
    "ClientEvent",
    "Command",
    "CommandTag",
    "ConnectFailure",
    "DuplicateBranch",
    "EndpointEvents",
    "EventQueue",
    "Fault",
    "FaultKind",
    "FrameBuffer",
    "IrcClient",
    "IrcServer",
    "LocalHooks",
    "RawMessage",
    "ServerConfig",
    "StopDecision",
    "TerminationReport",
    "TypedMessage",
    "UnknownCommand",
    "ValidationReport",
    "classify",
    "decode_line",
    "parse_line",
    "pipe_pair",
    "serialize",
    "split",
]
