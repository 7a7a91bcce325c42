"""IRC client role: one duplex endpoint, a command API, a typed event sink.

Local code drives the protocol exclusively by enqueueing: every command
API call constructs a typed message and appends it to the client's
event queue, so wire order always equals call order.  Server-originated
traffic arrives on the inbound loop, updates :class:`ClientState`, and
surfaces as :class:`ClientEvent` values through the sink.  Pings are
answered in the handler itself, so a slow sink never delays a pong.
"""

from __future__ import annotations

import logging
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Union

from irckit.dispatch import BranchTable
from irckit.events import (
    EndpointEvents,
    Fault,
    FaultKind,
    LocalHooks,
    SocketTransport,
    StopDecision,
    split,
)
from irckit.wire import (
    SERVER_TO_CLIENT,
    Command,
    EndOfNames,
    Err,
    ErrorMsg,
    Join,
    NamReply,
    Nick,
    Part,
    Ping,
    Pong,
    Privmsg,
    Quit,
    RawMessage,
    TypedMessage,
    User,
    decode_line,
    serialize,
)

log = logging.getLogger(__name__)


class ConnectFailure(Exception):
    pass


# --------------------------------------------------------------------- #
#  events surfaced to the embedder                                      #
# --------------------------------------------------------------------- #


@dataclass(frozen=True)
class Registered:
    text: str


@dataclass(frozen=True)
class ChannelMessage:
    sender: str
    channel: str
    text: str


@dataclass(frozen=True)
class DirectMessage:
    sender: str
    text: str


@dataclass(frozen=True)
class Joined:
    nick: str
    channel: str


@dataclass(frozen=True)
class Parted:
    nick: str
    channel: str
    reason: str | None = None


@dataclass(frozen=True)
class Names:
    channel: str
    members: tuple[str, ...]


@dataclass(frozen=True)
class NickChanged:
    old: str
    new: str


@dataclass(frozen=True)
class QuitSeen:
    nick: str
    reason: str | None = None


@dataclass(frozen=True)
class ServerError:
    numeric: int
    text: str


@dataclass(frozen=True)
class Disconnected:
    cause: str


ClientEvent = Union[
    Registered,
    ChannelMessage,
    DirectMessage,
    Joined,
    Parted,
    Names,
    NickChanged,
    QuitSeen,
    ServerError,
    Disconnected,
]


@dataclass
class ClientState:
    """The client's own view of the session, fed by inbound traffic."""

    own_nick: str | None = None
    registered: bool = False
    memberships: dict[str, list[str]] = field(default_factory=dict)
    pending_names: dict[str, list[str]] = field(default_factory=dict)


def _nick_of(source: str | None) -> str:
    """Originating nick from a source prefix (ident/host stripped)."""
    if not source:
        return ""
    return source.split("!", 1)[0]


class IrcClient:
    """A running client session handle.

    The command API is callable from any thread; events are delivered
    serially from the inbound loop, either to the ``sink`` callable or,
    by default, onto an internal queue readable via :meth:`next_event`.
    """

    def __init__(
        self,
        endpoint: EndpointEvents[TypedMessage],
        sink: Callable[[ClientEvent], None] | None = None,
        name: str = "client",
    ):
        self._endpoint = endpoint
        self.state = ClientState()
        self._events: queue.Queue[ClientEvent] = queue.Queue()
        self._sink = sink or self._events.put
        self._disconnect_emitted = False
        self._table = self._build_table()
        self._thread = threading.Thread(target=endpoint.run, name=f"{name}-run", daemon=True)

    # -- lifecycle --------------------------------------------------------- #

    @classmethod
    def connect(
        cls,
        host: str,
        port: int,
        *,
        sink: Callable[[ClientEvent], None] | None = None,
        name: str = "client",
        timeout: float = 10.0,
    ) -> "IrcClient":
        """Open a TCP connection and start the endpoint loops."""
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ConnectFailure(f"cannot connect to {host}:{port}: {exc}") from exc
        sock.settimeout(None)
        link = split(SocketTransport(sock))
        client = cls.__new__(cls)
        endpoint: EndpointEvents[TypedMessage] = EndpointEvents(
            link,
            outbound=lambda msg: link.tx.send(serialize(msg.to_raw()).encode("utf-8") + b"\r\n"),
            inbound=lambda msg: client._table.dispatch(msg),
            hooks=LocalHooks(on_error=lambda f: client._policy(f), on_stop=client._on_stop),
            decoder=decode_line,
            name=name,
        )
        client.__init__(endpoint, sink=sink, name=name)
        client._thread.start()
        return client

    @property
    def running(self) -> bool:
        return self._endpoint.state == "running"

    @property
    def report(self):
        return self._endpoint.report

    def wait(self, timeout: float | None = None) -> bool:
        """Block until the session ends; True if it did."""
        self._thread.join(timeout)
        return not self._thread.is_alive()

    def close(self, cause: str = "closed by local code") -> None:
        self._endpoint.stop(cause)
        self.wait(timeout=5)

    # -- command API (each call enqueues one typed message) ----------------- #

    def nick(self, nick: str) -> None:
        self._endpoint.enqueue(Nick(nick))

    def user(self, username: str, realname: str) -> None:
        self._endpoint.enqueue(User(username, "0", "*", realname))

    def register(self, nick: str, realname: str | None = None) -> None:
        """NICK then USER, back to back."""
        self.nick(nick)
        self.user(nick, realname or nick)

    def join(self, channel: str) -> None:
        self._endpoint.enqueue(Join((channel,)))

    def part(self, channel: str, reason: str | None = None) -> None:
        self._endpoint.enqueue(Part(channel, reason))

    def privmsg(self, target: str, text: str) -> None:
        self._endpoint.enqueue(Privmsg(target, text))

    def quit(self, reason: str | None = None) -> None:
        self._endpoint.enqueue(Quit(reason))

    def raw(self, line: str) -> None:
        """Enqueue a verbatim protocol line (reframed canonically)."""
        self._endpoint.enqueue(decode_line(line))

    # -- event access ------------------------------------------------------- #

    def next_event(self, timeout: float | None = None) -> ClientEvent | None:
        """Next sink event when using the default queue sink."""
        try:
            return self._events.get(timeout=timeout)
        except queue.Empty:
            return None

    def wait_for(self, kind: type, timeout: float = 5.0) -> ClientEvent | None:
        """Consume queued events until one of ``kind`` arrives."""
        deadline = time.monotonic() + timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            event = self.next_event(timeout=remaining)
            if event is not None and isinstance(event, kind):
                return event

    # -- inbound branches ----------------------------------------------------- #

    def _build_table(self) -> BranchTable[None]:
        table: BranchTable[None] = BranchTable(SERVER_TO_CLIENT, self._on_unhandled)
        table.register(Command.RPL_WELCOME, self._on_welcome)
        table.register(Command.RPL_YOURHOST, self._ignore)
        table.register(Command.RPL_CREATED, self._ignore)
        table.register(Command.RPL_MYINFO, self._ignore)
        table.register(Command.PING, self._on_ping)
        table.register(Command.PONG, self._ignore)
        table.register(Command.PRIVMSG, self._on_privmsg)
        table.register(Command.JOIN, self._on_join)
        table.register(Command.PART, self._on_part)
        table.register(Command.QUIT, self._on_quit)
        table.register(Command.NICK, self._on_nick)
        table.register(Command.RPL_NAMREPLY, self._on_namreply)
        table.register(Command.RPL_ENDOFNAMES, self._on_endofnames)
        table.register(Command.ERROR, self._on_error_msg)
        for numeric in sorted(
            (c for c in Command if c.name.startswith("ERR_")), key=lambda c: c.value
        ):
            table.register(numeric, self._on_err)
        return table

    def _emit(self, event: ClientEvent) -> None:
        self._sink(event)

    def _policy(self, fault: Fault) -> StopDecision:
        if fault.kind is FaultKind.TRANSPORT:
            return StopDecision.STOP
        log.debug("client: tolerated %s fault: %r", fault.kind.value, fault.error)
        return StopDecision.CONTINUE

    def _on_stop(self) -> None:
        if not self._disconnect_emitted:
            self._disconnect_emitted = True
            cause = self._endpoint.report.cause if self._endpoint.report else "stopped"
            self._emit(Disconnected(cause))

    def _is_self(self, nick: str) -> bool:
        return self.state.own_nick is not None and nick.lower() == self.state.own_nick.lower()

    def _on_welcome(self, msg) -> None:
        self.state.registered = True
        if msg.client:
            self.state.own_nick = msg.client
        self._emit(Registered(msg.text or ""))

    def _ignore(self, msg) -> None:
        pass

    def _on_ping(self, msg: Ping) -> None:
        # Answered here, through the queue: no local code involved.
        if msg.has_enough_params():
            self._endpoint.enqueue(Pong(msg.token))

    def _on_privmsg(self, msg: Privmsg) -> None:
        sender = _nick_of(msg.source)
        target = msg.target or ""
        text = msg.text or ""
        if target.startswith("#"):
            self._emit(ChannelMessage(sender, target, text))
        else:
            self._emit(DirectMessage(sender, text))

    def _on_join(self, msg: Join) -> None:
        nick = _nick_of(msg.source)
        channel = msg.channels[0] if msg.channels else ""
        roster = self.state.memberships.setdefault(channel, [])
        if nick and nick not in roster:
            roster.append(nick)
        self._emit(Joined(nick, channel))

    def _on_part(self, msg: Part) -> None:
        nick = _nick_of(msg.source)
        channel = msg.channel or ""
        if self._is_self(nick):
            self.state.memberships.pop(channel, None)
        else:
            roster = self.state.memberships.get(channel)
            if roster and nick in roster:
                roster.remove(nick)
        self._emit(Parted(nick, channel, msg.reason))

    def _on_quit(self, msg: Quit) -> None:
        nick = _nick_of(msg.source)
        for roster in self.state.memberships.values():
            if nick in roster:
                roster.remove(nick)
        self._emit(QuitSeen(nick, msg.reason))

    def _on_nick(self, msg: Nick) -> None:
        old = _nick_of(msg.source)
        new = msg.nick or ""
        if self._is_self(old):
            self.state.own_nick = new
        for roster in self.state.memberships.values():
            if old in roster:
                roster[roster.index(old)] = new
        self._emit(NickChanged(old, new))

    def _on_namreply(self, msg: NamReply) -> None:
        if msg.channel is None:
            return
        self.state.pending_names.setdefault(msg.channel, []).extend(msg.members)

    def _on_endofnames(self, msg: EndOfNames) -> None:
        channel = msg.channel or ""
        members = tuple(self.state.pending_names.pop(channel, []))
        self.state.memberships[channel] = list(members)
        self._emit(Names(channel, members))

    def _on_err(self, msg: Err) -> None:
        text = msg.params[-1] if msg.params else ""
        self._emit(ServerError(msg.code, text))

    def _on_error_msg(self, msg: ErrorMsg) -> None:
        cause = msg.text or "server closed the link"
        self._disconnect_emitted = True
        self._emit(Disconnected(cause))
        self._endpoint.stop(f"server error: {cause}")

    def _on_unhandled(self, msg: TypedMessage) -> None:
        self._emit(ServerError(0, f"unhandled message: {serialize(msg.to_raw())}"))
