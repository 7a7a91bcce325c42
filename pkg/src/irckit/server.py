"""IRC server role: one duplex endpoint per connection, shared state.

Each accepted connection gets its own :class:`~irckit.events.EndpointEvents`
instance whose inbound handler dispatches classified messages through a
validated branch table, and whose outbound handler serialises queued
replies back onto the socket.  All sessions share one store behind the
:class:`ServerStore` interface; every store operation is atomic with
respect to the others, so handlers may run concurrently across
sessions.  Replies for one session are delivered in enqueue order.
"""

from __future__ import annotations

import itertools
import logging
import socket
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

from irckit.dispatch import BranchTable
from irckit.events import (
    EndpointEvents,
    Fault,
    FaultKind,
    LocalHooks,
    QueueClosed,
    SocketTransport,
    StopDecision,
    split,
)
from irckit.wire import (
    CLIENT_TO_SERVER,
    Command,
    Join,
    Nick,
    OversizeFrame,
    Part,
    Ping,
    Privmsg,
    Quit,
    RawMessage,
    TypedMessage,
    UnknownCommand,
    User,
    decode_line,
    serialize,
)

log = logging.getLogger(__name__)

AUDIT_VERB = UnknownCommand("AUDIT")


class BindFailure(Exception):
    """The listening socket could not be bound."""


@dataclass
class ServerConfig:
    hostname: str = "localhost"
    port: int = 6667
    max_clients: int = 512
    audit: bool = False
    ping_interval: float | None = None  # periodic client pings; off by default

    def __post_init__(self) -> None:
        if not self.hostname or " " in self.hostname:
            raise ValueError(f"hostname must be non-empty and space-free: {self.hostname!r}")


@dataclass(eq=False)
class Session:
    """Per-connection registration state plus its reply queue handle."""

    sid: int
    endpoint: EndpointEvents[RawMessage]
    addr: str = ""
    nick: str | None = None
    username: str | None = None
    realname: str | None = None
    registered: bool = False
    quit_broadcast: bool = False


@dataclass
class _Channel:
    display: str
    members: list[int] = field(default_factory=list)  # sids in join order


def fold(name: str) -> str:
    """ASCII-case-insensitive identity for nicks and channel names."""
    return name.lower()


class ServerStore(ABC):
    """Pluggable shared server state; every method is atomic."""

    @abstractmethod
    def add_session(self, session: Session) -> None: ...

    @abstractmethod
    def session_count(self) -> int: ...

    @abstractmethod
    def sessions(self) -> list[Session]: ...

    @abstractmethod
    def bind_nick(self, sid: int, nick: str) -> tuple[str, str | None]:
        """('ok', previous nick) or ('in_use', None)."""

    @abstractmethod
    def set_user(self, sid: int, username: str, realname: str) -> None: ...

    @abstractmethod
    def mark_registered(self, sid: int) -> None: ...

    @abstractmethod
    def nick_owner(self, nick: str) -> Session | None: ...

    @abstractmethod
    def join(self, sid: int, channel: str) -> tuple[str, str, list[Session]]:
        """('joined'|'already', display name, member snapshot after)."""

    @abstractmethod
    def part(self, sid: int, channel: str) -> tuple[str, str, list[Session]]:
        """('ok'|'no_channel'|'not_member', display, members before removal)."""

    @abstractmethod
    def members(self, channel: str) -> tuple[str, list[Session]] | None: ...

    @abstractmethod
    def co_members(self, sid: int) -> list[Session]:
        """Sessions sharing at least one channel, excluding the session."""

    @abstractmethod
    def quit_session(self, sid: int) -> list[Session]:
        """Drop all memberships now; co-member snapshot for the QUIT relay."""

    @abstractmethod
    def remove_session(self, sid: int) -> tuple[Session | None, list[Session], bool]:
        """Forget the session entirely; idempotent.

        Returns (session, co-members at removal, whether a QUIT relay
        is still owed).  Releases the nick binding.
        """

    @abstractmethod
    def add_delivered(self, count: int) -> None: ...

    @property
    @abstractmethod
    def delivered_privmsg_count(self) -> int: ...


class MemoryStore(ServerStore):
    """Default in-memory store: one lock, every operation atomic."""

    def __init__(self) -> None:
        self._lock = threading.RLock()
        self._sessions: dict[int, Session] = {}
        self._nicks: dict[str, int] = {}
        self._channels: dict[str, _Channel] = {}
        self._delivered = 0

    def add_session(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.sid] = session

    def session_count(self) -> int:
        with self._lock:
            return len(self._sessions)

    def sessions(self) -> list[Session]:
        with self._lock:
            return list(self._sessions.values())

    def bind_nick(self, sid: int, nick: str) -> tuple[str, str | None]:
        with self._lock:
            folded = fold(nick)
            owner = self._nicks.get(folded)
            if owner is not None and owner != sid:
                return "in_use", None
            session = self._sessions[sid]
            old = session.nick
            if old is not None and fold(old) != folded:
                self._nicks.pop(fold(old), None)
            self._nicks[folded] = sid
            session.nick = nick
            return "ok", old

    def set_user(self, sid: int, username: str, realname: str) -> None:
        with self._lock:
            session = self._sessions[sid]
            session.username = username
            session.realname = realname

    def mark_registered(self, sid: int) -> None:
        with self._lock:
            self._sessions[sid].registered = True

    def nick_owner(self, nick: str) -> Session | None:
        with self._lock:
            sid = self._nicks.get(fold(nick))
            return self._sessions.get(sid) if sid is not None else None

    def join(self, sid: int, channel: str) -> tuple[str, str, list[Session]]:
        with self._lock:
            folded = fold(channel)
            chan = self._channels.get(folded)
            if chan is None:
                chan = self._channels[folded] = _Channel(display=channel)
            if sid in chan.members:
                return "already", chan.display, self._member_sessions(chan)
            chan.members.append(sid)
            return "joined", chan.display, self._member_sessions(chan)

    def part(self, sid: int, channel: str) -> tuple[str, str, list[Session]]:
        with self._lock:
            folded = fold(channel)
            chan = self._channels.get(folded)
            if chan is None:
                return "no_channel", channel, []
            if sid not in chan.members:
                return "not_member", chan.display, []
            before = self._member_sessions(chan)
            chan.members.remove(sid)
            if not chan.members:
                del self._channels[folded]
            return "ok", chan.display, before

    def members(self, channel: str) -> tuple[str, list[Session]] | None:
        with self._lock:
            chan = self._channels.get(fold(channel))
            if chan is None:
                return None
            return chan.display, self._member_sessions(chan)

    def co_members(self, sid: int) -> list[Session]:
        with self._lock:
            return self._co_members_locked(sid)

    def quit_session(self, sid: int) -> list[Session]:
        with self._lock:
            session = self._sessions.get(sid)
            if session is None:
                return []
            session.quit_broadcast = True
            co = self._co_members_locked(sid)
            self._drop_memberships_locked(sid)
            return co

    def remove_session(self, sid: int) -> tuple[Session | None, list[Session], bool]:
        with self._lock:
            session = self._sessions.pop(sid, None)
            if session is None:
                return None, [], False
            co = self._co_members_locked(sid)
            self._drop_memberships_locked(sid)
            if session.nick is not None and self._nicks.get(fold(session.nick)) == sid:
                del self._nicks[fold(session.nick)]
            owed = session.registered and not session.quit_broadcast
            return session, co, owed

    def add_delivered(self, count: int) -> None:
        with self._lock:
            self._delivered += count

    @property
    def delivered_privmsg_count(self) -> int:
        with self._lock:
            return self._delivered

    # -- lock-held helpers ---------------------------------------------- #

    def _member_sessions(self, chan: _Channel) -> list[Session]:
        return [self._sessions[m] for m in chan.members if m in self._sessions]

    def _co_members_locked(self, sid: int) -> list[Session]:
        seen: dict[int, Session] = {}
        for chan in self._channels.values():
            if sid in chan.members:
                for member in chan.members:
                    if member != sid and member in self._sessions:
                        seen[member] = self._sessions[member]
        return list(seen.values())

    def _drop_memberships_locked(self, sid: int) -> None:
        for folded in list(self._channels):
            chan = self._channels[folded]
            if sid in chan.members:
                chan.members.remove(sid)
                if not chan.members:
                    del self._channels[folded]


def nick_is_valid(nick: str) -> bool:
    """Space-free, no control bytes, no leading ':', '*' or digit."""
    return not (
        " " in nick
        or "\0" in nick
        or "\r" in nick
        or "\n" in nick
        or nick.startswith(":")
        or nick.startswith("*")
        or nick[0].isdigit()
    )


def _shown(value: str) -> str:
    """User text echoed back as a middle reply param, if wire-safe."""
    safe = (
        value
        and " " not in value
        and not value.startswith(":")
        and all(c not in value for c in "\r\n\0")
    )
    return value if safe else "*"


class IrcServer:
    """The server role: accept loop, per-session endpoints, handlers."""

    def __init__(self, config: ServerConfig | None = None, store: ServerStore | None = None):
        self.config = config or ServerConfig()
        self.store: ServerStore = store or MemoryStore()
        self._sid_counter = itertools.count(1)
        self._listener: socket.socket | None = None
        self._accept_thread: threading.Thread | None = None
        self._ping_thread: threading.Thread | None = None
        self._session_threads: list[threading.Thread] = []
        self._threads_lock = threading.Lock()
        self._shutting_down = threading.Event()
        self._boot_time = time.strftime("%Y-%m-%d %H:%M:%S")
        self._table = self._build_table()
        report = self._table.validate()
        assert report.ok, f"branch table unsound: {report}"

    # -- wiring ---------------------------------------------------------- #

    def _build_table(self) -> BranchTable[None]:
        capability = set(CLIENT_TO_SERVER)
        if self.config.audit:
            capability.add(AUDIT_VERB)
        table: BranchTable[None] = BranchTable(capability, self.handle_unknown)
        table.register(Command.NICK, self.handle_nick)
        table.register(Command.USER, self.handle_user)
        table.register(Command.PING, self.handle_ping)
        table.register(Command.PONG, self.handle_pong)
        table.register(Command.JOIN, self.handle_join)
        table.register(Command.PART, self.handle_part)
        table.register(Command.PRIVMSG, self.handle_privmsg)
        table.register(Command.QUIT, self.handle_quit)
        if self.config.audit:
            table.register(AUDIT_VERB, self.handle_audit)
        return table

    @property
    def port(self) -> int:
        if self._listener is None:
            return self.config.port
        return self._listener.getsockname()[1]

    @property
    def delivered_privmsg_count(self) -> int:
        return self.store.delivered_privmsg_count

    def start(self) -> None:
        """Bind and start accepting; returns once listening."""
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            listener.bind(("", self.config.port))
        except OSError as exc:
            listener.close()
            raise BindFailure(f"cannot bind port {self.config.port}: {exc}") from exc
        listener.listen(128)
        listener.settimeout(0.2)  # lets the accept loop notice shutdown
        self._listener = listener
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="irc-accept", daemon=True
        )
        self._accept_thread.start()
        if self.config.ping_interval:
            self._ping_thread = threading.Thread(
                target=self._ping_loop, name="irc-ping", daemon=True
            )
            self._ping_thread.start()
        log.info("listening on port %d as %s", self.port, self.config.hostname)

    def serve_forever(self) -> None:
        if self._listener is None:
            self.start()
        assert self._accept_thread is not None
        while self._accept_thread.is_alive():
            self._accept_thread.join(timeout=0.5)

    def shutdown(self) -> None:
        self._shutting_down.set()
        if self._listener is not None:
            self._listener.close()
        for session in self.store.sessions():
            session.endpoint.stop("server shutdown")
        if self._accept_thread is not None:
            self._accept_thread.join(timeout=5)
        with self._threads_lock:
            threads = list(self._session_threads)
        for thread in threads:
            thread.join(timeout=5)
        if self.config.audit:
            log.info("delivered_privmsg_count=%d", self.delivered_privmsg_count)

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while not self._shutting_down.is_set():
            try:
                sock, addr = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            sock.settimeout(None)
            if self.store.session_count() >= self.config.max_clients:
                sock.close()
                continue
            thread = threading.Thread(
                target=self._run_session,
                args=(sock, f"{addr[0]}:{addr[1]}"),
                name=f"irc-session-{addr[1]}",
                daemon=True,
            )
            with self._threads_lock:
                self._session_threads = [t for t in self._session_threads if t.is_alive()]
                self._session_threads.append(thread)
            thread.start()

    def _run_session(self, sock: socket.socket, addr: str) -> None:
        sid = next(self._sid_counter)
        link = split(SocketTransport(sock))

        def transmit(raw: RawMessage) -> None:
            link.tx.send(serialize(raw).encode("utf-8") + b"\r\n")

        session = Session(sid=sid, endpoint=None, addr=addr)  # type: ignore[arg-type]

        def on_message(msg: object) -> None:
            self._table.dispatch(msg, session)  # type: ignore[arg-type]

        endpoint: EndpointEvents[RawMessage] = EndpointEvents(
            link,
            outbound=transmit,
            inbound=on_message,
            hooks=LocalHooks(
                on_error=lambda fault: self._session_policy(session, fault),
                on_stop=lambda: self.cleanup(session),
            ),
            decoder=decode_line,
            name=f"session-{sid}",
        )
        session.endpoint = endpoint
        self.store.add_session(session)
        log.debug("session %d connected from %s", sid, addr)
        endpoint.run()
        log.debug("session %d finished: %s", sid, endpoint.report)

    def _session_policy(self, session: Session, fault: Fault) -> StopDecision:
        if fault.kind is FaultKind.TRANSPORT:
            return StopDecision.STOP
        if isinstance(fault.error, OversizeFrame):
            return StopDecision.STOP
        log.debug("session %d: tolerated %s fault: %r", session.sid, fault.kind.value, fault.error)
        return StopDecision.CONTINUE

    def _ping_loop(self) -> None:
        assert self.config.ping_interval is not None
        while not self._shutting_down.wait(self.config.ping_interval):
            for session in self.store.sessions():
                if session.registered:
                    self._send(
                        session,
                        RawMessage(
                            Command.PING, (self.config.hostname,), source=self.config.hostname
                        ),
                    )

    # -- reply plumbing --------------------------------------------------- #

    def _send(self, session: Session, raw: RawMessage) -> None:
        try:
            session.endpoint.enqueue(raw)
        except QueueClosed:
            pass  # session is winding down

    def _numeric(self, session: Session, numeric: Command, *params: str) -> None:
        target = session.nick or "*"
        self._send(
            session, RawMessage(numeric, (target, *params), source=self.config.hostname)
        )

    def broadcast(
        self, channel: str, raw: RawMessage, exclude: int | None = None
    ) -> int:
        """Enqueue ``raw`` to every channel member except ``exclude``.

        Returns deliveries made (dead sessions are skipped); bumps the
        delivered count iff the message is a PRIVMSG.
        """
        found = self.store.members(channel)
        if found is None:
            return 0
        _, members = found
        return self._fan_out(members, raw, exclude, count_privmsg=True)

    def _fan_out(
        self,
        members: list[Session],
        raw: RawMessage,
        exclude: int | None = None,
        *,
        count_privmsg: bool = False,
    ) -> int:
        delivered = 0
        for member in members:
            if exclude is not None and member.sid == exclude:
                continue
            try:
                member.endpoint.enqueue(raw)
            except QueueClosed:
                continue
            delivered += 1
        # The audit counter tracks channel fan-out only, not directed
        # deliveries, so measured totals follow the membership law.
        if count_privmsg and raw.command is Command.PRIVMSG and delivered:
            self.store.add_delivered(delivered)
        return delivered

    # -- command branches -------------------------------------------------- #

    def handle_nick(self, msg: Nick, session: Session) -> None:
        if not msg.has_enough_params():
            self._numeric(session, Command.ERR_NONICKNAMEGIVEN, "No nickname given")
            return
        nick = msg.nick or ""
        if not nick_is_valid(nick):
            self._numeric(
                session, Command.ERR_ERRONEUSNICKNAME, _shown(nick), "Erroneous nickname"
            )
            return
        outcome, old = self.store.bind_nick(session.sid, nick)
        if outcome == "in_use":
            self._numeric(
                session, Command.ERR_NICKNAMEINUSE, nick, "Nickname is already in use"
            )
            return
        if session.registered and old is not None and old != nick:
            announcement = RawMessage(Command.NICK, (nick,), source=old)
            self._send(session, announcement)
            self._fan_out(self.store.co_members(session.sid), announcement)
        self._maybe_welcome(session)

    def handle_user(self, msg: User, session: Session) -> None:
        if session.registered:
            self._numeric(session, Command.ERR_ALREADYREGISTERED, "You may not reregister")
            return
        if not msg.has_enough_params():
            self._numeric(session, Command.ERR_NEEDMOREPARAMS, "USER", "Not enough parameters")
            return
        assert msg.username is not None and msg.realname is not None
        self.store.set_user(session.sid, msg.username, msg.realname)
        self._maybe_welcome(session)

    def _maybe_welcome(self, session: Session) -> None:
        if session.registered or not (session.nick and session.username):
            return
        self.welcome_burst(session)

    def welcome_burst(self, session: Session) -> None:
        """Registration is complete: 001 through 004, in that order."""
        self.store.mark_registered(session.sid)
        host = self.config.hostname
        self._numeric(
            session, Command.RPL_WELCOME, f"Welcome to {host}, {session.nick}"
        )
        self._numeric(
            session, Command.RPL_YOURHOST, f"Your host is {host}, running irckit-0.1"
        )
        self._numeric(
            session, Command.RPL_CREATED, f"This server was created {self._boot_time}"
        )
        self._numeric(session, Command.RPL_MYINFO, host, "irckit-0.1", "o", "nt")

    def handle_ping(self, msg: Ping, session: Session) -> None:
        if not msg.has_enough_params():
            self._numeric(session, Command.ERR_NOORIGIN, "No origin specified")
            return
        assert msg.token is not None
        self._send(
            session,
            RawMessage(
                Command.PONG,
                (self.config.hostname, msg.token),
                source=self.config.hostname,
            ),
        )

    def handle_pong(self, msg: TypedMessage, session: Session) -> None:
        pass  # accepted silently

    def handle_join(self, msg: Join, session: Session) -> None:
        if not session.registered:
            self._numeric(session, Command.ERR_NOTREGISTERED, "You have not registered")
            return
        if not msg.has_enough_params():
            self._numeric(session, Command.ERR_NEEDMOREPARAMS, "JOIN", "Not enough parameters")
            return
        for name in msg.channels:
            if not name.startswith("#"):
                self._numeric(session, Command.ERR_NOSUCHCHANNEL, _shown(name), "No such channel")
                continue
            status, display, members = self.store.join(session.sid, name)
            if status == "joined":
                self._fan_out(
                    members, RawMessage(Command.JOIN, (display,), source=session.nick)
                )
            self._send_names(session, display, members)

    def _send_names(self, session: Session, display: str, members: list[Session]) -> None:
        names = " ".join(m.nick or "*" for m in members)
        self._numeric(session, Command.RPL_NAMREPLY, "=", display, names)
        self._numeric(session, Command.RPL_ENDOFNAMES, display, "End of /NAMES list")

    def handle_part(self, msg: Part, session: Session) -> None:
        if not session.registered:
            self._numeric(session, Command.ERR_NOTREGISTERED, "You have not registered")
            return
        if not msg.has_enough_params():
            self._numeric(session, Command.ERR_NEEDMOREPARAMS, "PART", "Not enough parameters")
            return
        assert msg.channel is not None
        status, display, members = self.store.part(session.sid, msg.channel)
        if status == "no_channel":
            self._numeric(
                session, Command.ERR_NOSUCHCHANNEL, _shown(msg.channel), "No such channel"
            )
            return
        if status == "not_member":
            self._numeric(
                session, Command.ERR_NOTONCHANNEL, _shown(display), "You're not on that channel"
            )
            return
        params = (display,) if msg.reason is None else (display, msg.reason)
        self._fan_out(members, RawMessage(Command.PART, params, source=session.nick))

    def handle_privmsg(self, msg: Privmsg, session: Session) -> None:
        if not session.registered:
            self._numeric(session, Command.ERR_NOTREGISTERED, "You have not registered")
            return
        if not msg.has_enough_params():
            self._numeric(
                session, Command.ERR_NEEDMOREPARAMS, "PRIVMSG", "Not enough parameters"
            )
            return
        assert msg.target is not None and msg.text is not None
        relay = RawMessage(Command.PRIVMSG, (msg.target, msg.text), source=session.nick)
        if msg.target.startswith("#"):
            found = self.store.members(msg.target)
            if found is None:
                self._numeric(
                    session, Command.ERR_NOSUCHCHANNEL, msg.target, "No such channel"
                )
                return
            self._fan_out(found[1], relay, exclude=session.sid, count_privmsg=True)
        else:
            owner = self.store.nick_owner(msg.target)
            if owner is None:
                self._numeric(
                    session, Command.ERR_NOSUCHNICK, msg.target, "No such nick/channel"
                )
                return
            self._fan_out([owner], relay)

    def handle_quit(self, msg: Quit, session: Session) -> None:
        co = self.store.quit_session(session.sid)
        if session.registered:
            params = () if msg.reason is None else (msg.reason,)
            self._fan_out(co, RawMessage(Command.QUIT, params, source=session.nick))
        self._send(
            session,
            RawMessage(Command.ERROR, ("Closing Link",), source=self.config.hostname),
        )
        session.endpoint.stop("quit")

    def handle_unknown(self, msg: TypedMessage, session: Session) -> None:
        verb = str(msg.tag)
        self._numeric(session, Command.ERR_UNKNOWNCOMMAND, verb, "Unknown command")

    def handle_audit(self, msg: TypedMessage, session: Session) -> None:
        self._send(
            session,
            RawMessage(
                AUDIT_VERB,
                (str(self.delivered_privmsg_count),),
                source=self.config.hostname,
            ),
        )

    def cleanup(self, session: Session) -> None:
        """Session teardown: release nick, drop memberships, relay QUIT
        to co-members if the session never did so itself; idempotent."""
        _, co, owed = self.store.remove_session(session.sid)
        if owed:
            self._fan_out(
                co, RawMessage(Command.QUIT, ("Connection closed",), source=session.nick)
            )
