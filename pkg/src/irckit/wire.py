"""IRC wire format: parsing, serialisation, classification, and framing.

Messages follow the RFC 1459 / RFC 2812 client protocol grammar:

    message  =  [ ":" source SPACE ] command [ params ]
    command  =  1*letter / 3digit
    params   =  *14( SPACE middle ) [ SPACE ":" trailing ]

Lines travel UTF-8 encoded, CRLF-terminated, and at most 512 bytes
including the terminator.  Numeric replies are always rendered by their
three-digit form on the wire, never their symbolic names.

Everything in this module is pure or operates on a caller-owned
:class:`FrameBuffer`; values are immutable and safe to hand between
threads.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Callable, ClassVar, Union

MAX_LINE_BYTES = 512
MAX_PARAMS = 15


class WireError(Exception):
    """Base class for wire-format errors."""


class ParseError(WireError):
    """A line could not be parsed into a message."""


class EmptyLine(ParseError):
    pass


class MissingCommand(ParseError):
    pass


class BadCommandShape(ParseError):
    """Command token is neither letters nor exactly three digits."""


class TooManyParams(ParseError):
    pass


class OversizeMessage(WireError):
    """Serialised form would exceed the 512-byte line limit."""


class OversizeFrame(WireError):
    """Buffered input exceeds the frame limit with no delimiter; fatal."""


class InvalidUtf8(WireError):
    """A framed line is not valid UTF-8; the frame has been dropped."""


@enum.unique
class Command(enum.Enum):
    """Supported command tags, valued by their wire form."""

    NICK = "NICK"
    USER = "USER"
    JOIN = "JOIN"
    PART = "PART"
    PRIVMSG = "PRIVMSG"
    QUIT = "QUIT"
    PING = "PING"
    PONG = "PONG"
    ERROR = "ERROR"
    RPL_WELCOME = "001"
    RPL_YOURHOST = "002"
    RPL_CREATED = "003"
    RPL_MYINFO = "004"
    RPL_NAMREPLY = "353"
    RPL_ENDOFNAMES = "366"
    ERR_NOSUCHNICK = "401"
    ERR_NOSUCHCHANNEL = "403"
    ERR_NOORIGIN = "409"
    ERR_UNKNOWNCOMMAND = "421"
    ERR_NONICKNAMEGIVEN = "431"
    ERR_ERRONEUSNICKNAME = "432"
    ERR_NICKNAMEINUSE = "433"
    ERR_NOTONCHANNEL = "442"
    ERR_NOTREGISTERED = "451"
    ERR_NEEDMOREPARAMS = "461"
    ERR_ALREADYREGISTERED = "462"

    @property
    def wire(self) -> str:
        return self.value

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class UnknownCommand:
    """Escape hatch for verbs and numerics outside the supported set."""

    verb: str

    @property
    def wire(self) -> str:
        return self.verb

    def __str__(self) -> str:
        return self.verb


CommandTag = Union[Command, UnknownCommand]

_BY_WIRE = {c.value: c for c in Command}
_LETTERS_RE = re.compile(r"[A-Za-z]+\Z")
_DIGITS3_RE = re.compile(r"[0-9]{3}\Z")

ERR_NUMERICS = frozenset(c for c in Command if c.name.startswith("ERR_"))

# Tags each side may legitimately send, used as dispatch capabilities.
CLIENT_TO_SERVER = frozenset(
    {
        Command.NICK,
        Command.USER,
        Command.JOIN,
        Command.PART,
        Command.PRIVMSG,
        Command.QUIT,
        Command.PING,
        Command.PONG,
    }
)
SERVER_TO_CLIENT = frozenset(
    {
        Command.PING,
        Command.PONG,
        Command.NICK,
        Command.JOIN,
        Command.PART,
        Command.PRIVMSG,
        Command.QUIT,
        Command.ERROR,
        Command.RPL_WELCOME,
        Command.RPL_YOURHOST,
        Command.RPL_CREATED,
        Command.RPL_MYINFO,
        Command.RPL_NAMREPLY,
        Command.RPL_ENDOFNAMES,
    }
) | ERR_NUMERICS


def command_for(token: str) -> CommandTag:
    """Resolve a command token to its tag, folding case.

    Unrecognised but well-shaped verbs map to :class:`UnknownCommand`;
    anything else raises :class:`BadCommandShape`.
    """
    verb = token.upper()
    known = _BY_WIRE.get(verb)
    if known is not None:
        return known
    if _LETTERS_RE.match(verb) or _DIGITS3_RE.match(verb):
        return UnknownCommand(verb)
    raise BadCommandShape(f"bad command token: {token!r}")


@dataclass(frozen=True)
class RawMessage:
    """A parsed IRC message: optional source, command tag, 0..15 params.

    Every param except the last must be non-empty, contain no space and
    not start with ':'; only the last param may hold spaces or be empty.
    """

    command: CommandTag
    params: tuple[str, ...] = ()
    source: str | None = None


def parse_line(line: str) -> RawMessage:
    """Parse one message line (no CR/LF) into a :class:`RawMessage`.

    The source is captured iff the line starts with ':' (colon stripped,
    up to the first space).  Middle params split on spaces; a param
    introduced by " :" absorbs the remainder verbatim.
    """
    if not line:
        raise EmptyLine("empty message line")

    rest = line
    source: str | None = None
    if rest.startswith(":"):
        head, _, rest = rest.partition(" ")
        source = head[1:]
        if not source:
            raise MissingCommand("':' with no source")

    rest = rest.lstrip(" ")
    if not rest:
        raise MissingCommand(f"no command in {line!r}")
    token, _, rest = rest.partition(" ")
    command = command_for(token)

    params: list[str] = []
    while rest:
        if rest.startswith(":"):
            params.append(rest[1:])
            break
        token, _, rest = rest.partition(" ")
        if token:  # tolerate runs of spaces between params
            params.append(token)
    if len(params) > MAX_PARAMS:
        raise TooManyParams(f"{len(params)} params in {line!r}")
    return RawMessage(command, tuple(params), source)


def _check_wire_safe(text: str, what: str) -> None:
    if "\r" in text or "\n" in text or "\0" in text:
        raise ValueError(f"{what} contains CR/LF/NUL: {text!r}")


def serialize(msg: RawMessage) -> str:
    """Render the canonical wire form, without the trailing CRLF.

    The final param is prefixed with ':' iff it contains a space, is
    empty, or itself begins with ':'.  Raises :class:`OversizeMessage`
    if the line plus CRLF would exceed 512 bytes, and ``ValueError``
    when a RawMessage invariant is violated.
    """
    parts: list[str] = []
    if msg.source is not None:
        _check_wire_safe(msg.source, "source")
        if not msg.source or " " in msg.source:
            raise ValueError(f"source not wire-safe: {msg.source!r}")
        parts.append(":" + msg.source)
    parts.append(msg.command.wire)

    if len(msg.params) > MAX_PARAMS:
        raise ValueError(f"too many params: {len(msg.params)}")
    if msg.params:
        for param in msg.params[:-1]:
            _check_wire_safe(param, "param")
            if not param or " " in param or param.startswith(":"):
                raise ValueError(f"middle param not wire-safe: {param!r}")
            parts.append(param)
        last = msg.params[-1]
        _check_wire_safe(last, "param")
        if not last or " " in last or last.startswith(":"):
            parts.append(":" + last)
        else:
            parts.append(last)

    out = " ".join(parts)
    if len(out.encode("utf-8")) + 2 > MAX_LINE_BYTES:
        raise OversizeMessage(f"{len(out.encode('utf-8')) + 2} bytes: {out[:64]!r}...")
    return out


class FrameBuffer:
    """Accumulates raw transport bytes and yields complete lines.

    Accepts CRLF and tolerates bare LF on input; empty lines are
    swallowed.  A frame that cannot fit the limit (512 bytes including
    its terminator) raises :class:`OversizeFrame`, which is
    connection-fatal: the buffer contents are undefined afterwards.
    """

    def __init__(self, limit: int = MAX_LINE_BYTES):
        self.limit = limit
        self._pending = bytearray()

    @property
    def pending(self) -> bytes:
        return bytes(self._pending)

    def feed(self, data: bytes) -> None:
        self._pending += data

    def next_line(self) -> str | None:
        """Extract and decode the next complete line, or None.

        Raises :class:`InvalidUtf8` for an undecodable frame (the frame
        is consumed, so iteration may continue) and
        :class:`OversizeFrame` when no legal frame can ever complete.
        """
        while True:
            idx = self._pending.find(b"\n")
            if idx < 0:
                # A frame still needs at least its LF to terminate.
                if len(self._pending) >= self.limit:
                    raise OversizeFrame(f"{len(self._pending)} bytes with no delimiter")
                return None
            if idx + 1 > self.limit:
                raise OversizeFrame(f"{idx + 1} byte frame exceeds {self.limit}")
            frame = self._pending[:idx]
            del self._pending[: idx + 1]
            if frame.endswith(b"\r"):
                frame = frame[:-1]
            if not frame:
                continue
            try:
                return frame.decode("utf-8")
            except UnicodeDecodeError as exc:
                raise InvalidUtf8(str(exc)) from exc


def split_frames(buf: FrameBuffer, incoming: bytes) -> list[str]:
    """Append bytes and drain every complete line currently buffered."""
    buf.feed(incoming)
    lines: list[str] = []
    while (line := buf.next_line()) is not None:
        lines.append(line)
    return lines


def _trim(*values: str | None) -> tuple[str, ...]:
    """Positional params up to the first missing one."""
    out: list[str] = []
    for value in values:
        if value is None:
            break
        out.append(value)
    return tuple(out)


@dataclass(frozen=True)
class TypedMessage:
    """Base of the per-command message hierarchy.

    Each supported command tag has exactly one variant; re-serialising a
    variant reproduces a RawMessage with the same tag.
    """

    source: str | None = field(default=None, kw_only=True)

    tag: ClassVar[CommandTag]

    def wire_params(self) -> tuple[str, ...]:
        raise NotImplementedError

    def to_raw(self) -> RawMessage:
        return RawMessage(self.tag, self.wire_params(), self.source)

    def has_enough_params(self) -> bool:
        """True iff all mandatory fields are present and non-empty."""
        return True


@dataclass(frozen=True)
class Nick(TypedMessage):
    nick: str | None = None

    tag = Command.NICK

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.nick)

    def has_enough_params(self) -> bool:
        return bool(self.nick)


@dataclass(frozen=True)
class User(TypedMessage):
    """USER registration; params bind positionally (username first)."""

    username: str | None = None
    mode: str | None = None
    unused: str | None = None
    realname: str | None = None

    tag = Command.USER

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.username, self.mode, self.unused, self.realname)

    def has_enough_params(self) -> bool:
        return bool(self.username and self.mode and self.unused and self.realname)


@dataclass(frozen=True)
class Join(TypedMessage):
    """JOIN with the comma-separated channel list already split."""

    channels: tuple[str, ...] = ()

    tag = Command.JOIN

    def wire_params(self) -> tuple[str, ...]:
        if not self.channels:
            return ()
        return (",".join(self.channels),)

    def has_enough_params(self) -> bool:
        return bool(self.channels) and any(self.channels)


@dataclass(frozen=True)
class Part(TypedMessage):
    channel: str | None = None
    reason: str | None = None

    tag = Command.PART

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.channel, self.reason)

    def has_enough_params(self) -> bool:
        return bool(self.channel)


@dataclass(frozen=True)
class Privmsg(TypedMessage):
    target: str | None = None
    text: str | None = None

    tag = Command.PRIVMSG

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.target, self.text)

    def has_enough_params(self) -> bool:
        return bool(self.target and self.text)


@dataclass(frozen=True)
class Quit(TypedMessage):
    reason: str | None = None

    tag = Command.QUIT

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.reason)


@dataclass(frozen=True)
class Ping(TypedMessage):
    token: str | None = None

    tag = Command.PING

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.token)

    def has_enough_params(self) -> bool:
        return bool(self.token)


@dataclass(frozen=True)
class Pong(TypedMessage):
    """PONG; servers echo an origin param before the token."""

    token: str | None = None
    origin: str | None = None

    tag = Command.PONG

    def wire_params(self) -> tuple[str, ...]:
        if self.origin is not None:
            return _trim(self.origin, self.token)
        return _trim(self.token)

    def has_enough_params(self) -> bool:
        return bool(self.token)


@dataclass(frozen=True)
class ErrorMsg(TypedMessage):
    """ERROR, sent by a server when closing the link."""

    text: str | None = None

    tag = Command.ERROR

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.text)


@dataclass(frozen=True)
class Welcome(TypedMessage):
    client: str | None = None
    text: str | None = None

    tag = Command.RPL_WELCOME

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.client, self.text)


@dataclass(frozen=True)
class YourHost(TypedMessage):
    client: str | None = None
    text: str | None = None

    tag = Command.RPL_YOURHOST

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.client, self.text)


@dataclass(frozen=True)
class Created(TypedMessage):
    client: str | None = None
    text: str | None = None

    tag = Command.RPL_CREATED

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.client, self.text)


@dataclass(frozen=True)
class MyInfo(TypedMessage):
    client: str | None = None
    info: tuple[str, ...] = ()

    tag = Command.RPL_MYINFO

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.client) + self.info


@dataclass(frozen=True)
class NamReply(TypedMessage):
    """353: one page of a channel's member list."""

    client: str | None = None
    symbol: str | None = None
    channel: str | None = None
    members: tuple[str, ...] = ()

    tag = Command.RPL_NAMREPLY

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.client, self.symbol, self.channel) + (" ".join(self.members),)


@dataclass(frozen=True)
class EndOfNames(TypedMessage):
    client: str | None = None
    channel: str | None = None
    text: str | None = None

    tag = Command.RPL_ENDOFNAMES

    def wire_params(self) -> tuple[str, ...]:
        return _trim(self.client, self.channel, self.text)


@dataclass(frozen=True)
class Err(TypedMessage):
    """Any supported error numeric, with its params kept verbatim."""

    numeric: Command = Command.ERR_UNKNOWNCOMMAND
    params: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.numeric not in ERR_NUMERICS:
            raise ValueError(f"not an error numeric: {self.numeric}")

    @property
    def tag(self) -> CommandTag:  # type: ignore[override]
        return self.numeric

    @property
    def code(self) -> int:
        return int(self.numeric.value)

    def wire_params(self) -> tuple[str, ...]:
        return self.params


@dataclass(frozen=True)
class UnknownCmd(TypedMessage):
    """Verbs outside the supported set; carried for the fallback branch."""

    verb: str = ""
    params: tuple[str, ...] = ()

    @property
    def tag(self) -> CommandTag:  # type: ignore[override]
        return UnknownCommand(self.verb)

    def wire_params(self) -> tuple[str, ...]:
        return self.params


def _p(params: tuple[str, ...], i: int) -> str | None:
    return params[i] if len(params) > i else None


def _build_join(m: RawMessage) -> Join:
    first = _p(m.params, 0)
    channels = tuple(first.split(",")) if first is not None else ()
    return Join(channels, source=m.source)


def _build_namreply(m: RawMessage) -> NamReply:
    # Standard shape: <client> <symbol> <channel> :<names>
    names = _p(m.params, 3) or ""
    return NamReply(
        _p(m.params, 0), _p(m.params, 1), _p(m.params, 2), tuple(names.split()), source=m.source
    )


_BUILDERS: dict[Command, Callable[[RawMessage], TypedMessage]] = {
    Command.NICK: lambda m: Nick(_p(m.params, 0), source=m.source),
    Command.USER: lambda m: User(
        _p(m.params, 0), _p(m.params, 1), _p(m.params, 2), _p(m.params, 3), source=m.source
    ),
    Command.JOIN: _build_join,
    Command.PART: lambda m: Part(_p(m.params, 0), _p(m.params, 1), source=m.source),
    Command.PRIVMSG: lambda m: Privmsg(_p(m.params, 0), _p(m.params, 1), source=m.source),
    Command.QUIT: lambda m: Quit(_p(m.params, 0), source=m.source),
    Command.PING: lambda m: Ping(_p(m.params, 0), source=m.source),
    Command.PONG: lambda m: (
        Pong(m.params[1], m.params[0], source=m.source)
        if len(m.params) >= 2
        else Pong(_p(m.params, 0), source=m.source)
    ),
    Command.ERROR: lambda m: ErrorMsg(_p(m.params, 0), source=m.source),
    Command.RPL_WELCOME: lambda m: Welcome(_p(m.params, 0), _p(m.params, 1), source=m.source),
    Command.RPL_YOURHOST: lambda m: YourHost(_p(m.params, 0), _p(m.params, 1), source=m.source),
    Command.RPL_CREATED: lambda m: Created(_p(m.params, 0), _p(m.params, 1), source=m.source),
    Command.RPL_MYINFO: lambda m: MyInfo(_p(m.params, 0), m.params[1:], source=m.source),
    Command.RPL_NAMREPLY: _build_namreply,
    Command.RPL_ENDOFNAMES: lambda m: EndOfNames(
        _p(m.params, 0), _p(m.params, 1), _p(m.params, 2), source=m.source
    ),
}
for _numeric in ERR_NUMERICS:
    _BUILDERS[_numeric] = lambda m: Err(m.command, m.params, source=m.source)

assert set(_BUILDERS) == set(Command), "every supported tag needs exactly one variant"


def classify(msg: RawMessage) -> TypedMessage:
    """Map a RawMessage to the unique variant for its command tag.

    Never fails: unsupported verbs become :class:`UnknownCmd`, and arity
    problems are represented (check ``has_enough_params``), not rejected.
    """
    tag = msg.command
    if isinstance(tag, UnknownCommand):
        return UnknownCmd(tag.verb, msg.params, source=msg.source)
    return _BUILDERS[tag](msg)


def decode_line(line: str) -> TypedMessage:
    """Parse and classify in one step; the usual inbound codec."""
    return classify(parse_line(line))
