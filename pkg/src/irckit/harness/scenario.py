"""Line-oriented scripted scenarios against a live server.

Scenario files are reviewable data, one step per line:

    scenario testPing
    connect a
    send a PING tok
    expect a PONG * tok

Steps:

    connect <alias>
    send <alias> <raw line>
    expect <alias> [:<source-pat>] <command|EOF> [<param-pat> ...]
    silence <alias> <ms>
    sleep <ms>
    close <alias>

``expect`` matches the next qualifying line within its timeout (default
2000 ms, override as ``expect@<ms>``); server PINGs are answered and
skipped transparently.  Patterns are fnmatch-style; a final pattern
starting with ':' absorbs the rest of the step line so it may contain
spaces.  Params beyond the given patterns are unconstrained.  The
pseudo-command ``EOF`` matches the peer closing the connection.
"""

from __future__ import annotations

import fnmatch
import socket
import time
from dataclasses import dataclass, field
from typing import Union

from irckit.wire import Command, FrameBuffer, ParseError, RawMessage, parse_line, serialize

DEFAULT_EXPECT_MS = 2000


class ScenarioSyntaxError(Exception):
    pass


@dataclass(frozen=True)
class Matcher:
    command: str  # wire form, or "EOF"
    source_pat: str | None = None
    param_pats: tuple[str, ...] = ()

    def matches(self, msg: RawMessage) -> bool:
        if str(msg.command) != self.command:
            return False
        if self.source_pat is not None:
            if msg.source is None or not fnmatch.fnmatchcase(msg.source, self.source_pat):
                return False
        if len(msg.params) < len(self.param_pats):
            return False
        return all(
            fnmatch.fnmatchcase(param, pat)
            for param, pat in zip(msg.params, self.param_pats)
        )

    def __str__(self) -> str:
        parts = []
        if self.source_pat:
            parts.append(":" + self.source_pat)
        parts.append(self.command)
        parts.extend(self.param_pats)
        return " ".join(parts)


@dataclass(frozen=True)
class Connect:
    alias: str


@dataclass(frozen=True)
class Send:
    alias: str
    line: str


@dataclass(frozen=True)
class Expect:
    alias: str
    matcher: Matcher
    timeout_ms: int = DEFAULT_EXPECT_MS


@dataclass(frozen=True)
class ExpectSilence:
    alias: str
    ms: int


@dataclass(frozen=True)
class Sleep:
    ms: int


@dataclass(frozen=True)
class Close:
    alias: str


Step = Union[Connect, Send, Expect, ExpectSilence, Sleep, Close]


@dataclass
class Scenario:
    name: str
    steps: list[Step] = field(default_factory=list)


@dataclass
class ScenarioResult:
    name: str
    ok: bool
    failed_step: str | None = None
    detail: str | None = None
    transcript: list[str] = field(default_factory=list)


def _parse_matcher(rest: str) -> Matcher:
    source_pat: str | None = None
    tokens: list[str] = []
    remainder = rest
    while remainder:
        if remainder.startswith(":") and tokens:  # trailing pattern, may hold spaces
            tokens.append(remainder[1:])
            remainder = ""
            break
        token, _, remainder = remainder.partition(" ")
        tokens.append(token)
    if tokens and tokens[0].startswith(":"):
        source_pat = tokens.pop(0)[1:]
    if not tokens:
        raise ScenarioSyntaxError(f"expect needs a command: {rest!r}")
    command, *param_pats = tokens
    return Matcher(command=command, source_pat=source_pat, param_pats=tuple(param_pats))


def parse_scenarios(text: str) -> list[Scenario]:
    """Parse scenario data; validates alias use at parse time."""
    scenarios: list[Scenario] = []
    current: Scenario | None = None
    connected: set[str] = set()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue

        def err(msg: str) -> ScenarioSyntaxError:
            return ScenarioSyntaxError(f"line {lineno}: {msg}: {raw_line!r}")

        verb, _, rest = line.partition(" ")
        timeout_ms = DEFAULT_EXPECT_MS
        if verb.startswith("expect@"):
            timeout_ms = int(verb.split("@", 1)[1])
            verb = "expect"
        if verb == "scenario":
            if not rest:
                raise err("scenario needs a name")
            current = Scenario(rest.strip())
            scenarios.append(current)
            connected = set()
            continue
        if current is None:
            raise err("step before any 'scenario' header")
        if verb == "connect":
            alias = rest.strip()
            if not alias:
                raise err("connect needs an alias")
            connected.add(alias)
            current.steps.append(Connect(alias))
        elif verb in ("send", "expect", "silence", "close"):
            alias, _, tail = rest.partition(" ")
            if alias not in connected:
                raise err(f"alias {alias!r} used before connect")
            if verb == "send":
                current.steps.append(Send(alias, tail))
            elif verb == "expect":
                current.steps.append(Expect(alias, _parse_matcher(tail), timeout_ms))
            elif verb == "silence":
                current.steps.append(ExpectSilence(alias, int(tail)))
            else:
                current.steps.append(Close(alias))
                connected.discard(alias)
        elif verb == "sleep":
            current.steps.append(Sleep(int(rest)))
        else:
            raise err(f"unknown step verb {verb!r}")
    return scenarios


class _Conn:
    """One scripted connection: buffered reads, transparent ping replies."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.buf = FrameBuffer()
        self.lines: list[str] = []
        self.eof = False

    def send_line(self, line: str) -> None:
        self.sock.sendall(line.encode("utf-8") + b"\r\n")

    def _pump(self, deadline: float) -> bool:
        """Read once toward the deadline; False when nothing arrived."""
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return False
        self.sock.settimeout(remaining)
        try:
            chunk = self.sock.recv(4096)
        except socket.timeout:
            return False
        except OSError:
            self.eof = True
            return True
        if chunk == b"":
            self.eof = True
            return True
        self.buf.feed(chunk)
        while (line := self.buf.next_line()) is not None:
            self.lines.append(line)
        return True

    def next_event(self, timeout_ms: int) -> RawMessage | None | str:
        """Next non-PING message, "eof", or None on timeout."""
        deadline = time.monotonic() + timeout_ms / 1000.0
        while True:
            while self.lines:
                line = self.lines.pop(0)
                try:
                    msg = parse_line(line)
                except ParseError:
                    continue
                if msg.command is Command.PING:  # keepalive, answered silently
                    token = msg.params[-1] if msg.params else "x"
                    self.send_line(serialize(RawMessage(Command.PONG, (token,))))
                    continue
                return msg
            if self.eof:
                return "eof"
            if not self._pump(deadline):
                return None

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class ScenarioRunner:
    """Executes scenarios step by step against ``host:port``."""

    def __init__(self, host: str, port: int):
        self.host = host
        self.port = port

    def run(self, scenario: Scenario) -> ScenarioResult:
        conns: dict[str, _Conn] = {}
        transcript: list[str] = []
        try:
            for index, step in enumerate(scenario.steps, start=1):
                failure = self._run_step(step, conns, transcript)
                if failure is not None:
                    return ScenarioResult(
                        scenario.name,
                        ok=False,
                        failed_step=f"step {index}: {step}",
                        detail=failure,
                        transcript=transcript,
                    )
            return ScenarioResult(scenario.name, ok=True, transcript=transcript)
        except OSError as exc:
            return ScenarioResult(
                scenario.name, ok=False, failed_step="connect", detail=f"ConnectFailure: {exc}",
                transcript=transcript,
            )
        finally:
            for conn in conns.values():
                conn.close()

    def _run_step(
        self, step: Step, conns: dict[str, _Conn], transcript: list[str]
    ) -> str | None:
        if isinstance(step, Connect):
            conns[step.alias] = _Conn(self.host, self.port)
            transcript.append(f"connect {step.alias}")
            return None
        if isinstance(step, Send):
            conns[step.alias].send_line(step.line)
            transcript.append(f"{step.alias} >> {step.line}")
            return None
        if isinstance(step, Sleep):
            time.sleep(step.ms / 1000.0)
            transcript.append(f"sleep {step.ms}")
            return None
        if isinstance(step, Close):
            conns[step.alias].close()
            transcript.append(f"close {step.alias}")
            return None
        if isinstance(step, ExpectSilence):
            got = conns[step.alias].next_event(step.ms)
            if isinstance(got, RawMessage):
                transcript.append(f"{step.alias} << {serialize(got)} (wanted silence)")
                return f"expected silence for {step.ms} ms, got {serialize(got)}"
            transcript.append(f"{step.alias} silent {step.ms} ms")
            return None
        if isinstance(step, Expect):
            conn = conns[step.alias]
            got = conn.next_event(step.timeout_ms)
            if step.matcher.command == "EOF":
                if got == "eof":
                    transcript.append(f"{step.alias} << EOF")
                    return None
                shown = serialize(got) if isinstance(got, RawMessage) else "timeout"
                transcript.append(f"{step.alias} << {shown} (wanted EOF)")
                return f"expected EOF, got {shown}"
            if got is None:
                transcript.append(f"{step.alias} << timeout (wanted {step.matcher})")
                return f"timeout waiting for {step.matcher}"
            if got == "eof":
                transcript.append(f"{step.alias} << EOF (wanted {step.matcher})")
                return f"connection closed while waiting for {step.matcher}"
            assert isinstance(got, RawMessage)
            transcript.append(f"{step.alias} << {serialize(got)}")
            if not step.matcher.matches(got):
                return f"wanted {step.matcher}, got {serialize(got)}"
            return None
        raise AssertionError(f"unhandled step {step!r}")
