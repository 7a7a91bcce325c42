from __future__ import annotations

import socket
import threading
import time
from collections import deque
from typing import Callable

import pytest

from irckit.events import DuplexLink, EndpointEvents, LocalHooks, pipe_pair, split
from irckit.server import IrcServer, ServerConfig
from irckit.wire import Command, FrameBuffer, RawMessage, parse_line


def line_endpoint(
    link: DuplexLink,
    on_line: Callable[[str], None] | None = None,
    hooks: LocalHooks | None = None,
    name: str = "ep",
    soft_cap: int | None = None,
    decoder: Callable[[str], object] | None = None,
) -> tuple[EndpointEvents[str], list[str]]:
    """Endpoint whose events are plain text lines; returns (ep, received)."""
    received: list[str] = []

    def inbound(line: object) -> None:
        received.append(line)  # type: ignore[arg-type]
        if on_line is not None:
            on_line(line)  # type: ignore[arg-type]

    endpoint: EndpointEvents[str] = EndpointEvents(
        link,
        outbound=lambda line: link.tx.send(line.encode() + b"\r\n"),
        inbound=inbound,
        hooks=hooks,
        name=name,
        soft_cap=soft_cap,
        decoder=decoder,
    )
    return endpoint, received


class RunningPair:
    """Two line endpoints over an in-memory pipe, loops already running."""

    def __init__(
        self,
        hooks_a: LocalHooks | None = None,
        hooks_b: LocalHooks | None = None,
        on_line_a: Callable[[str], None] | None = None,
        on_line_b: Callable[[str], None] | None = None,
        soft_cap: int | None = None,
    ):
        ta, tb = pipe_pair()
        self.a, self.received_a = line_endpoint(
            split(ta), on_line_a, hooks_a, name="a", soft_cap=soft_cap
        )
        self.b, self.received_b = line_endpoint(
            split(tb), on_line_b, hooks_b, name="b", soft_cap=soft_cap
        )
        self._threads = [
            threading.Thread(target=self.a.run, daemon=True),
            threading.Thread(target=self.b.run, daemon=True),
        ]
        for thread in self._threads:
            thread.start()

    def stop(self, timeout: float = 5.0) -> None:
        self.a.stop("test done")
        self.b.stop("test done")
        self.join(timeout)

    def join(self, timeout: float = 5.0) -> None:
        for thread in self._threads:
            thread.join(timeout)
        assert not any(t.is_alive() for t in self._threads), "endpoint loops still running"


class RawClient:
    """Bare scripted connection for poking at a server directly."""

    def __init__(self, port: int, host: str = "127.0.0.1", timeout: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.sock.settimeout(timeout)
        self.buf = FrameBuffer()
        self.lines: deque[str] = deque()
        self.eof = False

    def send(self, line: str) -> None:
        self.sock.sendall(line.encode() + b"\r\n")

    def next_msg(self, timeout: float = 5.0) -> RawMessage | None:
        """Next parsed line, or None on EOF/timeout."""
        deadline = time.monotonic() + timeout
        while True:
            if self.lines:
                return parse_line(self.lines.popleft())
            if self.eof:
                return None
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(4096)
            except socket.timeout:
                return None
            except OSError:
                self.eof = True
                continue
            if chunk == b"":
                self.eof = True
                continue
            self.buf.feed(chunk)
            while (line := self.buf.next_line()) is not None:
                self.lines.append(line)

    def expect(self, command: Command | str, timeout: float = 5.0) -> RawMessage:
        """Assert the next message carries the given command tag."""
        msg = self.next_msg(timeout)
        assert msg is not None, f"expected {command}, got nothing"
        assert str(msg.command) == str(command), f"expected {command}, got {msg}"
        return msg

    def register(self, nick: str, realname: str | None = None) -> None:
        self.send(f"NICK {nick}")
        self.send(f"USER {nick} 0 * :{realname or nick}")
        for numeric in ("001", "002", "003", "004"):
            self.expect(numeric)

    def expect_eof(self, timeout: float = 5.0) -> None:
        msg = self.next_msg(timeout)
        assert msg is None and self.eof, f"expected EOF, got {msg}"

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


@pytest.fixture
def server():
    srv = IrcServer(ServerConfig(hostname="My.Little.Server", port=0))
    srv.start()
    yield srv
    srv.shutdown()
