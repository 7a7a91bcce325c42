"""WebSocket JSON gateway between a browser UI and the client role.

One WebSocket session drives at most one IRC session.  Commands arrive
as JSON text frames (``{"op": "connect", ...}`` first, then ``join``,
``privmsg``, ``nick``, ``part``, ``quit`` or ``raw``); every client
event is forwarded as a JSON event frame with a millisecond timestamp.
The bridge adds no protocol behaviour of its own: commands map straight
onto the client command API, which enqueues them unchanged.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from typing import Any

from websockets.exceptions import ConnectionClosed
from websockets.sync.server import Server, ServerConnection, serve

from irckit.client import (
    ChannelMessage,
    ClientEvent,
    ConnectFailure,
    DirectMessage,
    Disconnected,
    IrcClient,
    Joined,
    Names,
    NickChanged,
    Parted,
    QuitSeen,
    Registered,
    ServerError,
)

log = logging.getLogger(__name__)

DEFAULT_LISTEN_PORT = 9667

COMMAND_OPS = ("connect", "join", "part", "privmsg", "nick", "quit", "raw")


def _now_ms() -> int:
    return int(time.time() * 1000)


class _BridgeSession:
    """One WebSocket connection mapped onto one IRC client session."""

    def __init__(self, ws: ServerConnection):
        self.ws = ws
        self.client: IrcClient | None = None
        self.own_nick: str | None = None
        self.rosters: dict[str, set[str]] = {}  # for expanding quits to parts
        self._send_lock = threading.Lock()

    # -- outbound events ------------------------------------------------ #

    def emit(self, payload: dict[str, Any]) -> None:
        try:
            with self._send_lock:
                self.ws.send(json.dumps(payload))
        except ConnectionClosed:
            pass

    def error(self, text: str, numeric: int = 0) -> None:
        self.emit({"ev": "server_error", "numeric": numeric, "text": text})

    def on_client_event(self, event: ClientEvent) -> None:
        if isinstance(event, Registered):
            self.emit({"ev": "registered", "text": event.text})
        elif isinstance(event, ChannelMessage):
            self.emit(
                {
                    "ev": "message",
                    "from": event.sender,
                    "target": event.channel,
                    "text": event.text,
                    "ts": _now_ms(),
                }
            )
        elif isinstance(event, DirectMessage):
            self.emit(
                {
                    "ev": "message",
                    "from": event.sender,
                    "target": self.own_nick or "",
                    "text": event.text,
                    "ts": _now_ms(),
                }
            )
        elif isinstance(event, Joined):
            self.rosters.setdefault(event.channel, set()).add(event.nick)
            self.emit({"ev": "joined", "nick": event.nick, "channel": event.channel})
        elif isinstance(event, Parted):
            self.rosters.get(event.channel, set()).discard(event.nick)
            self.emit({"ev": "parted", "nick": event.nick, "channel": event.channel})
        elif isinstance(event, Names):
            self.rosters[event.channel] = set(event.members)
            self.emit(
                {"ev": "names", "channel": event.channel, "members": list(event.members)}
            )
        elif isinstance(event, NickChanged):
            if self.own_nick == event.old:
                self.own_nick = event.new
            for roster in self.rosters.values():
                if event.old in roster:
                    roster.discard(event.old)
                    roster.add(event.new)
            self.emit({"ev": "nick_changed", "old": event.old, "new": event.new})
        elif isinstance(event, QuitSeen):
            # The UI contract speaks in channel terms: a quit is a part
            # from every channel the nick was seen in.
            for channel, roster in self.rosters.items():
                if event.nick in roster:
                    roster.discard(event.nick)
                    self.emit({"ev": "parted", "nick": event.nick, "channel": channel})
        elif isinstance(event, ServerError):
            self.emit({"ev": "server_error", "numeric": event.numeric, "text": event.text})
        elif isinstance(event, Disconnected):
            self.emit({"ev": "disconnected", "cause": event.cause})

    # -- inbound commands ------------------------------------------------ #

    def on_command(self, payload: dict[str, Any]) -> None:
        op = payload.get("op")
        if op not in COMMAND_OPS:
            self.error(f"unknown op: {op!r}")
            return
        if op == "connect":
            self._do_connect(payload)
            return
        if self.client is None:
            self.error(f"{op} before connect")
            return
        try:
            if op == "join":
                self.client.join(payload["channel"])
            elif op == "part":
                self.client.part(payload["channel"], payload.get("reason"))
            elif op == "privmsg":
                self.client.privmsg(payload["target"], payload["text"])
            elif op == "nick":
                self.client.nick(payload["nick"])
            elif op == "quit":
                self.client.quit(payload.get("reason"))
            elif op == "raw":
                self.client.raw(payload["line"])
        except KeyError as exc:
            self.error(f"{op}: missing field {exc}")
        except Exception as exc:
            self.error(f"{op}: {exc}")

    def _do_connect(self, payload: dict[str, Any]) -> None:
        if self.client is not None:
            self.error("already connected")
            return
        try:
            host = payload["host"]
            port = int(payload["port"])
            nick = payload["nick"]
        except (KeyError, TypeError, ValueError) as exc:
            self.error(f"connect: bad fields ({exc})")
            return
        try:
            self.client = IrcClient.connect(
                host, port, sink=self.on_client_event, name="bridge-client"
            )
        except ConnectFailure as exc:
            self.error(str(exc))
            return
        self.own_nick = nick
        self.client.register(nick, payload.get("realname") or nick)

    def run(self) -> None:
        try:
            for frame in self.ws:
                if isinstance(frame, bytes):
                    self.error("binary frames not supported")
                    continue
                try:
                    payload = json.loads(frame)
                except json.JSONDecodeError as exc:
                    self.error(f"malformed JSON: {exc}")
                    continue
                if not isinstance(payload, dict):
                    self.error("command must be a JSON object")
                    continue
                self.on_command(payload)
        except ConnectionClosed:
            pass
        finally:
            if self.client is not None:
                try:
                    self.client.quit("browser went away")
                except Exception:
                    pass
                self.client.close()


class WsBridge:
    """The gateway process: one WebSocket session served at a time."""

    def __init__(self, listen_host: str = "127.0.0.1", listen_port: int = DEFAULT_LISTEN_PORT):
        self.listen_host = listen_host
        self.listen_port = listen_port
        self._busy = threading.Semaphore(1)
        self._server: Server | None = None
        self._thread: threading.Thread | None = None

    def _handler(self, ws: ServerConnection) -> None:
        if not self._busy.acquire(blocking=False):
            try:
                ws.send(json.dumps({"ev": "server_error", "numeric": 0, "text": "bridge busy"}))
            except ConnectionClosed:
                pass
            ws.close()
            return
        try:
            _BridgeSession(ws).run()
        finally:
            self._busy.release()

    @property
    def port(self) -> int:
        assert self._server is not None
        return self._server.socket.getsockname()[1]

    def start(self) -> None:
        self._server = serve(self._handler, self.listen_host, self.listen_port)
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="ws-bridge", daemon=True
        )
        self._thread.start()
        log.info("bridge listening on %s:%d", self.listen_host, self.port)

    def wait(self) -> None:
        assert self._thread is not None
        while self._thread.is_alive():
            self._thread.join(timeout=0.5)

    def shutdown(self) -> None:
        if self._server is not None:
            self._server.shutdown()
        if self._thread is not None:
            self._thread.join(timeout=5)
