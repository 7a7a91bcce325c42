"""Full-duplex asynchronous event endpoint.

One endpoint owns a FIFO event queue and two concurrent loops over the
two directions of a byte transport:

- the *outbound* loop blocks on the queue and hands each event to the
  outbound handler, which typically serialises and transmits it;
- the *inbound* loop blocks on the receive half, frames and decodes
  incoming bytes, and hands each message to the inbound handler, which
  typically reacts by enqueueing follow-ups (on this endpoint or on
  another).

Two such endpoints wired to the two ends of one connection form the
complete pattern: each side can send and receive simultaneously, and
replies may interleave freely with requests.

Faults in either loop are funnelled to the ``on_error`` hook, which
decides whether the endpoint winds down; ``on_stop`` runs exactly once
per run, after both loops have exited.
"""

from __future__ import annotations

import enum
import logging
import socket
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Generic, TypeVar

from irckit.wire import FrameBuffer, InvalidUtf8, OversizeFrame

log = logging.getLogger(__name__)

T = TypeVar("T")

RECV_CHUNK = 4096


class EventsError(Exception):
    pass


class QueueClosed(EventsError):
    """Enqueue attempted after the queue was closed."""


class QueueOverflow(EventsError):
    """Soft cap exceeded; routed to ``on_error`` and the event dropped."""


class TransportClosed(EventsError):
    pass


class AlreadyRunning(EventsError):
    pass


class StopDecision(enum.Enum):
    STOP = "stop"
    CONTINUE = "continue"


class FaultKind(enum.Enum):
    TRANSPORT = "transport"
    DECODE = "decode"
    HANDLER = "handler"


@dataclass
class Fault:
    """A failure inside one of the loops, routed to ``on_error``."""

    kind: FaultKind
    loop: str  # "inbound", "outbound" or "enqueue"
    error: BaseException


@dataclass
class LocalHooks:
    """Per-endpoint error and shutdown callbacks."""

    on_error: Callable[[Fault], StopDecision] = lambda fault: StopDecision.STOP
    on_stop: Callable[[], None] = lambda: None


@dataclass
class TerminationReport:
    cause: str
    events_out: int = 0
    frames_in: int = 0


_CLOSED = object()


class EventQueue(Generic[T]):
    """Thread-safe FIFO of pending events.

    Closing rejects further enqueues immediately but lets a consumer
    drain what is already queued; ``get`` returns the close sentinel
    only once the queue is both closed and empty.
    """

    def __init__(self, soft_cap: int | None = None):
        self._items: deque[T] = deque()
        self._cond = threading.Condition()
        self._closed = False
        self.soft_cap = soft_cap

    @property
    def closed(self) -> bool:
        return self._closed

    def __len__(self) -> int:
        with self._cond:
            return len(self._items)

    def put(self, item: T) -> None:
        with self._cond:
            if self._closed:
                raise QueueClosed("enqueue after close")
            if self.soft_cap is not None and len(self._items) >= self.soft_cap:
                raise QueueOverflow(f"soft cap {self.soft_cap} exceeded")
            self._items.append(item)
            self._cond.notify()

    def get(self):
        """Next item in FIFO order, or the close sentinel."""
        with self._cond:
            while not self._items and not self._closed:
                self._cond.wait()
            if self._items:
                return self._items.popleft()
            return _CLOSED

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class SocketTransport:
    """Full-duplex byte transport over a connected stream socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._lock = threading.Lock()
        self._closed = False

    def is_open(self) -> bool:
        return not self._closed and self._sock.fileno() >= 0

    def send_bytes(self, data: bytes) -> None:
        self._sock.sendall(data)

    def recv_bytes(self, max_bytes: int = RECV_CHUNK) -> bytes:
        return self._sock.recv(max_bytes)

    def shutdown_read(self) -> None:
        # Unblocks a recv() parked in another thread.
        try:
            self._sock.shutdown(socket.SHUT_RD)
        except OSError:
            pass

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def pipe_pair() -> tuple[SocketTransport, SocketTransport]:
    """Two connected in-memory transports (the test double)."""
    a, b = socket.socketpair()
    return SocketTransport(a), SocketTransport(b)


class _Half:
    """One direction of a link; claimable by exactly one loop."""

    def __init__(self, transport, role: str):
        self._transport = transport
        self.role = role
        self.owner: str | None = None

    def claim(self, owner: str) -> None:
        if self.owner is not None:
            raise EventsError(f"{self.role} half already owned by {self.owner}")
        self.owner = owner


class SendHalf(_Half):
    def __init__(self, transport):
        super().__init__(transport, "tx")

    def send(self, data: bytes) -> None:
        self._transport.send_bytes(data)


class RecvHalf(_Half):
    def __init__(self, transport):
        super().__init__(transport, "rx")

    def recv(self, max_bytes: int = RECV_CHUNK) -> bytes:
        return self._transport.recv_bytes(max_bytes)


@dataclass
class DuplexLink:
    """Exclusively-ownable write and read halves of one connection."""

    tx: SendHalf
    rx: RecvHalf
    transport: object = field(repr=False, default=None)


def split(transport) -> DuplexLink:
    """Split a connected transport into its two directed halves."""
    if not transport.is_open():
        raise TransportClosed("transport is not open")
    return DuplexLink(SendHalf(transport), RecvHalf(transport), transport)


class EndpointEvents(Generic[T]):
    """One endpoint of the dual-queue full-duplex pattern.

    ``run`` drives the outbound loop on the calling thread and the
    inbound loop on a private thread, blocking until both wind down.
    ``enqueue`` and ``stop`` are safe to call from any thread at any
    time; handlers run serially within their own loop but concurrently
    across loops, so state shared between the two handlers needs its
    own synchronisation.
    """

    def __init__(
        self,
        link: DuplexLink,
        outbound: Callable[[T], None],
        inbound: Callable[[object], None],
        hooks: LocalHooks | None = None,
        *,
        decoder: Callable[[str], object] | None = None,
        soft_cap: int | None = None,
        frame_limit: int | None = None,
        name: str = "endpoint",
    ):
        self.link = link
        self.queue: EventQueue[T] = EventQueue(soft_cap=soft_cap)
        self._outbound = outbound
        self._inbound = inbound
        self.hooks = hooks or LocalHooks()
        self._decoder = decoder or (lambda line: line)
        self._frame_limit = frame_limit
        self.name = name

        self._state = "idle"
        self._state_lock = threading.Lock()
        self._stop_cause: str | None = None
        self._stopping = threading.Event()
        self._events_out = 0
        self._frames_in = 0
        self.report: TerminationReport | None = None

    @property
    def state(self) -> str:
        return self._state

    # -- control ------------------------------------------------------- #

    def enqueue(self, event: T) -> None:
        """Append an event; a blocked outbound loop wakes up."""
        try:
            self.queue.put(event)
        except QueueOverflow as exc:
            self._fault(Fault(FaultKind.HANDLER, "enqueue", exc))

    def stop(self, cause: str = "stopped") -> None:
        """Idempotent wind-down: close the queue, unblock both loops.

        Events already queued are still transmitted before the outbound
        loop exits (unless the transport has failed).
        """
        if self._stopping.is_set():
            return
        self._stop_cause = self._stop_cause or cause
        self._stopping.set()
        self.queue.close()
        self.link.transport.shutdown_read()

    def _fault(self, fault: Fault) -> StopDecision:
        try:
            decision = self.hooks.on_error(fault)
        except Exception:  # a broken hook must not take down the loops
            log.exception("%s: on_error hook raised", self.name)
            decision = StopDecision.STOP
        if decision is StopDecision.STOP:
            self.stop(f"{fault.kind.value} fault in {fault.loop} loop: {fault.error!r}")
        return decision

    # -- the two loops -------------------------------------------------- #

    def run(self) -> TerminationReport:
        """Run both loops; blocks the caller until the endpoint stops."""
        with self._state_lock:
            if self._state != "idle":
                raise AlreadyRunning(f"state={self._state}")
            self._state = "running"

        self.link.tx.claim(f"{self.name}/outbound")
        self.link.rx.claim(f"{self.name}/inbound")

        inbound_thread = threading.Thread(
            target=self._inbound_loop, name=f"{self.name}-inbound", daemon=True
        )
        inbound_thread.start()
        try:
            self._outbound_loop()
        finally:
            self.stop("outbound loop exited")
            inbound_thread.join()
            self.link.transport.close()
            self._state = "stopped"
            self.report = TerminationReport(
                cause=self._stop_cause or "stopped",
                events_out=self._events_out,
                frames_in=self._frames_in,
            )
            try:
                self.hooks.on_stop()
            except Exception:
                log.exception("%s: on_stop hook raised", self.name)
        return self.report

    def _outbound_loop(self) -> None:
        while True:
            item = self.queue.get()
            if item is _CLOSED:
                return
            try:
                self._outbound(item)
                self._events_out += 1
            except Exception as exc:
                kind = (
                    FaultKind.TRANSPORT
                    if isinstance(exc, (OSError, TransportClosed))
                    else FaultKind.HANDLER
                )
                decision = self._fault(Fault(kind, "outbound", exc))
                if kind is FaultKind.TRANSPORT:
                    return  # draining is futile once the link is gone
                if decision is StopDecision.STOP:
                    return

    def _inbound_loop(self) -> None:
        buf = FrameBuffer() if self._frame_limit is None else FrameBuffer(self._frame_limit)
        while not self._stopping.is_set():
            try:
                chunk = self.link.rx.recv()
            except OSError as exc:
                if not self._stopping.is_set():
                    self._fault(Fault(FaultKind.TRANSPORT, "inbound", exc))
                    self.stop(f"transport error: {exc!r}")
                return
            if chunk == b"":
                self.stop("peer closed the connection")
                return
            try:
                buf.feed(chunk)
            except OversizeFrame as exc:
                self._fault(Fault(FaultKind.DECODE, "inbound", exc))
                self.stop(f"oversize frame: {exc}")  # unrecoverable framing state
                return
            if not self._drain_lines(buf):
                return

    def _drain_lines(self, buf: FrameBuffer) -> bool:
        """Decode and handle buffered lines; False to wind down."""
        while True:
            try:
                line = buf.next_line()
            except OversizeFrame as exc:
                self._fault(Fault(FaultKind.DECODE, "inbound", exc))
                self.stop(f"oversize frame: {exc}")
                return False
            except InvalidUtf8 as exc:
                if self._fault(Fault(FaultKind.DECODE, "inbound", exc)) is StopDecision.STOP:
                    return False
                continue  # bad frame dropped, keep going
            if line is None:
                return True
            try:
                msg = self._decoder(line)
            except Exception as exc:
                if self._fault(Fault(FaultKind.DECODE, "inbound", exc)) is StopDecision.STOP:
                    return False
                continue
            self._frames_in += 1
            if self._stopping.is_set():
                return False
            try:
                self._inbound(msg)
            except Exception as exc:
                if self._fault(Fault(FaultKind.HANDLER, "inbound", exc)) is StopDecision.STOP:
                    return False
