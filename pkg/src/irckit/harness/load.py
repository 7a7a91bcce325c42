"""Concurrent load generation against a running server.

Each load client is a full client handle: it registers, joins the
shared channel, sends its messages, then quits.  Two canned scenarios:

- scenario 1: clients act as soon as they can (no pauses);
- scenario 2: barrier mode — all clients join before anyone sends, and
  nobody quits until every send has been processed, so the delivered
  count is exactly ``messages_per_client * n * (n - 1)``.

Delivered counts come from the server's audit control line, so the
target server must run with auditing enabled for them to be recorded.
"""

from __future__ import annotations

import itertools
import logging
import threading
import time
from dataclasses import dataclass

from irckit.client import (
    ChannelMessage,
    ClientEvent,
    DirectMessage,
    Disconnected,
    IrcClient,
    Names,
    Registered,
)
from irckit.harness.scenario import _Conn

log = logging.getLogger(__name__)

_run_ids = itertools.count(1)


@dataclass
class LoadRun:
    n_clients: int
    initial_sleep_ms: int = 0
    inter_send_sleep_ms: int = 0
    messages_per_client: int = 3
    channel: str = "#bench"
    barrier_mode: bool = False


def scenario_run(scenario: int, n_clients: int, messages_per_client: int = 3) -> LoadRun:
    """The two canned load shapes."""
    if scenario == 1:
        return LoadRun(n_clients=n_clients, messages_per_client=messages_per_client)
    if scenario == 2:
        return LoadRun(
            n_clients=n_clients,
            messages_per_client=messages_per_client,
            inter_send_sleep_ms=100,
            barrier_mode=True,
        )
    raise ValueError(f"unknown load scenario {scenario}")


@dataclass
class LoadResult:
    n_clients: int
    wall_clock_s: float
    delivered: int | None  # None when the server has no audit surface
    observed_channel_messages: int
    failures: int

    @property
    def dirty(self) -> bool:
        return self.failures > 0


class _Recorder:
    """Thread-safe sink counting events a load client waits on."""

    def __init__(self) -> None:
        self._cond = threading.Condition()
        self.registered = False
        self.named = False
        self.disconnected = False
        self.channel_messages = 0
        self.direct_messages = 0

    def __call__(self, event: ClientEvent) -> None:
        with self._cond:
            if isinstance(event, Registered):
                self.registered = True
            elif isinstance(event, Names):
                self.named = True
            elif isinstance(event, ChannelMessage):
                self.channel_messages += 1
            elif isinstance(event, DirectMessage):
                self.direct_messages += 1
            elif isinstance(event, Disconnected):
                self.disconnected = True
            self._cond.notify_all()

    def wait_for(self, attr: str, timeout: float) -> bool:
        deadline = time.monotonic() + timeout
        with self._cond:
            while not getattr(self, attr):
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._cond.wait(remaining)
            return True

    def wait_direct(self, count: int, timeout: float) -> bool:
        deadline = time.monotonic() + timeout
        with self._cond:
            while self.direct_messages < count:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._cond.wait(remaining)
            return True


def query_delivered(host: str, port: int, timeout_ms: int = 2000) -> int | None:
    """Read the server's delivered counter over the audit control line."""
    try:
        conn = _Conn(host, port)
    except OSError:
        return None
    try:
        conn.send_line("AUDIT")
        msg = conn.next_event(timeout_ms)
        if not isinstance(msg, str) and msg is not None and str(msg.command) == "AUDIT":
            return int(msg.params[0])
        return None
    finally:
        conn.close()


def _client_script(
    idx: int,
    nick: str,
    host: str,
    port: int,
    run: LoadRun,
    joined_barrier: threading.Barrier | None,
    sent_barrier: threading.Barrier | None,
    recorders: list[_Recorder | None],
    failures: list[str],
    failures_lock: threading.Lock,
) -> None:
    def fail(reason: str) -> None:
        with failures_lock:
            failures.append(f"client {idx}: {reason}")

    try:
        recorder = _Recorder()
        client = IrcClient.connect(host, port, sink=recorder, name=f"load-{idx}")
    except Exception as exc:
        fail(f"connect: {exc}")
        _drop_out(joined_barrier, sent_barrier)
        return
    recorders[idx] = recorder
    try:
        client.register(nick)
        if not recorder.wait_for("registered", 15):
            fail("no welcome")
            _drop_out(joined_barrier, sent_barrier)
            return
        if run.initial_sleep_ms:
            time.sleep(run.initial_sleep_ms / 1000.0)
        client.join(run.channel)
        if not recorder.wait_for("named", 15):
            fail("no names reply")
            _drop_out(joined_barrier, sent_barrier)
            return
        if joined_barrier is not None:
            joined_barrier.wait(timeout=60)
        for k in range(run.messages_per_client):
            if run.inter_send_sleep_ms and k:
                time.sleep(run.inter_send_sleep_ms / 1000.0)
            client.privmsg(run.channel, f"bench {idx} {k}")
        if sent_barrier is not None:
            # Self-delivery proves the server processed this session's
            # sends; only then is it safe for anyone to quit.
            client.privmsg(nick, "flushed")
            if not recorder.wait_direct(1, 15):
                fail("flush not confirmed")
            sent_barrier.wait(timeout=60)
        client.quit("load done")
        if not recorder.wait_for("disconnected", 15):
            fail("no disconnect after quit")
    except threading.BrokenBarrierError:
        fail("barrier broken")
    except Exception as exc:
        fail(repr(exc))
    finally:
        client.close()


def _drop_out(*barriers: threading.Barrier | None) -> None:
    for barrier in barriers:
        if barrier is not None:
            barrier.abort()


def run_load(host: str, port: int, run: LoadRun) -> LoadResult:
    """Execute one load run; wall clock covers spawn to last quit."""
    run_id = next(_run_ids)
    joined_barrier = threading.Barrier(run.n_clients) if run.barrier_mode else None
    sent_barrier = threading.Barrier(run.n_clients) if run.barrier_mode else None
    recorders: list[_Recorder | None] = [None] * run.n_clients
    failures: list[str] = []
    failures_lock = threading.Lock()

    before = query_delivered(host, port)
    threads = []
    start = time.monotonic()
    for idx in range(run.n_clients):
        nick = f"bench{run_id}x{idx}"
        thread = threading.Thread(
            target=_client_script,
            args=(
                idx,
                nick,
                host,
                port,
                run,
                joined_barrier,
                sent_barrier,
                recorders,
                failures,
                failures_lock,
            ),
            name=f"load-{run_id}-{idx}",
            daemon=True,
        )
        threads.append(thread)
        thread.start()
    for thread in threads:
        thread.join(timeout=120)
    wall = time.monotonic() - start
    after = query_delivered(host, port)

    delivered = None
    if before is not None and after is not None:
        delivered = after - before
    observed = sum(r.channel_messages for r in recorders if r is not None)
    result = LoadResult(
        n_clients=run.n_clients,
        wall_clock_s=wall,
        delivered=delivered,
        observed_channel_messages=observed,
        failures=len(failures),
    )
    if failures:
        log.warning("load run dirty: %s", "; ".join(failures[:5]))
    return result
