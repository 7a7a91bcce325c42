"""Client role: command API wire forms, inbound handling, events."""

from __future__ import annotations

import socket
import threading
import time

import pytest

from irckit.client import (
    ChannelMessage,
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
from irckit.events import QueueClosed
from irckit.wire import FrameBuffer


class ScriptedPeer:
    """Accepts one connection and speaks raw lines, for exact-wire checks."""

    def __init__(self):
        self.listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self.listener.bind(("127.0.0.1", 0))
        self.listener.listen(1)
        self.port = self.listener.getsockname()[1]
        self.conn: socket.socket | None = None
        self.buf = FrameBuffer()
        self.lines: list[str] = []

    def accept(self) -> None:
        self.conn, _ = self.listener.accept()
        self.conn.settimeout(5)

    def next_line(self, timeout: float = 5.0) -> str | None:
        assert self.conn is not None
        deadline = time.monotonic() + timeout
        while not self.lines:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            self.conn.settimeout(remaining)
            try:
                chunk = self.conn.recv(4096)
            except socket.timeout:
                return None
            if chunk == b"":
                return None
            self.buf.feed(chunk)
            while (line := self.buf.next_line()) is not None:
                self.lines.append(line)
        return self.lines.pop(0)

    def send_line(self, line: str) -> None:
        assert self.conn is not None
        self.conn.sendall(line.encode() + b"\r\n")

    def close(self) -> None:
        if self.conn is not None:
            self.conn.close()
        self.listener.close()


@pytest.fixture
def peer():
    p = ScriptedPeer()
    accepted = threading.Event()

    def run():
        p.accept()
        accepted.set()

    threading.Thread(target=run, daemon=True).start()
    p._accepted = accepted  # type: ignore[attr-defined]
    yield p
    p.close()


def connect_to(peer: ScriptedPeer) -> IrcClient:
    client = IrcClient.connect("127.0.0.1", peer.port)
    assert peer._accepted.wait(timeout=5)  # type: ignore[attr-defined]
    return client


# --------------------------------------------------------------------- #
#  command API wire forms                                               #
# --------------------------------------------------------------------- #


def test_register_emits_nick_then_user(peer):
    client = connect_to(peer)
    client.register("alice", "Alice Wonder")
    assert peer.next_line() == "NICK alice"
    assert peer.next_line() == "USER alice 0 * :Alice Wonder"
    client.close()


def test_privmsg_wire_form(peer):
    client = connect_to(peer)
    client.privmsg("#compsci", "Hello there")
    assert peer.next_line() == "PRIVMSG #compsci :Hello there"
    client.close()


def test_command_api_order_flows_through_queue(peer):
    client = connect_to(peer)
    client.join("#a")
    client.privmsg("#a", "one and two")
    client.part("#a", "got to go")
    client.quit("done")
    assert peer.next_line() == "JOIN #a"
    assert peer.next_line() == "PRIVMSG #a :one and two"
    assert peer.next_line() == "PART #a :got to go"
    assert peer.next_line() == "QUIT done"
    client.close()


def test_raw_passthrough(peer):
    client = connect_to(peer)
    client.raw("PING x")
    assert peer.next_line() == "PING x"
    client.raw("BLURB a b :c d")
    assert peer.next_line() == "BLURB a b :c d"
    client.close()


def test_every_byte_sent_was_enqueued(peer):
    client = connect_to(peer)
    for i in range(5):
        client.privmsg("#t", f"m{i}")
    for _ in range(5):
        assert peer.next_line() is not None
    client.close()
    assert client.report is not None
    assert client.report.events_out == 5


# --------------------------------------------------------------------- #
#  inbound handling via scripted peer                                   #
# --------------------------------------------------------------------- #


def test_auto_pong_without_local_code(peer):
    client = connect_to(peer)  # nobody consumes the event queue
    for i in range(50):
        peer.send_line(f":srv PRIVMSG #busy :noise {i}")
    peer.send_line(":srv PING :t1")
    start = time.monotonic()
    assert peer.next_line(timeout=2) == "PONG t1"
    assert time.monotonic() - start < 2
    client.close()


def test_ping_without_token_not_answered(peer):
    client = connect_to(peer)
    peer.send_line(":srv PING")
    client.raw("PING probe")  # marker to bound the wait
    assert peer.next_line() == "PING probe"
    client.close()


def test_registered_event_and_state(peer):
    client = connect_to(peer)
    peer.send_line(":srv 001 alice :Welcome to srv")
    event = client.wait_for(Registered)
    assert event == Registered("Welcome to srv")
    assert client.state.registered is True
    assert client.state.own_nick == "alice"
    client.close()


def test_channel_vs_direct_message_events(peer):
    client = connect_to(peer)
    peer.send_line(":bob!b@host PRIVMSG #compsci :Hello there")
    event = client.wait_for(ChannelMessage)
    assert event == ChannelMessage("bob", "#compsci", "Hello there")
    peer.send_line(":carol PRIVMSG alice :hi you")
    event = client.wait_for(DirectMessage)
    assert event == DirectMessage("carol", "hi you")
    client.close()


def test_names_accumulate_across_pages(peer):
    client = connect_to(peer)
    peer.send_line(":srv 353 alice = #cats :alice bob")
    peer.send_line(":srv 353 alice = #cats :carol")
    peer.send_line(":srv 366 alice #cats :End of /NAMES list")
    event = client.wait_for(Names)
    assert event == Names("#cats", ("alice", "bob", "carol"))
    assert client.state.memberships["#cats"] == ["alice", "bob", "carol"]
    client.close()


def test_membership_updates_from_join_part_quit_nick(peer):
    client = connect_to(peer)
    peer.send_line(":srv 001 me :Welcome")
    client.wait_for(Registered)
    peer.send_line(":me JOIN #room")
    assert client.wait_for(Joined) == Joined("me", "#room")
    peer.send_line(":friend JOIN #room")
    assert client.wait_for(Joined) == Joined("friend", "#room")
    assert client.state.memberships["#room"] == ["me", "friend"]
    peer.send_line(":friend NICK buddy")
    assert client.wait_for(NickChanged) == NickChanged("friend", "buddy")
    assert client.state.memberships["#room"] == ["me", "buddy"]
    peer.send_line(":buddy PART #room :gone")
    assert client.wait_for(Parted) == Parted("buddy", "#room", "gone")
    assert client.state.memberships["#room"] == ["me"]
    peer.send_line(":stranger QUIT :bye")
    assert client.wait_for(QuitSeen) == QuitSeen("stranger", "bye")
    peer.send_line(":me PART #room")
    assert client.wait_for(Parted) == Parted("me", "#room", None)
    assert "#room" not in client.state.memberships
    client.close()


def test_own_nick_change_tracked(peer):
    client = connect_to(peer)
    peer.send_line(":srv 001 old :Welcome")
    client.wait_for(Registered)
    peer.send_line(":old NICK shiny")
    client.wait_for(NickChanged)
    assert client.state.own_nick == "shiny"
    client.close()


def test_err_numeric_becomes_server_error(peer):
    client = connect_to(peer)
    peer.send_line(":srv 433 * alice :Nickname is already in use")
    event = client.wait_for(ServerError)
    assert event == ServerError(433, "Nickname is already in use")
    client.close()


def test_unhandled_message_becomes_diagnostic(peer):
    client = connect_to(peer)
    peer.send_line(":srv BLORP a b")
    event = client.wait_for(ServerError)
    assert event.numeric == 0
    assert "BLORP" in event.text
    client.close()


def test_error_message_disconnects(peer):
    client = connect_to(peer)
    peer.send_line("ERROR :Closing Link")
    event = client.wait_for(Disconnected)
    assert event == Disconnected("Closing Link")
    assert client.wait(timeout=5)
    with pytest.raises(QueueClosed):
        client.privmsg("#x", "too late")


def test_peer_drop_emits_disconnected_once(peer):
    client = connect_to(peer)
    peer.conn.close()
    event = client.wait_for(Disconnected)
    assert event is not None
    assert client.wait(timeout=5)
    assert client.next_event(timeout=0.2) is None  # exactly one


def test_custom_sink_receives_events(peer):
    events = []
    client = IrcClient.connect("127.0.0.1", peer.port, sink=events.append)
    assert peer._accepted.wait(timeout=5)
    peer.send_line(":srv 001 sinky :Welcome")
    time.sleep(0.3)
    assert Registered("Welcome") in events
    client.close()


# --------------------------------------------------------------------- #
#  against the real server                                              #
# --------------------------------------------------------------------- #


def test_connect_failure_on_closed_port():
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    free_port = probe.getsockname()[1]
    probe.close()
    with pytest.raises(ConnectFailure):
        IrcClient.connect("127.0.0.1", free_port, timeout=1)


def test_full_session_against_server(server):
    a = IrcClient.connect("127.0.0.1", server.port, name="a")
    b = IrcClient.connect("127.0.0.1", server.port, name="b")
    a.register("annie")
    b.register("benny")
    assert isinstance(a.wait_for(Registered), Registered)
    assert isinstance(b.wait_for(Registered), Registered)

    a.join("#demo")
    joined = a.wait_for(Joined)
    assert joined == Joined("annie", "#demo")
    names = a.wait_for(Names)
    assert names.channel == "#demo" and "annie" in names.members

    b.join("#demo")
    b.wait_for(Names)
    assert a.wait_for(Joined) == Joined("benny", "#demo")

    b.privmsg("#demo", "hello all")
    event = a.wait_for(ChannelMessage)
    assert event == ChannelMessage("benny", "#demo", "hello all")

    a.privmsg("benny", "private hi")
    direct = b.wait_for(DirectMessage)
    assert direct == DirectMessage("annie", "private hi")

    b.quit("done here")
    assert a.wait_for(QuitSeen) == QuitSeen("benny", "done here")
    assert b.wait_for(Disconnected) is not None
    assert b.wait(timeout=5)
    a.close()


def test_event_causality_joined_before_names_after_registered(server):
    client = IrcClient.connect("127.0.0.1", server.port)
    client.register("causal")
    client.join("#order")
    observed = []
    deadline = time.monotonic() + 5
    while time.monotonic() < deadline:
        event = client.next_event(timeout=0.5)
        if event is not None:
            observed.append(event)
        if any(isinstance(e, Names) for e in observed):
            break
    kinds = [type(e).__name__ for e in observed]
    assert kinds.index("Registered") < kinds.index("Joined") < kinds.index("Names")
    client.close()


def test_two_handles_are_independent_sessions(server):
    a = IrcClient.connect("127.0.0.1", server.port)
    b = IrcClient.connect("127.0.0.1", server.port)
    a.register("indep1")
    b.register("indep2")
    assert a.wait_for(Registered) is not None
    assert b.wait_for(Registered) is not None
    a.close()
    b.privmsg("indep2", "still alive")  # b unaffected by a's close
    assert b.wait_for(DirectMessage) == DirectMessage("indep2", "still alive")
    b.close()
