"""Ping-pong behaviour, checked against an exhaustive scheduling model.

The model enumerates every interleaving of the four loop actions (send
at A, send at B, receive at A, receive at B) for the small seed count,
proving termination and the exact per-direction message counts; the
concurrent run is then required to reproduce those counts.
"""

from __future__ import annotations

import time

from conftest import RunningPair
from test_events import wait_until

SEEDS = 2
MAX_DEPTH = 2


def enumerate_schedules(seeds: int = SEEDS, max_depth: int = MAX_DEPTH):
    """DFS over all interleavings; returns the set of terminal outcomes.

    A state is (queue_a, queue_b, channel_ab, channel_ba, sent_a,
    sent_b, recv_a, recv_b); each received message of depth d below the
    cap enqueues one response of depth d+1 on the receiver's own queue.
    """
    initial = (
        (1,) * seeds,  # queue at A
        (1,) * seeds,  # queue at B
        (),  # in flight A -> B
        (),  # in flight B -> A
        0,
        0,
        0,
        0,
    )
    terminals = set()
    seen = set()
    stack = [initial]
    while stack:
        state = stack.pop()
        if state in seen:
            continue
        seen.add(state)
        qa, qb, ab, ba, sent_a, sent_b, recv_a, recv_b = state
        successors = []
        if qa:
            successors.append((qa[1:], qb, ab + (qa[0],), ba, sent_a + 1, sent_b, recv_a, recv_b))
        if qb:
            successors.append((qa, qb[1:], ab, ba + (qb[0],), sent_a, sent_b + 1, recv_a, recv_b))
        if ba:  # A receives from B
            depth = ba[0]
            new_qa = qa + ((depth + 1,) if depth < max_depth else ())
            successors.append((new_qa, qb, ab, ba[1:], sent_a, sent_b, recv_a + 1, recv_b))
        if ab:  # B receives from A
            depth = ab[0]
            new_qb = qb + ((depth + 1,) if depth < max_depth else ())
            successors.append((qa, new_qb, ab[1:], ba, sent_a, sent_b, recv_a, recv_b + 1))
        if successors:
            stack.extend(successors)
        else:
            terminals.add(state)
    return terminals


def test_model_all_schedules_terminate_with_four_each_way():
    terminals = enumerate_schedules()
    assert terminals, "model found no terminal states"
    for qa, qb, ab, ba, sent_a, sent_b, recv_a, recv_b in terminals:
        # Terminal means nothing queued and nothing in flight: no deadlock.
        assert qa == qb == ab == ba == ()
        assert sent_a == sent_b == 4
        assert recv_a == recv_b == 4


def _pingpong_pair(seeds: int) -> RunningPair:
    def reactor(ep):
        def on_line(line: str) -> None:
            depth = int(line)
            if depth < MAX_DEPTH:
                ep().enqueue(str(depth + 1))

        return on_line

    holder: dict[str, object] = {}
    pair = RunningPair(
        on_line_a=reactor(lambda: holder["a"]),
        on_line_b=reactor(lambda: holder["b"]),
    )
    holder["a"], holder["b"] = pair.a, pair.b
    for _ in range(seeds):
        pair.a.enqueue("1")
        pair.b.enqueue("1")
    return pair


def test_concurrent_pingpong_matches_model():
    pair = _pingpong_pair(SEEDS)
    assert wait_until(lambda: len(pair.received_a) == 4 and len(pair.received_b) == 4)
    time.sleep(0.05)  # no stragglers beyond the modelled count
    assert pair.received_a == ["1", "1", "2", "2"]
    assert pair.received_b == ["1", "1", "2", "2"]
    pair.stop()


def test_pingpong_saturation_terminates():
    seeds = 1000
    pair = _pingpong_pair(seeds)
    expected = 2 * seeds  # seeds plus one response per seed, each way
    assert wait_until(
        lambda: len(pair.received_a) == expected and len(pair.received_b) == expected,
        timeout=30,
    )
    pair.stop(timeout=10)
    assert len(pair.received_a) == expected
    assert len(pair.received_b) == expected
