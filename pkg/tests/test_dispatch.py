"""Branch table construction checks and exactly-one-branch dispatch."""

from __future__ import annotations

import pytest

from irckit.dispatch import BranchTable, DuplicateBranch
from irckit.wire import (
    CLIENT_TO_SERVER,
    Command,
    RawMessage,
    UnknownCommand,
    classify,
    parse_line,
)


def make_table(capability=CLIENT_TO_SERVER):
    calls: list[str] = []
    table: BranchTable[None] = BranchTable(
        capability, fallback=lambda msg: calls.append(f"fallback:{msg.tag}")
    )
    return table, calls


def test_register_distinct_tags_ok():
    table, calls = make_table()
    table.register(Command.PING, lambda m: calls.append("ping"))
    table.register(Command.PRIVMSG, lambda m: calls.append("privmsg"))
    assert table.validate().ok


def test_register_duplicate_rejected():
    table, _ = make_table()
    table.register(Command.PING, lambda m: None)
    with pytest.raises(DuplicateBranch):
        table.register(Command.PING, lambda m: None)


def test_register_outside_capability_flagged_by_validate():
    table, _ = make_table(capability=CLIENT_TO_SERVER)
    table.register(Command.RPL_WELCOME, lambda m: None)  # a server-only reply
    report = table.validate()
    assert not report.ok
    assert report.out_of_capability == [Command.RPL_WELCOME]


def test_validate_full_coverage_no_uncovered():
    table, _ = make_table()
    for tag in CLIENT_TO_SERVER:
        table.register(tag, lambda m: None)
    report = table.validate()
    assert report.ok
    assert report.uncovered == []


def test_validate_uncovered_is_advisory():
    table, _ = make_table()
    for tag in CLIENT_TO_SERVER - {Command.QUIT}:
        table.register(tag, lambda m: None)
    report = table.validate()
    assert report.ok  # advisory only
    assert report.uncovered == [Command.QUIT]
    # independent oracle: capability minus registered set
    assert set(report.uncovered) == set(CLIENT_TO_SERVER) - set(
        tag for tag, _ in table._registrations
    )


def test_merge_can_create_duplicates_that_validate_reports():
    table_a, _ = make_table()
    table_a.register(Command.PING, lambda m: None)
    table_b, _ = make_table()
    table_b.register(Command.PING, lambda m: None)
    table_a.merge(table_b)
    report = table_a.validate()
    assert not report.ok
    assert report.duplicates == [Command.PING]


def test_dispatch_exactly_one_branch():
    table, calls = make_table()
    table.register(Command.PRIVMSG, lambda m: calls.append("privmsg"))
    table.register(Command.PING, lambda m: calls.append("ping"))
    table.dispatch(classify(parse_line("PRIVMSG #c :hi")))
    assert calls == ["privmsg"]


def test_dispatch_unknown_goes_to_fallback():
    table, calls = make_table()
    table.register(Command.PING, lambda m: calls.append("ping"))
    table.dispatch(classify(parse_line("FOO x")))
    assert calls == ["fallback:FOO"]


def test_dispatch_deterministic_for_equal_messages():
    table, calls = make_table()
    table.register(Command.PING, lambda m: calls.append("ping"))
    msg = classify(RawMessage(Command.PING, ("tok",)))
    table.dispatch(msg)
    table.dispatch(classify(RawMessage(Command.PING, ("tok",))))
    assert calls == ["ping", "ping"]


def test_dispatch_passes_extra_args_through():
    table: BranchTable[str] = BranchTable(CLIENT_TO_SERVER, lambda m, ctx: f"fb:{ctx}")
    table.register(Command.PING, lambda m, ctx: f"ping:{ctx}")
    assert table.dispatch(classify(parse_line("PING t")), "session7") == "ping:session7"
    assert table.dispatch(classify(parse_line("BLURB")), "session7") == "fb:session7"


def test_fallback_reachable_only_via_unknown_when_covered():
    table, calls = make_table()
    for tag in CLIENT_TO_SERVER:
        table.register(tag, lambda m, t=None: calls.append("branch"))
    assert table.validate().ok
    for line in ["NICK a", "USER a 0 * :r", "JOIN #c", "PART #c", "PRIVMSG #c :x",
                 "QUIT", "PING t", "PONG t"]:
        table.dispatch(classify(parse_line(line)))
    assert calls == ["branch"] * 8
    table.dispatch(classify(parse_line("WIBBLE")))
    assert calls[-1] == f"fallback:{UnknownCommand('WIBBLE')}"
