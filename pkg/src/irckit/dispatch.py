"""Validated routing of typed messages to handler branches.

A :class:`BranchTable` maps command tags to handler branches over a
declared *capability*: the set of tags the peer may legitimately send.
Construction-time checks keep the choice sound: no tag may map to two
branches, and every registered tag must belong to the capability.  At
dispatch time exactly one branch runs for any message — the registered
one, or the mandatory fallback.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Generic, Iterable, TypeVar

from irckit.wire import CommandTag, TypedMessage

R = TypeVar("R")


class DispatchError(Exception):
    pass


class DuplicateBranch(DispatchError):
    """A tag already has a branch; the choice would be ambiguous."""


@dataclass
class ValidationReport:
    """Outcome of the table soundness checks.

    ``uncovered`` lists capability tags with no branch; it is advisory
    only (those messages fall through to the fallback).
    """

    ok: bool
    duplicates: list[CommandTag] = field(default_factory=list)
    out_of_capability: list[CommandTag] = field(default_factory=list)
    uncovered: list[CommandTag] = field(default_factory=list)


class BranchTable(Generic[R]):
    """Immutable-after-setup mapping of command tags to branches.

    Build the table single-threaded during setup; dispatch is read-only
    and safe to call concurrently from both loops.
    """

    def __init__(
        self,
        capability: Iterable[CommandTag],
        fallback: Callable[..., R],
    ):
        self.capability = frozenset(capability)
        self.fallback = fallback
        self._registrations: list[tuple[CommandTag, Callable[..., R]]] = []
        self._branches: dict[CommandTag, Callable[..., R]] = {}

    def register(self, tag: CommandTag, handler: Callable[..., R]) -> None:
        """Record a branch for ``tag``; duplicates are rejected."""
        if tag in self._branches:
            raise DuplicateBranch(f"branch for {tag} already registered")
        self._registrations.append((tag, handler))
        self._branches[tag] = handler

    def merge(self, other: "BranchTable[R]") -> None:
        """Splice in another table's registrations without collision
        checks; run :meth:`validate` afterwards to surface duplicates."""
        for tag, handler in other._registrations:
            self._registrations.append((tag, handler))
            self._branches.setdefault(tag, handler)

    def validate(self) -> ValidationReport:
        """Pure soundness check: duplicates, capability membership,
        and (advisory) uncovered capability tags."""
        seen: set[CommandTag] = set()
        duplicates: list[CommandTag] = []
        for tag, _ in self._registrations:
            if tag in seen and tag not in duplicates:
                duplicates.append(tag)
            seen.add(tag)
        out_of_capability = [tag for tag in seen if tag not in self.capability]
        uncovered = [tag for tag in self.capability if tag not in seen]
        return ValidationReport(
            ok=not duplicates and not out_of_capability,
            duplicates=duplicates,
            out_of_capability=sorted(out_of_capability, key=str),
            uncovered=sorted(uncovered, key=str),
        )

    def dispatch(self, msg: TypedMessage, *args, **kwargs) -> R:
        """Invoke exactly one branch for the message's tag."""
        branch = self._branches.get(msg.tag, self.fallback)
        return branch(msg, *args, **kwargs)
