"""Reputation scores with clamped additive batch updates.

A batch is applied element by element in order, each step being
``score = max(0, score + delta)``, so a member listed twice in one batch sees
both updates in sequence. Every element leaves one history entry, which is
enough to replay the ledger from the initial scores.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import BadFactor, LengthMismatch, UnknownMember
from .events import EventLog


@dataclass(frozen=True)
class ReputationEntry:
    member: bytes
    delta: int
    reason: str
    timestamp: int


def clamped_add(score: int, delta: int) -> int:
    return max(0, score + delta)


def dispute_penalty(score: int) -> int:
    """Score after a dispute is opened: ``max(0, score - 2)``."""
    return clamped_add(score, -2)


PROVIDER_REWARD = 5
BUYER_REWARD = 1


class ReputationLedger:
    def __init__(self, log: EventLog | None = None) -> None:
        self.log = log if log is not None else EventLog()
        self._initial: dict[bytes, int] = {}
        self._scores: dict[bytes, int] = {}
        self._last_updated: dict[bytes, int] = {}
        self.history: list[ReputationEntry] = []

    def register(self, member: bytes, now: int = 0, initial: int = 0) -> None:
        if member in self._scores:
            return
        if initial < 0:
            raise ValueError("initial score must be non-negative")
        self._initial[member] = initial
        self._scores[member] = initial
        self._last_updated[member] = now
        self.log.emit("reputation", "member.registered", member=member, score=initial)

    def __contains__(self, member: bytes) -> bool:
        return member in self._scores

    def score(self, member: bytes) -> int:
        try:
            return self._scores[member]
        except KeyError:
            raise UnknownMember("no reputation record") from None

    def scores(self) -> dict[bytes, int]:
        return dict(self._scores)

    def batch_update(self, members: Sequence[bytes], deltas: Sequence[int], *,
                     reason: str = "batch", now: int = 0) -> list[int]:
        """Apply the batch and return the delta actually applied per element."""
        if len(members) != len(deltas):
            raise LengthMismatch(f"{len(members)} members vs {len(deltas)} deltas")
        for m in members:
            if m not in self._scores:
                raise UnknownMember("batch names an unregistered member")
        if not members:
            return []
        applied = []
        for m, d in zip(members, deltas):
            before = self._scores[m]
            self._scores[m] = clamped_add(before, d)
            self._last_updated[m] = now
            applied.append(self._scores[m] - before)
            self.history.append(ReputationEntry(m, d, reason, now))
        self.log.emit("reputation", "batch.applied", reason=reason, members=list(members),
                      deltas=list(deltas), applied=applied)
        return applied

    def replay(self) -> dict[bytes, int]:
        scores = dict(self._initial)
        for e in self.history:
            scores[e.member] = clamped_add(scores[e.member], e.delta)
        return scores

    def deterrence_margin(self, member: bytes, reputation_value_per_point: int,
                          cheating_gain: int, factor) -> tuple[int, bool]:
        """How far the stake at risk clears ``factor`` times the cheating gain.

        The stake is the member's whole score valued at
        ``reputation_value_per_point``, i.e. what a full slash or exclusion
        costs them. Returns the margin (truncated toward zero) and whether the
        deterrence condition holds.
        """
        factor = Fraction(str(factor)) if isinstance(factor, float) else Fraction(factor)
        if factor <= 0:
            raise BadFactor("factor must be positive")
        loss = self.score(member) * reputation_value_per_point
        threshold = factor * cheating_gain
        return int(loss - threshold), loss >= threshold

    def to_csv(self, names: dict[bytes, str] | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["member", "score", "last_updated"])
        rows = []
        for m, s in self._scores.items():
            label = names.get(m, m.hex()) if names else m.hex()
            rows.append((label, s, self._last_updated[m]))
        for row in sorted(rows):
            w.writerow(row)
        return buf.getvalue()
