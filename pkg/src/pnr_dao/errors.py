"""Exception hierarchy shared by every protocol module.

Each rule violation has its own class so that callers (and the simulator's
event log) can report the exact guard that fired via ``err.code``.
"""

from __future__ import annotations


class PnRError(Exception):
    """Base class for all protocol-level rejections."""

    @property
    def code(self) -> str:
        return type(self).__name__


class IndexedError(PnRError):
    """A batch rejection that points at the offending element."""

    def __init__(self, index: int | None = None, message: str = ""):
        self.index = index
        text = message or self.code
        if index is not None:
            text = f"{text} (entry {index})"
        super().__init__(text)


# identity
class EmptyIdentity(PnRError):
    pass


# token ledger
class DkycFailed(PnRError):
    pass


class DuplicateIdentity(PnRError):
    pass


class DuplicateOwner(PnRError):
    pass


class BannedIdentity(PnRError):
    pass


class SoulboundViolation(IndexedError):
    pass


class UnknownToken(PnRError):
    pass


class AlreadyBurned(PnRError):
    pass


class NotMember(IndexedError):
    pass


class TypeRestricted(IndexedError):
    pass


class ZeroQuantity(PnRError):
    pass


class WouldGoNegative(IndexedError):
    pass


class NoEncryptionKey(PnRError):
    pass


# governance
class EmptyMemberSet(PnRError):
    pass


class DuplicateMember(PnRError):
    pass


class NotInTree(PnRError):
    pass


class BadQuorum(PnRError):
    pass


class ZeroPeriod(PnRError):
    pass


class UnknownProposal(PnRError):
    pass


class DuplicateProposal(PnRError):
    pass


class VotingClosed(PnRError):
    pass


class InvalidMembershipProof(PnRError):
    pass


class InvalidVoteProof(PnRError):
    pass


class DoubleVote(PnRError):
    pass


class MalformedVote(PnRError):
    pass


class VotingStillOpen(PnRError):
    pass


class OpeningMismatch(PnRError):
    pass


class TooManyVotes(PnRError):
    pass


class NotPassed(PnRError):
    pass


class AlreadyExecuted(PnRError):
    pass


class WrongKind(PnRError):
    pass


class NoAuthorizingProposal(PnRError):
    pass


class CommitmentMismatch(PnRError):
    pass


# deals
class UnknownDeal(PnRError):
    pass


class UnknownDispute(PnRError):
    pass


class WrongType(PnRError):
    pass


class PastDeadline(PnRError):
    pass


class ZeroAmount(PnRError):
    pass


class SelfDeal(PnRError):
    pass


class WrongCaller(PnRError):
    pass


class InsufficientFunds(PnRError):
    pass


class DeadlinePassed(PnRError):
    pass


class WrongState(PnRError):
    pass


class NotParty(PnRError):
    pass


class DuplicateDispute(PnRError):
    pass


class WrongStage(PnRError):
    pass


class NotYetExpired(PnRError):
    pass


class VoteNotFinal(PnRError):
    pass


# reputation
class LengthMismatch(PnRError):
    pass


class UnknownMember(PnRError):
    pass


class BadFactor(PnRError):
    pass


# bridge
class InvalidProof(PnRError):
    pass


class AlreadyRedeemed(PnRError):
    pass


class DuplicateTransfer(PnRError):
    pass


# gas model
class ZeroN(PnRError):
    pass


class UnknownOp(PnRError):
    pass


# simulator
class ScenarioError(PnRError):
    """Raised while loading a scenario document."""


class ParseError(ScenarioError):
    def __init__(self, location: str, message: str = ""):
        self.location = location
        super().__init__(f"parse error at {location}: {message}" if message else location)


class SchemaViolation(ScenarioError):
    def __init__(self, field: str, message: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if message else field)


class UnknownAgentReference(ScenarioError):
    pass


class UnknownFormat(PnRError):
    pass
