"""Proposals, anonymous removal votes, member removal and forced disclosure.

Voting follows a commit / membership-proof / nullifier protocol:

* a proposal snapshots the Merkle root of current members;
* a ballot carries a Merkle path for the voter's leaf, a nullifier
  ``H(tag || sk || proposal_id)`` and a commitment ``H(tag || vote || r)``;
* a nullifier can be used once per proposal;
* after the deadline the openings are matched against the commitments and
  the result is ``total >= quorum * n and yes > total / 2``.

The zero-knowledge proof is emulated. :class:`VoteProof` keeps its witness
next to the public statement and :func:`verify_vote_proof` checks the full
relation, so a forged ballot is rejected exactly as a real verifier would
reject it. Hiding of the witness is modeled only: it is kept out of events,
reprs and comparisons.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence, Union

from .errors import (
    AlreadyExecuted,
    BadQuorum,
    CommitmentMismatch,
    DoubleVote,
    DuplicateMember,
    DuplicateProposal,
    EmptyMemberSet,
    InvalidMembershipProof,
    InvalidVoteProof,
    MalformedVote,
    NoAuthorizingProposal,
    NotInTree,
    NotMember,
    NotPassed,
    OpeningMismatch,
    TooManyVotes,
    UnknownProposal,
    VotingClosed,
    VotingStillOpen,
    WrongKind,
    ZeroPeriod,
)
from .events import EventLog
from .hashing import TAG_LEAF, TAG_NULL, TAG_PAYLOAD, TAG_PROPOSAL, TAG_VOTE, H, lp, u64
from .identity import IdentityEscrow, open_commitment, public_key_of
from .ledger import TokenLedger

DEFAULT_QUORUMS = (Fraction(1, 2), Fraction(13, 20))


def as_fraction(q) -> Fraction:
    # str() first so 0.65 means 13/20 rather than its binary expansion
    if isinstance(q, float):
        return Fraction(str(q))
    return Fraction(q)


# -- Merkle membership --------------------------------------------------------

def leaf_digest(public_key: bytes) -> bytes:
    return H(TAG_LEAF, public_key)


def node_digest(left: bytes, right: bytes) -> bytes:
    return H(left, right)


@dataclass(frozen=True)
class MembershipProof:
    leaf: bytes
    index: int
    siblings: tuple[bytes, ...]


@dataclass(frozen=True)
class MemberTree:
    leaves: tuple[bytes, ...]
    levels: tuple[tuple[bytes, ...], ...] = field(repr=False)

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def __len__(self) -> int:
        return len(self.leaves)


def build_member_tree(members: Iterable[bytes]) -> MemberTree:
    """Binary tree over members in ascending key order, odd levels padded by
    repeating their last node."""
    members = list(members)
    if not members:
        raise EmptyMemberSet("cannot build a tree with no members")
    if len(set(members)) != len(members):
        raise DuplicateMember("member list contains duplicates")
    level = tuple(leaf_digest(pk) for pk in sorted(members))
    levels = [level]
    while len(level) > 1:
        if len(level) % 2:
            level = level + (level[-1],)
        level = tuple(node_digest(level[i], level[i + 1]) for i in range(0, len(level), 2))
        levels.append(level)
    return MemberTree(levels[0], tuple(levels))


def prove_membership(tree: MemberTree, member: bytes) -> MembershipProof:
    leaf = leaf_digest(member)
    try:
        index = tree.leaves.index(leaf)
    except ValueError:
        raise NotInTree("member is not a leaf of this tree") from None
    siblings = []
    i = index
    for level in tree.levels[:-1]:
        j = i ^ 1
        siblings.append(level[j] if j < len(level) else level[i])
        i >>= 1
    return MembershipProof(leaf, index, tuple(siblings))


def verify_membership(root: bytes, leaf: bytes, proof: MembershipProof) -> bool:
    if proof.leaf != leaf or proof.index < 0:
        return False
    node, i = leaf, proof.index
    for sib in proof.siblings:
        if i & 1:
            if sib == node:
                # only a padding copy pairs with itself, and it is always the
                # right child; claiming the mirror position is not canonical
                return False
            node = node_digest(sib, node)
        else:
            node = node_digest(node, sib)
        i >>= 1
    return i == 0 and node == root


# -- ballots ----------------------------------------------------------------------

def derive_nullifier(secret_key: bytes, proposal_id: bytes) -> bytes:
    return H(TAG_NULL, secret_key, proposal_id)


def vote_commitment(vote: int, randomness: bytes) -> bytes:
    return H(TAG_VOTE, bytes([vote]), randomness)


@dataclass(frozen=True)
class VoteStatement:
    proposal_id: bytes
    root: bytes
    commitment: bytes
    nullifier: bytes


@dataclass(frozen=True)
class _Witness:
    vote: int
    randomness: bytes
    secret_key: bytes
    membership: MembershipProof


@dataclass(frozen=True)
class VoteProof:
    statement: VoteStatement
    witness: _Witness = field(repr=False, compare=False)


def prove_vote(statement: VoteStatement, *, vote: int, randomness: bytes,
               secret_key: bytes, membership: MembershipProof) -> VoteProof:
    return VoteProof(statement, _Witness(vote, randomness, secret_key, membership))


def verify_vote_proof(proof: VoteProof) -> bool:
    s, w = proof.statement, proof.witness
    if w.vote not in (0, 1):
        return False
    return (
        vote_commitment(w.vote, w.randomness) == s.commitment
        and derive_nullifier(w.secret_key, s.proposal_id) == s.nullifier
        and w.membership.leaf == leaf_digest(public_key_of(w.secret_key))
        and verify_membership(s.root, w.membership.leaf, w.membership)
    )


# -- decision rules -------------------------------------------------------------

def threshold_decision(votes: Sequence[int], quorum, n: int) -> bool:
    """Favourable votes reach ``quorum * n``, compared exactly."""
    if len(votes) > n:
        raise TooManyVotes(f"{len(votes)} votes for {n} members")
    return sum(votes) >= as_fraction(quorum) * n


def majority_decision(total: int, yes: int, quorum, n: int) -> bool:
    """Participation reaches the quorum, then strictly more than half say yes."""
    return total >= math.ceil(as_fraction(quorum) * n) and 2 * yes > total


# -- proposals --------------------------------------------------------------------

class ProposalStatus(enum.Enum):
    OPEN = "Open"
    PASSED = "Passed"
    FAILED = "Failed"
    EXECUTED = "Executed"


class DecisionRule(enum.Enum):
    MAJORITY = "quorum_majority"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class Removal:
    target: bytes

    def encode(self) -> bytes:
        return b"removal:" + self.target


@dataclass(frozen=True)
class DisputeResolution:
    dispute_id: int
    outcome: str  # the outcome this proposal asks members to approve

    def encode(self) -> bytes:
        return b"dispute:" + u64(self.dispute_id) + lp(self.outcome.encode())


@dataclass(frozen=True)
class Generic:
    payload_digest: bytes

    @classmethod
    def of(cls, payload: bytes) -> "Generic":
        return cls(H(TAG_PAYLOAD, payload))

    def encode(self) -> bytes:
        return b"generic:" + self.payload_digest


ProposalKind = Union[Removal, DisputeResolution, Generic]


def kind_name(kind: ProposalKind) -> str:
    return type(kind).__name__


@dataclass
class Proposal:
    id: bytes
    kind: ProposalKind
    member_root: bytes
    quorum: Fraction
    voting_deadline: int
    member_count: int
    created_at: int
    initiator: Optional[bytes]
    rule: DecisionRule = DecisionRule.MAJORITY
    status: ProposalStatus = ProposalStatus.OPEN
    tally: Optional[tuple[int, int]] = None  # (total, yes), set at finalization


@dataclass
class VoteState:
    commitments: list[bytes] = field(default_factory=list)
    nullifiers: set[bytes] = field(default_factory=set)
    statements: list[VoteStatement] = field(default_factory=list)


def proposal_id(payload: bytes, now: int) -> bytes:
    return H(TAG_PROPOSAL, lp(payload), u64(now))


class Governance:
    def __init__(self, ledger: TokenLedger, escrow: IdentityEscrow | None = None, *,
                 allowed_quorums: Iterable = DEFAULT_QUORUMS,
                 log: EventLog | None = None) -> None:
        self.ledger = ledger
        self.escrow = escrow if escrow is not None else IdentityEscrow()
        self.allowed_quorums = frozenset(as_fraction(q) for q in allowed_quorums)
        self.log = log if log is not None else ledger.log
        self.proposals: dict[bytes, Proposal] = {}
        self.votes: dict[bytes, VoteState] = {}
        self.trees: dict[bytes, MemberTree] = {}
        self.disclosures: list[tuple[bytes, bytes]] = []

    def current_tree(self) -> MemberTree:
        return build_member_tree(self.ledger.members())

    def proposal(self, pid: bytes) -> Proposal:
        try:
            return self.proposals[pid]
        except KeyError:
            raise UnknownProposal(pid.hex()) from None

    def initiate_proposal(self, kind: ProposalKind, quorum, period: int, now: int, *,
                          initiator: bytes | None = None, tree: MemberTree | None = None,
                          rule: DecisionRule = DecisionRule.MAJORITY) -> Proposal:
        """Open a proposal. ``initiator=None`` marks a system-raised proposal
        (dispute escalation, access revocation)."""
        if initiator is not None and not self.ledger.is_member(initiator):
            raise NotMember(message="only members may initiate proposals")
        q = as_fraction(quorum)
        if not 0 < q <= 1 or (self.allowed_quorums and q not in self.allowed_quorums):
            raise BadQuorum(f"quorum {q} not allowed")
        if period <= 0:
            raise ZeroPeriod("voting period must be positive")
        if isinstance(kind, Removal) and not self.ledger.is_member(kind.target):
            raise NotMember(message="removal target is not a member")
        tree = tree if tree is not None else self.current_tree()
        pid = proposal_id(kind.encode(), now)
        if pid in self.proposals:
            raise DuplicateProposal("identical proposal already opened at this time")
        p = Proposal(pid, kind, tree.root, q, now + period, len(tree), now, initiator, rule)
        self.proposals[pid] = p
        self.votes[pid] = VoteState()
        self.trees[pid] = tree
        self.log.emit("governance", "proposal.created", proposal_id=pid, kind=kind_name(kind),
                      root=p.member_root, quorum=q, deadline=p.voting_deadline,
                      n=p.member_count, rule=rule, status=p.status)
        return p

    def cast_vote(self, pid: bytes, vote: int, membership_proof: MembershipProof,
                  nullifier: bytes, randomness: bytes, now: int, *,
                  secret_key: bytes) -> VoteState:
        p = self.proposal(pid)
        if p.status is not ProposalStatus.OPEN or now >= p.voting_deadline:
            raise VotingClosed("voting period is over")
        if vote not in (0, 1):
            raise MalformedVote(f"vote must be 0 or 1, got {vote!r}")
        if not verify_membership(p.member_root, membership_proof.leaf, membership_proof):
            raise InvalidMembershipProof("proof does not open to the proposal's member root")
        state = self.votes[pid]
        if nullifier in state.nullifiers:
            raise DoubleVote("nullifier already used for this proposal")
        c = vote_commitment(vote, randomness)
        statement = VoteStatement(pid, p.member_root, c, nullifier)
        zkp = prove_vote(statement, vote=vote, randomness=randomness,
                         secret_key=secret_key, membership=membership_proof)
        if not verify_vote_proof(zkp):
            raise InvalidVoteProof("ballot proof does not verify")
        state.nullifiers.add(nullifier)
        state.commitments.append(c)
        state.statements.append(statement)
        self.log.emit("governance", "vote.cast", proposal_id=pid, nullifier=nullifier,
                      commitment=c)
        return state

    def finalize(self, pid: bytes, openings: Iterable[tuple[int, bytes]], now: int) -> Proposal:
        p = self.proposal(pid)
        if now < p.voting_deadline:
            raise VotingStillOpen("deadline not reached")
        if p.status is not ProposalStatus.OPEN:
            raise VotingClosed("proposal already finalized")
        openings = list(openings)
        for vote, _ in openings:
            if vote not in (0, 1):
                raise OpeningMismatch("opening carries a non-binary vote")
        opened = Counter(vote_commitment(v, r) for v, r in openings)
        if opened != Counter(self.votes[pid].commitments):
            raise OpeningMismatch("openings do not match the recorded commitments")
        total = len(openings)
        yes = sum(v for v, _ in openings)
        if p.rule is DecisionRule.THRESHOLD:
            passed = threshold_decision([v for v, _ in openings], p.quorum, p.member_count)
        else:
            passed = majority_decision(total, yes, p.quorum, p.member_count)
        p.tally = (total, yes)
        p.status = ProposalStatus.PASSED if passed else ProposalStatus.FAILED
        self.log.emit("governance", "proposal.finalized", proposal_id=pid,
                      kind=kind_name(p.kind), tally_total=total, tally_yes=yes, status=p.status)
        return p

    def mark_executed(self, pid: bytes) -> Proposal:
        p = self.proposal(pid)
        if p.status is ProposalStatus.EXECUTED:
            raise AlreadyExecuted("proposal already executed")
        if p.status is not ProposalStatus.PASSED:
            raise NotPassed(f"proposal is {p.status.value}")
        p.status = ProposalStatus.EXECUTED
        self.log.emit("governance", "proposal.executed", proposal_id=pid,
                      kind=kind_name(p.kind), status=p.status)
        return p

    def execute_removal(self, pid: bytes, now: int) -> Proposal:
        p = self.proposal(pid)
        if not isinstance(p.kind, Removal):
            raise WrongKind("not a removal proposal")
        if p.status is ProposalStatus.EXECUTED:
            raise AlreadyExecuted("proposal already executed")
        if p.status is not ProposalStatus.PASSED:
            raise NotPassed(f"proposal is {p.status.value}")
        token = self.ledger.token_of(p.kind.target)
        self.ledger.burn_auth(token.token_id, now)
        return self.mark_executed(pid)

    def removal_executed_against(self, target: bytes) -> bool:
        return any(isinstance(p.kind, Removal) and p.kind.target == target
                   and p.status is ProposalStatus.EXECUTED
                   for p in self.proposals.values())

    def force_disclose(self, target: bytes, now: int) -> bytes:
        """Open the target's escrowed identity commitment.

        Only an executed removal against ``target`` authorizes this. The
        escrowed opening must verify against the commitment recorded on the
        target's auth token.
        """
        if not self.removal_executed_against(target):
            raise NoAuthorizingProposal("no executed removal against target")
        token = self.ledger.last_token_of(target)
        if token is None:
            raise CommitmentMismatch("target never held an auth token")
        record = self.escrow.opening(token.identity_commitment)
        if not open_commitment(token.identity_commitment,
                                                record.identity, record.nonce):
            raise CommitmentMismatch("escrowed opening does not match the on-record commitment")
        self.disclosures.append((target, record.identity))
        self.log.emit("governance", "identity.disclosed", target=target,
                      commitment=token.identity_commitment, identity=record.identity)
        return record.identity
