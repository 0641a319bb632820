"""Private service deals with escrow, collateral and four-stage disputes.

Deal lifecycle::

    Created -> Funded -> ProviderCompleted -> Confirmed
                  |              |
                  +--> Disputed <+--> Resolved

Dispute stages: Initiated -> Mediation -> (settlement | Voting) -> Enforced.

Funding moves ``amount + collateral`` from the buyer's balance on the
execution chain into the deal's escrow. Every terminal path empties the
escrow back onto party balances, so payment assets are never created or
destroyed here.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .bridge import ChainState
from .errors import (
    DeadlinePassed,
    DuplicateDispute,
    InsufficientFunds,
    NotMember,
    NotParty,
    NotYetExpired,
    PastDeadline,
    SelfDeal,
    TypeRestricted,
    UnknownDeal,
    UnknownDispute,
    VoteNotFinal,
    WrongCaller,
    WrongStage,
    WrongState,
    WrongType,
    ZeroAmount,
)
from .events import EventLog
from .governance import DisputeResolution, Governance, ProposalStatus, Removal
from .hashing import u64
from .ledger import TokenLedger, TokenType
from .reputation import BUYER_REWARD, PROVIDER_REWARD, ReputationLedger


def required_collateral(token_type, amount: int) -> int:
    token_type = TokenType.parse(token_type)
    if amount < 0:
        raise ValueError("amount must be non-negative")
    if token_type is TokenType.T1:
        return 0
    if token_type is TokenType.T2:
        return amount // 10
    raise WrongType(f"{token_type.name} is not a deal type")


class DealStatus(enum.Enum):
    CREATED = "Created"
    FUNDED = "Funded"
    PROVIDER_COMPLETED = "ProviderCompleted"
    CONFIRMED = "Confirmed"
    DISPUTED = "Disputed"
    RESOLVED = "Resolved"


TERMINAL = frozenset({DealStatus.CONFIRMED, DealStatus.RESOLVED})

TRANSITIONS = {
    DealStatus.CREATED: {DealStatus.FUNDED},
    DealStatus.FUNDED: {DealStatus.PROVIDER_COMPLETED, DealStatus.DISPUTED},
    DealStatus.PROVIDER_COMPLETED: {DealStatus.CONFIRMED, DealStatus.DISPUTED},
    DealStatus.DISPUTED: {DealStatus.RESOLVED},
    DealStatus.CONFIRMED: set(),
    DealStatus.RESOLVED: set(),
}


class DisputeStage(enum.Enum):
    INITIATED = "Initiated"
    MEDIATION = "Mediation"
    VOTING = "Voting"
    ENFORCED = "Enforced"


class Outcome(enum.Enum):
    REFUND_BUYER = "RefundBuyer"
    PAY_PROVIDER = "PayProvider"
    SPLIT_ESCROW = "SplitEscrow"
    REVOKE_ACCESS = "RevokeAccess"

    @classmethod
    def parse(cls, value) -> "Outcome":
        if isinstance(value, Outcome):
            return value
        return cls(value)


@dataclass
class Deal:
    deal_id: int
    buyer: bytes
    provider: bytes
    token_type: TokenType
    amount: int
    deadline: int
    collateral: int
    payment_type: str
    created_at: int
    escrow_balance: int = 0
    status: DealStatus = DealStatus.CREATED


@dataclass
class Dispute:
    dispute_id: int
    deal_id: int
    complainant: bytes
    respondent: bytes
    evidence: bytes
    requested: Outcome
    penalties: dict[bytes, int] = field(default_factory=dict)  # reputation actually deducted
    stage: DisputeStage = DisputeStage.INITIATED
    mediation_deadline: Optional[int] = None
    settlement: Optional[Outcome] = None
    proposal_id: Optional[bytes] = None
    outcome: Optional[Outcome] = None
    revocation_proposal: Optional[bytes] = None


class DealBook:
    def __init__(self, ledger: TokenLedger, reputation: ReputationLedger,
                 governance: Governance, chain: ChainState, *,
                 mediation_window: int = 10, dispute_quorum="1/2", dispute_period: int = 20,
                 log: EventLog | None = None) -> None:
        self.ledger = ledger
        self.reputation = reputation
        self.governance = governance
        self.chain = chain
        self.mediation_window = mediation_window
        self.dispute_quorum = dispute_quorum
        self.dispute_period = dispute_period
        self.log = log if log is not None else ledger.log
        self.deals: dict[int, Deal] = {}
        self.disputes: dict[int, Dispute] = {}
        self._open_dispute: dict[int, int] = {}

    # -- helpers ------------------------------------------------------------

    def deal(self, deal_id: int) -> Deal:
        try:
            return self.deals[deal_id]
        except KeyError:
            raise UnknownDeal(str(deal_id)) from None

    def dispute(self, dispute_id: int) -> Dispute:
        try:
            return self.disputes[dispute_id]
        except KeyError:
            raise UnknownDispute(str(dispute_id)) from None

    def escrow_total(self) -> int:
        return sum(d.escrow_balance for d in self.deals.values())

    def _move(self, deal: Deal, new: DealStatus) -> None:
        if new not in TRANSITIONS[deal.status]:
            raise WrongState(f"{deal.status.value} -> {new.value} not allowed")
        deal.status = new

    def _emit(self, kind: str, deal: Deal, now: int, **extra) -> None:
        self.log.emit("deals", kind, deal_id=deal.deal_id, status=deal.status,
                      amount=deal.amount, collateral=deal.collateral,
                      token_type=deal.token_type, escrow_balance=deal.escrow_balance,
                      timestamp=now, **extra)

    def _record_grant(self, owner: bytes, token_type: TokenType, metadata: bytes) -> None:
        # Parties removed or frozen in the meantime simply get no record.
        if self.ledger.is_member(owner) and not self.ledger.is_restricted(owner, token_type):
            self.ledger.mint_priv(owner, token_type, 1, metadata)

    def _payout(self, deal: Deal, to_buyer: int, to_provider: int) -> None:
        assert to_buyer + to_provider == deal.escrow_balance
        self.chain.credit(deal.buyer, deal.payment_type, to_buyer)
        self.chain.credit(deal.provider, deal.payment_type, to_provider)
        deal.escrow_balance = 0

    # -- lifecycle -----------------------------------------------------------

    def create_private_deal(self, buyer: bytes, provider: bytes, token_type, amount: int,
                            deadline: int, payment_type: str, now: int) -> Deal:
        token_type = TokenType.parse(token_type)
        if token_type not in (TokenType.T1, TokenType.T2):
            raise WrongType("deals use T1 or T2")
        if buyer == provider:
            raise SelfDeal("buyer and provider must differ")
        for party in (buyer, provider):
            if not self.ledger.is_member(party):
                raise NotMember(message="both parties must be members")
        for party in (buyer, provider):
            if self.ledger.is_restricted(party, token_type):
                raise TypeRestricted(message=f"party restricted from {token_type.name}")
        if amount <= 0:
            raise ZeroAmount("deal amount must be positive")
        if deadline <= now:
            raise PastDeadline("deadline must lie in the future")
        deal = Deal(len(self.deals) + 1, buyer, provider, token_type, amount, deadline,
                    required_collateral(token_type, amount), payment_type, now)
        self.deals[deal.deal_id] = deal
        terms = b"deal:" + u64(deal.deal_id) + u64(amount) + u64(deadline) + payment_type.encode()
        for party in (buyer, provider):
            self.ledger.mint_priv(party, token_type, 1, terms)
        self._emit("deal.created", deal, now)
        return deal

    def fund(self, deal_id: int, caller: bytes, now: int) -> Deal:
        deal = self.deal(deal_id)
        if deal.status is not DealStatus.CREATED:
            raise WrongState(f"deal is {deal.status.value}")
        if caller != deal.buyer:
            raise WrongCaller("only the buyer funds a deal")
        if now >= deal.deadline:
            raise DeadlinePassed("deal deadline has passed")
        total = deal.amount + deal.collateral
        if self.chain.balance(caller, deal.payment_type) < total:
            raise InsufficientFunds(f"need {total}")
        self.chain.debit(caller, deal.payment_type, total)
        deal.escrow_balance = total
        self._move(deal, DealStatus.FUNDED)
        self._emit("deal.funded", deal, now)
        return deal

    def mark_complete(self, deal_id: int, caller: bytes, now: int) -> Deal:
        deal = self.deal(deal_id)
        if deal.status is not DealStatus.FUNDED:
            raise WrongState(f"deal is {deal.status.value}")
        if caller != deal.provider:
            raise WrongCaller("only the provider marks completion")
        if now > deal.deadline:
            raise DeadlinePassed("completion after deadline")
        self._move(deal, DealStatus.PROVIDER_COMPLETED)
        self._emit("deal.completed", deal, now)
        return deal

    def confirm(self, deal_id: int, caller: bytes, now: int) -> Deal:
        deal = self.deal(deal_id)
        if deal.status is not DealStatus.PROVIDER_COMPLETED:
            raise WrongState(f"deal is {deal.status.value}")
        if caller != deal.buyer:
            raise WrongCaller("only the buyer confirms")
        self._payout(deal, deal.collateral, deal.amount)
        self._move(deal, DealStatus.CONFIRMED)
        self.reputation.batch_update([deal.provider, deal.buyer],
                                     [PROVIDER_REWARD, BUYER_REWARD],
                                     reason="deal.confirmed", now=now)
        record = b"completed:" + u64(deal.deal_id)
        for party in (deal.buyer, deal.provider):
            self._record_grant(party, TokenType.T4, record)
        self._emit("deal.confirmed", deal, now)
        return deal

    # -- disputes ---------------------------------------------------------------

    def initiate_dispute(self, deal_id: int, complainant: bytes, evidence: bytes, now: int,
                         requested=None) -> Dispute:
        deal = self.deal(deal_id)
        if complainant not in (deal.buyer, deal.provider):
            raise NotParty("only deal parties can open a dispute")
        if deal_id in self._open_dispute:
            raise DuplicateDispute("deal already has an open dispute")
        if deal.status not in (DealStatus.FUNDED, DealStatus.PROVIDER_COMPLETED):
            raise WrongState(f"deal is {deal.status.value}")
        respondent = deal.provider if complainant == deal.buyer else deal.buyer
        if requested is None:
            requested = Outcome.REFUND_BUYER if complainant == deal.buyer else Outcome.PAY_PROVIDER
        d = Dispute(len(self.disputes) + 1, deal_id, complainant, respondent, evidence,
                    Outcome.parse(requested))
        parties = [deal.buyer, deal.provider]
        known = [p for p in parties if p in self.reputation]
        applied = self.reputation.batch_update(known, [-2] * len(known),
                                               reason="dispute.penalty", now=now)
        d.penalties = {p: -a for p, a in zip(known, applied)}
        self._move(deal, DealStatus.DISPUTED)
        self.disputes[d.dispute_id] = d
        self._open_dispute[deal_id] = d.dispute_id
        record = b"dispute:" + u64(d.dispute_id) + u64(deal_id)
        for party in parties:
            self._record_grant(party, TokenType.T3, record)
        self._emit("dispute.initiated", deal, now, dispute_id=d.dispute_id,
                   complainant=complainant, requested=d.requested, stage=d.stage)
        return d

    def advance_to_mediation(self, dispute_id: int, now: int) -> Dispute:
        d = self.dispute(dispute_id)
        if d.stage is not DisputeStage.INITIATED:
            raise WrongStage(f"dispute is {d.stage.value}")
        d.stage = DisputeStage.MEDIATION
        d.mediation_deadline = now + self.mediation_window
        self._emit("dispute.mediation", self.deal(d.deal_id), now, dispute_id=dispute_id,
                   stage=d.stage, mediation_deadline=d.mediation_deadline)
        return d

    def record_settlement(self, dispute_id: int, outcome, now: int) -> Dispute:
        d = self.dispute(dispute_id)
        if d.stage is not DisputeStage.MEDIATION or d.settlement is not None:
            raise WrongStage(f"dispute is {d.stage.value}")
        if now >= d.mediation_deadline:
            raise DeadlinePassed("mediation window closed")
        d.settlement = Outcome.parse(outcome)
        self._emit("dispute.settled", self.deal(d.deal_id), now, dispute_id=dispute_id,
                   stage=d.stage, outcome=d.settlement)
        return d

    def mediation_timeout(self, dispute_id: int, now: int) -> Dispute:
        d = self.dispute(dispute_id)
        if d.stage is not DisputeStage.MEDIATION or d.settlement is not None:
            raise WrongStage(f"dispute is {d.stage.value}")
        if now < d.mediation_deadline:
            raise NotYetExpired("mediation window still open")
        p = self.governance.initiate_proposal(
            DisputeResolution(d.dispute_id, d.requested.value),
            self.dispute_quorum, self.dispute_period, now)
        d.proposal_id = p.id
        d.stage = DisputeStage.VOTING
        self._emit("dispute.voting", self.deal(d.deal_id), now, dispute_id=dispute_id,
                   stage=d.stage, proposal_id=p.id)
        return d

    def _fallback(self, d: Dispute) -> Outcome:
        deal = self.deal(d.deal_id)
        # a rejected request resolves in the respondent's favour
        return Outcome.PAY_PROVIDER if d.respondent == deal.provider else Outcome.REFUND_BUYER

    def enforce(self, dispute_id: int, now: int) -> Dispute:
        d = self.dispute(dispute_id)
        deal = self.deal(d.deal_id)
        if d.stage is DisputeStage.MEDIATION and d.settlement is not None:
            outcome = d.settlement
        elif d.stage is DisputeStage.VOTING:
            p = self.governance.proposal(d.proposal_id)
            if p.status is ProposalStatus.OPEN:
                raise VoteNotFinal("dispute vote not finalized")
            if p.status is ProposalStatus.PASSED:
                outcome = d.requested
                self.governance.mark_executed(p.id)
            else:
                outcome = self._fallback(d)
        else:
            raise WrongStage(f"dispute is {d.stage.value}")

        s, c = deal.amount, deal.collateral
        if outcome is Outcome.REFUND_BUYER:
            self._payout(deal, s + c, 0)
            winner = deal.buyer
        elif outcome is Outcome.PAY_PROVIDER:
            self._payout(deal, c, s)
            winner = deal.provider
        elif outcome is Outcome.SPLIT_ESCROW:
            self._payout(deal, s // 2 + c, s - s // 2)
            winner = None
        else:
            offender = d.respondent
            winner = d.complainant
            if offender == deal.buyer:
                self._payout(deal, s, c)  # collateral forfeited to the provider
            else:
                self._payout(deal, s + c, 0)
            if self.ledger.is_member(offender):
                rp = self.governance.initiate_proposal(Removal(offender), self.dispute_quorum,
                                                       self.dispute_period, now)
                d.revocation_proposal = rp.id

        if winner is not None and d.penalties.get(winner):
            self.reputation.batch_update([winner], [d.penalties[winner]],
                                         reason="dispute.penalty_lifted", now=now)
        d.outcome = outcome
        d.stage = DisputeStage.ENFORCED
        del self._open_dispute[deal.deal_id]
        self._move(deal, DealStatus.RESOLVED)
        self._emit("dispute.enforced", deal, now, dispute_id=dispute_id, stage=d.stage,
                   outcome=outcome)
        return d
