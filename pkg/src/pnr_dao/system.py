"""One DAO instance: every ledger and state machine wired to a shared log."""

from __future__ import annotations

import os
from typing import Callable, Iterable

from .bridge import Bridge, BridgeAuthority
from .deals import DealBook
from .events import EventLog
from .governance import DEFAULT_QUORUMS, Governance, Proposal, derive_nullifier
from .governance import prove_membership
from .identity import DkycPolicy, IdentityEscrow, IdentityRecord, KeyPair, dkyc_verify
from .ledger import AuthToken, TokenLedger
from .reputation import ReputationLedger


class Dao:
    def __init__(self, policy: DkycPolicy, bridge_seed: bytes, *,
                 allowed_quorums: Iterable = DEFAULT_QUORUMS,
                 mediation_window: int = 10, dispute_quorum="1/2", dispute_period: int = 20,
                 entropy: Callable[[], bytes] | None = None,
                 log: EventLog | None = None) -> None:
        self.log = log if log is not None else EventLog()
        self.policy = policy
        self.escrow = IdentityEscrow()
        self.ledger = TokenLedger(self.log, entropy or (lambda: os.urandom(32)))
        self.reputation = ReputationLedger(self.log)
        self.governance = Governance(self.ledger, self.escrow,
                                     allowed_quorums=allowed_quorums, log=self.log)
        self.bridge = Bridge(BridgeAuthority(bridge_seed), self.log)
        self.deals = DealBook(self.ledger, self.reputation, self.governance,
                              self.bridge.execution, mediation_window=mediation_window,
                              dispute_quorum=dispute_quorum, dispute_period=dispute_period,
                              log=self.log)

    def onboard(self, identity: bytes, keys: KeyPair, now: int) -> AuthToken:
        """Commit to the identity, run the KYC gate, mint the auth token and
        hand the commitment opening to the escrow."""
        record = IdentityRecord.create(identity, self.policy.issue_nonce(identity))
        ok = dkyc_verify(identity, self.policy)
        token = self.ledger.mint_auth(keys.public_key, record.commitment, ok, now,
                                      box_key=keys.box_public_key)
        self.reputation.register(keys.public_key, now)
        self.escrow.deposit(record)
        return token

    def vote(self, keys: KeyPair, pid: bytes, vote: int, randomness: bytes, now: int):
        """Voter-side ballot construction followed by submission."""
        tree = self.governance.trees[self.governance.proposal(pid).id]
        proof = prove_membership(tree, keys.public_key)
        nullifier = derive_nullifier(keys.secret_key, pid)
        return self.governance.cast_vote(pid, vote, proof, nullifier, randomness, now,
                                         secret_key=keys.secret_key)

    def proposal(self, pid: bytes) -> Proposal:
        return self.governance.proposal(pid)

    def supply(self, asset: str) -> int:
        """Balances on both chains + in-flight bridge locks + deal escrow."""
        escrow = sum(d.escrow_balance for d in self.deals.deals.values()
                     if d.payment_type == asset)
        return self.bridge.supply(asset) + escrow
