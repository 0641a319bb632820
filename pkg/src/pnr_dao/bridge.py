"""Two simulated chains joined by a lock-and-mint bridge.

Outbound, the sender's amount leaves their balance into the source chain's
``locked`` registry and the bridge authority signs a transfer proof. The
target chain mints to the recipient once per proof. The return direction is
the same protocol with the chains swapped: the execution side's ``locked``
registry then holds burned wrapped units and the settlement side releases.

Attestations are Ed25519 signatures by the bridge authority over every
proof field, including the source chain.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import (
    AlreadyRedeemed,
    DuplicateTransfer,
    InsufficientFunds,
    InvalidProof,
    ZeroAmount,
)
from .events import EventLog
from .hashing import TAG_ATTEST, TAG_TRANSFER, H, lp, u64


class ChainId(enum.Enum):
    SETTLEMENT = "settlement"
    EXECUTION = "execution"

    @property
    def other(self) -> "ChainId":
        return ChainId.EXECUTION if self is ChainId.SETTLEMENT else ChainId.SETTLEMENT


@dataclass
class ChainState:
    chain_id: ChainId
    balances: dict[tuple[bytes, str], int] = field(default_factory=dict)
    locked: dict[bytes, tuple[str, int]] = field(default_factory=dict)
    minted: dict[bytes, tuple[bytes, str, int]] = field(default_factory=dict)

    def balance(self, owner: bytes, asset: str) -> int:
        return self.balances.get((owner, asset), 0)

    def credit(self, owner: bytes, asset: str, amount: int) -> None:
        if amount < 0:
            raise ValueError("negative credit")
        self.balances[(owner, asset)] = self.balance(owner, asset) + amount

    def debit(self, owner: bytes, asset: str, amount: int) -> None:
        if amount < 0:
            raise ValueError("negative debit")
        if self.balance(owner, asset) < amount:
            raise InsufficientFunds(f"balance {self.balance(owner, asset)} < {amount}")
        self.balances[(owner, asset)] -= amount

    def total(self, asset: str) -> int:
        return sum(v for (_, a), v in self.balances.items() if a == asset)


@dataclass(frozen=True)
class TransferProof:
    transfer_id: bytes
    source: ChainId
    recipient: bytes
    asset: str
    amount: int
    attestation: bytes


def _attested_message(transfer_id: bytes, source: ChainId, recipient: bytes,
                      asset: str, amount: int) -> bytes:
    return H(TAG_ATTEST, transfer_id, lp(source.value.encode()), recipient,
             lp(asset.encode()), u64(amount))


class BridgeAuthority:
    def __init__(self, seed: bytes) -> None:
        self._key = Ed25519PrivateKey.from_private_bytes(seed)
        self.public_key = self._key.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    def attest(self, transfer_id: bytes, source: ChainId, recipient: bytes,
               asset: str, amount: int) -> TransferProof:
        sig = self._key.sign(_attested_message(transfer_id, source, recipient, asset, amount))
        return TransferProof(transfer_id, source, recipient, asset, amount, sig)


def verify_proof(authority_public_key: bytes, proof: TransferProof) -> bool:
    if not isinstance(proof.source, ChainId) or not isinstance(proof.amount, int) or proof.amount < 0:
        return False
    msg = _attested_message(proof.transfer_id, proof.source, proof.recipient,
                            proof.asset, proof.amount)
    try:
        Ed25519PublicKey.from_public_bytes(authority_public_key).verify(proof.attestation, msg)
    except (InvalidSignature, ValueError):
        return False
    return True


def transfer_id_for(asset: str, amount: int, now: int, sender: bytes) -> bytes:
    return H(TAG_TRANSFER, lp(asset.encode()), u64(amount), u64(now), sender)


def initiate_transfer(source: ChainState, authority: BridgeAuthority, sender: bytes,
                      asset: str, amount: int, recipient: bytes,
                      now: int) -> tuple[bytes, TransferProof]:
    if amount <= 0:
        raise ZeroAmount("transfer amount must be positive")
    tid = transfer_id_for(asset, amount, now, sender)
    if tid in source.locked:
        raise DuplicateTransfer("identical transfer already initiated this tick")
    source.debit(sender, asset, amount)
    source.locked[tid] = (asset, amount)
    return tid, authority.attest(tid, source.chain_id, recipient, asset, amount)


def complete_transfer(target: ChainState, authority_public_key: bytes,
                      transfer_id: bytes, proof: TransferProof) -> int:
    if (proof.transfer_id != transfer_id or proof.source is target.chain_id
            or not verify_proof(authority_public_key, proof)):
        raise InvalidProof("transfer proof failed verification")
    if transfer_id in target.minted:
        raise AlreadyRedeemed("transfer already redeemed on this chain")
    target.minted[transfer_id] = (proof.recipient, proof.asset, proof.amount)
    target.credit(proof.recipient, proof.asset, proof.amount)
    return proof.amount


class Bridge:
    """Both chains, the authority, and the event stream for transfers."""

    def __init__(self, authority: BridgeAuthority, log: EventLog | None = None) -> None:
        self.authority = authority
        self.log = log if log is not None else EventLog()
        self.chains = {c: ChainState(c) for c in ChainId}

    @property
    def settlement(self) -> ChainState:
        return self.chains[ChainId.SETTLEMENT]

    @property
    def execution(self) -> ChainState:
        return self.chains[ChainId.EXECUTION]

    def lock(self, source: ChainId, sender: bytes, asset: str, amount: int,
             recipient: bytes, now: int) -> tuple[bytes, TransferProof]:
        tid, proof = initiate_transfer(self.chains[source], self.authority, sender,
                                       asset, amount, recipient, now)
        self.log.emit("bridge", "transfer.locked", transfer_id=tid,
                      direction=f"{source.value}->{source.other.value}",
                      asset=asset, amount=amount, status="locked")
        return tid, proof

    def redeem(self, transfer_id: bytes, proof: TransferProof) -> int:
        target = self.chains[proof.source.other] if isinstance(proof.source, ChainId) \
            else self.execution
        amount = complete_transfer(target, self.authority.public_key, transfer_id, proof)
        self.log.emit("bridge", "transfer.minted", transfer_id=transfer_id,
                      direction=f"{proof.source.value}->{target.chain_id.value}",
                      asset=proof.asset, amount=amount, status="minted")
        return amount

    def in_flight(self, asset: str) -> int:
        """Locked on one chain, not yet minted on the other."""
        total = 0
        for cid, chain in self.chains.items():
            other = self.chains[cid.other]
            total += sum(a for tid, (s, a) in chain.locked.items()
                         if s == asset and tid not in other.minted)
        return total

    def unbacked_mints(self) -> list[bytes]:
        """Minted ids with no equal-amount lock on the opposite chain."""
        bad = []
        for cid, chain in self.chains.items():
            source = self.chains[cid.other]
            for tid, (_, asset, amount) in chain.minted.items():
                if source.locked.get(tid) != (asset, amount):
                    bad.append(tid)
        return bad

    def supply(self, asset: str) -> int:
        return sum(c.total(asset) for c in self.chains.values()) + self.in_flight(asset)
