"""Dual token ledger: soulbound membership tokens and typed interaction tokens.

Membership (auth) tokens are unique per owner and per identity commitment
and can never move. Burning one blacklists its commitment for good.

Interaction balances come in five categories::

    T1  service deal          transferable
    T2  high-risk deal        transferable, collateralised
    T3  dispute record        soulbound
    T4  completion record     soulbound
    T5  reputation token      soulbound

Any (owner, type) pair can be restricted, which bars minting, receiving and
spending that type while leaving the others usable. A burned member keeps
their balances, frozen under a restriction on every type.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

from .errors import (
    AlreadyBurned,
    BannedIdentity,
    DkycFailed,
    DuplicateIdentity,
    DuplicateOwner,
    NoEncryptionKey,
    NotMember,
    SoulboundViolation,
    TypeRestricted,
    UnknownToken,
    WouldGoNegative,
    ZeroQuantity,
)
from .events import EventLog
from .identity import encrypt_to


class TokenType(enum.IntEnum):
    T1 = 1
    T2 = 2
    T3 = 3
    T4 = 4
    T5 = 5

    @property
    def soulbound(self) -> bool:
        return self in SOULBOUND_TYPES

    @classmethod
    def parse(cls, value) -> "TokenType":
        if isinstance(value, TokenType):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(value)


SOULBOUND_TYPES = frozenset({TokenType.T3, TokenType.T4, TokenType.T5})


@dataclass
class AuthToken:
    token_id: int
    owner: bytes
    identity_commitment: bytes
    minted_at: int
    burned: bool = False
    burned_at: Optional[int] = None


@dataclass(frozen=True)
class Grant:
    grant_id: int
    owner: bytes
    token_type: TokenType
    quantity: int
    metadata: bytes  # sealed to the owner, never plaintext


class TokenLedger:
    def __init__(self, log: EventLog | None = None,
                 entropy: Callable[[], bytes] | None = None) -> None:
        self.log = log if log is not None else EventLog()
        self._entropy = entropy or (lambda: os.urandom(32))
        self._tokens: dict[int, AuthToken] = {}
        self._active_by_owner: dict[bytes, int] = {}
        self._active_by_commitment: dict[bytes, int] = {}
        self._banned: set[bytes] = set()
        self._box_keys: dict[bytes, bytes] = {}
        self._balances: dict[tuple[bytes, TokenType], int] = {}
        self._restricted: set[tuple[bytes, TokenType]] = set()
        self._grants: dict[int, Grant] = {}

    # -- membership -------------------------------------------------------

    def is_member(self, owner: bytes) -> bool:
        return owner in self._active_by_owner

    def members(self) -> list[bytes]:
        return sorted(self._active_by_owner)

    @property
    def member_count(self) -> int:
        return len(self._active_by_owner)

    def token(self, token_id: int) -> AuthToken:
        try:
            return self._tokens[token_id]
        except KeyError:
            raise UnknownToken(f"no auth token {token_id}") from None

    def token_of(self, owner: bytes) -> AuthToken:
        """The owner's unburned token."""
        tid = self._active_by_owner.get(owner)
        if tid is None:
            raise NotMember(message="owner holds no unburned auth token")
        return self._tokens[tid]

    def last_token_of(self, owner: bytes) -> AuthToken | None:
        """Most recent token ever minted to ``owner``, burned or not."""
        found = [t for t in self._tokens.values() if t.owner == owner]
        return max(found, key=lambda t: t.token_id) if found else None

    def tokens(self) -> list[AuthToken]:
        return [self._tokens[k] for k in sorted(self._tokens)]

    def is_banned(self, commitment: bytes) -> bool:
        return commitment in self._banned

    def mint_auth(self, owner: bytes, identity_commitment: bytes, dkyc_ok: bool,
                  now: int, *, box_key: bytes | None = None) -> AuthToken:
        if not dkyc_ok:
            raise DkycFailed("identity not verified")
        if identity_commitment in self._banned:
            raise BannedIdentity("identity was removed from the DAO")
        if identity_commitment in self._active_by_commitment:
            raise DuplicateIdentity("identity already holds an auth token")
        if owner in self._active_by_owner:
            raise DuplicateOwner("owner already holds an auth token")
        tok = AuthToken(len(self._tokens) + 1, owner, identity_commitment, now)
        self._tokens[tok.token_id] = tok
        self._active_by_owner[owner] = tok.token_id
        self._active_by_commitment[identity_commitment] = tok.token_id
        if box_key is not None:
            self._box_keys[owner] = box_key
        self.log.emit("token_ledger", "auth.minted", token_id=tok.token_id, owner=owner,
                      commitment=identity_commitment, members=self.member_count)
        return tok

    def transfer_auth(self, token_id: int, sender: bytes, recipient: bytes):
        # Checked before existence on purpose: the answer never depends on state.
        raise SoulboundViolation(message="auth tokens are non-transferable")

    def burn_auth(self, token_id: int, now: int) -> AuthToken:
        tok = self.token(token_id)
        if tok.burned:
            raise AlreadyBurned(f"auth token {token_id} already burned")
        tok.burned = True
        tok.burned_at = now
        del self._active_by_owner[tok.owner]
        del self._active_by_commitment[tok.identity_commitment]
        self._banned.add(tok.identity_commitment)
        for t in TokenType:
            self._restricted.add((tok.owner, t))
        self.log.emit("token_ledger", "auth.burned", token_id=token_id, owner=tok.owner,
                      commitment=tok.identity_commitment, members=self.member_count)
        return tok

    # -- interaction tokens -----------------------------------------------

    def balance(self, owner: bytes, token_type: TokenType) -> int:
        return self._balances.get((owner, TokenType.parse(token_type)), 0)

    def is_restricted(self, owner: bytes, token_type: TokenType) -> bool:
        return (owner, TokenType.parse(token_type)) in self._restricted

    def grant(self, grant_id: int) -> Grant:
        return self._grants[grant_id]

    def grants(self) -> list[Grant]:
        return [self._grants[k] for k in sorted(self._grants)]

    def _require_member(self, owner: bytes, index: int | None = None) -> None:
        if owner not in self._active_by_owner:
            raise NotMember(index, "not a DAO member")

    def _require_open(self, owner: bytes, token_type: TokenType, index: int | None = None) -> None:
        if (owner, token_type) in self._restricted:
            raise TypeRestricted(index, f"{token_type.name} restricted for owner")

    def mint_priv(self, owner: bytes, token_type, quantity: int, metadata: bytes = b"") -> int:
        token_type = TokenType.parse(token_type)
        self._require_member(owner)
        self._require_open(owner, token_type)
        if quantity < 1:
            raise ZeroQuantity("quantity must be at least 1")
        sealed = b""
        if metadata:
            box = self._box_keys.get(owner)
            if box is None:
                raise NoEncryptionKey("owner registered no box key; cannot seal metadata")
            sealed = encrypt_to(box, metadata, self._entropy())
        g = Grant(len(self._grants) + 1, owner, token_type, quantity, sealed)
        self._grants[g.grant_id] = g
        key = (owner, token_type)
        self._balances[key] = self._balances.get(key, 0) + quantity
        self.log.emit("token_ledger", "priv.minted", grant_id=g.grant_id, owner=owner,
                      token_type=token_type, quantity=quantity)
        return g.grant_id

    def transfer_priv(self, sender: bytes, recipient: bytes, token_type, quantity: int) -> None:
        """Sender-initiated move of a transferable (T1/T2) balance."""
        token_type = TokenType.parse(token_type)
        if token_type.soulbound:
            raise SoulboundViolation(message=f"{token_type.name} is soulbound")
        self._require_member(sender)
        self._require_member(recipient)
        self._require_open(sender, token_type)
        self._require_open(recipient, token_type)
        if quantity < 1:
            raise ZeroQuantity("quantity must be at least 1")
        if self.balance(sender, token_type) < quantity:
            raise WouldGoNegative(message="insufficient balance")
        self._balances[(sender, token_type)] -= quantity
        self._balances[(recipient, token_type)] = self.balance(recipient, token_type) + quantity
        self.log.emit("token_ledger", "priv.transferred", sender=sender, recipient=recipient,
                      token_type=token_type, quantity=quantity)

    def batch_update_priv(self, entries: Iterable[tuple[bytes, object, int]]) -> None:
        """Apply signed deltas atomically; on any error nothing changes.

        Negative deltas on soulbound types are refused: records of disputes
        and completions only accumulate.
        """
        staged: dict[tuple[bytes, TokenType], int] = {}
        parsed = []
        for i, (owner, token_type, delta) in enumerate(entries):
            token_type = TokenType.parse(token_type)
            key = (owner, token_type)
            self._require_member(owner, i)
            self._require_open(owner, token_type, i)
            new = staged.get(key, self._balances.get(key, 0)) + delta
            if new < 0:
                raise WouldGoNegative(i)
            if delta < 0 and token_type.soulbound:
                raise SoulboundViolation(i, f"cannot debit soulbound {token_type.name}")
            staged[key] = new
            parsed.append((owner, token_type, delta))
        if not parsed:
            return
        self._balances.update(staged)
        self.log.emit("token_ledger", "priv.batch", entries=[list(e) for e in parsed])

    def restrict_type(self, owner: bytes, token_type) -> None:
        token_type = TokenType.parse(token_type)
        self._require_member(owner)
        self._restricted.add((owner, token_type))
        self.log.emit("token_ledger", "priv.restricted", owner=owner, token_type=token_type)

    def lift_restriction(self, owner: bytes, token_type) -> None:
        token_type = TokenType.parse(token_type)
        self._require_member(owner)
        self._restricted.discard((owner, token_type))
        self.log.emit("token_ledger", "priv.lifted", owner=owner, token_type=token_type)

    # -- snapshots ----------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "auth_tokens": [
                {"token_id": t.token_id, "owner": t.owner.hex(),
                 "identity_commitment": t.identity_commitment.hex(),
                 "minted_at": t.minted_at, "burned": t.burned, "burned_at": t.burned_at}
                for t in self.tokens()
            ],
            "banned": sorted(c.hex() for c in self._banned),
            "box_keys": {k.hex(): v.hex() for k, v in sorted(self._box_keys.items())},
            "balances": [[o.hex(), t.name, q] for (o, t), q in sorted(self._balances.items())],
            "restrictions": [[o.hex(), t.name] for o, t in sorted(self._restricted)],
            "grants": [
                {"grant_id": g.grant_id, "owner": g.owner.hex(), "token_type": g.token_type.name,
                 "quantity": g.quantity, "metadata": g.metadata.hex()}
                for g in self.grants()
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.snapshot(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str, log: EventLog | None = None) -> "TokenLedger":
        doc = json.loads(text)
        led = cls(log)
        for t in doc["auth_tokens"]:
            tok = AuthToken(t["token_id"], bytes.fromhex(t["owner"]),
                            bytes.fromhex(t["identity_commitment"]), t["minted_at"],
                            t["burned"], t["burned_at"])
            led._tokens[tok.token_id] = tok
            if not tok.burned:
                led._active_by_owner[tok.owner] = tok.token_id
                led._active_by_commitment[tok.identity_commitment] = tok.token_id
        led._banned = {bytes.fromhex(c) for c in doc["banned"]}
        led._box_keys = {bytes.fromhex(k): bytes.fromhex(v) for k, v in doc["box_keys"].items()}
        led._balances = {(bytes.fromhex(o), TokenType[t]): q for o, t, q in doc["balances"]}
        led._restricted = {(bytes.fromhex(o), TokenType[t]) for o, t in doc["restrictions"]}
        for g in doc["grants"]:
            grant = Grant(g["grant_id"], bytes.fromhex(g["owner"]), TokenType[g["token_type"]],
                          g["quantity"], bytes.fromhex(g["metadata"]))
            led._grants[grant.grant_id] = grant
        return led
