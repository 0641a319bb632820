"""Keys, identity commitments, the DKYC gate and the identity escrow.

Commitments are hash based: ``H(tag || len(id) || id || nonce)``. The nonce
for a given identity is issued by the KYC verifier from its own secret, so
one real-world identity always maps to one commitment. That is what lets the
token ledger reject Sybil clones and banned identities coming back under a
fresh keypair, while the commitment stays hiding to everyone without the
verifier's key.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .errors import CommitmentMismatch, EmptyIdentity, PnRError
from .hashing import DIGEST_SIZE, TAG_BOX, TAG_COMMIT, TAG_NONCE, TAG_PK, TAG_SK, H, lp


@dataclass(frozen=True)
class KeyPair:
    secret_key: bytes = field(repr=False)
    public_key: bytes
    box_public_key: bytes  # X25519 key for sealed boxes, derived from secret_key

    @property
    def box_secret(self) -> X25519PrivateKey:
        return _box_private(self.secret_key)


def _box_private(secret_key: bytes) -> X25519PrivateKey:
    return X25519PrivateKey.from_private_bytes(H(TAG_BOX, secret_key))


def _raw(pub: X25519PublicKey) -> bytes:
    return pub.public_bytes(Encoding.Raw, PublicFormat.Raw)


def public_key_of(secret_key: bytes) -> bytes:
    return H(TAG_PK, secret_key)


def keygen(seed: bytes) -> KeyPair:
    """Deterministic key generation from a 32-byte seed."""
    if len(seed) != 32:
        raise ValueError("seed must be 32 bytes")
    sk = H(TAG_SK, seed)
    return KeyPair(sk, public_key_of(sk), _raw(_box_private(sk).public_key()))


def commit_identity(identity: bytes, nonce: bytes) -> bytes:
    if not identity:
        raise EmptyIdentity("identity payload must be non-empty")
    if len(nonce) != DIGEST_SIZE:
        raise ValueError("nonce must be 32 bytes")
    return H(TAG_COMMIT, lp(identity), nonce)


def open_commitment(commitment: bytes, identity: bytes, nonce: bytes) -> bool:
    try:
        return commit_identity(identity, nonce) == commitment
    except (EmptyIdentity, ValueError):
        return False


@dataclass(frozen=True)
class IdentityRecord:
    identity: bytes
    nonce: bytes
    commitment: bytes

    @classmethod
    def create(cls, identity: bytes, nonce: bytes) -> "IdentityRecord":
        return cls(identity, nonce, commit_identity(identity, nonce))

    def verifies(self) -> bool:
        return open_commitment(self.commitment, self.identity, self.nonce)


@dataclass
class DkycPolicy:
    """Table-driven stand-in for a decentralized KYC verifier."""

    table: dict[bytes, bool] = field(default_factory=dict)
    default_result: bool = False
    issuer_key: bytes = field(default=b"\x00" * 32, repr=False)

    def verify(self, identity: bytes) -> bool:
        return self.table.get(identity, self.default_result)

    def issue_nonce(self, identity: bytes) -> bytes:
        """Commitment randomness for ``identity``, stable per verifier."""
        return H(TAG_NONCE, self.issuer_key, lp(identity))


def dkyc_verify(identity: bytes, policy: DkycPolicy) -> bool:
    return policy.verify(identity)


# Sealed boxes: ephemeral X25519 + HKDF-SHA256 + ChaCha20-Poly1305.
# Layout: ephemeral public key (32) || AEAD ciphertext.
_BOX_NONCE = b"\x00" * 12  # each box uses a fresh ephemeral key, so the AEAD key is single use


def _box_key(shared: bytes, eph_pub: bytes, recipient: bytes) -> bytes:
    return HKDF(algorithm=hashes.SHA256(), length=32, salt=None,
                info=b"pnr/sealed-box" + eph_pub + recipient).derive(shared)


def encrypt_to(box_public_key: bytes, message: bytes, entropy: bytes | None = None) -> bytes:
    """Seal ``message`` to a recipient's box key.

    ``entropy`` (32 bytes) pins the ephemeral key, which the simulator uses
    to keep ledger snapshots reproducible; leave it out everywhere else.
    """
    eph = X25519PrivateKey.from_private_bytes(entropy if entropy is not None else os.urandom(32))
    eph_pub = _raw(eph.public_key())
    shared = eph.exchange(X25519PublicKey.from_public_bytes(box_public_key))
    key = _box_key(shared, eph_pub, box_public_key)
    return eph_pub + ChaCha20Poly1305(key).encrypt(_BOX_NONCE, message, None)


def decrypt(secret_key: bytes, ciphertext: bytes) -> bytes:
    priv = _box_private(secret_key)
    recipient = _raw(priv.public_key())
    eph_pub, body = ciphertext[:32], ciphertext[32:]
    shared = priv.exchange(X25519PublicKey.from_public_bytes(eph_pub))
    return ChaCha20Poly1305(_box_key(shared, eph_pub, recipient)).decrypt(_BOX_NONCE, body, None)


class IdentityEscrow:
    """Holds commitment openings, keyed by commitment, until a removal
    authorizes their release."""

    def __init__(self) -> None:
        self._records: dict[bytes, IdentityRecord] = {}

    def deposit(self, record: IdentityRecord) -> None:
        held = self._records.get(record.commitment)
        if held is not None and held != record:
            raise PnRError("escrow holds a different opening for this commitment")
        self._records[record.commitment] = record

    def holds(self, commitment: bytes) -> bool:
        return commitment in self._records

    def opening(self, commitment: bytes) -> IdentityRecord:
        try:
            return self._records[commitment]
        except KeyError:
            raise CommitmentMismatch("no escrowed opening for this commitment") from None
