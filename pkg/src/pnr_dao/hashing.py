"""Project-wide 256-bit hash with domain separation.

Every digest in the protocol goes through :func:`H` with a distinct tag so
that a value produced in one context can never be replayed as a value of
another context (a vote commitment as a leaf, a nullifier as a proposal id).
"""

from __future__ import annotations

import hashlib

DIGEST_SIZE = 32

TAG_SK = b"pnr/sk"
TAG_PK = b"pnr/pk"
TAG_BOX = b"pnr/box"
TAG_COMMIT = b"pnr/commit"
TAG_NONCE = b"pnr/kyc-nonce"
TAG_LEAF = b"pnr/leaf"
TAG_NODE = b"pnr/node"
TAG_PROPOSAL = b"pnr/proposal"
TAG_NULL = b"pnr/nullifier"
TAG_VOTE = b"pnr/vote"
TAG_TRANSFER = b"pnr/transfer"
TAG_ATTEST = b"pnr/attest"
TAG_PAYLOAD = b"pnr/payload"


def H(*parts: bytes) -> bytes:
    """SHA-256 over the plain concatenation of ``parts``.

    Callers are responsible for making the concatenation unambiguous
    (fixed-width fields or length prefixes).
    """
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


def u64(n: int) -> bytes:
    return int(n).to_bytes(8, "big")


def lp(data: bytes) -> bytes:
    """Length-prefixed encoding."""
    return u64(len(data)) + data
