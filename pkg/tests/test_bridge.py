from __future__ import annotations

import dataclasses

import pytest

from pnr_dao.bridge import (
    Bridge,
    BridgeAuthority,
    ChainId,
    ChainState,
    complete_transfer,
    initiate_transfer,
    transfer_id_for,
    verify_proof,
)
from pnr_dao.errors import (
    AlreadyRedeemed,
    DuplicateTransfer,
    InsufficientFunds,
    InvalidProof,
    ZeroAmount,
)
from pnr_dao.hashing import H

AUTH = BridgeAuthority(b"\x01" * 32)
ALICE, BOB = b"a" * 32, b"b" * 32


def funded(amount=1000) -> Bridge:
    br = Bridge(AUTH)
    br.settlement.credit(ALICE, "USDC", amount)
    return br


def test_lock_moves_balance_into_registry():
    br = funded()
    tid, proof = br.lock(ChainId.SETTLEMENT, ALICE, "USDC", 100, BOB, 1)
    assert br.settlement.balance(ALICE, "USDC") == 900
    assert br.settlement.locked[tid] == ("USDC", 100)
    assert verify_proof(AUTH.public_key, proof)
    assert br.in_flight("USDC") == 100 and br.supply("USDC") == 1000


def test_transfer_id_preimage():
    assert transfer_id_for("USDC", 100, 7, ALICE) == H(
        b"pnr/transfer", (4).to_bytes(8, "big") + b"USDC", (100).to_bytes(8, "big"),
        (7).to_bytes(8, "big"), ALICE)
    assert transfer_id_for("USDC", 100, 7, ALICE) != transfer_id_for("USDC", 100, 8, ALICE)
    assert transfer_id_for("USDC", 100, 7, ALICE) != transfer_id_for("USDC", 100, 7, BOB)


def test_lock_errors():
    br = funded(50)
    with pytest.raises(ZeroAmount):
        br.lock(ChainId.SETTLEMENT, ALICE, "USDC", 0, BOB, 1)
    with pytest.raises(InsufficientFunds):
        br.lock(ChainId.SETTLEMENT, ALICE, "USDC", 51, BOB, 1)
    br.lock(ChainId.SETTLEMENT, ALICE, "USDC", 10, BOB, 1)
    with pytest.raises(DuplicateTransfer):
        br.lock(ChainId.SETTLEMENT, ALICE, "USDC", 10, BOB, 1)
    assert br.settlement.balance(ALICE, "USDC") == 40


def test_mint_once():
    br = funded()
    tid, proof = br.lock(ChainId.SETTLEMENT, ALICE, "USDC", 100, BOB, 1)
    assert br.redeem(tid, proof) == 100
    assert br.execution.balance(BOB, "USDC") == 100
    with pytest.raises(AlreadyRedeemed):
        br.redeem(tid, proof)
    assert br.execution.balance(BOB, "USDC") == 100
    assert br.unbacked_mints() == [] and br.supply("USDC") == 1000


def test_return_path_is_symmetric():
    br = funded()
    tid, proof = br.lock(ChainId.SETTLEMENT, ALICE, "USDC", 300, ALICE, 1)
    br.redeem(tid, proof)
    back, proof2 = br.lock(ChainId.EXECUTION, ALICE, "USDC", 120, ALICE, 2)
    br.redeem(back, proof2)
    assert br.settlement.balance(ALICE, "USDC") == 820
    assert br.execution.balance(ALICE, "USDC") == 180
    assert br.supply("USDC") == 1000


def test_proof_cannot_mint_on_its_source_chain():
    src = ChainState(ChainId.SETTLEMENT)
    src.credit(ALICE, "USDC", 10)
    tid, proof = initiate_transfer(src, AUTH, ALICE, "USDC", 10, BOB, 0)
    with pytest.raises(InvalidProof):
        complete_transfer(src, AUTH.public_key, tid, proof)


def test_foreign_authority_rejected():
    src, dst = ChainState(ChainId.SETTLEMENT), ChainState(ChainId.EXECUTION)
    src.credit(ALICE, "USDC", 10)
    rogue = BridgeAuthority(b"\x02" * 32)
    tid, proof = initiate_transfer(src, rogue, ALICE, "USDC", 10, BOB, 0)
    with pytest.raises(InvalidProof):
        complete_transfer(dst, AUTH.public_key, tid, proof)


def mutations(proof):
    yield "transfer_id", bytes([proof.transfer_id[0] ^ 1]) + proof.transfer_id[1:]
    yield "source", proof.source.other
    yield "recipient", ALICE
    yield "asset", "USDT"
    yield "amount", proof.amount + 1
    yield "attestation", bytes([proof.attestation[0] ^ 1]) + proof.attestation[1:]


def test_every_single_field_mutation_is_detected():
    br = funded()
    tid, proof = br.lock(ChainId.SETTLEMENT, ALICE, "USDC", 100, BOB, 1)
    for name, value in mutations(proof):
        bad = dataclasses.replace(proof, **{name: value})
        assert not verify_proof(AUTH.public_key, bad), name
        with pytest.raises(InvalidProof):
            complete_transfer(br.execution, AUTH.public_key, tid, bad)
    assert br.execution.minted == {}
