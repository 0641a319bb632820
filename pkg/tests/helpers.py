"""Shared builders for the test suite."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from pnr_dao.identity import DkycPolicy, KeyPair, keygen
from pnr_dao.system import Dao

ROOT = Path(__file__).resolve().parent.parent
SCENARIOS = ROOT / "scenarios"
BRIDGE_SEED = bytes(range(32))


def seed_of(i: int) -> bytes:
    return i.to_bytes(32, "big")


@dataclass
class Org:
    """A DAO with named, onboarded members."""

    dao: Dao
    keys: dict[str, KeyPair] = field(default_factory=dict)
    identities: dict[str, bytes] = field(default_factory=dict)

    def pk(self, name: str) -> bytes:
        return self.keys[name].public_key


def make_org(names, *, unverified=(), now: int = 0, **dao_kw) -> Org:
    identities = {n: f"id:{n}".encode() for n in names}
    policy = DkycPolicy({identities[n]: n not in unverified for n in names},
                        default_result=True, issuer_key=b"\x07" * 32)
    counter = iter(range(1, 10**6))
    dao = Dao(policy, BRIDGE_SEED, entropy=lambda: next(counter).to_bytes(32, "big"), **dao_kw)
    org = Org(dao, identities=identities)
    for i, n in enumerate(names):
        org.keys[n] = keygen(seed_of(i + 1))
        if n not in unverified:
            dao.onboard(identities[n], org.keys[n], now)
    return org


# Acceptance verdicts, printed in the terminal summary by conftest.
ACCEPTANCE: list[str] = []


def verdict(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line
