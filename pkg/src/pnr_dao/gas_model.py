"""Parametric gas and USD cost model.

All arithmetic is exact: gas is an integer, money is a ``Fraction`` of USD,
and rounding only happens when a report renders a number.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Mapping

from .errors import UnknownOp, ZeroN

WEI_PER_NATIVE = 10**18
GWEI = 10**9


class OpKind(enum.Enum):
    AUTH_MINT = "AuthMint"
    PRIV_MINT = "PrivMint"
    BATCH_UPDATE = "BatchUpdate"
    VOTE = "Vote"
    PROPOSAL_CREATE = "ProposalCreate"
    DEAL_CREATE = "DealCreate"
    CONFIRM = "Confirm"
    DISPUTE = "Dispute"
    BRIDGE_LOCK = "BridgeLock"
    BRIDGE_MINT = "BridgeMint"

    @classmethod
    def parse(cls, value) -> "OpKind":
        if isinstance(value, OpKind):
            return value
        try:
            return cls(value)
        except ValueError:
            raise UnknownOp(f"unknown op kind {value!r}") from None


class Layer(enum.Enum):
    L1 = "L1"
    L2 = "L2"


@dataclass(frozen=True)
class BatchCost:
    fixed: int
    marginal: int


@dataclass(frozen=True)
class GasTable:
    base: Mapping[OpKind, int]
    batch: Mapping[OpKind, BatchCost] = field(default_factory=dict)

    def __post_init__(self):
        for op, g in self.base.items():
            if g <= 0:
                raise ValueError(f"{op.value}: gas must be positive")
        for op, bc in self.batch.items():
            if bc.fixed <= 0 or bc.marginal <= 0:
                raise ValueError(f"{op.value}: batch costs must be positive")
            if op not in self.base or bc.marginal >= self.base[op]:
                raise ValueError(f"{op.value}: marginal batch gas must undercut individual gas")

    @classmethod
    def from_dict(cls, doc: dict) -> "GasTable":
        base = {OpKind.parse(k): int(v) for k, v in doc["base"].items()}
        batch = {OpKind.parse(k): BatchCost(int(v["fixed"]), int(v["marginal"]))
                 for k, v in doc.get("batch", {}).items()}
        return cls(base, batch)


@dataclass(frozen=True)
class NetworkParams:
    gas_price: int  # wei per gas
    native_token_usd: Fraction
    layer: Layer

    def __post_init__(self):
        if self.gas_price <= 0 or self.native_token_usd <= 0:
            raise ValueError("network parameters must be positive")

    @classmethod
    def from_dict(cls, doc: dict, layer) -> "NetworkParams":
        return cls(int(doc["gas_price_wei"]), Fraction(str(doc["native_token_usd"])),
                   Layer(layer))


def batch_efficiency(gas_individual: int, n: int, gas_batch: int) -> Fraction:
    """Percent saved by one batch versus ``n`` individual transactions."""
    if n < 1:
        raise ZeroN("n must be at least 1")
    if gas_individual <= 0 or gas_batch <= 0:
        raise ValueError("gas values must be positive")
    individual = gas_individual * n
    return Fraction(individual - gas_batch, individual) * 100


def gas_of(op, n: int, table: GasTable) -> int:
    op = OpKind.parse(op)
    if op not in table.base:
        raise UnknownOp(f"{op.value} missing from gas table")
    if op in table.batch:
        bc = table.batch[op]
        return bc.fixed + bc.marginal * n
    return table.base[op] * n


def usd_of(gas: int, params: NetworkParams) -> Fraction:
    return Fraction(gas * params.gas_price, WEI_PER_NATIVE) * params.native_token_usd


def cost_of(op, n: int, params: NetworkParams, table: GasTable) -> tuple[int, Fraction]:
    """Gas and USD for ``n`` units of ``op``; batchable ops run as one batch."""
    gas = gas_of(op, n, table)
    return gas, usd_of(gas, params)


def org_cost_coefficients(params: NetworkParams, table: GasTable) -> tuple[Fraction, Fraction]:
    """(base, per-member) USD of running an organisation.

    Base is one proposal plus one batch's fixed overhead; each member adds an
    authentication mint and one vote.
    """
    fixed = table.batch[OpKind.BATCH_UPDATE].fixed if OpKind.BATCH_UPDATE in table.batch else 0
    base_gas = table.base[OpKind.PROPOSAL_CREATE] + fixed
    member_gas = table.base[OpKind.AUTH_MINT] + table.base[OpKind.VOTE]
    return usd_of(base_gas, params), usd_of(member_gas, params)


def total_org_cost(members: int, params: NetworkParams, table: GasTable) -> Fraction:
    if members < 0:
        raise ValueError("members must be non-negative")
    base, per_member = org_cost_coefficients(params, table)
    return base + members * per_member


def l1_l2_reduction(op, l1: NetworkParams, l2: NetworkParams, table: GasTable,
                    n: int = 1) -> Fraction:
    _, usd_l1 = cost_of(op, n, l1, table)
    _, usd_l2 = cost_of(op, n, l2, table)
    return (1 - usd_l2 / usd_l1) * 100


def fmt(value: Fraction, places: int = 6) -> str:
    """Fixed-point rendering, rounding half away from zero."""
    scaled = abs(value) * 10**places
    q, r = divmod(scaled.numerator, scaled.denominator)
    if 2 * r >= scaled.denominator:
        q += 1
    sign = "-" if value < 0 and q else ""
    whole, frac = divmod(q, 10**places)
    return f"{sign}{whole}.{frac:0{places}d}" if places else f"{sign}{whole}"


@dataclass(frozen=True)
class GasConfig:
    table: GasTable
    networks: Mapping[Layer, NetworkParams]

    @property
    def l1(self) -> NetworkParams:
        return self.networks[Layer.L1]

    @property
    def l2(self) -> NetworkParams:
        return self.networks[Layer.L2]

    @classmethod
    def from_dict(cls, doc: dict) -> "GasConfig":
        table = GasTable.from_dict(doc["gas_table"])
        nets = {Layer(k): NetworkParams.from_dict(v, k) for k, v in doc["networks"].items()}
        return cls(table, nets)

    @classmethod
    def load(cls, path) -> "GasConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def default_config_dict() -> dict:
    text = resources.files("pnr_dao").joinpath("data/default_config.json").read_text("utf-8")
    return json.loads(text)


def default_config() -> GasConfig:
    return GasConfig.from_dict(default_config_dict())


COST_COLUMNS = ["op", "layer", "gas", "usd", "reduction_pct"]


def cost_rows(ops, n: int, config: GasConfig) -> list[list[str]]:
    rows = []
    for op in ops:
        op = OpKind.parse(op)
        reduction = fmt(l1_l2_reduction(op, config.l1, config.l2, config.table, n), 2)
        for layer in (Layer.L1, Layer.L2):
            gas, usd = cost_of(op, n, config.networks[layer], config.table)
            rows.append([op.value, layer.value, str(gas), fmt(usd), reduction])
    return rows


def cost_report_csv(ops, n: int, config: GasConfig) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COST_COLUMNS)
    w.writerows(cost_rows(ops, n, config))
    return buf.getvalue()
