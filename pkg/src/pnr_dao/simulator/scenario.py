"""Scenario documents: JSON validated against ``data/scenario.schema.json``."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Any, Optional

import jsonschema

from ..errors import ParseError, SchemaViolation, UnknownAgentReference
from ..gas_model import GasConfig, default_config_dict

AGENT_FIELDS = ("agent", "buyer", "provider", "by", "target", "recipient")


@lru_cache(maxsize=1)
def schema() -> dict:
    text = resources.files("pnr_dao").joinpath("data/scenario.schema.json").read_text("utf-8")
    return json.loads(text)


def _ratio(value) -> Fraction:
    return Fraction(str(value))


@dataclass(frozen=True)
class Behavior:
    kind: str = "honest"  # honest | cheater | sybil
    strategy: Optional[str] = None
    clones: int = 0

    @classmethod
    def parse(cls, doc) -> "Behavior":
        if doc in (None, "honest"):
            return cls()
        if "cheater" in doc:
            return cls("cheater", strategy=doc["cheater"])
        return cls("sybil", clones=doc["sybil"])


@dataclass(frozen=True)
class AgentSpec:
    name: str
    identity: bytes
    dkyc_verified: bool = True
    balance: int = 0
    settlement_balance: int = 0
    behavior: Behavior = field(default_factory=Behavior)


@dataclass(frozen=True)
class Action:
    index: int
    kind: str
    at: int  # effective logical time the action runs at
    params: dict


@dataclass(frozen=True)
class ScenarioConfig:
    quorums: tuple[Fraction, ...] = (Fraction(1, 2), Fraction(13, 20))
    mediation_window: int = 10
    dispute_quorum: Fraction = Fraction(1, 2)
    dispute_period: int = 20
    deterrence_factor: Fraction = Fraction(23, 10)
    reputation_value_per_point: int = 100
    cheating_gain: int = 300
    asset: str = "USDC"
    bridge_authority_seed: Optional[bytes] = None
    kyc_issuer_key: Optional[bytes] = None
    dao_layer: str = "L2"
    gas: dict = field(default_factory=default_config_dict)

    @classmethod
    def parse(cls, doc: dict) -> "ScenarioConfig":
        kw: dict[str, Any] = {}
        if "quorums" in doc:
            kw["quorums"] = tuple(_ratio(q) for q in doc["quorums"])
        for key in ("dispute_quorum", "deterrence_factor"):
            if key in doc:
                kw[key] = _ratio(doc[key])
        for key in ("mediation_window", "dispute_period", "reputation_value_per_point",
                    "cheating_gain", "asset", "dao_layer", "gas"):
            if key in doc:
                kw[key] = doc[key]
        for key in ("bridge_authority_seed", "kyc_issuer_key"):
            if key in doc:
                kw[key] = bytes.fromhex(doc[key])
        return cls(**kw)

    def gas_config(self) -> GasConfig:
        return GasConfig.from_dict(self.gas)


@dataclass(frozen=True)
class Scenario:
    seed: int
    agents: tuple[AgentSpec, ...]
    script: tuple[Action, ...]
    config: ScenarioConfig
    name: str = ""

    def agent(self, name: str) -> AgentSpec:
        for a in self.agents:
            if a.name == name:
                return a
        raise UnknownAgentReference(name)

    def with_seed(self, seed: int) -> "Scenario":
        return Scenario(seed, self.agents, self.script, self.config, self.name)


def _path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "$"


def load_scenario(document: str | bytes) -> Scenario:
    """Parse and fully validate a scenario document."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {exc.lineno} column {exc.colno}", exc.msg) from None

    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(e.absolute_path), e.message))
    if errors:
        err = min(errors, key=lambda e: -len(e.absolute_path))  # deepest pointer is most useful
        raise SchemaViolation(_path(err), err.message)

    agents = []
    seen = set()
    for i, a in enumerate(doc["agents"]):
        if a["name"] in seen:
            raise SchemaViolation(f"agents/{i}/name", f"duplicate agent name {a['name']!r}")
        seen.add(a["name"])
        agents.append(AgentSpec(a["name"], a["identity"].encode("utf-8"),
                                a.get("dkyc_verified", True), a.get("balance", 0),
                                a.get("settlement_balance", 0), Behavior.parse(a.get("behavior"))))

    script = []
    clock = 0
    for i, raw in enumerate(doc["script"]):
        for key in AGENT_FIELDS:
            if key == "by" and raw["action"] == "advance_clock":
                continue  # a duration there, not an agent
            if key in raw and raw[key] not in seen:
                raise UnknownAgentReference(f"script/{i}/{key}: {raw[key]!r}")
        for name in raw.get("members", []):
            if name not in seen:
                raise UnknownAgentReference(f"script/{i}/members: {name!r}")
        at = raw.get("at", clock)
        if at < clock:
            raise SchemaViolation("script", f"action {i} at t={at} precedes clock t={clock}")
        clock = at
        params = {k: v for k, v in raw.items() if k not in ("action", "at")}
        script.append(Action(i, raw["action"], at, params))
        if raw["action"] == "advance_clock":
            target = params["to"] if "to" in params else clock + params["by"]
            if target < clock:
                raise SchemaViolation("script", f"action {i} moves the clock backwards")
            clock = target

    return Scenario(doc["seed"], tuple(agents), tuple(script),
                    ScenarioConfig.parse(doc.get("config", {})), doc.get("name", ""))


def load_scenario_file(path) -> Scenario:
    with open(path, "rb") as fh:
        return load_scenario(fh.read())
