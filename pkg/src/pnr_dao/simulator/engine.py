"""Deterministic scenario execution on a logical clock.

Every random draw comes from a ``random.Random`` stream named after the
module that consumes it and seeded from the scenario seed, so a run is a
pure function of the scenario. Failed actions are logged, never raised.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from ..bridge import ChainId, TransferProof
from ..deals import DealStatus, Outcome
from ..errors import DuplicateIdentity, PnRError, ScenarioError
from ..events import EventLog
from ..gas_model import GasConfig, Layer, OpKind, gas_of
from ..governance import DecisionRule, Removal
from ..hashing import H
from ..identity import DkycPolicy, KeyPair, keygen
from ..ledger import TokenType
from ..system import Dao
from .metrics import MetricsCollector, MetricsReport, build_report
from .scenario import Action, AgentSpec, Scenario

CHAIN_LAYER = {ChainId.SETTLEMENT: Layer.L1, ChainId.EXECUTION: Layer.L2}
TERMINAL_DEALS = (DealStatus.CONFIRMED, DealStatus.RESOLVED)


def rng_stream(seed: int, name: str) -> random.Random:
    """Independent generator for one consumer, derived from the run seed."""
    digest = H(b"pnr/sim-rng", seed.to_bytes(8, "big"), name.encode())
    return random.Random(int.from_bytes(digest, "big"))


@dataclass
class PendingTransfer:
    transfer_id: bytes
    proof: TransferProof
    target: ChainId


@dataclass
class Simulation:
    scenario: Scenario
    log: EventLog = field(default_factory=EventLog)

    def __post_init__(self) -> None:
        sc, cfg = self.scenario, self.scenario.config
        self.rng = {name: rng_stream(sc.seed, name)
                    for name in ("identity", "kyc", "bridge", "ledger", "governance")}
        self.gas: GasConfig = cfg.gas_config()
        self.dao_layer = Layer(cfg.dao_layer)
        self.asset = cfg.asset

        issuer = cfg.kyc_issuer_key or self.rng["kyc"].randbytes(32)
        policy = DkycPolicy({a.identity: a.dkyc_verified for a in sc.agents},
                            default_result=False, issuer_key=issuer)
        bridge_seed = cfg.bridge_authority_seed or self.rng["bridge"].randbytes(32)
        ledger_rng = self.rng["ledger"]
        self.dao = Dao(policy, bridge_seed, allowed_quorums=cfg.quorums,
                       mediation_window=cfg.mediation_window,
                       dispute_quorum=cfg.dispute_quorum, dispute_period=cfg.dispute_period,
                       entropy=lambda: ledger_rng.randbytes(32), log=self.log)

        # Agent keys are drawn in declaration order; sybil clones are drawn
        # lazily, when they first try to onboard.
        self.keys: dict[str, KeyPair] = {a.name: keygen(self.rng["identity"].randbytes(32))
                                         for a in sc.agents}
        self.names = {k.public_key: n for n, k in self.keys.items()}
        self.deal_ids: dict[str, int] = {}
        self.dispute_ids: dict[str, int] = {}
        self.proposals: dict[str, bytes] = {}
        self.openings: dict[bytes, list[tuple[int, bytes]]] = {}
        self.transfers: dict[str, PendingTransfer] = {}
        self.metrics = MetricsCollector()
        self.clock = 0
        self._baseline: dict[str, int] = {}

    # -- plumbing ----------------------------------------------------------

    def _set_clock(self, t: int, reason: str) -> None:
        if t != self.clock:
            self.log.clock = t
            self.log.emit("sim", "clock.advanced", previous=self.clock, now=t, reason=reason)
            self.clock = t

    def _charge(self, op: OpKind, n: int = 1, layer: Layer | None = None) -> None:
        layer = layer or self.dao_layer
        g = gas_of(op, n, self.gas.table)
        self.metrics.gas_by_layer[layer] += g
        self.metrics.ops[op] += 1
        if op is OpKind.BATCH_UPDATE:
            self.metrics.batch_elements += n
            self.metrics.batch_gas += g

    def _assets(self) -> set[str]:
        assets = {self.asset}
        assets.update(d.payment_type for d in self.dao.deals.deals.values())
        for chain in self.dao.bridge.chains.values():
            assets.update(a for _, a in chain.balances)
        return assets

    def _check_conservation(self) -> None:
        self.metrics.conservation_checks += 1
        for asset in sorted(self._assets()):
            supply = self.dao.supply(asset)
            expected = self._baseline.get(asset, 0)
            if supply != expected:
                self.metrics.conservation_violations += 1
                self.log.emit("sim", "conservation.violated", asset=asset,
                              expected=expected, actual=supply)

    def _pk(self, name: str) -> bytes:
        return self.keys[name].public_key

    def _deal(self, label: str) -> int:
        try:
            return self.deal_ids[label]
        except KeyError:
            raise ScenarioError(f"unknown deal label {label!r}") from None

    def _dispute(self, label: str) -> int:
        try:
            return self.dispute_ids[label]
        except KeyError:
            raise ScenarioError(f"deal {label!r} has no dispute") from None

    def _proposal(self, label: str) -> bytes:
        try:
            return self.proposals[label]
        except KeyError:
            raise ScenarioError(f"unknown proposal label {label!r}") from None

    def _label_proposal(self, label: str | None, pid: bytes | None) -> None:
        if label is not None and pid is not None:
            if label in self.proposals:
                raise ScenarioError(f"proposal label {label!r} already bound")
            self.proposals[label] = pid

    def _deviate(self, agent: str, strategy: str, action: Action) -> None:
        self.metrics.deviations += 1
        self.log.emit("sim", "agent.deviated", agent=agent, strategy=strategy,
                      action=action.kind, index=action.index)

    def _reject(self, action: Action, exc: PnRError, agent: str | None = None) -> None:
        self.metrics.actions_rejected[exc.code] += 1
        if action.kind == "vote":
            self.metrics.votes_rejected[exc.code] += 1
        if isinstance(exc, DuplicateIdentity) and action.kind == "onboard":
            self.metrics.sybil_detections += 1
        fields = {"index": action.index, "action": action.kind, "error": exc.code,
                  "message": str(exc)}
        if agent is not None:
            fields["agent"] = agent
        self.log.emit("sim", "action.rejected", **fields)

    def _attempt(self, action: Action, fn: Callable[[], object], agent: str | None = None) -> bool:
        try:
            fn()
        except PnRError as exc:
            self._reject(action, exc, agent)
            return False
        self.metrics.actions_ok += 1
        return True

    # -- run ---------------------------------------------------------------

    def genesis(self) -> None:
        for a in self.scenario.agents:
            pk = self._pk(a.name)
            for chain, amount in ((self.dao.bridge.execution, a.balance),
                                  (self.dao.bridge.settlement, a.settlement_balance)):
                if amount:
                    chain.credit(pk, self.asset, amount)
                    self.log.emit("sim", "genesis.credit", agent=a.name, owner=pk,
                                  chain=chain.chain_id, asset=self.asset, amount=amount)
        self._baseline = {asset: self.dao.supply(asset) for asset in self._assets()}
        self.metrics.members_now(self.clock, self.dao.ledger.member_count)

    def step(self, action: Action) -> None:
        self._set_clock(action.at, "scheduled")
        handler = getattr(self, f"_do_{action.kind}")
        handler(action)
        self._check_conservation()
        self.metrics.members_now(self.clock, self.dao.ledger.member_count)

    def run(self) -> tuple[EventLog, MetricsReport]:
        self.genesis()
        for action in self.scenario.script:
            self.step(action)
        return self.log, self.finish()

    def finish(self) -> MetricsReport:
        deals = self.dao.deals.deals
        self.metrics.residual_escrow = sum(d.escrow_balance for d in deals.values()
                                           if d.status in TERMINAL_DEALS)
        rep = self.dao.reputation
        cfg = self.scenario.config
        scores, deterrence = {}, {}
        for name, kp in self.keys.items():
            if kp.public_key in rep and name in self._agent_names():
                scores[name] = rep.score(kp.public_key)
                deterrence[name] = rep.deterrence_margin(
                    kp.public_key, cfg.reputation_value_per_point, cfg.cheating_gain,
                    cfg.deterrence_factor)
        statuses = {label: deals[i].status.value for label, i in self.deal_ids.items()}
        return build_report(self.metrics, gas=self.gas, deal_statuses=statuses,
                            reputation=scores, deterrence=deterrence)

    def _agent_names(self) -> set[str]:
        return {a.name for a in self.scenario.agents}

    # -- handlers ------------------------------------------------------------

    def _onboard_one(self, action: Action, name: str, spec: AgentSpec) -> bool:
        self.metrics.onboard_attempts += 1

        def go():
            self.dao.onboard(spec.identity, self.keys[name], self.clock)
            self._charge(OpKind.AUTH_MINT)
        return self._attempt(action, go, agent=name)

    def _do_onboard(self, action: Action) -> None:
        name = action.params["agent"]
        spec = self.scenario.agent(name)
        self._onboard_one(action, name, spec)
        if spec.behavior.kind == "sybil":
            for i in range(1, spec.behavior.clones + 1):
                clone = f"{name}#{i}"
                if clone not in self.keys:
                    self.keys[clone] = keygen(self.rng["identity"].randbytes(32))
                    self.names[self.keys[clone].public_key] = clone
                self._deviate(clone, "sybil", action)
                self._onboard_one(action, clone, spec)

    def _do_create_deal(self, action: Action) -> None:
        p = action.params

        def go():
            if p["deal"] in self.deal_ids:
                raise ScenarioError(f"deal label {p['deal']!r} already bound")
            deal = self.dao.deals.create_private_deal(
                self._pk(p["buyer"]), self._pk(p["provider"]), p["token_type"], p["amount"],
                p["deadline"], p.get("payment_type", self.asset), self.clock)
            self.deal_ids[p["deal"]] = deal.deal_id
            self._charge(OpKind.DEAL_CREATE)
        self._attempt(action, go)

    def _party(self, action: Action, role: str) -> str:
        if "by" in action.params:
            return action.params["by"]
        deal = self.dao.deals.deal(self._deal(action.params["deal"]))
        return self.names[getattr(deal, role)]

    def _do_fund(self, action: Action) -> None:
        def go():
            caller = self._party(action, "buyer")
            self.dao.deals.fund(self._deal(action.params["deal"]), self._pk(caller), self.clock)
        self._attempt(action, go)

    def _do_complete(self, action: Action) -> None:
        def go():
            caller = self._party(action, "provider")
            spec = self.scenario.agent(caller) if caller in self._agent_names() else None
            if spec and spec.behavior.kind == "cheater" and spec.behavior.strategy == "no_complete":
                self._deviate(caller, "no_complete", action)
                return
            self.dao.deals.mark_complete(self._deal(action.params["deal"]), self._pk(caller),
                                         self.clock)
        self._attempt(action, go)

    def _do_confirm(self, action: Action) -> None:
        def go():
            caller = self._party(action, "buyer")
            self.dao.deals.confirm(self._deal(action.params["deal"]), self._pk(caller),
                                   self.clock)
            self._charge(OpKind.CONFIRM)
            self._charge(OpKind.BATCH_UPDATE, 2)
        self._attempt(action, go)

    def _do_dispute(self, action: Action) -> None:
        p = action.params

        def go():
            d = self.dao.deals.initiate_dispute(
                self._deal(p["deal"]), self._pk(p["by"]), p.get("evidence", "").encode(),
                self.clock, p.get("outcome"))
            self.dispute_ids[p["deal"]] = d.dispute_id
            self._charge(OpKind.DISPUTE)
            self._charge(OpKind.BATCH_UPDATE, len(d.penalties) or 1)
        self._attempt(action, go)

    def _do_mediate(self, action: Action) -> None:
        self._attempt(action, lambda: self.dao.deals.advance_to_mediation(
            self._dispute(action.params["deal"]), self.clock))

    def _do_settle(self, action: Action) -> None:
        self._attempt(action, lambda: self.dao.deals.record_settlement(
            self._dispute(action.params["deal"]), action.params["outcome"], self.clock))

    def _do_mediation_timeout(self, action: Action) -> None:
        def go():
            d = self.dao.deals.mediation_timeout(self._dispute(action.params["deal"]),
                                                 self.clock)
            self._label_proposal(action.params.get("proposal"), d.proposal_id)
            self._charge(OpKind.PROPOSAL_CREATE)
        self._attempt(action, go)

    def _do_enforce(self, action: Action) -> None:
        def go():
            d = self.dao.deals.enforce(self._dispute(action.params["deal"]), self.clock)
            if d.outcome is Outcome.REVOKE_ACCESS and d.revocation_proposal is not None:
                self._label_proposal(action.params.get("proposal"), d.revocation_proposal)
                self._charge(OpKind.PROPOSAL_CREATE)
        self._attempt(action, go)

    def _do_propose_removal(self, action: Action) -> None:
        p = action.params

        def go():
            if p["proposal"] in self.proposals:
                raise ScenarioError(f"proposal label {p['proposal']!r} already bound")
            prop = self.dao.governance.initiate_proposal(
                Removal(self._pk(p["target"])), p["quorum"], p["period"], self.clock,
                initiator=self._pk(p["by"]), rule=DecisionRule(p.get("rule", "quorum_majority")))
            self.proposals[p["proposal"]] = prop.id
            self._charge(OpKind.PROPOSAL_CREATE)
        self._attempt(action, go)

    def _cast(self, name: str, pid: bytes, vote: int) -> None:
        r = self.rng["governance"].randbytes(32)
        self.dao.vote(self.keys[name], pid, vote, r, self.clock)
        self.openings.setdefault(pid, []).append((vote, r))
        self.metrics.votes_cast += 1
        self._charge(OpKind.VOTE)

    def _do_vote(self, action: Action) -> None:
        name, vote = action.params["agent"], action.params["vote"]
        ok = self._attempt(action, lambda: self._cast(name, self._proposal(
            action.params["proposal"]), vote), agent=name)
        spec = self.scenario.agent(name)
        if ok and spec.behavior.kind == "cheater" and spec.behavior.strategy == "double_vote":
            self._deviate(name, "double_vote", action)
            self._attempt(action, lambda: self._cast(name, self._proposal(
                action.params["proposal"]), vote), agent=name)

    def _do_finalize(self, action: Action) -> None:
        def go():
            pid = self._proposal(action.params["proposal"])
            self.dao.governance.finalize(pid, self.openings.get(pid, []), self.clock)
        self._attempt(action, go)

    def _do_execute_removal(self, action: Action) -> None:
        self._attempt(action, lambda: self.dao.governance.execute_removal(
            self._proposal(action.params["proposal"]), self.clock))

    def _do_disclose(self, action: Action) -> None:
        def go():
            self.dao.governance.force_disclose(self._pk(action.params["target"]), self.clock)
            self.metrics.disclosures += 1
        self._attempt(action, go)

    def _do_restrict(self, action: Action) -> None:
        self._attempt(action, lambda: self.dao.ledger.restrict_type(
            self._pk(action.params["agent"]), TokenType.parse(action.params["token_type"])))

    def _do_lift(self, action: Action) -> None:
        self._attempt(action, lambda: self.dao.ledger.lift_restriction(
            self._pk(action.params["agent"]), TokenType.parse(action.params["token_type"])))

    def _do_reputation_batch(self, action: Action) -> None:
        members = [self._pk(m) for m in action.params["members"]]
        deltas = action.params["deltas"]

        def go():
            self.dao.reputation.batch_update(members, deltas, reason="scripted", now=self.clock)
            if members:
                self._charge(OpKind.BATCH_UPDATE, len(members))
        self._attempt(action, go)

    def _do_bridge_transfer(self, action: Action) -> None:
        p = action.params
        source = ChainId.SETTLEMENT if p["direction"] == "to_execution" else ChainId.EXECUTION

        def go():
            if p["transfer"] in self.transfers:
                raise ScenarioError(f"transfer label {p['transfer']!r} already bound")
            recipient = self._pk(p.get("recipient", p["agent"]))
            tid, proof = self.dao.bridge.lock(source, self._pk(p["agent"]),
                                              p.get("asset", self.asset), p["amount"],
                                              recipient, self.clock)
            self._charge(OpKind.BRIDGE_LOCK, layer=CHAIN_LAYER[source])
            self.transfers[p["transfer"]] = PendingTransfer(tid, proof, source.other)
        if self._attempt(action, go) and p.get("relay", True):
            self._redeem(action, p["transfer"])

    def _redeem(self, action: Action, label: str) -> None:
        def go():
            try:
                t = self.transfers[label]
            except KeyError:
                raise ScenarioError(f"unknown transfer label {label!r}") from None
            self.dao.bridge.redeem(t.transfer_id, t.proof)
            self._charge(OpKind.BRIDGE_MINT, layer=CHAIN_LAYER[t.target])
        self._attempt(action, go)

    def _do_bridge_complete(self, action: Action) -> None:
        self._redeem(action, action.params["transfer"])

    def _do_advance_clock(self, action: Action) -> None:
        p = action.params
        target = p["to"] if "to" in p else self.clock + p["by"]
        self._set_clock(target, "advance_clock")
        self.metrics.actions_ok += 1


def run(scenario: Scenario) -> tuple[EventLog, MetricsReport]:
    """Execute ``scenario`` and return its event log and metrics."""
    return Simulation(scenario).run()
