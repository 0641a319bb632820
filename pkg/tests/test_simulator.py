from __future__ import annotations

import json
from collections import Counter

import pytest

from pnr_dao.deals import DealStatus
from pnr_dao.errors import ParseError, SchemaViolation, UnknownAgentReference, UnknownFormat
from pnr_dao.events import EventLog
from pnr_dao.simulator import (
    MetricsReport,
    Simulation,
    load_scenario,
    load_scenario_file,
    report,
    rng_stream,
    run,
)

from helpers import SCENARIOS


def doc(**over):
    base = {"seed": 1, "agents": [{"name": "ann", "identity": "id:ann"}],
            "script": [{"action": "onboard", "agent": "ann"}]}
    base.update(over)
    return json.dumps(base)


# -- loading --------------------------------------------------------------------

def test_minimal_document():
    sc = load_scenario(doc())
    assert len(sc.agents) == 1 and sc.script[0].kind == "onboard" and sc.script[0].at == 0


def test_parse_error_has_location():
    with pytest.raises(ParseError) as exc:
        load_scenario('{"seed": 1,\n "agents": [}')
    assert "line 2" in exc.value.location


def test_unknown_agent():
    with pytest.raises(UnknownAgentReference):
        load_scenario(doc(script=[{"action": "onboard", "agent": "bob"}]))
    with pytest.raises(UnknownAgentReference):
        load_scenario(doc(script=[{"action": "reputation_batch", "members": ["bob"],
                                   "deltas": [1]}]))


def test_out_of_order_times():
    with pytest.raises(SchemaViolation) as exc:
        load_scenario(doc(script=[{"action": "onboard", "agent": "ann", "at": 5},
                                  {"action": "onboard", "agent": "ann", "at": 4}]))
    assert exc.value.field == "script"
    with pytest.raises(SchemaViolation):
        load_scenario(doc(script=[{"action": "advance_clock", "to": 9},
                                  {"action": "onboard", "agent": "ann", "at": 3}]))


@pytest.mark.parametrize("bad,field", [
    ({"seed": -1}, "seed"),
    ({"agents": [{"name": "ann"}]}, "agents/0"),
    ({"script": [{"action": "fly"}]}, "script/0/action"),
    ({"script": [{"action": "vote", "proposal": "p", "agent": "ann"}]}, "script/0"),
    ({"config": {"dao_layer": "L3"}}, "config/dao_layer"),
])
def test_schema_violations_name_the_field(bad, field):
    with pytest.raises(SchemaViolation) as exc:
        load_scenario(doc(**bad))
    assert exc.value.field == field


def test_duplicate_agent_names():
    agents = [{"name": "ann", "identity": "a"}, {"name": "ann", "identity": "b"}]
    with pytest.raises(SchemaViolation) as exc:
        load_scenario(doc(agents=agents))
    assert exc.value.field == "agents/1/name"


def test_config_parsing():
    sc = load_scenario(doc(config={"quorums": [0.5, "2/3"], "deterrence_factor": 2.3}))
    from fractions import Fraction
    assert sc.config.quorums == (Fraction(1, 2), Fraction(2, 3))
    assert sc.config.deterrence_factor == Fraction(23, 10)


def test_shipped_scenarios_validate():
    for path in sorted(SCENARIOS.glob("*.json")):
        load_scenario_file(path)


# -- running --------------------------------------------------------------------

def test_rng_streams_are_independent_and_stable():
    a, b = rng_stream(5, "identity"), rng_stream(5, "identity")
    assert a.random() == b.random()
    assert rng_stream(5, "identity").random() != rng_stream(5, "governance").random()
    assert rng_stream(5, "identity").random() != rng_stream(6, "identity").random()


def test_removal_scenario_end_to_end():
    sim = Simulation(load_scenario_file(SCENARIOS / "removal.json"))
    log, metrics = sim.run()
    dao = sim.dao
    carl = sim.keys["carl"].public_key
    assert not dao.ledger.is_member(carl)
    assert dao.governance.disclosures == [(carl, b"passport:CARL-1001")]
    deal = dao.deals.deal(sim.deal_ids["d1"])
    assert deal.status is DealStatus.RESOLVED
    bea = sim.keys["bea"].public_key
    # bea funded 1100 for d1 and got all of it back, plus 500 bridged over
    assert dao.bridge.execution.balance(bea, "USDC") == 5000 + 500
    assert metrics.value("conservation", "violations") == "0"
    assert [e.fields["error"] for e in log.of_kind("action.rejected")] == ["BannedIdentity"]


def test_runs_are_byte_identical():
    sc = load_scenario_file(SCENARIOS / "removal.json")
    outs = {(run(sc)[0].dumps(), run(sc)[1].to_csv()) for _ in range(2)}
    assert len(outs) == 1


def test_seed_override_changes_keys_only_via_rng():
    sc = load_scenario_file(SCENARIOS / "removal.json")
    a, _ = run(sc)
    b, _ = run(sc.with_seed(sc.seed + 1))
    assert a.dumps() != b.dumps()
    assert [e.kind for e in a] == [e.kind for e in b]


def test_sybil_clones_rejected():
    log, metrics = run(load_scenario_file(SCENARIOS / "sybil.json"))
    errors = Counter(e.fields["error"] for e in log.of_kind("action.rejected"))
    assert errors["DuplicateIdentity"] == 3
    assert metrics.value("sybil", "detections") == "3"


def test_double_vote_cheater_is_stopped():
    agents = [{"name": n, "identity": n} for n in ("a", "b", "c")]
    agents[2]["behavior"] = {"cheater": "double_vote"}
    script = [{"action": "onboard", "agent": n["name"]} for n in agents]
    script += [{"action": "propose_removal", "proposal": "p", "by": "a", "target": "b",
                "quorum": 0.5, "period": 5, "at": 1},
               {"action": "vote", "proposal": "p", "agent": "c", "vote": 1, "at": 2},
               {"action": "finalize", "proposal": "p", "at": 6}]
    log, metrics = run(load_scenario(json.dumps({"seed": 3, "agents": agents, "script": script})))
    assert [e.fields["error"] for e in log.of_kind("action.rejected")] == ["DoubleVote"]
    assert metrics.value("votes", "cast") == "1"
    assert metrics.value("votes", "rejected.DoubleVote") == "1"
    assert log.of_kind("proposal.finalized")[0].fields["tally_total"] == 1


def test_failed_actions_are_logged_not_raised():
    script = [{"action": "confirm", "deal": "nope"},
              {"action": "finalize", "proposal": "nope"},
              {"action": "onboard", "agent": "ann"},
              {"action": "onboard", "agent": "ann"}]
    log, _ = run(load_scenario(doc(script=script)))
    codes = [e.fields["error"] for e in log.of_kind("action.rejected")]
    assert codes == ["ScenarioError", "ScenarioError", "DuplicateIdentity"]


def test_log_sequence_dense_and_clock_monotone():
    log, _ = run(load_scenario_file(SCENARIOS / "removal.json"))
    assert [e.seq for e in log] == list(range(len(log)))
    times = [e.time for e in log]
    assert times == sorted(times)
    for line in log.dumps().splitlines():
        json.loads(line)


def test_clock_advance_events():
    script = [{"action": "advance_clock", "by": 3}, {"action": "advance_clock", "to": 10},
              {"action": "onboard", "agent": "ann", "at": 12}]
    log, _ = run(load_scenario(doc(script=script)))
    moves = [(e.fields["previous"], e.fields["now"]) for e in log.of_kind("clock.advanced")]
    assert moves == [(0, 3), (3, 10), (10, 12)]


def test_bridge_without_relay_then_complete():
    agents = [{"name": "ann", "identity": "a", "settlement_balance": 100}]
    script = [{"action": "bridge_transfer", "transfer": "t", "agent": "ann", "amount": 40,
               "direction": "to_execution", "relay": False},
              {"action": "bridge_complete", "transfer": "t", "at": 2},
              {"action": "bridge_complete", "transfer": "t", "at": 3}]
    sim = Simulation(load_scenario(doc(agents=agents, script=script)))
    log, metrics = sim.run()
    assert [e.fields["error"] for e in log.of_kind("action.rejected")] == ["AlreadyRedeemed"]
    ann = sim.keys["ann"].public_key
    assert sim.dao.bridge.execution.balance(ann, "USDC") == 40
    assert metrics.value("ops", "BridgeLock") == "1"
    assert int(metrics.value("cost", "L1.gas")) > 0 and int(metrics.value("cost", "L2.gas")) > 0


def test_every_mutation_emits_one_event():
    log, _ = run(load_scenario_file(SCENARIOS / "removal.json"))
    kinds = Counter(e.kind for e in log)
    assert kinds["auth.minted"] == 10 and kinds["auth.burned"] == 1
    assert kinds["vote.cast"] == 12 and kinds["proposal.finalized"] == 2
    assert kinds["transfer.locked"] == kinds["transfer.minted"] == 1


# -- metrics ----------------------------------------------------------------------

def test_empty_run_gives_header_only_csv():
    _, metrics = run(load_scenario(json.dumps({"seed": 0, "agents": [], "script": []})))
    assert metrics.to_csv() == "section,key,value\n"
    assert report(metrics, "csv") == "section,key,value\n"


def test_csv_and_table_carry_identical_values():
    _, metrics = run(load_scenario_file(SCENARIOS / "removal.json"))
    csv_text = report(metrics, "csv")
    table = report(metrics, "table")
    assert MetricsReport.from_table(table).rows == MetricsReport.from_csv(csv_text).rows
    assert report(MetricsReport.from_csv(csv_text), "csv") == csv_text
    assert report(MetricsReport.from_table(table), "table") == table


def test_cost_section_matches_gas_model():
    from pnr_dao.gas_model import fmt, usd_of

    sim = Simulation(load_scenario_file(SCENARIOS / "removal.json"))
    _, metrics = sim.run()
    gas = int(metrics.value("cost", "L2.gas"))
    assert metrics.value("cost", "L2.usd") == fmt(usd_of(gas, sim.gas.l2))


def test_unknown_format():
    with pytest.raises(UnknownFormat):
        report(MetricsReport(), "xml")


def test_event_log_rendering():
    log = EventLog()
    log.clock = 4
    log.emit("m", "k", b=b"\x01", kind="x")
    assert log.dumps() == '{"fields":{"b":"01","kind":"x"},"kind":"k","module":"m","seq":0,"t":4}\n'
