import json

import numpy as np
import pytest

from encsim.errors import ConfigError, NoOverlap
from encsim.fixtures import (
    eight_node_config,
    eight_node_profiles,
    exhaustive_schedule,
    periodic_config,
    two_node_config,
)
from encsim.harness import (
    FidelityConfig,
    evaluate_fidelity,
    events_from_trace,
    load_config,
    read_encounter_events_csv,
    read_messages_csv,
    replay_route,
    run_scenario,
    source_components,
    trace_from_events,
    write_encounter_events_csv,
    write_messages_csv,
    write_positions_csv,
)
from encsim.personality import Personality
from encsim.spectrum import PeriodicComponent
from encsim.trace import EncounterRecord, EncounterTrace

from oracles import flooding_reach


def _problems(exc):
    return {field for field, _ in exc.value.problems}


def test_zero_duration_rejected():
    cfg = two_node_config()
    cfg["duration_s"] = 0
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    assert "duration_s" in _problems(exc)


def test_config_errors_are_collected():
    cfg = two_node_config()
    del cfg["seed"]
    cfg["nodes"][0]["personality"]["pairs"]["Z"] = {}
    cfg["bundles"][0]["src"] = "nobody"
    with pytest.raises(ConfigError) as exc:
        load_config(cfg)
    fields = _problems(exc)
    assert "seed" in fields
    assert "nodes[A].personality" in fields
    assert "bundles[0]" in fields


def test_config_from_file_with_personality_path(tmp_path):
    pers = Personality.from_dict({"node": "A", "pairs": two_node_config()["nodes"][0]["personality"]["pairs"]})
    (tmp_path / "A.json").write_text(pers.dumps())
    cfg = two_node_config()
    cfg["nodes"][0]["personality"] = "A.json"
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    loaded = load_config(tmp_path / "c.json", overrides={"seed": 9})
    assert loaded.seed == 9
    assert loaded.personalities["A"] == pers


def test_two_node_delivery():
    result = run_scenario(load_config(two_node_config()))
    delivers = [(e.src, e.dst, e.t) for e in result.messages if e.event == "deliver"]
    # A closes 30 m at 0.5 m/s; range 10 m is reached at the start of tick 40
    assert delivers == [("A", "B", 40)]
    assert result.metrics.delivery_ratio == 1.0
    assert result.metrics.latency_min == 40
    contacts = [(e.t, e.a, e.b) for e in result.encounters if e.kind == "start"]
    assert "B" in flooding_reach(contacts, "A", 0, 3600)


def test_runs_are_byte_identical():
    cfg = load_config(two_node_config(seed=3))
    a, b = run_scenario(cfg), run_scenario(cfg)
    assert write_positions_csv(a.positions) == write_positions_csv(b.positions)
    assert write_encounter_events_csv(a.encounters) == write_encounter_events_csv(b.encounters)
    assert write_messages_csv(a.messages) == write_messages_csv(b.messages)
    assert a.metrics == b.metrics


def test_metrics_match_logs():
    result = run_scenario(load_config(periodic_config(1, duration=7200)))
    m = result.metrics
    assert m.encounter_total == sum(e.kind == "start" for e in result.encounters)
    assert m.delivered == sum(e.event == "deliver" for e in result.messages)
    assert m.delivery_ratio is None


def test_route_replays_simulation_exactly():
    cfg = two_node_config(duration=400)
    cfg["nodes"].append({"id": "C", "profile": {"lib": 0.9, "gym": 0.1}, "position": [60, 50]})
    cfg = load_config(cfg)
    result = run_scenario(cfg)
    events = read_encounter_events_csv(write_encounter_events_csv(result.encounters))
    messages, metrics = replay_route(cfg, events)
    assert messages == result.messages
    assert metrics == result.metrics


def test_eight_node_routing_reaches_qualifying_set():
    cfg = load_config(eight_node_config())
    trace = exhaustive_schedule(sorted(eight_node_profiles()))
    messages, metrics = replay_route(cfg, events_from_trace(trace))
    delivered = {e.dst for e in messages if e.event == "deliver"}
    assert delivered == {"n4", "n5", "n6", "n7"}
    assert metrics.delivery_ratio == 1.0


def test_log_round_trips():
    result = run_scenario(load_config(two_node_config()))
    assert read_messages_csv(write_messages_csv(result.messages)) == result.messages
    assert trace_from_events(result.encounters, 200, ["A", "B"]).records == result.trace.records


# --- fidelity --------------------------------------------------------------


@pytest.fixture(scope="module")
def ten_minute_run():
    cfg = load_config(periodic_config(0, periods=(600.0,)))
    return cfg, run_scenario(cfg)


def test_single_component_is_recovered(ten_minute_run):
    cfg, result = ten_minute_run
    report = evaluate_fidelity(result.trace, source_components(cfg.personalities))
    assert report.match_ratio == 1.0
    assert report.pairs[0].recovered[0][0] == 144


def test_permuted_times_lose_the_period(ten_minute_run):
    cfg, result = ten_minute_run
    rng = np.random.default_rng(0)
    horizon = result.trace.horizon
    shuffled = []
    for r in result.trace.records:
        length = r.end - r.start
        start = int(rng.integers(0, horizon - length))
        shuffled.append(EncounterRecord(r.a, r.b, start, start + length))
    permuted = EncounterTrace.from_records(shuffled, horizon=horizon)
    report = evaluate_fidelity(permuted, source_components(cfg.personalities))
    assert report.match_ratio == 0.0


def test_no_components_reported():
    trace = EncounterTrace.from_records([EncounterRecord("A", "B", 0, 60)], horizon=600)
    report = evaluate_fidelity(trace, {("A", "B"): []})
    assert report.match_ratio is None
    assert report.to_dict()["match_ratio"] == "no components"


def test_no_overlap():
    trace = EncounterTrace.from_records([EncounterRecord("A", "B", 0, 60)], horizon=600)
    with pytest.raises(NoOverlap):
        evaluate_fidelity(trace, {("C", "D"): [PeriodicComponent(600, 1.0)]})


def test_missing_pair_counts_as_unmatched():
    trace = EncounterTrace.from_records([EncounterRecord("A", "B", 60 * i, 60 * i + 30) for i in range(0, 100, 10)], horizon=6000)
    source = {("A", "B"): [PeriodicComponent(600, 1.0)], ("C", "D"): [PeriodicComponent(600, 1.0)]}
    report = evaluate_fidelity(trace, source, FidelityConfig(bin_width=60))
    assert [p.matched for p in report.pairs] == [True, False]
    assert report.match_ratio == 0.5
